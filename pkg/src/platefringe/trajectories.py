"""Relative-motion profiles x(t) and their oscillatory time transforms.

The two interferometer branches follow X_1 = -X_2 = x(t) jhat. All transforms
use the kernel e^{-i k t}:

    charge mode  C(k, k_j) = int xdot(t) cos[k_j x(t)] e^{-ikt} dt
    dipole mode  S(k, k_j) = int sin[k_j x(t)] e^{-ikt} dt

For closed trajectories the two are tied by k_j C = i k S. Every profile is
symmetric about its midpoint, which the batch evaluator exploits (C is odd,
S even about the center, halving the grid and keeping arithmetic real).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureConfig, adaptive_interval

GAUSS_SUPPORT_SIGMAS = 8.0


@dataclass(frozen=True)
class Adiabatic:
    """Gaussian excursion x(t) = R exp(-t^2/T^2)."""
    R: float
    T: float

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        if self.T <= 0:
            raise ValueError("T must be positive")


@dataclass(frozen=True)
class PiecewiseTrapezoid:
    """Closed excursion with trapezoidal velocity: ramp +v over tau, coast,
    ramp to -v over 2 tau at the midpoint, coast, ramp back to rest."""
    v: float
    T: float
    tau: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("v must be nonnegative")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not (0 < self.tau < self.T / 4):
            raise ValueError("tau must satisfy 0 < tau < T/4")


@dataclass(frozen=True)
class PulseTrain:
    """N repeated Gaussian excursions spaced T_sep apart, optional carrier."""
    R: float
    T_pulse: float
    T_sep: float
    N: int = 1
    Omega: float = 0.0

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        if self.T_pulse <= 0 or self.T_sep <= 0:
            raise ValueError("T_pulse and T_sep must be positive")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.Omega < 0:
            raise ValueError("Omega must be nonnegative")


TrajectorySpec = Adiabatic | PiecewiseTrapezoid | PulseTrain


@dataclass(frozen=True)
class SourceSpectrum:
    value: complex
    k: float
    k_j: float
    mode: str
    est_error: float


def support(spec: TrajectorySpec) -> tuple[float, float]:
    if isinstance(spec, Adiabatic):
        w = GAUSS_SUPPORT_SIGMAS * spec.T
        return (-w, w)
    if isinstance(spec, PiecewiseTrapezoid):
        return (0.0, spec.T)
    w = GAUSS_SUPPORT_SIGMAS * spec.T_pulse
    return (-w, (spec.N - 1) * spec.T_sep + w)


def breakpoints(spec: TrajectorySpec) -> tuple[float, ...]:
    """Interior points where the velocity slope jumps."""
    if isinstance(spec, PiecewiseTrapezoid):
        T, tau = spec.T, spec.tau
        return (tau, T / 2 - tau, T / 2 + tau, T - tau)
    return ()


def char_time(spec: TrajectorySpec) -> float:
    if isinstance(spec, Adiabatic):
        return spec.T
    if isinstance(spec, PiecewiseTrapezoid):
        return spec.T
    return spec.T_pulse


def char_speed(spec: TrajectorySpec) -> float:
    if isinstance(spec, Adiabatic):
        return spec.R / spec.T
    if isinstance(spec, PiecewiseTrapezoid):
        return spec.v
    return spec.R * (1.0 / spec.T_pulse + spec.Omega)


def max_displacement(spec: TrajectorySpec) -> float:
    if isinstance(spec, Adiabatic):
        return spec.R
    if isinstance(spec, PiecewiseTrapezoid):
        return spec.v * (spec.T / 2 - spec.tau)
    return spec.R


def spectral_decay(spec: TrajectorySpec) -> str:
    return "algebraic" if isinstance(spec, PiecewiseTrapezoid) else "exponential"


def spectral_scale(spec: TrajectorySpec) -> float:
    """Momentum scale of the spectral weight, 1 over the characteristic time."""
    return 1.0 / char_time(spec)


def radial_osc_scale(spec: TrajectorySpec) -> float:
    """Phase rate (in k) of oscillations surviving in |vhat(k)|^2.

    Gaussian profiles have smooth spectral envelopes; piecewise and multi-pulse
    ones interfere between their sharp features or pulse centers."""
    if isinstance(spec, Adiabatic):
        return 0.0
    if isinstance(spec, PiecewiseTrapezoid):
        return spec.T
    return (spec.N - 1) * spec.T_sep


def _trapezoid_segments(spec: PiecewiseTrapezoid):
    """(t0, t1, x0, v0, accel) for the five velocity segments."""
    v, T, tau = spec.v, spec.T, spec.tau
    a = v / tau
    segs = []
    t, x = 0.0, 0.0
    for (t1, v0, acc) in ((tau, 0.0, a), (T / 2 - tau, v, 0.0),
                          (T / 2 + tau, v, -a), (T - tau, -v, 0.0), (T, -v, a)):
        segs.append((t, t1, x, v0, acc))
        d = t1 - t
        x = x + v0 * d + 0.5 * acc * d * d
        t = t1
    return segs


def position(spec: TrajectorySpec, t):
    scalar = np.isscalar(t) or np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(spec, Adiabatic):
        out = spec.R * np.exp(-(t / spec.T) ** 2)
    elif isinstance(spec, PiecewiseTrapezoid):
        out = np.zeros_like(t)
        inside = (t >= 0) & (t <= spec.T)
        for (t0, t1, x0, v0, acc) in _trapezoid_segments(spec):
            sel = inside & (t >= t0) & (t < t1 if t1 < spec.T else t <= t1)
            s = t[sel] - t0
            out[sel] = x0 + v0 * s + 0.5 * acc * s * s
    else:
        out = np.zeros_like(t)
        for n in range(spec.N):
            s = t - n * spec.T_sep
            bump = spec.R * np.exp(-(s / spec.T_pulse) ** 2)
            if spec.Omega > 0:
                bump = bump * np.cos(spec.Omega * s)
            out = out + bump
    return float(out[0]) if scalar else out


def velocity(spec: TrajectorySpec, t):
    scalar = np.isscalar(t) or np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(spec, Adiabatic):
        out = -2.0 * t / spec.T ** 2 * spec.R * np.exp(-(t / spec.T) ** 2)
    elif isinstance(spec, PiecewiseTrapezoid):
        out = np.zeros_like(t)
        inside = (t >= 0) & (t <= spec.T)
        for (t0, t1, _x0, v0, acc) in _trapezoid_segments(spec):
            sel = inside & (t >= t0) & (t < t1 if t1 < spec.T else t <= t1)
            out[sel] = v0 + acc * (t[sel] - t0)
    else:
        out = np.zeros_like(t)
        for n in range(spec.N):
            s = t - n * spec.T_sep
            g = spec.R * np.exp(-(s / spec.T_pulse) ** 2)
            db = -2.0 * s / spec.T_pulse ** 2 * g
            if spec.Omega > 0:
                db = db * np.cos(spec.Omega * s) - g * spec.Omega * np.sin(spec.Omega * s)
            out = out + db
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# closed-form transforms (dipole approximation fast path)
# ---------------------------------------------------------------------------

def _poly_segment_transform(k, t0, d, coeffs):
    """int_0^d (c0 + c1 s + c2 s^2) e^{-ik(t0+s)} ds with stable small-kd series."""
    k = np.asarray(k, dtype=float)
    kd = k * d
    small = np.abs(kd) < 1e-4
    ks = np.where(small, 1.0, k)  # avoid divide warnings on the masked branch
    e = np.exp(-1j * kd)
    I0 = np.where(small, d * (1 - 1j * kd / 2 - kd**2 / 6 + 1j * kd**3 / 24),
                  (1 - e) / (1j * ks))
    I1 = np.where(small, d**2 * (0.5 - 1j * kd / 3 - kd**2 / 8 + 1j * kd**3 / 30),
                  (e * (1 + 1j * kd) - 1) / ks**2)
    I2 = np.where(small, d**3 * (1.0 / 3 - 1j * kd / 4 - kd**2 / 10 + 1j * kd**3 / 36),
                  (e * (1j * d**2 / ks + 2 * d / ks**2 - 2j / ks**3) + 2j / ks**3))
    c0, c1, c2 = coeffs
    return np.exp(-1j * k * t0) * (c0 * I0 + c1 * I1 + c2 * I2)


def _gauss_xhat(R, T, Omega, k):
    k = np.asarray(k, dtype=float)
    if Omega > 0:
        return (R * np.sqrt(np.pi) * T / 2) * (np.exp(-((k - Omega) * T) ** 2 / 4)
                                               + np.exp(-((k + Omega) * T) ** 2 / 4))
    return R * np.sqrt(np.pi) * T * np.exp(-(k * T) ** 2 / 4)


def _pulse_comb(spec: PulseTrain, k):
    k = np.asarray(k, dtype=float)
    comb = np.zeros(np.shape(k), dtype=complex)
    for n in range(spec.N):
        comb += np.exp(-1j * k * n * spec.T_sep)
    return comb


def velocity_transform(spec: TrajectorySpec, k):
    """Closed-form vhat(k) = int xdot e^{-ikt} dt = i k xhat(k)."""
    k = np.asarray(k, dtype=float)
    if isinstance(spec, Adiabatic):
        return 1j * k * _gauss_xhat(spec.R, spec.T, 0.0, k)
    if isinstance(spec, PulseTrain):
        return 1j * k * _gauss_xhat(spec.R, spec.T_pulse, spec.Omega, k) * _pulse_comb(spec, k)
    out = np.zeros(np.shape(k), dtype=complex)
    for (t0, t1, _x0, v0, acc) in _trapezoid_segments(spec):
        out = out + _poly_segment_transform(k, t0, t1 - t0, (v0, acc, 0.0))
    return out


def position_transform(spec: TrajectorySpec, k):
    """Closed-form xhat(k) = int x(t) e^{-ikt} dt."""
    k = np.asarray(k, dtype=float)
    if isinstance(spec, Adiabatic):
        return _gauss_xhat(spec.R, spec.T, 0.0, k) + 0j
    if isinstance(spec, PulseTrain):
        return _gauss_xhat(spec.R, spec.T_pulse, spec.Omega, k) * _pulse_comb(spec, k)
    out = np.zeros(np.shape(k), dtype=complex)
    for (t0, t1, x0, v0, acc) in _trapezoid_segments(spec):
        out = out + _poly_segment_transform(k, t0, t1 - t0, (x0, v0, 0.5 * acc))
    return out


def dipole_approx_spectrum(spec: TrajectorySpec, k: float, mode: str,
                           cfg: QuadratureConfig | None = None) -> SourceSpectrum:
    """Small-argument spectrum: cos[k_j x] -> 1 and sin[k_j x] -> k_j x.

    Charge mode returns vhat(k); dipole mode returns xhat(k), with the k_j
    projection deferred to the angular reduction.
    """
    if mode == "charge":
        val = complex(velocity_transform(spec, float(k)))
    elif mode == "dipole":
        val = complex(position_transform(spec, float(k)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return SourceSpectrum(value=val, k=float(k), k_j=0.0, mode=mode,
                          est_error=8e-16 * abs(val))


# ---------------------------------------------------------------------------
# exact spectra
# ---------------------------------------------------------------------------

def source_spectrum(spec: TrajectorySpec, k: float, k_j: float, mode: str,
                    cfg: QuadratureConfig | None = None) -> SourceSpectrum:
    """Exact oscillatory time integral for one (k, k_j) pair.

    Adaptive panel quadrature over the support, split exactly at velocity
    breakpoints. k must be nonnegative and |k_j| <= k.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if abs(k_j) > k + 1e-12 * max(1.0, k):
        raise ValueError("|k_j| cannot exceed k")
    if mode not in ("charge", "dipole"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or QuadratureConfig()
    t0, t1 = support(spec)
    cuts = [t0, *breakpoints(spec), t1]

    if mode == "charge":
        def integrand(t):
            return velocity(spec, t) * np.cos(k_j * position(spec, t)) * np.exp(-1j * k * t)
    else:
        def integrand(t):
            return np.sin(k_j * position(spec, t)) * np.exp(-1j * k * t)

    total = 0.0 + 0.0j
    err = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        osc = k + abs(k_j) * char_speed(spec) + 2.0 / char_time(spec)
        val, e, _ = adaptive_interval(
            integrand, a, b, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
            max_subdivisions=cfg.max_subdivisions, rule=cfg.panel_rule,
            initial_panels=max(2, int(np.ceil((b - a) * osc / 8.0))))
        total += val
        err += e
    return SourceSpectrum(value=complex(total), k=float(k), k_j=float(k_j),
                          mode=mode, est_error=float(err))


# ---------------------------------------------------------------------------
# batched spectra (oracle and full-method fast path)
# ---------------------------------------------------------------------------

_COMB_SEPARATION = 18.0  # pulse gaps beyond this many widths factorize exactly
_BATCH_SIGMAS = 5.5      # Gaussian tail cut of the batch grid, error ~ 1e-13


@functools.lru_cache(maxsize=64)
def _half_grid(spec: TrajectorySpec, k_hi: float):
    """Gauss-Legendre nodes/weights on the right half of the support, measured
    from the symmetry center. Returns (s, w, x(center+s), v(center+s), center,
    use_comb)."""
    use_comb = False
    eval_spec = spec
    if isinstance(spec, PiecewiseTrapezoid):
        T, tau = spec.T, spec.tau
        pieces = [(0.0, tau), (tau, T / 2 - tau), (T / 2 - tau, T / 2)]
        center = T / 2
    elif isinstance(spec, Adiabatic):
        pieces = [(0.0, _BATCH_SIGMAS * spec.T)]
        center = 0.0
    elif spec.N == 1 or spec.T_sep >= _COMB_SEPARATION * spec.T_pulse:
        pieces = [(0.0, _BATCH_SIGMAS * spec.T_pulse)]
        center = 0.0
        use_comb = spec.N > 1
        eval_spec = PulseTrain(R=spec.R, T_pulse=spec.T_pulse, T_sep=spec.T_sep,
                               N=1, Omega=spec.Omega)
    else:
        # overlapping pulses: integrate the whole train about its midpoint
        center = 0.5 * (spec.N - 1) * spec.T_sep
        pieces = [(0.0, center + _BATCH_SIGMAS * spec.T_pulse)]
    omega = spec.Omega if isinstance(spec, PulseTrain) else 0.0
    nodes, weights = [], []
    for a, b in pieces:
        n = int(np.ceil((b - a) * (k_hi + omega + 4.0 / char_time(spec)) / 2.0)) + 20
        if n > 20000:
            raise ValueError("spectra_batch grid would exceed 20000 nodes; "
                             "k range too wide for this profile")
        x, w = np.polynomial.legendre.leggauss(n)
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    s = np.concatenate(nodes)
    w = np.concatenate(weights)
    x = position(eval_spec, center + s)
    v = velocity(eval_spec, center + s)
    return s, w, x, v, center, use_comb


def spectra_batch(spec: TrajectorySpec, k, k_j, *, need_charge: bool = True,
                  need_dipole: bool = True):
    """Vectorized (C, S) over paired arrays k, k_j.

    Exploits the midpoint symmetry of every profile (C odd, S even about the
    center). Well-separated pulse trains factorize into one pulse spectrum
    times a phase comb; overlapping trains are integrated whole. The grid is
    sized for max(k), so keep k within the profile's sampled band.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    k_j = np.atleast_1d(np.asarray(k_j, dtype=float))
    k_hi = float(k.max()) if k.size else 1.0
    s, w, x, v, center, use_comb = _half_grid(spec, float(np.ceil(k_hi + 0.5)))
    fixed_k = k.size > 1 and k.min() == k_hi
    C = S = None
    if fixed_k:
        # one radial value across the batch: the k-dependent rows collapse
        sin_row = np.sin(k_hi * s)
        if need_charge:
            C = -2j * (np.cos(np.outer(k_j, x)) @ (w * v * sin_row))
        if need_dipole:
            cos_row = np.cos(k_hi * s)
            S = (np.sin(np.outer(k_j, x)) @ (w * cos_row)).astype(complex) * 2.0
    else:
        arg_ks = np.outer(k, s)
        arg_kjx = np.outer(k_j, x)
        sin_ks = np.sin(arg_ks)
        if need_charge:
            C = -2j * ((w * v) * np.cos(arg_kjx) * sin_ks).sum(axis=1)
        if need_dipole:
            np.cos(arg_ks, out=arg_ks)
            np.sin(arg_kjx, out=arg_kjx)
            S = (2.0 * (w * arg_kjx * arg_ks).sum(axis=1)).astype(complex)
    if center != 0.0:
        phase = np.exp(-1j * k * center)
        C = C * phase if C is not None else None
        S = S * phase if S is not None else None
    if use_comb:
        comb = _pulse_comb(spec, k)
        C = C * comb if C is not None else None
        S = S * comb if S is not None else None
    return C, S
