"""Independent ground truth: a first-principles Monte Carlo contraction of the
momentum-space sources against the vacuum and image kernels, the catalog of
closed-form limits, and asymptotic fit helpers.

The estimator importance-samples k, contracts the raw source amplitudes
against the kernel tensors (never the reduced polarization forms), and is
reproducible bit for bit: counter-based Philox substreams per fixed-size chunk
make the result independent of scheduling, and partial sums are reduced in
chunk order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import trajectories as traj
from .quadrature import CutoffRequired
from .scenario import Charge, Dipole, McConfig, Scenario
from .kernels import dipole_tensor

_ETA_B_DIAG = np.array([1.0, -1.0, -1.0, 1.0])


class UnknownCase(KeyError):
    """analytic_limits asked for a case outside the catalog."""


class McVarianceBlowup(RuntimeError):
    """Sample variance dominated by a handful of weights; estimate unreliable."""


class NonMonotoneEnvelope(ValueError):
    """Power-law fit given oscillatory samples without envelope extraction."""


class InsufficientPoints(ValueError):
    """Not enough samples or dynamic range for a meaningful fit."""


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples_used: int


@dataclass(frozen=True)
class McResult:
    vacuum: McEstimate
    boundary: McEstimate
    total: McEstimate


def _radial_proposal(spec, numerics, rng, n):
    """Draw k and return (k, density) matched to the declared spectral decay."""
    if isinstance(spec, traj.PiecewiseTrapezoid):
        if numerics.k_max is None:
            raise CutoffRequired("piecewise trajectory needs k_max for the "
                                 "oracle proposal")
        k = rng.uniform(0.0, numerics.k_max, n)
        q = np.full(n, 1.0 / numerics.k_max)
        return np.maximum(k, 1e-12), q
    T = traj.char_time(spec)
    c = T * T / 4.0
    omega = spec.Omega if isinstance(spec, traj.PulseTrain) else 0.0
    if omega > 0:
        sigma = 2.0 / T
        pick = rng.uniform(0.0, 1.0, n) < 0.5
        k_gamma = np.sqrt(rng.gamma(2.0, 1.0 / c, n))
        k_norm = np.abs(rng.normal(omega, sigma, n))
        k = np.where(pick, k_gamma, k_norm)
        q_gamma = 2.0 * c * c * k ** 3 * np.exp(-c * k * k)
        norm_pdf = (np.exp(-0.5 * ((k - omega) / sigma) ** 2)
                    + np.exp(-0.5 * ((k + omega) / sigma) ** 2)) \
            / (sigma * math.sqrt(2.0 * math.pi))
        q = 0.5 * q_gamma + 0.5 * norm_pdf
        return np.maximum(k, 1e-12), q
    k = np.sqrt(rng.gamma(2.0, 1.0 / c, n))
    q = 2.0 * c * c * k ** 3 * np.exp(-c * k * k)
    return np.maximum(k, 1e-12), q


def _mirror_kj(geometry, khat):
    j = np.asarray(geometry.j_hat)
    plain = khat @ j
    mirrored = khat @ (j * np.array([1.0, 1.0, -1.0]))
    return plain, mirrored


def _charge_densities(s: Scenario, k, khat, plate: bool):
    """Vacuum and boundary integrand densities wrt d^3k (per unit e^2 ... no,
    including e^2), raw kernel contraction of the 4-current amplitudes."""
    e2 = s.coupling.e2
    cj, cj_m = _mirror_kj(s.geometry, khat)
    kj = k * cj
    C, S = traj.spectra_batch(s.trajectory, k, kj)
    measure = e2 / (8.0 * math.pi ** 3 * k)
    vac = measure * (np.abs(C) ** 2 - np.abs(S) ** 2)
    if not plate:
        return vac, None
    jz = s.geometry.j_hat[2]
    if abs(jz) < 1e-15:
        Cm, Sm = C, S
    elif abs(abs(jz) - 1.0) < 1e-15:
        Cm, Sm = C, -S
    else:
        Cm, Sm = traj.spectra_batch(s.trajectory, k, k * cj_m)
    j = np.asarray(s.geometry.j_hat)
    jj = float(j @ (j * np.array([1.0, 1.0, -1.0])))
    phase = np.exp(2j * k * khat[:, 2] * s.geometry.z0)
    bnd = measure * np.real(phase * (S * np.conj(Sm) - jj * C * np.conj(Cm)))
    return vac, bnd


def _dipole_densities(s: Scenario, k, khat, plate: bool):
    cj, cj_m = _mirror_kj(s.geometry, khat)
    kj = k * cj
    _, S = traj.spectra_batch(s.trajectory, k, kj, need_charge=False)
    P = dipole_tensor(s.coupling.p, s.coupling.m)
    kvec = k[:, None] * khat
    kl = np.concatenate([k[:, None], -kvec], axis=1)
    vP = kl @ P
    eta_quad = vP[:, 0] ** 2 - np.sum(vP[:, 1:] ** 2, axis=1)
    measure = 0.5 / ((2.0 * math.pi) ** 3 * 2.0 * k)
    vac = measure * (-4.0 * eta_quad) * 4.0 * np.abs(S) ** 2
    if not plate:
        return vac, None
    jz = s.geometry.j_hat[2]
    if abs(jz) < 1e-15:
        Sm = S
    elif abs(abs(jz) - 1.0) < 1e-15:
        Sm = -S
    else:
        _, Sm = traj.spectra_batch(s.trajectory, k, k * cj_m, need_charge=False)
    ktl = np.concatenate([k[:, None], -kvec * np.array([1.0, 1.0, -1.0])], axis=1)
    vPm = ktl @ P
    etaB_quad = np.sum(_ETA_B_DIAG * vP * vPm, axis=1)
    phase = np.exp(2j * k * khat[:, 2] * s.geometry.z0)
    bnd = measure * 4.0 * etaB_quad * 4.0 * np.real(phase * S * np.conj(Sm))
    return vac, bnd


def mc_w_first_principles(s: Scenario, cfg: McConfig | None = None) -> McResult:
    """Unbiased Monte Carlo estimate of W with vacuum/boundary split.

    Never touches the reduced angular formulas: each sample contracts the raw
    momentum-space source amplitudes against the kernel tensors.
    """
    cfg = cfg or s.oracle_numerics or McConfig()
    n_total = int(cfg.samples)
    chunk = int(cfg.chunk_size)
    plate = s.geometry.plate
    densities = _charge_densities if isinstance(s.coupling, Charge) else _dipole_densities

    sums_v, sq_v, sums_b, sq_b, sums_t, sq_t = [], [], [], [], [], []
    peak = 0.0
    done = 0
    index = 0
    base = np.random.Philox(key=cfg.seed)
    while done < n_total:
        n = min(chunk, n_total - done)
        rng = np.random.Generator(base.jumped(index))
        u = rng.uniform(-1.0, 1.0, n)
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        k, q_r = _radial_proposal(s.trajectory, s.numerics, rng, n)
        ss = np.sqrt(np.maximum(0.0, 1.0 - u * u))
        khat = np.stack([ss * np.cos(phi), ss * np.sin(phi), u], axis=1)
        vac_d, bnd_d = densities(s, k, khat, plate)
        q = q_r / (4.0 * math.pi)
        w_v = vac_d * k * k / q
        w_b = bnd_d * k * k / q if bnd_d is not None else np.zeros(n)
        if not (np.all(np.isfinite(w_v)) and np.all(np.isfinite(w_b))):
            raise McVarianceBlowup("non-finite importance weights")
        sums_v.append(float(np.sum(w_v)))
        sq_v.append(float(np.sum(w_v * w_v)))
        sums_b.append(float(np.sum(w_b)))
        sq_b.append(float(np.sum(w_b * w_b)))
        w_t = w_v + w_b
        sums_t.append(float(np.sum(w_t)))
        sq_t.append(float(np.sum(w_t * w_t)))
        peak = max(peak, float(np.max(np.abs(w_t), initial=0.0)))
        done += n
        index += 1

    def estimate(sums, sqs) -> McEstimate:
        total = math.fsum(sums)
        total_sq = math.fsum(sqs)
        mean = total / n_total
        var = max(0.0, (total_sq - n_total * mean * mean) / max(1, n_total - 1))
        return McEstimate(value=mean, std_error=math.sqrt(var / n_total),
                          samples_used=n_total)

    est_t = estimate(sums_t, sq_t)
    rms = math.sqrt(math.fsum(sq_t) / n_total)
    if rms > 0 and peak > 0.5 * rms * math.sqrt(n_total) and n_total >= 1000:
        raise McVarianceBlowup("single sample dominates the weight sum; "
                               "importance proposal mismatched")
    return McResult(vacuum=estimate(sums_v, sq_v),
                    boundary=estimate(sums_b, sq_b), total=est_t)


def current_conservation_residual(s: Scenario, samples: int = 2000,
                                  seed: int = 0) -> float:
    """Max normalized residual of k_mu j~^mu(k) over sampled momenta.

    Exact conservation ties the sin-mode and cos-mode spectra of a closed
    trajectory: k_j C = i k S. Only defined for charge scenarios.
    """
    if not isinstance(s.coupling, Charge):
        raise TypeError("conservation residual applies to charge scenarios")
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.uniform(-1.0, 1.0, samples)
    phi = rng.uniform(0.0, 2.0 * math.pi, samples)
    k, _ = _radial_proposal(s.trajectory, s.numerics, rng, samples)
    ss = np.sqrt(np.maximum(0.0, 1.0 - u * u))
    khat = np.stack([ss * np.cos(phi), ss * np.sin(phi), u], axis=1)
    kj = k * (khat @ np.asarray(s.geometry.j_hat))
    C, S = traj.spectra_batch(s.trajectory, k, kj)
    num = np.abs(kj * C - 1j * k * S)
    den = np.abs(k * C) + np.abs(k * S) + 1e-300
    return float(np.max(num / den))


# ---------------------------------------------------------------------------
# closed-form limit catalog
# ---------------------------------------------------------------------------

def analytic_limits(case: str, **params) -> float:
    """Exact values of the enumerated limit cases.

    Cases: charge_adiabatic_vacuum(e2, v), charge_log_slope(e2, v),
    contact_ratio_perpendicular, contact_ratio_parallel,
    dipole_charge_ratio_transverse, dipole_charge_ratio_longitudinal,
    boundary_decay_exponent_charge_adiabatic, dipole_contact_ratio,
    small_z0_parallel_coefficient(e2, v, T).
    """
    if case == "charge_adiabatic_vacuum":
        return 2.0 * params["e2"] * params["v"] ** 2 / (3.0 * math.pi)
    if case == "charge_log_slope":
        return 2.0 * params["e2"] * params["v"] ** 2 / math.pi ** 2
    if case == "contact_ratio_perpendicular":
        return 2.0
    if case == "contact_ratio_parallel":
        return 0.0
    if case == "dipole_charge_ratio_transverse":
        return 8.0 / 5.0
    if case == "dipole_charge_ratio_longitudinal":
        return 4.0 / 5.0
    if case == "boundary_decay_exponent_charge_adiabatic":
        return -4.0
    if case == "dipole_contact_ratio":
        return 1.0
    if case == "small_z0_parallel_coefficient":
        return 32.0 * params["e2"] * params["v"] ** 2 \
            / (15.0 * math.pi * params["T"] ** 2)
    raise UnknownCase(case)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    max_rel_residual: float


def fit_power_law(samples, *, envelope: bool = False, min_points: int = 6,
                  min_decades: float = 1.5) -> PowerLawFit:
    """Log-log least squares |W| = A z0^p over (z0, W_boundary) samples.

    Sign-alternating or non-monotone magnitudes indicate an oscillatory
    envelope; they raise NonMonotoneEnvelope unless envelope extraction is
    requested, in which case local maxima of |W| are fitted instead.
    """
    pts = sorted((float(z), float(w)) for z, w in samples)
    if len(pts) < min_points:
        raise InsufficientPoints(
            f"need at least {min_points} samples, got {len(pts)}")
    z = np.array([p[0] for p in pts])
    w = np.array([p[1] for p in pts])
    if np.any(z <= 0):
        raise ValueError("z0 samples must be positive")
    if np.log10(z.max() / z.min()) < min_decades - 1e-9:
        raise InsufficientPoints(
            f"samples must span at least {min_decades} decades")
    mag = np.abs(w)
    if np.any(mag == 0):
        raise ValueError("zero boundary samples cannot be fitted")
    oscillatory = np.any(w[:-1] * w[1:] < 0) or np.any(np.diff(np.log(mag)) > 0)
    if oscillatory:
        if not envelope:
            raise NonMonotoneEnvelope(
                "samples oscillate; rerun with envelope extraction")
        keep = [i for i in range(len(mag))
                if (i == 0 or mag[i] >= mag[i - 1])
                and (i == len(mag) - 1 or mag[i] >= mag[i + 1])]
        if len(keep) < 3:
            raise NonMonotoneEnvelope("too few envelope peaks to fit")
        z, mag = z[keep], mag[keep]
    expo, log_a = np.polyfit(np.log(z), np.log(mag), 1)
    model = np.exp(log_a) * z ** expo
    resid = float(np.max(np.abs(model - mag) / mag))
    return PowerLawFit(exponent=float(expo), amplitude=float(np.exp(log_a)),
                       max_rel_residual=resid)
