"""Momentum-space photon kernels: mode measure, image phase, closed-form
angular reductions, and the field-strength contraction used by the Monte Carlo
oracle.

Metric convention diag(+,-,-,-); the conducting plane sits at z = 0 and the
image kernel carries the tensor diag(+1,-1,-1,+1) together with the phase
factor exp(2 i k_z z0). Amplitudes follow the e^{-ikt} transform convention of
the trajectories module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UnsupportedCase(KeyError):
    """Angular reduction requested for a geometry outside the catalog."""


@dataclass(frozen=True)
class KPoint:
    """One momentum-space point: radial k, polar cosine u, azimuth phi."""
    k: float
    u: float
    phi: float

    @property
    def khat(self) -> np.ndarray:
        s = math.sqrt(max(0.0, 1.0 - self.u * self.u))
        return np.array([s * math.cos(self.phi), s * math.sin(self.phi), self.u])

    @property
    def k_z(self) -> float:
        return self.k * self.u

    def k_along(self, axis) -> float:
        """Momentum component along a unit axis."""
        return self.k * float(self.khat @ np.asarray(axis, dtype=float))


def vacuum_kernel_weight(kp: KPoint) -> float:
    """Mode-density measure 1/((2 pi)^3 2k) of the vacuum Hadamard kernel."""
    if kp.k <= 0:
        raise ValueError("k must be positive")
    return 1.0 / ((2.0 * math.pi) ** 3 * 2.0 * kp.k)


def image_phase(kp: KPoint, z0: float) -> float:
    """Surviving real part cos(2 k_z z0) of the image-point phase."""
    if z0 < 0:
        raise ValueError("z0 must be nonnegative")
    return math.cos(2.0 * kp.k_z * z0)


def transverse_weight(kp: KPoint, axis) -> float:
    """Polarization factor 1 - (khat . axis)^2 for a unit axis."""
    c = float(kp.khat @ np.asarray(axis, dtype=float))
    return 1.0 - c * c


# ---------------------------------------------------------------------------
# closed-form angular reductions
# ---------------------------------------------------------------------------

_SERIES_CROSSOVER = 0.5
_SERIES_TERMS = 16


def cos_moments(beta):
    """M_n(beta) = int_{-1}^{1} u^{2n} cos(beta u) du for n = 0, 1, 2.

    Closed forms cancel catastrophically as beta -> 0, so a Taylor series takes
    over below the crossover. Vectorized over beta.
    """
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    out = np.empty((3, b.size))
    small = np.abs(b) < _SERIES_CROSSOVER
    if np.any(small):
        bs = b[small]
        for n in range(3):
            tot = np.zeros_like(bs)
            fact = 1.0
            for m in range(_SERIES_TERMS):
                if m > 0:
                    fact *= (2 * m - 1) * (2 * m)
                tot += (-1.0) ** m * bs ** (2 * m) / (fact * (2 * m + 2 * n + 1))
            out[n, small] = 2.0 * tot
    if np.any(~small):
        bl = b[~small]
        sb, cb = np.sin(bl), np.cos(bl)
        out[0, ~small] = 2.0 * sb / bl
        out[1, ~small] = 2.0 * (sb / bl + 2.0 * cb / bl**2 - 2.0 * sb / bl**3)
        out[2, ~small] = 2.0 * (sb / bl + 4.0 * cb / bl**2 - 12.0 * sb / bl**3
                                - 24.0 * cb / bl**4 + 24.0 * sb / bl**5)
    if np.ndim(beta) == 0:
        return out[0, 0], out[1, 0], out[2, 0]
    return out[0], out[1], out[2]


def charge_angular(orientation: str, beta):
    """Angular integral of (1 - khat_j^2) cos(beta u) over the sphere.

    Equals 8 pi / 3 at beta = 0 for both orientations.
    """
    m0, m1, _ = cos_moments(beta)
    if orientation == "parallel":
        return math.pi * (m0 + m1)
    if orientation == "perpendicular":
        return 2.0 * math.pi * (m0 - m1)
    raise UnsupportedCase(f"no closed charge reduction for {orientation!r}")


def dipole_angular_factors(orientation: str, beta):
    """Per-axis angular integrals of khat_j^2 (delta_cc - khat_c^2) cos(beta u).

    Returns factors keyed to the dipole components (along j, in-plane
    transverse, plate normal) for a parallel trajectory, or (in-plane, normal)
    degeneracy for a perpendicular one. Weighted sums over the dipole vector
    components assemble the full reduction.
    """
    m0, m1, m2 = cos_moments(beta)
    quartic = m0 - 2.0 * m1 + m2
    if orientation == "parallel":
        g_along = math.pi * (m0 - m1) - 0.75 * math.pi * quartic
        g_transverse = math.pi * (m0 - m1) - 0.25 * math.pi * quartic
        g_normal = math.pi * quartic
        return g_along, g_transverse, g_normal
    if orientation == "perpendicular":
        g_inplane = math.pi * (m1 + m2)
        g_normal = 2.0 * math.pi * (m1 - m2)
        return g_inplane, g_inplane, g_normal
    raise UnsupportedCase(f"no closed dipole reduction for {orientation!r}")


_ANGULAR_CASES = {
    "charge_parallel": lambda b: charge_angular("parallel", b),
    "charge_perpendicular": lambda b: charge_angular("perpendicular", b),
    "dipole_parallel_along": lambda b: dipole_angular_factors("parallel", b)[0],
    "dipole_parallel_transverse": lambda b: dipole_angular_factors("parallel", b)[1],
    "dipole_parallel_normal": lambda b: dipole_angular_factors("parallel", b)[2],
    "dipole_perpendicular_inplane": lambda b: dipole_angular_factors("perpendicular", b)[0],
    "dipole_perpendicular_normal": lambda b: dipole_angular_factors("perpendicular", b)[2],
}


def angular_reduction(case: str, beta: float) -> float:
    """Closed-form angular integral for one catalog case at beta = 2 k z0.

    The vacuum value of each case is its boundary evaluator at beta = 0.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    try:
        evaluator = _ANGULAR_CASES[case]
    except KeyError:
        raise UnsupportedCase(
            f"{case!r}; oblique axes need the full quadrature path") from None
    return float(evaluator(float(beta)))


# ---------------------------------------------------------------------------
# oracle-side kernel contraction
# ---------------------------------------------------------------------------

_ETA = np.array([1.0, -1.0, -1.0, -1.0])
_ETA_B = np.array([1.0, -1.0, -1.0, 1.0])
_MIRROR = np.array([1.0, 1.0, -1.0])


def dipole_tensor(p, m) -> np.ndarray:
    """Antisymmetric polarization tensor with raised indices for constant
    electric and magnetic dipole vectors."""
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    P = np.zeros((4, 4))
    P[0, 1:] = -0.5 * p
    P[1:, 0] = 0.5 * p
    P[1, 2] = 0.5 * m[2]
    P[2, 1] = -0.5 * m[2]
    P[2, 3] = 0.5 * m[0]
    P[3, 2] = -0.5 * m[0]
    P[3, 1] = 0.5 * m[1]
    P[1, 3] = -0.5 * m[1]
    return P


@dataclass(frozen=True)
class MomentumSource:
    """Momentum-space source amplitude at one k point.

    Charge kind: amp / amp_mirror are the complex 4-current amplitudes at the
    sampled momentum and at its mirror image. Dipole kind: tensor is the real
    constant polarization tensor, spectral / spectral_mirror the complex time
    integrals (2i S evaluated at k_j and at the mirrored k_j).
    """
    kind: str
    amp: np.ndarray | None = None
    amp_mirror: np.ndarray | None = None
    tensor: np.ndarray | None = None
    spectral: complex = 0j
    spectral_mirror: complex = 0j


def charge_source(amp, amp_mirror=None) -> MomentumSource:
    amp = np.asarray(amp, dtype=complex)
    mirror = amp if amp_mirror is None else np.asarray(amp_mirror, dtype=complex)
    return MomentumSource(kind="charge", amp=amp, amp_mirror=mirror)


def dipole_momentum_source(p, m, spectral, spectral_mirror=None) -> MomentumSource:
    return MomentumSource(kind="dipole", tensor=dipole_tensor(p, m),
                          spectral=complex(spectral),
                          spectral_mirror=complex(spectral if spectral_mirror is None
                                                  else spectral_mirror))


def _k_lower(kp: KPoint, mirrored: bool) -> np.ndarray:
    kvec = kp.k * kp.khat
    if mirrored:
        kvec = kvec * _MIRROR
    return np.array([kp.k, -kvec[0], -kvec[1], -kvec[2]])


def field_strength_contraction(kp: KPoint, source_a: MomentumSource,
                               source_b: MomentumSource, *, boundary: bool = False,
                               z0: float = 0.0) -> complex:
    """Hadamard-kernel contraction of two momentum-space sources at kp.

    Vacuum: -eta_{mu nu} a^mu conj(b^nu) for currents, and the derivative
    tensor contraction for dipole sources. Boundary: the image tensor
    diag(+,-,-,+) with one momentum mirrored, symmetrized over which side is
    mirrored, times the surviving real image phase cos(2 k_z z0). The caller
    multiplies by the mode measure and takes the real part.
    """
    if source_a.kind != source_b.kind:
        raise ValueError("cannot contract charge with dipole sources")
    if source_a.kind == "charge":
        a = source_a.amp
        if not boundary:
            return complex(-np.sum(_ETA * a * np.conj(source_b.amp)))
        phase = math.cos(2.0 * kp.k_z * z0)
        one = np.sum(_ETA_B * a * np.conj(source_b.amp_mirror))
        two = np.sum(_ETA_B * source_a.amp_mirror * np.conj(source_b.amp))
        return complex(0.5 * (one + two) * phase)
    kl = _k_lower(kp, mirrored=False)
    vPa = kl @ source_a.tensor
    vPb = kl @ source_b.tensor
    if not boundary:
        contr = -4.0 * np.sum(_ETA * vPa * vPb)
        return complex(contr * source_a.spectral * np.conj(source_b.spectral))
    ktl = _k_lower(kp, mirrored=True)
    vPa_m = ktl @ source_a.tensor
    vPb_m = ktl @ source_b.tensor
    phase = math.cos(2.0 * kp.k_z * z0)
    one = 4.0 * np.sum(_ETA_B * vPa * vPb_m) * source_a.spectral * np.conj(source_b.spectral_mirror)
    two = 4.0 * np.sum(_ETA_B * vPa_m * vPb) * source_a.spectral_mirror * np.conj(source_b.spectral)
    return complex(0.5 * (one + two) * phase)
