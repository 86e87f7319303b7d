"""Immutable problem description: coupling, trajectory, geometry, numerics.

Units are natural (hbar = c = 1): e^2 is dimensionless, lengths and times share
one unit, wavenumbers carry the inverse unit, and every decoherence exponent W
is dimensionless. The fine-structure value e2 = 4 pi / 137.036 is provided as a
convenience constant and never applied implicitly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .quadrature import QuadratureConfig
from .trajectories import (Adiabatic, PiecewiseTrapezoid, PulseTrain,
                           TrajectorySpec, char_speed)

Vec3 = tuple[float, float, float]

E2_PHYSICAL = 4.0 * math.pi / 137.036

PARALLEL = "parallel"
PERPENDICULAR = "perpendicular"
OBLIQUE = "oblique"

SPEED_ERROR = 0.3
SPEED_WARN = 0.1


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str


class ScenarioError(ValueError):
    pass


class ScenarioValidationError(ScenarioError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(f"[{v.code}] {v.field}: {v.message}" for v in violations)
        super().__init__(lines)


@dataclass(frozen=True)
class Charge:
    e2: float


@dataclass(frozen=True)
class Dipole:
    p: Vec3
    m: Vec3


Coupling = Charge | Dipole


@dataclass(frozen=True)
class Geometry:
    plate: bool
    z0: float
    j_hat: Vec3
    orientation: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.orientation:
            object.__setattr__(self, "orientation", classify_orientation(self.j_hat))


@dataclass(frozen=True)
class McConfig:
    samples: int = 4_000_000
    seed: int = 0
    chunk_size: int = 16384
    importance: str = "auto"


@dataclass(frozen=True)
class Scenario:
    coupling: Coupling
    trajectory: TrajectorySpec
    geometry: Geometry
    numerics: QuadratureConfig = QuadratureConfig()
    oracle_numerics: McConfig | None = None


def reflect_geometric(v) -> Vec3:
    """Mirror a position or direction vector through the z = 0 plane."""
    return (float(v[0]), float(v[1]), -float(v[2]))


def reflect_electric_dipole(p) -> Vec3:
    """Image of an electric dipole: in-plane components flip, normal survives."""
    return (-float(p[0]), -float(p[1]), float(p[2]))


def reflect_magnetic_dipole(m) -> Vec3:
    """Image of a magnetic dipole: in-plane components survive, normal flips."""
    return (float(m[0]), float(m[1]), -float(m[2]))


def classify_orientation(j_hat, tol: float = 1e-12) -> str:
    dz = abs(float(j_hat[2]))
    if dz <= tol:
        return PARALLEL
    if abs(dz - 1.0) <= tol:
        return PERPENDICULAR
    return OBLIQUE


def _unit(v, issues: list[Violation], name: str) -> Vec3:
    norm = math.sqrt(sum(float(c) ** 2 for c in v))
    if abs(norm - 1.0) > 1e-6:
        issues.append(Violation("NonUnitDirection", name,
                                f"|{name}| = {norm:.8g} deviates from 1 by more than 1e-6"))
        if norm == 0.0:
            return (0.0, 0.0, 0.0)
    return (float(v[0]) / norm, float(v[1]) / norm, float(v[2]) / norm)


def _get(section, key, issues, code, default=None, required=False):
    if key in section:
        return section[key]
    if required:
        issues.append(Violation(code, key, "missing required field"))
    return default


def _build_coupling(raw, issues) -> Coupling | None:
    particle = raw.get("particle")
    if not particle:
        issues.append(Violation("MissingCoupling", "particle", "missing [particle] section"))
        return None
    kind = particle.get("kind")
    if kind == "charge":
        e2 = float(_get(particle, "e2", issues, "MissingCoupling", required=True) or 0.0)
        if e2 <= 0:
            issues.append(Violation("MissingCoupling", "e2", "charge coupling requires e2 > 0"))
            return None
        return Charge(e2=e2)
    if kind == "dipole":
        p = tuple(float(c) for c in particle.get("p", (0.0, 0.0, 0.0)))
        m = tuple(float(c) for c in particle.get("m", (0.0, 0.0, 0.0)))
        return Dipole(p=p, m=m)
    issues.append(Violation("MissingCoupling", "kind",
                            f"particle kind must be charge or dipole, got {kind!r}"))
    return None


def _build_trajectory(raw, issues) -> TrajectorySpec | None:
    traj = raw.get("trajectory")
    if not traj:
        issues.append(Violation("InconsistentTrajectory", "trajectory",
                                "missing [trajectory] section"))
        return None
    kind = traj.get("kind")
    try:
        if kind == "adiabatic":
            spec = Adiabatic(R=float(traj["R"]), T=float(traj["T"]))
        elif kind == "trapezoid":
            spec = PiecewiseTrapezoid(v=float(traj["v"]), T=float(traj["T"]),
                                      tau=float(traj["tau"]))
        elif kind == "pulse_train":
            spec = PulseTrain(R=float(traj["R"]), T_pulse=float(traj["T_pulse"]),
                              T_sep=float(traj["T_sep"]), N=int(traj["N"]),
                              Omega=float(traj.get("Omega", 0.0)))
        else:
            issues.append(Violation("InconsistentTrajectory", "kind",
                                    f"unknown trajectory kind {kind!r}"))
            return None
    except (KeyError, ValueError, TypeError) as exc:
        issues.append(Violation("InconsistentTrajectory", "trajectory", str(exc)))
        return None
    try:
        speed = char_speed(spec)
    except ValueError as exc:
        issues.append(Violation("InconsistentTrajectory", "trajectory", str(exc)))
        return None
    if speed >= SPEED_ERROR:
        issues.append(Violation("InconsistentTrajectory", "speed",
                                f"characteristic speed {speed:.3g} >= {SPEED_ERROR}"))
        return None
    if speed > SPEED_WARN:
        warnings.warn(f"characteristic speed {speed:.3g} exceeds {SPEED_WARN}; "
                      "nonrelativistic treatment is marginal", stacklevel=3)
    return spec


def _build_geometry(raw, issues) -> Geometry | None:
    geo = raw.get("geometry")
    if not geo:
        issues.append(Violation("NegativeDistance", "geometry",
                                "missing [geometry] section"))
        return None
    plate_raw = geo.get("plate", "absent")
    if plate_raw in (True, False):
        plate = bool(plate_raw)
    elif plate_raw in ("present", "absent"):
        plate = plate_raw == "present"
    else:
        issues.append(Violation("NegativeDistance", "plate",
                                f"plate must be present or absent, got {plate_raw!r}"))
        return None
    z0 = float(geo.get("z0", 0.0))
    if z0 < 0:
        issues.append(Violation("NegativeDistance", "z0", f"z0 = {z0:g} is negative"))
        return None
    j_raw = geo.get("j_hat", (1.0, 0.0, 0.0))
    j_hat = _unit(tuple(float(c) for c in j_raw), issues, "j_hat")
    return Geometry(plate=plate, z0=z0, j_hat=j_hat)


def _build_numerics(raw, issues) -> QuadratureConfig:
    num = raw.get("numerics") or {}
    kwargs = {}
    if "rel_tol" in num:
        kwargs["rel_tol"] = float(num["rel_tol"])
    if "abs_tol" in num:
        kwargs["abs_tol"] = float(num["abs_tol"])
    if "k_max" in num and num["k_max"] is not None:
        kwargs["k_max"] = float(num["k_max"])
    if "max_subdivisions" in num:
        kwargs["max_subdivisions"] = int(num["max_subdivisions"])
    try:
        return QuadratureConfig(**kwargs)
    except ValueError as exc:
        issues.append(Violation("InconsistentTrajectory", "numerics", str(exc)))
        return QuadratureConfig()


def _build_oracle(raw) -> McConfig | None:
    orc = raw.get("oracle")
    if not orc:
        return None
    return McConfig(samples=int(float(orc.get("samples", 4_000_000))),
                    seed=int(orc.get("seed", 0)),
                    chunk_size=int(orc.get("chunk_size", 65536)))


def validate(raw) -> Scenario:
    """Turn a parsed raw config mapping into a validated Scenario.

    On any violation raises ScenarioValidationError carrying the full list of
    structured issues. j_hat is normalized, the orientation label derived.
    """
    issues: list[Violation] = []
    coupling = _build_coupling(raw, issues)
    trajectory = _build_trajectory(raw, issues)
    geometry = _build_geometry(raw, issues)
    numerics = _build_numerics(raw, issues)
    oracle = _build_oracle(raw)
    if issues:
        raise ScenarioValidationError(issues)
    return Scenario(coupling=coupling, trajectory=trajectory, geometry=geometry,
                    numerics=numerics, oracle_numerics=oracle)
