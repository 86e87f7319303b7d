"""Fringe visibility and electromagnetic-vacuum decoherence near a conducting
plate, for charged particles and permanent dipoles on interferometer paths."""

__version__ = "0.1.0"

from .decoherence import (DecoherenceResult, SweepPoint, compute, sweep,
                          w_charge_boundary, w_charge_vacuum,
                          w_dipole_boundary, w_dipole_vacuum)
from .oracle import (McEstimate, McResult, analytic_limits, fit_power_law,
                     mc_w_first_principles)
from .quadrature import (IntegralEstimate, QuadratureConfig, integrate_angular,
                         integrate_radial, regularized_log_fit)
from .scenario import (Charge, Dipole, Geometry, McConfig, Scenario,
                       ScenarioValidationError, reflect_electric_dipole,
                       reflect_geometric, reflect_magnetic_dipole, validate)
from .trajectories import (Adiabatic, PiecewiseTrapezoid, PulseTrain,
                           SourceSpectrum, dipole_approx_spectrum, position,
                           source_spectrum, velocity)

__all__ = [
    "__version__",
    "Adiabatic", "PiecewiseTrapezoid", "PulseTrain", "SourceSpectrum",
    "Charge", "Dipole", "Geometry", "McConfig", "Scenario",
    "ScenarioValidationError", "QuadratureConfig", "IntegralEstimate",
    "DecoherenceResult", "SweepPoint", "McEstimate", "McResult",
    "compute", "sweep", "validate", "position", "velocity",
    "source_spectrum", "dipole_approx_spectrum",
    "w_charge_vacuum", "w_charge_boundary", "w_dipole_vacuum",
    "w_dipole_boundary", "mc_w_first_principles", "analytic_limits",
    "fit_power_law", "integrate_radial", "integrate_angular",
    "regularized_log_fit", "reflect_geometric", "reflect_electric_dipole",
    "reflect_magnetic_dipole",
]
