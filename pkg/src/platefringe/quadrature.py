"""Deterministic adaptive quadrature for the radial and angular momentum integrals.

The engine uses an embedded low/high order Gauss-Legendre pair on a worklist of
panels. Everything is pure and deterministic: identical inputs give bitwise
identical results regardless of how many integrals run concurrently elsewhere.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


class QuadratureFailure(RuntimeError):
    """Requested tolerance not met within the subdivision budget."""


class CutoffRequired(ValueError):
    """Integrand declared algebraic decay but no radial cutoff was given."""


class InsufficientSpan(ValueError):
    """Fit input does not cover the required range."""


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    k_max: float | None = None
    max_subdivisions: int = 20000
    panel_rule: tuple[int, int] = (10, 21)

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.k_max is not None and self.k_max <= 0:
            raise ValueError("k_max must be positive when set")


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    err_est: float
    evaluations: int
    truncation_note: str | None = None


@functools.lru_cache(maxsize=32)
def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _eval_panels(f, lo, hi, order):
    """Apply an order-point Gauss rule to every panel, one batched call to f."""
    x, w = _gl_nodes(order)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(nodes.ravel())).reshape(nodes.shape)
    return half * (vals @ w)


def adaptive_interval(f, a: float, b: float, *, rel_tol: float, abs_tol: float,
                      max_subdivisions: int, rule: tuple[int, int] = (10, 21),
                      initial_panels: int = 1):
    """Adaptive panel integration of a vectorized callable over [a, b].

    f maps a flat array of abscissae to values (real or complex). Panels whose
    low/high rule difference exceeds their share of the error budget are
    bisected in batch; only freshly split panels are re-evaluated. The final
    sum runs in panel order, so the result is deterministic.

    Returns (value, err_est, evaluations).
    """
    if b <= a:
        return 0.0, 0.0, 0
    lo_rule, hi_rule = rule
    n0 = max(1, int(initial_panels))
    edges = np.linspace(a, b, n0 + 1)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    fine = _eval_panels(f, lo, hi, hi_rule)
    err = np.abs(fine - _eval_panels(f, lo, hi, lo_rule))
    evals = (lo_rule + hi_rule) * lo.size
    for _ in range(200):
        total = fine.sum()
        total_err = err.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            order = np.argsort(lo, kind="stable")
            return fine[order].sum(), float(total_err), evals
        if lo.size >= max_subdivisions:
            raise QuadratureFailure(
                f"tolerance {tol:.3g} not met: err={total_err:.3g} with "
                f"{lo.size} panels")
        # split every panel holding more than its width-proportional share
        share = tol * (hi - lo) / (b - a)
        bad = err > np.maximum(share, 1e-300)
        if not np.any(bad):
            bad = err >= 0.5 * err.max()
        mid = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate([lo[bad], mid])
        new_hi = np.concatenate([mid, hi[bad]])
        new_fine = _eval_panels(f, new_lo, new_hi, hi_rule)
        new_err = np.abs(new_fine - _eval_panels(f, new_lo, new_hi, lo_rule))
        evals += (lo_rule + hi_rule) * new_lo.size
        lo = np.concatenate([lo[~bad], new_lo])
        hi = np.concatenate([hi[~bad], new_hi])
        fine = np.concatenate([fine[~bad], new_fine])
        err = np.concatenate([err[~bad], new_err])
    raise QuadratureFailure("panel refinement did not converge")


def _initial_count(width: float, osc_scale: float) -> int:
    # keep phase advance per panel below ~8 rad so the 21-point rule resolves it
    if osc_scale <= 0:
        return 1
    return max(1, int(np.ceil(width * osc_scale / 8.0)))


def integrate_radial(f, cfg: QuadratureConfig, *, decay: str, scale: float,
                     osc_scale: float = 0.0) -> IntegralEstimate:
    """Integrate f(k) over (0, k_max] or (0, inf) depending on declared decay.

    decay: "exponential" lets the domain grow by block doubling until the last
    block is negligible; "algebraic" requires cfg.k_max. scale is the spectral
    momentum scale of the integrand (sets the first block), osc_scale the
    fastest phase rate in k (sets panel seeding).
    """
    if decay not in ("exponential", "algebraic"):
        raise ValueError(f"unknown decay declaration {decay!r}")
    if cfg.k_max is not None:
        a, b = 0.0, cfg.k_max
        val, err, ev = adaptive_interval(
            f, a, b, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
            max_subdivisions=cfg.max_subdivisions, rule=cfg.panel_rule,
            initial_panels=max(4, _initial_count(b - a, osc_scale)))
        return IntegralEstimate(float(np.real(val)), err, ev,
                                truncation_note=f"cutoff at k_max={cfg.k_max:g}")
    if decay == "algebraic":
        raise CutoffRequired(
            "algebraic spectral decay declared but no k_max configured")
    block = 8.0 * scale
    lo_edge = 0.0
    width = block
    value = 0.0
    err = 0.0
    evals = 0
    note = None
    for i in range(60):
        hi_edge = lo_edge + width
        v, e, ev = adaptive_interval(
            f, lo_edge, hi_edge, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
            max_subdivisions=cfg.max_subdivisions, rule=cfg.panel_rule,
            initial_panels=max(2, _initial_count(width, osc_scale)))
        value += np.real(v)
        err += e
        evals += ev
        if i >= 1 and abs(v) <= max(cfg.abs_tol, 0.5 * cfg.rel_tol * abs(value)):
            note = f"tail dropped beyond k={hi_edge:g}"
            break
        lo_edge = hi_edge
        width *= 2.0
    else:
        raise QuadratureFailure("radial tail extension did not terminate")
    return IntegralEstimate(float(value), float(err), evals, truncation_note=note)


def integrate_angular(f, beta: float, cfg: QuadratureConfig, *, n_phi: int = 0,
                      even_u: bool = False) -> IntegralEstimate:
    """Integrate f(u, phi) over the sphere, u in [-1, 1], phi in [0, 2pi).

    Panels in u are seeded at four per oscillation period 2pi/beta. The phi
    direction is periodic and handled by a uniform grid (n_phi = 0 means f is
    phi-independent and gets called with a single dummy azimuth).
    """
    if n_phi:
        phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)

        def f_u(u_flat):
            vals = f(u_flat[:, None], phi[None, :])
            return (2.0 * np.pi / n_phi) * np.asarray(vals).sum(axis=1)
    else:
        def f_u(u_flat):
            return 2.0 * np.pi * np.asarray(f(u_flat, 0.0))

    periods = beta / np.pi
    n0 = max(2, int(np.ceil(4.0 * periods)))
    a, b = (0.0, 1.0) if even_u else (-1.0, 1.0)
    val, err, ev = adaptive_interval(
        f_u, a, b, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions, rule=cfg.panel_rule,
        initial_panels=max(2, n0 if not even_u else (n0 + 1) // 2))
    if even_u:
        val, err = 2.0 * val, 2.0 * err
    return IntegralEstimate(float(np.real(val)), float(err), ev)


def regularized_log_fit(samples) -> tuple[float, float, float]:
    """Least-squares fit of W against ln(T/tau) for (tau_over_T, W) samples.

    Returns (slope, intercept, max relative residual). Raises InsufficientSpan
    unless there are at least five samples spanning two decades with every
    tau/T at or below 0.02.
    """
    pts = [(float(t), float(w)) for t, w in samples]
    if len(pts) < 5:
        raise InsufficientSpan("need at least 5 (tau, W) samples")
    taus = np.array([t for t, _ in pts])
    ws = np.array([w for _, w in pts])
    if np.any(taus <= 0):
        raise InsufficientSpan("tau/T must be positive")
    if taus.max() > 0.02:
        raise InsufficientSpan("all samples must satisfy tau/T <= 0.02")
    if np.log10(taus.max() / taus.min()) < 2.0 - 1e-9:
        raise InsufficientSpan("samples must span at least two decades of T/tau")
    x = np.log(1.0 / taus)
    slope, intercept = np.polyfit(x, ws, 1)
    model = slope * x + intercept
    resid = float(np.max(np.abs(model - ws) / np.maximum(np.abs(ws), 1e-300)))
    return float(slope), float(intercept), resid
