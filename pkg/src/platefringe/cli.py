"""Command line surface: scenario files, sweeps, oracle cross-checks, CSV/JSON.

Scenario grammar: sectioned key = value text with sections [particle],
[trajectory], [geometry], [numerics], [oracle]; # and ; start comments;
numbers accept scientific notation; vectors are comma triples. Unknown keys,
duplicate keys, and malformed lines are hard errors with file positions.

Exit codes: 0 success, 2 scenario/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .decoherence import DIPOLE_APPROX, FULL, SweepPoint, compute, sweep
from .oracle import McVarianceBlowup, mc_w_first_principles
from .quadrature import CutoffRequired, QuadratureFailure
from .scenario import (Charge, Dipole, McConfig, Scenario, ScenarioError,
                       ScenarioValidationError, validate)
from . import trajectories as traj

CSV_COLUMNS = ("scenario_id", "orientation", "z0", "method", "W_vac",
               "W_boundary", "W_total", "visibility", "emission_prob_equiv",
               "err_est", "mc_value", "mc_stderr", "mc_verdict")

_SCHEMA = {
    "particle": {"kind", "e2", "p", "m"},
    "trajectory": {"kind", "R", "T", "v", "tau", "T_pulse", "T_sep", "N", "Omega"},
    "geometry": {"plate", "z0", "j_hat"},
    "numerics": {"rel_tol", "abs_tol", "k_max", "max_subdivisions", "method"},
    "oracle": {"samples", "seed", "chunk_size"},
}

_VECTOR_KEYS = {"p", "m", "j_hat"}
_STRING_KEYS = {"kind", "plate", "method"}
_INT_KEYS = {"N", "samples", "seed", "chunk_size", "max_subdivisions"}


class ParseError(ScenarioError):
    def __init__(self, message, path, line, column=1):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.line = line
        self.column = column


class UnknownKey(ParseError):
    pass


class DuplicateKey(ParseError):
    pass


def parse_scenario_file(path) -> tuple[dict, dict]:
    """Parse the sectioned grammar into typed section dicts.

    Returns (sections, locations) where locations maps (section, key) to the
    source line for error reporting downstream.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    sections: dict[str, dict] = {}
    locations: dict[tuple[str, str], int] = {}
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", path, lineno)
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise UnknownKey(f"unknown section [{name}]", path, lineno)
            if name in sections:
                raise DuplicateKey(f"duplicate section [{name}]", path, lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", path, lineno)
        if current is None:
            raise ParseError("key outside of any section", path, lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[current]:
            raise UnknownKey(f"unknown key {key!r} in [{current}]", path, lineno,
                             column=rawline.find(key) + 1)
        if key in sections[current]:
            raise DuplicateKey(f"duplicate key {key!r} in [{current}]", path,
                               lineno, column=rawline.find(key) + 1)
        sections[current][key] = _coerce(key, value, path, lineno)
        locations[(current, key)] = lineno
    return sections, locations


def _coerce(key, value, path, lineno):
    if key in _STRING_KEYS:
        return value
    if key in _VECTOR_KEYS:
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 3:
            raise ParseError(f"{key} must be a comma triple", path, lineno)
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ParseError(f"bad vector component in {key}", path, lineno) from None
    if key in _INT_KEYS:
        try:
            return int(float(value))
        except ValueError:
            raise ParseError(f"bad integer for {key}: {value!r}", path, lineno) from None
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"bad number for {key}: {value!r}", path, lineno) from None


# ---------------------------------------------------------------------------
# canonical form and manifest
# ---------------------------------------------------------------------------

def canonical_mapping(s: Scenario) -> dict:
    particle: dict = {}
    if isinstance(s.coupling, Charge):
        particle = {"kind": "charge", "e2": s.coupling.e2}
    elif isinstance(s.coupling, Dipole):
        particle = {"kind": "dipole", "p": list(s.coupling.p), "m": list(s.coupling.m)}
    t = s.trajectory
    if isinstance(t, traj.Adiabatic):
        trajectory = {"kind": "adiabatic", "R": t.R, "T": t.T}
    elif isinstance(t, traj.PiecewiseTrapezoid):
        trajectory = {"kind": "trapezoid", "v": t.v, "T": t.T, "tau": t.tau}
    else:
        trajectory = {"kind": "pulse_train", "R": t.R, "T_pulse": t.T_pulse,
                      "T_sep": t.T_sep, "N": t.N, "Omega": t.Omega}
    out = {
        "particle": particle,
        "trajectory": trajectory,
        "geometry": {"plate": "present" if s.geometry.plate else "absent",
                     "z0": s.geometry.z0, "j_hat": list(s.geometry.j_hat)},
        "numerics": {"rel_tol": s.numerics.rel_tol, "abs_tol": s.numerics.abs_tol,
                     "k_max": s.numerics.k_max,
                     "max_subdivisions": s.numerics.max_subdivisions},
    }
    if s.oracle_numerics is not None:
        out["oracle"] = {"samples": s.oracle_numerics.samples,
                         "seed": s.oracle_numerics.seed,
                         "chunk_size": s.oracle_numerics.chunk_size}
    return out


def config_hash(s: Scenario) -> str:
    payload = json.dumps(canonical_mapping(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def scenario_to_text(s: Scenario) -> str:
    """Render the canonicalized scenario back into the file grammar."""
    lines = []
    for section, fields in canonical_mapping(s).items():
        lines.append(f"[{section}]")
        for key, val in fields.items():
            if val is None:
                continue
            if isinstance(val, (list, tuple)):
                val = ",".join(repr(float(c)) for c in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def run_manifest(s: Scenario, scenario_id: str, regularization) -> dict:
    return {
        "scenario_id": scenario_id,
        "config_hash": config_hash(s),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "regularization": {k: v for k, v in regularization},
    }


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="platefringe",
                                 description="decoherence near a conducting plate")
    sub = ap.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="evaluate a scenario file")
    runp.add_argument("scenario", type=Path)
    runp.add_argument("--sweep", default=None,
                      help="axis=a:b:n (linear) or axis=v1,v2,... "
                           "(axis: z0|orientation|tau|N)")
    runp.add_argument("--log-axis", action="store_true",
                      help="geometric spacing for a:b:n sweeps")
    runp.add_argument("--method", choices=[DIPOLE_APPROX, FULL], default=None)
    runp.add_argument("--tau", type=float, default=None,
                      help="override trapezoid ramp time")
    runp.add_argument("--kmax", type=float, default=None,
                      help="override radial cutoff")
    runp.add_argument("--oracle", action="store_true",
                      help="append Monte Carlo cross-check columns")
    runp.add_argument("--mc-samples", type=int, default=None)
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--out", type=Path, default=None)
    runp.add_argument("--emit-plot-data", action="store_true")
    runp.add_argument("--format", choices=["csv", "json"], default="csv")
    runp.add_argument("--workers", type=int, default=None,
                      help="sweep worker processes (default: machine parallelism)")
    return ap


def _parse_sweep(spec: str, log_axis: bool):
    if "=" not in spec:
        raise ScenarioError(f"sweep spec must be axis=..., got {spec!r}")
    axis, _, rest = spec.partition("=")
    axis = axis.strip()
    if axis not in ("z0", "orientation", "tau", "N"):
        raise ScenarioError(f"unknown sweep axis {axis!r}")
    if axis == "orientation":
        return axis, [v.strip() for v in rest.split(",") if v.strip()]
    if ":" in rest:
        parts = rest.split(":")
        if len(parts) != 3:
            raise ScenarioError(f"range sweep needs a:b:n, got {rest!r}")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ScenarioError("sweep point count must be at least 1")
        if n == 1:
            vals = [a]
        elif log_axis:
            if a <= 0 or b <= 0:
                raise ScenarioError("log-axis sweep needs positive endpoints")
            ratio = (b / a) ** (1.0 / (n - 1))
            vals = [a * ratio ** i for i in range(n)]
        else:
            step = (b - a) / (n - 1)
            vals = [a + step * i for i in range(n)]
    else:
        vals = [float(v) for v in rest.split(",") if v.strip()]
    if axis == "N":
        return axis, [int(round(v)) for v in vals]
    return axis, vals


def _apply_overrides(s: Scenario, args) -> Scenario:
    if args.tau is not None:
        if not isinstance(s.trajectory, traj.PiecewiseTrapezoid):
            raise ScenarioError("--tau applies to trapezoid trajectories only")
        s = dataclasses.replace(s, trajectory=dataclasses.replace(
            s.trajectory, tau=args.tau))
    if args.kmax is not None:
        s = dataclasses.replace(s, numerics=dataclasses.replace(
            s.numerics, k_max=args.kmax))
    if args.mc_samples is not None or args.seed is not None:
        base = s.oracle_numerics or McConfig()
        s = dataclasses.replace(s, oracle_numerics=McConfig(
            samples=args.mc_samples if args.mc_samples is not None else base.samples,
            seed=args.seed if args.seed is not None else base.seed,
            chunk_size=base.chunk_size))
    return s


def _point_row(scenario_id, s: Scenario, point: SweepPoint, axis, method,
               with_oracle):
    geo_z0 = s.geometry.z0
    orientation = s.geometry.orientation
    if axis == "z0":
        geo_z0 = float(point.value)
    elif axis == "orientation":
        orientation = str(point.value)
    r = point.result
    row = {
        "scenario_id": scenario_id,
        "orientation": orientation,
        "z0": geo_z0,
        "method": r.method if r else method,
        "W_vac": r.W_vac if r else None,
        "W_boundary": r.W_boundary if r else None,
        "W_total": r.W_total if r else None,
        "visibility": r.visibility if r else None,
        "emission_prob_equiv": r.emission_prob_equiv if r else None,
        "err_est": r.err_est if r else None,
        "mc_value": None, "mc_stderr": None, "mc_verdict": None,
    }
    return row


def _attach_oracle(row, s: Scenario, point_scenario: Scenario):
    mc = mc_w_first_principles(point_scenario, point_scenario.oracle_numerics)
    row["mc_value"] = mc.total.value
    row["mc_stderr"] = mc.total.std_error
    if row["W_total"] is not None:
        ok = abs(row["W_total"] - mc.total.value) <= 3.0 * mc.total.std_error
        row["mc_verdict"] = "ok" if ok else "fail"
    return row


def _write_rows(rows, out: Path, fmt: str):
    if fmt == "json":
        payload = [{c: row[c] for c in CSV_COLUMNS} for row in rows]
        out.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n",
                       encoding="utf-8")
        return
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sweep_worker(payload):
    s, axis, value, method = payload
    pts = sweep(s, axis, [value], method)
    return pts[0]


def _run_sweep(s: Scenario, axis, values, method, workers):
    if workers is None:
        workers = min(os.cpu_count() or 1, 8)
    if workers <= 1 or len(values) <= 1:
        return sweep(s, axis, values, method)
    payloads = [(s, axis, v, method) for v in values]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, payloads))


def _plot_series(s: Scenario, axis, values, method):
    """Visibility curves for the companion plot file: both orientations when
    sweeping z0, otherwise the single swept curve."""
    series = []
    if axis == "z0":
        for orient, j_hat in (("parallel", (1.0, 0.0, 0.0)),
                              ("perpendicular", (0.0, 0.0, 1.0))):
            s_o = dataclasses.replace(s, geometry=dataclasses.replace(
                s.geometry, j_hat=j_hat, orientation=""))
            for pt in sweep(s_o, axis, values, method):
                if pt.result:
                    series.append((orient, float(pt.value), pt.result.visibility))
    else:
        for pt in sweep(s, axis, values, method):
            if pt.result:
                x = float(pt.value) if not isinstance(pt.value, str) else pt.value
                series.append((axis, x, pt.result.visibility))
    return series


def run(argv) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sections, _ = parse_scenario_file(args.scenario)
        method = args.method or sections.get("numerics", {}).pop("method", DIPOLE_APPROX)
        sections.get("numerics", {}).pop("method", None)
        s = validate(sections)
        s = _apply_overrides(s, args)
    except (ScenarioError, ScenarioValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    scenario_id = args.scenario.stem
    out = args.out or Path(f"{scenario_id}_results.{args.format}")

    try:
        if args.sweep:
            axis, values = _parse_sweep(args.sweep, args.log_axis)
            points = _run_sweep(s, axis, values, method, args.workers)
            rows = []
            for pt in points:
                row = _point_row(scenario_id, s, pt, axis, method, args.oracle)
                if args.oracle and pt.result is not None:
                    from .decoherence import _scenario_at
                    row = _attach_oracle(row, s, _scenario_at(s, axis, pt.value))
                rows.append(row)
            failed = [pt for pt in points if pt.result is None]
            if args.emit_plot_data:
                series = _plot_series(s, axis, values, method)
                plot_path = out.with_suffix(out.suffix + ".plot.csv")
                lines = ["series,x,y"]
                lines += [f"{name},{_fmt(x)},{_fmt(y)}" for name, x, y in series]
                plot_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            _write_rows(rows, out, args.format)
            manifest = run_manifest(s, scenario_id, _first_regularization(points))
            out.with_suffix(out.suffix + ".manifest.json").write_text(
                json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
            print(f"sweep {axis}: {len(rows) - len(failed)}/{len(rows)} points "
                  f"written to {out}")
            if failed:
                for pt in failed:
                    print(f"point {pt.value}: {pt.error}", file=sys.stderr)
                return 3
            return 0
        result = compute(s, method)
        pt = SweepPoint(value=s.geometry.z0, result=result)
        row = _point_row(scenario_id, s, pt, None, method, args.oracle)
        if args.oracle:
            row = _attach_oracle(row, s, s)
        _write_rows([row], out, args.format)
        manifest = run_manifest(s, scenario_id, result.regularization)
        out.with_suffix(out.suffix + ".manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        if args.emit_plot_data:
            plot_path = out.with_suffix(out.suffix + ".plot.csv")
            plot_path.write_text("series,x,y\nvisibility,"
                                 f"{_fmt(s.geometry.z0)},{_fmt(result.visibility)}\n",
                                 encoding="utf-8")
        verdict = f" mc={row['mc_verdict']}" if args.oracle else ""
        print(f"W_vac={result.W_vac:.6e} W_boundary={result.W_boundary:.6e} "
              f"W_total={result.W_total:.6e} visibility={result.visibility:.9f}"
              f"{verdict}")
        return 0
    except (QuadratureFailure, CutoffRequired, McVarianceBlowup, ValueError,
            AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _first_regularization(points):
    for pt in points:
        if pt.result is not None:
            return pt.result.regularization
    return (("mode", "none"),)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
