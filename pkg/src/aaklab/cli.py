"""Command line driver: config in, moment/approximant/potential/diagnostic files out.

``aaklab run --config cfg.json`` runs the whole pipeline; the other
subcommands expose one stage each and print JSON to stdout.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, hankel, measure, potential, rational
from .quadrature import QuadratureError

METHODS = ("aak", "rational-l2")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
CERTIFICATE_TOL = 1e-6
RATE_TOL = 0.05
NUMERICAL_ERRORS = (
    hankel.HankelError, rational.OptimizationError, potential.EquilibriumError,
    analysis.AuditError, QuadratureError, measure.MeasureError, np.linalg.LinAlgError,
    FloatingPointError,
)


class ConfigError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class ExperimentConfig:
    measure: dict
    methods: list = field(default_factory=lambda: ["aak"])
    degrees: list = field(default_factory=list)
    truncation_N: int = 256
    panels_M: int = 800
    probes: list = field(default_factory=list)
    output_dir: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"])
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError([f"unknown config keys: {', '.join(unknown)}"])
        if "measure" not in data:
            raise ConfigError(["config needs a 'measure' entry"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
        return cls.from_dict(data)

    def spec(self) -> measure.MeasureSpec:
        return measure.MeasureSpec.from_dict(self.measure)

    def probe_points(self) -> list[complex]:
        return [complex(*p) if isinstance(p, (list, tuple)) else complex(p) for p in self.probes]


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate(config: ExperimentConfig) -> list[str]:
    """Every invariant violation of the config; empty when ``run`` may proceed."""
    out = []
    spec = None
    try:
        spec = config.spec()
    except (measure.MeasureError, ValueError, TypeError) as exc:
        out.append(f"measure: {exc}")
    methods = config.methods
    if not isinstance(methods, list) or not methods:
        out.append("methods must be a non-empty list")
    else:
        bad = [m for m in methods if m not in METHODS]
        if bad:
            out.append(f"unknown methods {bad}; choose from {list(METHODS)}")
        if len(set(methods)) != len(methods):
            out.append("methods contain duplicates")
    degrees = config.degrees
    if not isinstance(degrees, list) or not degrees:
        out.append("degrees must be a non-empty list")
        degrees = []
    elif not all(_is_int(d) and d >= 1 for d in degrees):
        out.append("degrees must be positive integers")
        degrees = []
    elif any(b <= a for a, b in zip(degrees, degrees[1:])):
        out.append("degrees must be sorted ascending without repeats")
    N = config.truncation_N
    if not _is_int(N) or N < 2:
        out.append("truncation_N must be an integer >= 2")
    elif degrees and N <= 2 * max(degrees):
        out.append(f"truncation_N = {N} must exceed 2 * max(degrees) = {2 * max(degrees)}")
    if not _is_int(config.panels_M) or config.panels_M < 50:
        out.append("panels_M must be an integer >= 50")
    if not _is_int(config.seed) or config.seed < 0:
        out.append("seed must be a non-negative integer")
    if not isinstance(config.output_dir, str) or not config.output_dir:
        out.append("output_dir must be a non-empty string")
    try:
        probes = config.probe_points()
    except (TypeError, ValueError):
        out.append("probes must be numbers or [re, im] pairs")
        probes = []
    if spec is not None:
        for z in probes:
            if spec.distance_to_support(np.array([z]))[0] < analysis.PROBE_CLEARANCE:
                out.append(f"probe {z} is too close to the support")
            elif analysis.distance_to_reflection(z, spec.support) < analysis.PROBE_CLEARANCE:
                out.append(f"probe {z} is too close to the reflected support")
            elif any(abs(z - p.eta) < analysis.PROBE_CLEARANCE for p in spec.poles):
                out.append(f"probe {z} is too close to a pole of F")
    return out


# -- formatting ------------------------------------------------------------------

def _num(x):
    """JSON-ready value with shortest round-trip floats; complex as [re, im]."""
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else None
    return x


def _dumps(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=True) + "\n"


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- stages ------------------------------------------------------------------------

def stage_moments(config: ExperimentConfig):
    spec = config.spec()
    ms = measure.moments(spec, config.truncation_N)
    record = {"N": ms.N, "tail_bound": ms.tail_bound, "moments": list(ms.m)}
    return ms, record


def stage_equilibrium(config: ExperimentConfig):
    spec = config.spec()
    mu = potential.equilibrium_measure(spec.support, config.panels_M)
    x = mu.midpoints
    U = potential.green_potential(mu, x)
    rows = [(xi, d, u) for xi, d, u in zip(x, mu.density, U)]
    return mu, rows


def _aak_family(ms, degrees):
    triples = hankel.singular_triples(hankel.build_hankel(ms), max(degrees))
    return {n: hankel.aak_approximant(ms, triples[n]) for n in degrees}


def _l2_init(aak_poles, n):
    init = list(np.asarray(aak_poles, dtype=complex)[:n])
    k = 0
    while len(init) < n:
        # reducible AAK vector: fill with spread-out points away from the rest
        init.append(0.3 * np.exp(2j * np.pi * (k + 0.5) / n))
        k += 1
    init = np.array(init)
    mod = np.abs(init)
    return np.where(mod > 0.99, init / np.maximum(mod, 1e-300) * 0.99, init)


def _l2_family(spec, ms, degrees, seed, threads, trace, aak=None):
    target = rational.circle_target(spec, rational.grid_size(ms.N, max(degrees)))
    if aak is None:
        aak = _aak_family(ms, degrees)

    def solve(n):
        init = _l2_init(aak[n].poles, n)
        return rational.multistart(target, n, init, seed=seed + n, threads=1, record_trace=trace)

    if threads > 1 and len(degrees) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = dict(zip(degrees, pool.map(solve, degrees)))
    else:
        points = {n: solve(n) for n in degrees}
    return target, points


def _l2_errors(target, approx):
    err = np.abs(target.values - approx(target.nodes))
    return float(err.max()), float(err.min())


def _certificates_aak(spec, a):
    val, scale = hankel.orthogonality_residuals(spec, a.split, a.triple.v)
    return float(np.max(np.abs(val) / scale)) if len(val) else 0.0


def _certificates_l2(spec, target, point):
    val, scale = rational.l2_orthogonality_residual(spec, point)
    orth = float(np.max(np.abs(val) / scale)) if len(val) else 0.0
    interp = rational.interpolation_residual(target, point)
    return orth, float(np.max(interp) / target.norm)


def _diagnose(spec, mu, approximants, probes, extra=None):
    """Per-degree pole and certificate records for one method."""
    records = []
    v_phi = measure.argument_variation(spec)
    for n in sorted(approximants):
        a = approximants[n]
        w = a.split.w if a.method == "aak" and a.split is not None else None
        pd = analysis.weak_star_distance(a.poles, mu, n=n)
        ab = analysis.angle_bound_audit(a.poles, spec, w, v_phi=v_phi)
        rec = {
            "n": n,
            "flags": list(a.flags),
            "ks_distance": pd.ks_distance,
            "outliers": int(len(pd.outliers)),
            "near_S": int(len(pd.near_S)),
            "max_imag": pd.max_imag,
            "attraction": [
                {"eta": p.eta, "count": int(np.sum(np.abs(np.asarray(a.poles) - p.eta) < analysis.DEFAULT_RADIUS))}
                for p in spec.poles
            ],
            "angle_bound": {"lhs": ab.lhs, "rhs": ab.rhs, "ok": ab.ok},
        }
        if extra is not None:
            rec.update(extra[n])
        field_rows = []
        for z in probes:
            try:
                row = analysis.capacity_convergence_field(spec, a, mu, [z])[0]
                field_rows.append({"z": z, "observed": row.observed, "predicted": row.predicted,
                                   "ratio": row.ratio})
            except (analysis.AuditError, measure.MeasureError) as exc:
                field_rows.append({"z": z, "error": str(exc)})
        rec["capacity_field"] = field_rows
        records.append(rec)
    return records


def _rates(approximants, capacity):
    errors = {n: a.sigma for n, a in approximants.items()}
    flagged = [n for n, a in approximants.items() if a.flags]
    try:
        table = analysis.rate_table(errors, capacity, flagged)
    except ValueError:
        predicted = potential.rate_from_capacity(capacity)
        rows = [(n, e, e ** (1 / (2 * n)) if e > 0 else 0.0, predicted, False)
                for n, e in sorted(errors.items())]
        return None, rows
    rows = [(r.n, r.error, r.root_rate, r.predicted, r.used) for r in table.records]
    return table, rows


def run_pipeline(config: ExperimentConfig, threads: int = 1, trace: bool = False) -> dict[str, str]:
    """All output files as a mapping of relative path to text."""
    spec = config.spec()
    degrees = list(config.degrees)
    probes = config.probe_points()
    files = {}

    ms, mrec = stage_moments(config)
    files["moments.json"] = _dumps(mrec)
    mu, eq_rows = stage_equilibrium(config)
    files["equilibrium.csv"] = _csv(["x", "density", "U"], eq_rows)

    aak = None
    if "aak" in config.methods or "rational-l2" in config.methods:
        # AAK poles also seed the L2 optimizer
        aak = _aak_family(ms, degrees)
    families = {}
    extras = {}
    error_rows = []
    if "aak" in config.methods:
        families["aak"] = aak
        extras["aak"] = {}
        for n in degrees:
            a = aak[n]
            ce = hankel.circle_error(ms, a)
            error_rows.append(("aak", n, a.sigma, ce.max, ce.min))
            extras["aak"][n] = {"orthogonality": _certificates_aak(spec, a)}
    if "rational-l2" in config.methods:
        target, points = _l2_family(spec, ms, degrees, config.seed, threads, trace, aak)
        fam = {}
        extras["rational-l2"] = {}
        for n in degrees:
            pt = points[n]
            a = pt.approximant()
            fam[n] = a
            mx, mn = _l2_errors(target, a)
            error_rows.append(("rational-l2", n, a.sigma, mx, mn))
            orth, interp = _certificates_l2(spec, target, pt)
            extras["rational-l2"][n] = {"orthogonality": orth, "interpolation": interp,
                                        "converged": pt.converged, "iterations": pt.iterations}
            if trace:
                files[f"traces/rational-l2_{n}.csv"] = _csv(["iter", "objective", "grad_norm"], pt.trace)
        families["rational-l2"] = fam

    for method, fam in families.items():
        for n in degrees:
            files[f"approximants/{method}_{n}.json"] = _dumps(fam[n].to_dict())
    files["errors.csv"] = _csv(["method", "n", "sigma", "max_err", "min_err"], error_rows)

    rate_rows = []
    diagnostics = {}
    audits = {}
    fitted = {}
    predicted = potential.rate_from_capacity(mu.capacity)
    for method, fam in families.items():
        table, rows = _rates(fam, mu.capacity)
        rate_rows += [(method,) + r for r in rows]
        fitted[method] = None if table is None else table.fitted_limit
        recs = _diagnose(spec, mu, fam, probes, extras[method])
        diagnostics[method] = recs
        clean = [r for r in recs if not r["flags"]]
        a = {
            "angle_bound": all(r["angle_bound"]["ok"] for r in clean),
            "orthogonality": all(r["orthogonality"] <= CERTIFICATE_TOL for r in clean),
        }
        if method == "rational-l2":
            a["interpolation"] = all(r["interpolation"] <= CERTIFICATE_TOL for r in clean)
        if table is not None:
            a["rate"] = abs(table.fitted_limit - predicted) <= RATE_TOL
        if spec.poles:
            try:
                att = analysis.attraction_audit({n: fam[n].poles for n in degrees}, spec)
                diagnostics[f"{method}:attraction"] = [r.to_dict() for r in att]
                a["attraction"] = all(r.lower_ok for r in att)
            except analysis.AuditError as exc:
                diagnostics[f"{method}:attraction"] = {"error": str(exc)}
        audits[method] = a
    files["rates.csv"] = _csv(["method", "n", "error", "root_rate", "predicted", "used"], rate_rows)
    files["diagnostics.json"] = _dumps(diagnostics)
    files["summary.json"] = _dumps({
        "capacity": mu.capacity,
        "predicted_rate": predicted,
        "fitted_rate": fitted,
        "audits": audits,
        "degrees": degrees,
        "methods": list(config.methods),
        "truncation_N": config.truncation_N,
        "panels_M": config.panels_M,
    })
    return files


def write_outputs(files: dict[str, str], out: Path) -> None:
    """Write into a sibling temporary directory, then move it into place."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        for rel in sorted(files):
            path = tmp / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(files[rel])
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


# -- entry point -------------------------------------------------------------------

def _fail(code: int, kind: str, message: str, **extra) -> int:
    record = {"error": kind, "message": message, "exit_code": code}
    record.update(extra)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def _load(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    problems = validate(config)
    if problems:
        raise ConfigError(problems)
    return config


def _cmd_run(args) -> int:
    config = _load(args)
    files = run_pipeline(config, threads=args.threads, trace=args.trace)
    write_outputs(files, Path(args.out or config.output_dir))
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = ExperimentConfig.load(args.config)
    problems = validate(config)
    print(json.dumps({"violations": problems}, indent=2))
    return EXIT_VALIDATION if problems else EXIT_OK


def _cmd_moments(args) -> int:
    _, record = stage_moments(_load(args))
    sys.stdout.write(_dumps(record))
    return EXIT_OK


def _cmd_equilibrium(args) -> int:
    mu, rows = stage_equilibrium(_load(args))
    if args.out:
        write_outputs({"equilibrium.csv": _csv(["x", "density", "U"], rows)}, Path(args.out))
    sys.stdout.write(_dumps({"capacity": mu.capacity,
                             "predicted_rate": potential.rate_from_capacity(mu.capacity)}))
    return EXIT_OK


def _cmd_approx(args) -> int:
    config = _load(args)
    if args.method not in config.methods:
        config.methods = [args.method]
    ms, _ = stage_moments(config)
    if args.method == "aak":
        fam = _aak_family(ms, config.degrees)
    else:
        _, points = _l2_family(config.spec(), ms, config.degrees, config.seed, args.threads, False)
        fam = {n: p.approximant() for n, p in points.items()}
    sys.stdout.write(_dumps([fam[n].to_dict() for n in config.degrees]))
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    config = _load(args)
    ms, _ = stage_moments(config)
    spec = config.spec()
    mu = potential.equilibrium_measure(spec.support, config.panels_M)
    fam = _aak_family(ms, config.degrees)
    extra = {n: {"orthogonality": _certificates_aak(spec, fam[n])} for n in config.degrees}
    sys.stdout.write(_dumps(_diagnose(spec, mu, fam, config.probe_points(), extra)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aaklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.set_defaults(func=func)
        return p

    p = add("run", _cmd_run, "run the whole pipeline and write all outputs")
    p.add_argument("--out", help="output directory (default: output_dir from the config)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="write optimizer traces")
    add("validate", _cmd_validate, "list config violations")
    add("moments", _cmd_moments, "print the truncated moment sequence")
    p = add("equilibrium", _cmd_equilibrium, "solve for the Green equilibrium measure")
    p.add_argument("--out", help="also write equilibrium.csv here")
    p = add("approx", _cmd_approx, "print approximants for the configured degrees")
    p.add_argument("--method", choices=METHODS, default="aak")
    p.add_argument("--threads", type=int, default=1)
    add("diagnose", _cmd_diagnose, "print pole diagnostics for the AAK approximants")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        return _fail(EXIT_VALIDATION, "validation", "--threads must be at least 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc), violations=exc.violations)
    except NUMERICAL_ERRORS as exc:
        return _fail(EXIT_NUMERICAL, "numerical", f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
