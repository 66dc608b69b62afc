"""Command-line front end: reproducible runs driven by JSON configs.

Subcommands: solve | pressure | sample | limits | invert | phase.
Exit codes: 0 ok, 2 bad config, 3 numeric precondition failed, 4 i/o
error, 5 internal error.  Structured results are JSON, grids and samples
are CSV; every float is emitted with 17 significant digits so files
round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import exact, inverse, limits, model, solver
from .errors import ConfigError, ConfigParse, IoError, MeanFieldError, PreconditionError

_EPILOG = """exit codes:
  0  success
  2  configuration error (bad JSON, schema, model invariants)
  3  numeric precondition not met (degenerate maximum, lattice cap, ...)
  4  file could not be read or written
  5  internal error
"""


# --- emission ---------------------------------------------------------------


def _fmt_float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    return format(v, ".17g")


def dumps17(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits (round-trip safe)."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {dumps17(v, indent + 2)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        flat = all(isinstance(v, (int, float, np.integer, np.floating)) for v in seq)
        if flat:
            return "[" + ", ".join(dumps17(v) for v in seq) + "]"
        items = [f"{pad}  {dumps17(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    try:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _csv(rows: list[list], header: list[str]) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(_fmt_float(float(v)) if math.isfinite(v) else "nan")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# --- config helpers ----------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        raise ConfigParse("--config is required")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigParse("config must be a JSON object")
    return doc


def _model_from_config(doc: dict) -> model.ValidatedModel:
    if "model" not in doc:
        raise ConfigParse('config needs a "model" key')
    return model.validate_model(model.model_from_dict(doc["model"]))


def _solver_options(doc: dict, threads: int | None) -> solver.SolverOptions:
    opts_doc = dict(doc.get("solver", {}))
    if threads is not None:
        opts_doc["threads"] = threads
    try:
        return solver.SolverOptions.from_dict(opts_doc)
    except TypeError as exc:
        raise ConfigParse(f"bad solver options: {exc}") from exc


def _require(doc: dict, key: str):
    if key not in doc:
        raise ConfigParse(f'config needs a "{key}" key')
    return doc[key]


def _classification_dict(cls: solver.MaximumClassification) -> dict:
    return {
        "x": cls.point.x,
        "k": cls.k,
        "strength": cls.strength,
        "hessian": None if cls.hessian is None else cls.hessian,
        "f_value": cls.point.f_value,
        "fbar_value": cls.point.fbar_value,
        "is_global": cls.is_global,
    }


# --- subcommands --------------------------------------------------------------


def cmd_solve(args) -> int:
    doc = _load_config(args.config)
    m = _model_from_config(doc)
    opts = _solver_options(doc, args.threads)
    points = solver.solve_fixed_points(m, opts)
    result = solver.pressure_limit(m, opts)
    report = {
        "fixed_points": [{"x": p.x, "residual": p.residual,
                          "f_value": p.f_value, "fbar_value": p.fbar_value}
                         for p in points],
        "pressure_limit": result.limit_value,
        "method_agreement": result.method_agreement,
        "maxima": [_classification_dict(c) for c in result.maxima],
    }
    _write_text(args.out, dumps17(report))
    return 0


def cmd_pressure(args) -> int:
    doc = _load_config(args.config)
    m = _model_from_config(doc)
    n_values = [int(v) for v in _require(doc, "N_values")]
    opts = _solver_options(doc, args.threads)
    limit = solver.pressure_limit(m, opts).limit_value
    rows = []
    for N in n_values:
        sizes = m.species_sizes(N)
        p_n = exact.finite_pressure(m, sizes)
        lower = limit - (math.log(3.0) + 0.5 * float(np.sum(np.log(sizes)))) / N
        upper = limit + float(np.sum(np.log(sizes + 1))) / N
        rows.append([N, p_n, limit, lower, upper])
    _write_text(args.out, _csv(rows, ["N", "p_N", "limit", "lower_bound",
                                      "upper_bound"]))
    return 0


def cmd_sample(args) -> int:
    doc = _load_config(args.config)
    m = _model_from_config(doc)
    sizes = m.check_sizes(_require(doc, "sizes"))
    M = int(_require(doc, "M"))
    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        raise ConfigParse("sampling requires a seed (--seed or config)")
    samples = exact.exact_sample(m, sizes, M, int(seed))
    if args.out is None:
        raise ConfigParse("sample requires --out")
    exact.write_samples_csv(samples, args.out)
    return 0


def cmd_limits(args) -> int:
    doc = _load_config(args.config)
    m = _model_from_config(doc)
    sizes = m.check_sizes(_require(doc, "sizes"))
    opts = _solver_options(doc, args.threads)
    result = solver.pressure_limit(m, opts)
    cond = doc.get("conditioned")
    if cond is not None:
        center = np.asarray(cond["center"], dtype=float)
        radius = float(cond["radius"])
        cls = min(result.maxima,
                  key=lambda c: float(np.linalg.norm(c.point.x - center)))
        law = limits.build_limit_law(m, cls, conditioned=True, opts=opts)
        ball = radius
    else:
        if len(result.maxima) != 1:
            raise PreconditionError(
                "several global maxima: pass a conditioning ball")
        cls = result.maxima[0]
        law = limits.build_limit_law(m, cls, opts=opts)
        ball = None
    zlaw = exact.normalized_sum_law(m, sizes, cls.point.x, cls.k,
                                    condition_ball=ball)
    report = {
        "law": limits.law_to_dict(law),
        "k": cls.k,
        "center": cls.point.x,
        "sizes": [int(v) for v in sizes],
        "exact_cov": zlaw.cov(),
    }
    rows, header = [], None
    if m.n == 1:
        report["ks_distance"] = limits.ks_distance(zlaw, law)
        report["law_variance"] = (float(law.cov[0, 0])
                                  if isinstance(law, limits.Gaussian) else None)
        order = np.argsort(zlaw.points[:, 0], kind="stable")
        pts = zlaw.points[order, 0]
        probs = zlaw.probs[order]
        exact_cdf = np.cumsum(probs)
        law_cdf = limits.law_cdf_1d(law, pts)
        header = ["z", "probability", "exact_cdf", "law_cdf"]
        rows = [[p, q, c, lc] for p, q, c, lc in
                zip(pts, probs, exact_cdf, law_cdf)]
    else:
        header = [f"z_{l + 1}" for l in range(m.n)] + ["probability"]
        rows = [list(pt) + [q] for pt, q in zip(zlaw.points, zlaw.probs)]
    if args.out is None:
        raise ConfigParse("limits requires --out")
    _write_text(args.out, dumps17(report))
    csv_path = args.out + ".csv" if not args.out.endswith(".json") \
        else args.out[:-5] + ".csv"
    _write_text(csv_path, _csv(rows, header))
    return 0


def cmd_invert(args) -> int:
    doc = _load_config(args.config)
    if "alpha" in doc:
        alpha = np.asarray(doc["alpha"], dtype=float)
    elif "model" in doc:
        alpha = _model_from_config(doc).alpha
    else:
        raise ConfigParse('config needs "alpha" or "model"')
    if args.samples is None:
        raise ConfigParse("invert requires --samples FILE")
    samples = exact.read_samples_csv(args.samples)
    if args.ball is not None:
        try:
            values = [float(v) for v in args.ball.split(",")]
            center, radius = values[:-1], values[-1]
        except (ValueError, IndexError) as exc:
            raise ConfigParse("--ball expects c_1,...,c_n,radius") from exc
        est = inverse.invert_conditioned(samples, center, radius, alpha)
    else:
        est = inverse.mle_fit(samples, alpha)
    report = {
        "J": est.J_hat,
        "h": est.h_hat,
        "chi": est.chi_hat,
        "diagnostics": est.diagnostics,
        "log_likelihood": est.log_likelihood,
    }
    _write_text(args.out, dumps17(report))
    return 0


def cmd_phase(args) -> int:
    doc = _load_config(args.config)
    grid = [float(v) for v in _require(doc, "J_grid")]
    h = float(doc.get("h", 0.0))
    opts = _solver_options(doc, args.threads)
    table = solver.cw_phase_scan(grid, h, opts)
    rows = [[table["J"][i], table["mu"][i], table["pressure"][i],
             table["dp_dJ"][i], table["d2p"][i]]
            for i in range(len(table["J"]))]
    _write_text(args.out, _csv(rows, ["J", "mu", "pressure", "dp_dJ", "d2p"]))
    return 0


# --- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the JSON run configuration")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--seed", type=int, help="RNG seed for sampling commands")
    common.add_argument("--threads", type=int,
                        help="worker count; never changes numerical results")
    parser = argparse.ArgumentParser(
        prog="meanfield-lab",
        description="Forward and inverse toolkit for multi-species "
                    "mean-field spin models.",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="fixed points, classified maxima, pressure limit")
    sub.add_parser("pressure", parents=[common],
                   help="finite-size pressure ladder with sandwich bounds")
    sub.add_parser("sample", parents=[common],
                   help="exact i.i.d. draws of the per-species sums")
    sub.add_parser("limits", parents=[common],
                   help="limit law and comparison with the exact rescaled law")
    p_inv = sub.add_parser("invert", parents=[common],
                           help="recover (J, h) from a sample file")
    p_inv.add_argument("--samples", help="sample CSV produced by `sample`")
    p_inv.add_argument("--ball", help="conditioning ball c_1,...,c_n,radius")
    sub.add_parser("phase", parents=[common],
                   help="single-species scan over a coupling grid")
    return parser


_COMMANDS = {
    "solve": cmd_solve,
    "pressure": cmd_pressure,
    "sample": cmd_sample,
    "limits": cmd_limits,
    "invert": cmd_invert,
    "phase": cmd_phase,
}


def _emit_error(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(dumps17(doc) + "\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        return _emit_error(exc, 2)
    except PreconditionError as exc:
        return _emit_error(exc, 3)
    except (IoError, OSError) as exc:
        return _emit_error(exc, 4)
    except MeanFieldError as exc:
        return _emit_error(exc, 5)
    except Exception as exc:  # noqa: BLE001 - map anything else to code 5
        return _emit_error(exc, 5)


if __name__ == "__main__":
    sys.exit(main())
