"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
Relative ``--out`` paths land in ``$FREDKIT_OUTPUT_DIR`` when it is set.
"""
import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats

from . import __version__
from .data import CountSeries, ingest, summary_csv
from .decompose import decompose
from .errors import NumericalError, ValidationError
from .estimation import binbar_gmm, binbar_ols, nbar_mle, nbar_ols
from .models.counts import BINBAR_FIELDS, InarParams, inar_feld_limit
from .registry import build_model, model_params
from .simulation import simulate
from .tables import normalized_shares

log = logging.getLogger("fredkit")

OUTPUT_DIR_ENV = "FREDKIT_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

DEFAULT_RHO_GRID = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))
DEFAULT_U_GRID = tuple(round(0.1 + 0.3 * i, 2) for i in range(10))

ESTIMATORS = {
    ("nbar", "ols"): nbar_ols,
    ("nbar", "mle"): nbar_mle,
    ("nbar2", "ols"): binbar_ols,
    ("nbar2", "gmm"): binbar_gmm,
}


# -- small helpers ------------------------------------------------------------

def output_path(path):
    if path is None or path == "-":
        return None
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root and not os.path.isabs(path):
        os.makedirs(root, exist_ok=True)
        return os.path.join(root, path)
    return path


def emit(text, path):
    """Write to ``path`` (resolved against the output dir) or to stdout."""
    target = output_path(path)
    if target is None:
        sys.stdout.write(text)
        return None
    parent = os.path.dirname(target)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(target, "w") as fh:
        fh.write(text)
    log.info("wrote %s", target)
    return target


def parse_vector(text, name):
    """Number, comma list or JSON array -> float array (scalars stay 1-element)."""
    if text is None:
        return None
    text = str(text).strip()
    try:
        val = json.loads(text) if text.startswith("[") else [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"--{name}: cannot parse {text!r} as numbers") from exc
    arr = np.asarray(val, dtype=float)
    return arr[0] if arr.size == 1 and arr.ndim == 1 else arr


def parse_grid(text, name):
    arr = np.atleast_1d(parse_vector(text, name))
    if arr.ndim != 1:
        raise ValidationError(f"--{name} must be a flat list")
    return [float(x) for x in arr]


def read_json(path_or_text, what):
    text = path_or_text
    if not text.lstrip().startswith("{"):
        try:
            with open(path_or_text) as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read {what}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{what} is not valid JSON: {exc}") from exc


def model_from_fit(model_id, fit):
    """Model implied by a saved estimation result."""
    theta = fit.get("theta", {})
    if model_id == "nbar" and {"rho", "delta"} <= set(theta):
        return build_model("nbar", {"rho": theta["rho"], "delta": theta["delta"]})
    if model_id == "nbar2" and set(BINBAR_FIELDS) <= set(theta):
        return build_model("nbar2", {f: theta[f] for f in BINBAR_FIELDS})
    raise ValidationError(f"the fitted result ({fit.get('method')}) does not define a {model_id} model")


def resolve_model(model_id, params, fit):
    if (params is None) == (fit is None):
        raise ValidationError("give exactly one of --params or --fit")
    if fit is not None:
        return model_from_fit(model_id, read_json(fit, "fit result"))
    return build_model(model_id, read_json(params, "parameters"))


def table_text(table, fmt):
    return table.to_json() + "\n" if fmt == "json" else table.to_csv()


def shares_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["h", "k", "share"])
    for (k, h), s in sorted(normalized_shares(table).items(), key=lambda kv: (kv[0][1], kv[0][0])):
        writer.writerow([h, k, repr(s)])
    return buf.getvalue()


def _shares_name(out):
    root, ext = os.path.splitext(out)
    return f"{root}_shares{ext or '.csv'}"


def log_config(command, config):
    log.info("resolved config %s", json.dumps({"command": command, **config}, sort_keys=True,
                                              default=str))


# -- commands -----------------------------------------------------------------

def cmd_decompose(args):
    model = resolve_model(args.model, args.params, args.fit)
    argument = parse_vector(args.arg, "arg")
    state = parse_vector(args.state, "state")
    log_config("decompose", {"model": model_params(model), "kind": args.kind,
                             "arg": argument, "state": state, "horizon": args.horizon,
                             "format": args.format, "out": args.out})
    table = decompose(model, args.kind, argument, state, args.horizon)
    emit(table_text(table, args.format), args.out)
    if args.shares:
        emit(shares_csv(table), _shares_name(args.out) if args.out else None)
    return EXIT_OK


def cmd_estimate(args):
    key = (args.model, args.method)
    if key not in ESTIMATORS:
        valid = ", ".join(m for mid, m in ESTIMATORS if mid == args.model)
        raise ValidationError(f"method {args.method!r} is not available for {args.model}; use {valid}")
    series = ingest(args.input, args.frequency)
    want = 1 if args.model == "nbar" else 2
    if series.n_series != want:
        raise ValidationError(f"{args.model} needs {want} column(s); the input has {series.n_series}")
    log_config("estimate", {"input": args.input, "frequency": args.frequency,
                            "model": args.model, "method": args.method, "out": args.out})
    sys.stderr.write(summary_csv(series))
    result = ESTIMATORS[key](series)
    if args.out:
        root, _ = os.path.splitext(args.out)
        emit(result.to_json() + "\n", root + ".json")
        emit(result.to_csv(), root + ".csv")
    else:
        emit(result.to_json() + "\n", None)
    return EXIT_OK


def _scenario_cells(spec, model):
    args_grid = spec.get("arguments")
    states = spec.get("states")
    kind = spec.get("kind", "feld")
    if args_grid is None and kind != "fevd":
        raise ValidationError("scenario spec needs an 'arguments' list")
    if not states:
        raise ValidationError("scenario spec needs a non-empty 'states' list")
    args_grid = args_grid if args_grid is not None else [None]
    return [(a, s) for a in args_grid for s in states]


def _cell_label(arg, state):
    def fmt(v):
        if v is None:
            return "default"
        return "_".join(f"{x:g}" for x in np.atleast_1d(np.asarray(v, dtype=float)))
    return f"u={fmt(arg)};y={fmt(state)}"


def run_scenario(spec, horizon=None, workers=None):
    """Evaluate every (argument, state) cell of a scenario spec.

    Returns ``(labels, tables)`` in spec order.
    """
    if "model" not in spec:
        raise ValidationError("scenario spec needs a 'model'")
    if "fit" in spec:
        model = model_from_fit(spec["model"], read_json(spec["fit"], "fit result"))
    else:
        model = build_model(spec["model"], spec.get("params", {}))
    kind = spec.get("kind", "feld")
    H = int(horizon if horizon is not None else spec.get("horizon", 10))
    cells = _scenario_cells(spec, model)

    def run(cell):
        arg, state = cell
        return decompose(model, kind, None if arg is None else np.asarray(arg, dtype=float),
                         np.asarray(state, dtype=float), H)

    # evaluation may be parallel; results keep spec order
    with ThreadPoolExecutor(max_workers=workers or min(8, len(cells))) as pool:
        tables = list(pool.map(run, cells))
    return [_cell_label(*c) for c in cells], tables


def comparison_csv(labels, tables):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["h", *labels])
    for h in tables[0].horizons:
        writer.writerow([h, *[repr(float(t.totals[h])) for t in tables]])
    return buf.getvalue()


def cmd_scenario(args):
    spec = read_json(args.spec, "scenario spec")
    horizon = args.horizon if args.horizon is not None else spec.get("horizon", 10)
    log_config("scenario", {"spec": spec, "horizon": horizon, "out_dir": args.out_dir})
    labels, tables = run_scenario(spec, horizon)
    out_dir = args.out_dir
    if out_dir is None:
        emit(comparison_csv(labels, tables), None)
        return EXIT_OK
    for i, tab in enumerate(tables):
        emit(tab.to_csv(), os.path.join(out_dir, f"cell_{i:03d}.csv"))
        try:
            emit(shares_csv(tab), os.path.join(out_dir, f"cell_{i:03d}_shares.csv"))
        except ValidationError as exc:
            log.warning("no share view for cell %d: %s", i, exc)
    emit(comparison_csv(labels, tables), os.path.join(out_dir, "comparison.csv"))
    return EXIT_OK


def gaussian_ranks(x):
    """Phi^{-1}(rank / (T + 1)) with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    return stats.norm.ppf(stats.rankdata(x, method="average") / (x.size + 1))


def _column_index(series, token):
    if token in series.labels:
        return series.labels.index(token)
    try:
        j = int(token) - 1
    except ValueError as exc:
        raise ValidationError(f"unknown column {token!r}") from exc
    if not 0 <= j < series.n_series:
        raise ValidationError(f"column {token} outside 1..{series.n_series}")
    return j


def cmd_ranks(args):
    series = ingest(args.input, args.frequency)
    tokens = [t.strip() for t in args.cols.split(",")]
    if len(tokens) != 2:
        raise ValidationError("--cols takes exactly two columns")
    idx = [_column_index(series, t) for t in tokens]
    log_config("ranks", {"input": args.input, "cols": tokens, "out": args.out})
    ranks = np.column_stack([gaussian_ranks(series.column(j)) for j in idx])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", *[series.labels[j] for j in idx]])
    for d, row in zip(series.dates, ranks):
        writer.writerow([d.isoformat(), *[repr(float(v)) for v in row]])
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def table1_grid(lam=2.0, rho_grid=DEFAULT_RHO_GRID, u_grid=DEFAULT_U_GRID):
    """Limiting INAR FELD values, rows indexed by persistence and columns by u."""
    if lam <= 0 or min(u_grid) <= 0 or min(rho_grid) <= 0:
        raise ValidationError("table1 grids and lambda must be positive")
    return np.array([[inar_feld_limit(InarParams(r, lam), u) for u in u_grid] for r in rho_grid])


def cmd_table1(args):
    rho = parse_grid(args.rho_grid, "rho-grid") if args.rho_grid else list(DEFAULT_RHO_GRID)
    u = parse_grid(args.u_grid, "u-grid") if args.u_grid else list(DEFAULT_U_GRID)
    log_config("table1", {"lambda": args.lam, "rho_grid": rho, "u_grid": u, "out": args.out})
    grid = table1_grid(args.lam, rho, u)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rho", "u", "value", "display"])
    for i, r in enumerate(rho):
        for j, uu in enumerate(u):
            writer.writerow([r, uu, repr(float(grid[i, j])), f"{grid[i, j]:.2f}"])
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_simulate(args):
    model = resolve_model(args.model, args.params, args.fit)
    state = parse_vector(args.state, "state")
    log_config("simulate", {"model": model_params(model), "state": state,
                            "horizon": args.horizon, "paths": args.paths, "seed": args.seed,
                            "as_series": args.as_series, "out": args.out})
    if state is None:
        raise ValidationError("--state is required")
    if args.as_series:
        paths = simulate(model, state, args.horizon, 1, args.seed)
        values = paths.paths[0, 1:]
        if values.ndim > 2:
            raise ValidationError("--as-series needs a scalar or vector state")
        series = CountSeries.from_array(values, frequency=args.frequency)
        emit(series.to_csv(), args.out)
    else:
        emit(simulate(model, state, args.horizon, args.paths, args.seed).to_csv(), args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _model_options(p):
    p.add_argument("--model", required=True, help="model id, e.g. inar, arg, nbar2, gauss-var")
    p.add_argument("--params", help="JSON parameters (inline or a file)")
    p.add_argument("--fit", help="estimation result JSON to take parameters from")


def build_parser():
    parser = argparse.ArgumentParser(prog="fredkit", description="Forecast error decompositions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at debug level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decomposition table for one argument and state")
    _model_options(p)
    p.add_argument("--kind", required=True, choices=["feld", "fekd", "fevd"])
    p.add_argument("--arg", help="Laplace argument, density point or FEVD weights")
    p.add_argument("--state", help="conditioning value Y_t")
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--shares", action="store_true", help="also write normalized shares")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("estimate", help="fit a count model to a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--frequency", default="weekly")
    p.add_argument("--model", required=True, choices=["nbar", "nbar2"])
    p.add_argument("--method", required=True, choices=["ols", "mle", "gmm"])
    p.add_argument("--out", help="output stem; writes <stem>.json and <stem>.csv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scenario", help="grid of decompositions from a JSON spec")
    p.add_argument("spec", help="scenario spec (JSON file or inline JSON)")
    p.add_argument("--horizon", type=int, help="overrides the spec horizon")
    p.add_argument("--out-dir", help="directory for per-cell tables and comparison.csv")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("ranks", help="Gaussian rank transform of two columns")
    p.add_argument("--input", required=True)
    p.add_argument("--frequency", default="weekly")
    p.add_argument("--cols", required=True, help="two labels or 1-based positions, e.g. 1,2")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ranks)

    p = sub.add_parser("table1", help="limiting INAR FELD values on a (rho, u) grid")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--rho-grid")
    p.add_argument("--u-grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("simulate", help="simulate paths from a model")
    _model_options(p)
    p.add_argument("--state", help="starting value")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--as-series", action="store_true",
                   help="write a single path as a dated count series CSV")
    p.add_argument("--frequency", default="weekly")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
