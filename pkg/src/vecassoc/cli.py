"""Command-line interface: ``vecassoc {estimate,simulate,bound,rolling,density}``.

Exit codes: 0 success, 2 bad input or configuration, 3 degenerate data.
Result tables are plain delimited text; when written to a file a
``<file>.manifest.json`` with the resolved configuration sits next to it.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .copulas import CopulaSpec, block_correlation
from .estimators import estimate
from .exceptions import DegenerateInputError, VecAssocError
from .harness import (
    StudyConfig,
    StudyRow,
    example2_bound,
    figure1_specs,
    run_normality_study,
    run_table_study,
    table_configs,
)
from .measures import ALL_MEASURES, RANK_MEASURES, check_measure, resolve_convention
from .ranks import Scaling
from .resampling import ResamplingConfig, standard_error
from .rolling import format_rolling, ingest, load_sample, parse_partition, rolling_measures

SEED_ENV = "VECASSOC_SEED"
EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 2, 3

log = logging.getLogger("vecassoc")


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    version: str = __version__
    inputs: dict = field(default_factory=dict)
    created: str = ""  # not covered by the determinism contract

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(s) for s in text.split(",") if s.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None

    return parse


def _measures(text):
    if text == "all":
        return list(ALL_MEASURES)
    if text == "rank":
        return list(RANK_MEASURES)
    out = [s.strip() for s in text.split(",") if s.strip()]
    for m in out:
        if m not in ALL_MEASURES:
            raise argparse.ArgumentTypeError(f"unknown measure {m!r}; choose from {', '.join(ALL_MEASURES)}")
    return out


def _grid(text):
    try:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be 'lo:hi:count', got {text!r}") from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if not np.isfinite(v) else repr(v)


def _table(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([x if isinstance(x, str) else _fmt(x) for x in r])
    return buf.getvalue()


def _emit(text, output, manifest: RunManifest, manifest_path=None):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        manifest_path = manifest_path or f"{output}.manifest.json"
    if manifest_path:
        manifest.created = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())


def _resampling(args):
    if args.resampling == "none":
        return None
    return ResamplingConfig(args.resampling, args.b, args.seed)


def _partition(args):
    if args.partition is None and not (args.x_labels and args.y_labels):
        args.parser.error("a partition is required: --partition p=..,q=.. or --x-labels/--y-labels")
    if args.x_labels and args.y_labels:
        return (args.x_labels, args.y_labels)
    return parse_partition(args.partition)


# subcommands ------------------------------------------------------------------


def cmd_estimate(args, manifest):
    part = _partition(args)
    if args.dry_run:
        return None
    sample = load_sample(args.input, part, args.date_column)
    cfg = _resampling(args)
    rows = []
    for m in args.measures:
        est = estimate(sample, m, args.convention, args.scaling)
        se = method = None
        if cfg is not None:
            se, method = standard_error(sample, m, cfg, args.convention, args.scaling), cfg.method
        rows.append([m, est.value, se, method or "", est.n, est.convention.value])
    return _table(["measure", "value", "se", "se_method", "n", "convention"], rows)


def _study_configs(args):
    common = dict(
        mc_replications=args.replications,
        bootstrap_b=args.bootstrap,
        jackknife=not args.no_jackknife,
        seed=args.seed,
        scaling=args.scaling,
        convention=args.convention,
        population_n=args.population_n or None,
        workers=args.workers,
    )
    if args.sizes:
        common["sample_sizes"] = tuple(args.sizes)
    if args.table:
        extra = {}
        if args.dims:
            extra["dims"] = tuple(args.dims)
        if args.thetas:
            extra["thetas"] = tuple(args.thetas)
        cfgs = table_configs(args.table, **common, **extra)
        if args.measures:
            cfgs = [replace(c, measures=tuple(args.measures)) for c in cfgs]
        return cfgs
    if args.copula:
        with open(args.copula, encoding="utf-8") as fh:
            specs = [CopulaSpec.from_text(fh.read())]
    else:
        specs = [_family_spec(args.family, t, args.p, args.q, args.within) for t in (args.thetas or [None])]
    return [StudyConfig(s, measures=tuple(args.measures or ["rho_bar"]), **common) for s in specs]


def _family_spec(family, theta, p, q, within=0.5):
    if family in ("gaussian", "gaussian_equicorr"):
        return CopulaSpec.equicorrelated(theta, p, q)
    if family == "gaussian_block":
        return CopulaSpec.gaussian(block_correlation(within, theta, p, q), p)
    if family == "clayton":
        return CopulaSpec.clayton(theta, p, q)
    if family == "independence":
        return CopulaSpec.independence(p, q)
    if family == "comonotone":
        return CopulaSpec.comonotone(p, q)
    raise argparse.ArgumentTypeError(f"unknown family {family!r}")


def cmd_simulate(args, manifest):
    cfgs = _study_configs(args)
    manifest.config["studies"] = [
        {"spec": c.spec.to_dict(), "measures": list(c.measures), "sample_sizes": list(c.sample_sizes)} for c in cfgs
    ]
    if args.dry_run:
        return None
    rows: list[StudyRow] = []
    for c in cfgs:
        rows.extend(run_table_study(c))
    header = ["measure", "p", "q", *StudyRow.COLUMNS]
    return _table(header, [[r.measure, r.p, r.q, *(getattr(r, k) for k in StudyRow.COLUMNS)] for r in rows])


def cmd_bound(args, manifest):
    if args.dry_run:
        return None
    b = example2_bound(args.method, args.grid)
    return _table(["quantity", "value"], [["integral", b.integral], ["rho1_max", b.rho1_max]])


def cmd_rolling(args, manifest):
    part = _partition(args)
    if args.dry_run:
        return None
    panel = ingest(args.input, args.format, part, args.date_column, min_returns=args.window)
    res = rolling_measures(panel, args.window, args.measures, _resampling(args), args.convention, args.scaling)
    return format_rolling(res)


def cmd_density(args, manifest):
    if args.figure1:
        specs = figure1_specs()
    else:
        if not args.param:
            args.parser.error("--param is required unless --figure1 is given")
        specs = {f"{args.family}_{t:g}": _family_spec(args.family, t, args.p, args.q, args.within) for t in args.param}
    cfgs = {
        label: StudyConfig(
            s, sample_sizes=tuple(args.n), mc_replications=args.replications, bootstrap_b=0, jackknife=False,
            measures=(args.measure,), seed=args.seed, scaling=args.scaling, convention=args.convention,
            population_n=None,
        )  # fmt: skip
        for label, s in specs.items()
    }
    manifest.config["settings"] = {k: s.to_dict() for k, s in specs.items()}
    if args.dry_run:
        return None
    res = run_normality_study(cfgs, args.grid)
    summary = _table(["setting", "n", "ks", "skewness"], [[r.label, r.n, r.ks, r.skewness] for r in res])
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            fh.write(summary)
    else:
        sys.stderr.write(summary)
    header = ["x"] + [f"{r.label}_n{r.n}" for r in res]
    rows = [[x, *(r.density[i] for r in res)] for i, x in enumerate(args.grid)]
    return _table(header, rows)


# parser ---------------------------------------------------------------------------


def _common(seed_default):
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=seed_default, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    g.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    g.add_argument("--dry-run", action="store_true", help="print the resolved manifest and exit")
    g.add_argument("--output", "-o", default=None, help="result file (default: standard output)")
    g.add_argument("--manifest", default=None, help="manifest path (default: <output>.manifest.json)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _estimation_opts(p, default_measures):
    p.add_argument("--measures", type=_measures, default=default_measures, help="comma list, 'rank' (the five copula measures) or 'all'")
    p.add_argument("--convention", choices=["paper_literal", "normalized"], default=None,
                   help="override the per-measure default convention")  # fmt: skip
    p.add_argument("--scaling", choices=[s.value for s in Scaling], default=Scaling.OVER_N.value)


def _data_opts(p):
    p.add_argument("input", help="delimited text file with a header row")
    p.add_argument("--partition", help="'p=3,q=2' (leading columns) or 'x=a,b;y=c,d'")
    p.add_argument("--x-labels", type=_csv_list(str), default=None)
    p.add_argument("--y-labels", type=_csv_list(str), default=None)
    p.add_argument("--resampling", choices=["none", "bootstrap", "jackknife"], default="none")
    p.add_argument("--b", type=int, default=200, help="bootstrap iterations")


def build_parser() -> argparse.ArgumentParser:
    try:
        seed_default = _default_seed()
    except argparse.ArgumentTypeError as exc:
        print(f"vecassoc: error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    common = _common(seed_default)
    parser = argparse.ArgumentParser(prog="vecassoc", description="Copula-based association between two random vectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")

    p = sub.add_parser("estimate", parents=[common], help="estimate measures on a data file")
    _data_opts(p)
    _estimation_opts(p, list(RANK_MEASURES))
    p.add_argument("--date-column", default="auto", help="'auto', 'none', a header name or a column index")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study of estimator bias and spread")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", type=int, choices=[1, 2, 3], help="equicorrelated Gaussian table preset")
    src.add_argument("--family", choices=["gaussian", "gaussian_block", "clayton", "independence", "comonotone"])
    src.add_argument("--copula", help="copula specification file ('key = value' lines)")
    p.add_argument("--thetas", type=_csv_list(float), default=None)
    p.add_argument("--dims", type=_csv_list(int), default=None, help="table presets: p = q values")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--within", type=float, default=0.5, help="gaussian_block within-block correlation")
    p.add_argument("--sizes", type=_csv_list(int), default=None, help="sample sizes (default 50,100,500)")
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--bootstrap", type=int, default=200, help="bootstrap iterations, 0 to skip")
    p.add_argument("--no-jackknife", action="store_true")
    p.add_argument("--population-n", type=int, default=1_000_000, help="0 skips the reference value")
    _estimation_opts(p, None)
    p.set_defaults(func=cmd_simulate, scaling=Scaling.OVER_N_PLUS_1.value)

    p = sub.add_parser("bound", parents=[common], help="attainable rho1 bound for copulas Pi and W")
    p.add_argument("--method", choices=["grid", "adaptive"], default="grid")
    p.add_argument("--grid", type=int, default=2000, help="midpoints per axis")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("rolling", parents=[common], help="forward-looking rolling-window estimates")
    _data_opts(p)
    _estimation_opts(p, list(ALL_MEASURES))
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--format", choices=["returns", "levels"], default="returns")
    p.add_argument("--date-column", default="0", help="header name or column index of the dates")
    p.set_defaults(func=cmd_rolling)

    p = sub.add_parser("density", parents=[common], help="density of standardized estimates")
    p.add_argument("--figure1", action="store_true", help="the three block-Gaussian and three Clayton settings")
    p.add_argument("--family", choices=["gaussian_block", "gaussian", "clayton"], default="gaussian_block")
    p.add_argument("--param", type=_csv_list(float), default=None, help="parameter values")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--within", type=float, default=0.5)
    p.add_argument("--n", type=_csv_list(int), default=[500])
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--measure", default="rho3", choices=list(ALL_MEASURES))
    p.add_argument("--convention", choices=["paper_literal", "normalized"], default=None)
    p.add_argument("--scaling", choices=[s.value for s in Scaling], default=Scaling.OVER_N_PLUS_1.value)
    p.add_argument("--grid", type=_grid, default=_grid("-4:4:161"), help="lo:hi:count")
    p.add_argument("--summary", default=None, help="write the KS/skewness table here (default: stderr)")
    p.set_defaults(func=cmd_density)

    for name, sp in sub.choices.items():
        sp.set_defaults(parser=sp)
    return parser


def _date_column(value):
    if value in ("auto", None):
        return value
    if value == "none":
        return None
    return int(value) if str(value).lstrip("-").isdigit() else value


def _manifest(args) -> RunManifest:
    skip = {"func", "parser", "dry_run", "output", "manifest", "verbose", "seed", "subcommand"}
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, np.ndarray):
            v = {"lo": float(v[0]), "hi": float(v[-1]), "count": int(v.size)}
        cfg[k] = v
    inputs = {}
    for key in ("input", "copula"):
        path = getattr(args, key, None)
        if path:
            inputs[path] = _digest(path)
    return RunManifest(args.subcommand, cfg, args.seed, inputs=inputs)


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    warnings.showwarning = _show_warning
    if hasattr(args, "date_column"):
        args.date_column = _date_column(args.date_column)
    try:
        if getattr(args, "measure", None):
            check_measure(args.measure)
        for m in getattr(args, "measures", None) or []:
            resolve_convention(m, args.convention)
        if args.workers is not None and args.workers < 1:
            parser.error("--workers must be >= 1")
        manifest = _manifest(args)
        text = args.func(args, manifest)
        if args.dry_run:
            sys.stdout.write(manifest.to_json())
            return EXIT_OK
        _emit(text, args.output, manifest, args.manifest)
    except DegenerateInputError as exc:
        print(f"vecassoc: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (VecAssocError, OSError) as exc:
        print(f"vecassoc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
