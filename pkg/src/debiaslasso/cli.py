"""Command-line front end: ``infer``, ``simulate``, ``tune-trace`` and ``rerun``.

Every command writes only inside ``--out`` and leaves a ``manifest.json``
there recording the resolved arguments, seeds, version and timestamps.
``rerun`` replays a manifest into a new directory.

Exit codes: 0 success, 2 bad arguments, 3 bad data, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cv import cv_arrays
from .data import Dataset, center, expand_interactions, load_csv, scale_columns
from .errors import DataError, DebiasLassoError, DegenerateError
from .inference import debias, tune_outcome
from .lasso import default_path_ratio, lambda_path
from .nodewise import fit_nodewise, nodewise_problem, trace_grid
from .selectors import (
    CandidateGrid,
    build_candidate_grid,
    select_cv_nodewise,
    select_stps,
    select_zz,
    universal_lambda,
)
from .simulate import SimConfig, run_simulation

logger = logging.getLogger("debiaslasso")

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4


class _Stage:
    """Names the pipeline step currently running, for error messages."""

    def __init__(self):
        self.name = "arguments"

    def __call__(self, name: str) -> "_Stage":
        self.name = name
        return self


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def _manifest(command: str, argv: list[str], config: dict, seeds: dict, started: str) -> dict:
    return {
        "command": command,
        "argv": argv,
        "config": config,
        "seeds": seeds,
        "version": __version__,
        "started": started,
        "finished": _now(),
    }


# ---------------------------------------------------------------- infer


def infer_pipeline(
    d_raw: Dataset,
    *,
    selector: str = "stps",
    level: float = 0.95,
    kappa: float = 0.001,
    seed: int = 0,
    folds: int = 10,
    tau1: float | None = None,
    standardize: bool = False,
    alternative: str = "two-sided",
    stage: _Stage | None = None,
) -> dict:
    """Debiased inference on the first column of ``d_raw``.

    Returns a JSON-ready dict: the inference result (on the original column
    scale) plus the tuning values and seeds behind it.
    """
    stage = stage or _Stage()
    if selector not in ("stps", "cv", "zz", "univ"):
        raise ValueError(f"unknown selector {selector!r}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"--level must lie in (0, 1), got {level}")
    if not kappa > 0:
        raise ValueError(f"--kappa must be positive, got {kappa}")
    if tau1 is not None and not tau1 > 0:
        raise ValueError(f"--tau1 must be positive, got {tau1}")
    if d_raw.p < 2:
        raise DataError("need the target column plus at least one control")
    seed_outcome, seed_node = _child_seeds(seed, 2)
    scales = np.ones(d_raw.p)
    if standardize:
        d_raw, scales = scale_columns(d_raw)
    d, _ = center(d_raw)
    n, p = d.n, d.p

    stage("outcome lasso")
    grid0 = lambda_path(d, 100, default_path_ratio(n, p))
    outcome = tune_outcome(d, grid0, folds, seed_outcome)

    stage("node-wise tuning")
    cand = build_candidate_grid(d.X, 0, kappa)
    trace = trace_grid(d.X, 0, cand.descending())
    tuning = {"candidate_grid": cand.values.tolist()}
    if selector == "stps":
        sel = select_stps(d.X, 0, cand, folds, seed_node, trace=trace)
        node = sel.fit
        tuning.update(sel.to_dict(include_trace=False))
    elif selector == "zz":
        sel = select_zz(d.X, 0, cand, trace=trace)
        node = sel.fit
        tuning.update(sel.to_dict(include_trace=False))
    elif selector == "cv":
        lam = select_cv_nodewise(d.X, 0, cand, folds, seed_node)
        node = trace.fit_at(lam)
        tuning["cv_lambda"] = lam
    else:
        if tau1 is None:
            # one-SE node-wise fit; its residual mean square estimates tau1^2
            Z, x = nodewise_problem(d.X, 0)
            cvn = cv_arrays(Z, x, cand.descending(), folds, seed_node)
            tau1 = math.sqrt(trace.fit_at(cvn.lambda_1se).tau_tilde_sq)
            tuning["tau1_source"] = "node-wise one-SE residual"
        else:
            tuning["tau1_source"] = "supplied"
        tuning["tau1"] = tau1
        node = fit_nodewise(d.X, 0, universal_lambda(tau1, n, p))

    stage("debiasing")
    res = debias(d, outcome.lasso, node, outcome.sigma_hat, level, alternative)
    out = res.to_dict()
    s = float(scales[0])
    for key in ("b1", "beta1_lasso", "std_error", "ci_lower", "ci_upper"):
        out[key] = out[key] / s
    out.update(
        target=d.column_names[0],
        n=n,
        p=p,
        selector=selector,
        standardized=standardize,
        seeds={"seed": seed, "outcome_cv": seed_outcome, "nodewise_cv": seed_node},
        outcome={
            "lambda_grid": grid0.values.tolist(),
            "lambda_min": outcome.cv.lambda_min,
            "lambda_1se": outcome.cv.lambda_1se,
            "folds": folds,
        },
        nodewise=tuning,
    )
    return out


def _load_infer_data(args) -> Dataset:
    controls = _split(args.controls)
    if not controls:
        raise ValueError("--controls must name at least one column")
    if args.target in controls:
        raise ValueError("--target must not also appear in --controls")
    d = load_csv(args.csv, args.response, [args.target, *controls])
    if args.interactions:
        ctrl = Dataset(y=d.y, X=d.X[:, 1:], column_names=d.column_names[1:])
        ctrl = expand_interactions(ctrl)
        d = Dataset(
            y=d.y,
            X=np.column_stack([d.X[:, 0], ctrl.X]),
            column_names=(d.column_names[0], *ctrl.column_names),
        )
    return d


def cmd_infer(args, argv, stage: _Stage) -> int:
    started = _now()
    if not 0.0 < args.level < 1.0:
        raise ValueError(f"--level must lie in (0, 1), got {args.level}")
    if not args.kappa > 0:
        raise ValueError(f"--kappa must be positive, got {args.kappa}")
    stage("loading data")
    d = _load_infer_data(args)
    result = infer_pipeline(
        d,
        selector=args.selector,
        level=args.level,
        kappa=args.kappa,
        seed=args.seed,
        folds=args.folds,
        tau1=args.tau1,
        standardize=args.standardize,
        alternative=args.alternative,
        stage=stage,
    )
    stage("writing output")
    text = json.dumps(result, indent=2)
    print(text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(text + "\n", encoding="utf-8")
    _write_json(out / "manifest.json", _manifest("infer", argv, _args_dict(args), result["seeds"], started))
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(args, argv, stage: _Stage) -> int:
    started = _now()
    stage("reading config")
    try:
        cfg = SimConfig.from_file(args.config)
    except OSError as exc:
        raise ValueError(f"cannot read config: {exc}") from exc
    if args.reps is not None:
        cfg = replace(cfg, reps=args.reps)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    stage("simulation")
    report = run_simulation(cfg, jobs=args.jobs)
    stage("writing output")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = report.to_table_csv()
    (out / "report.csv").write_text(table, encoding="utf-8")
    _write_json(out / "report.json", report.to_dict())
    if args.dump_estimates:
        (out / "estimates.csv").write_text(report.estimates_csv(), encoding="utf-8")
    config = _args_dict(args)
    config["simulation"] = cfg.to_dict()
    _write_json(out / "manifest.json", _manifest("simulate", argv, config, {"seed": cfg.seed}, started))
    print(table, end="")
    return EXIT_OK


# ---------------------------------------------------------------- tune-trace


def _parse_synthetic(text: str) -> tuple[int, int]:
    try:
        n, p = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"--synthetic expects NxP, got {text!r}") from None
    if n < 2 or p < 2:
        raise ValueError("--synthetic needs n >= 2 and p >= 2")
    return n, p


def _trace_design(args) -> tuple[np.ndarray, int, tuple[str, ...]]:
    if (args.csv is None) == (args.synthetic is None):
        raise ValueError("give exactly one of --csv or --synthetic")
    if args.synthetic is not None:
        n, p = _parse_synthetic(args.synthetic)
        rng = np.random.default_rng(args.seed)
        X = rng.standard_normal((n, p))
        names = tuple(f"x{k}" for k in range(p))
    else:
        cols = _split(args.columns)
        if not cols:
            raise ValueError("--columns is required with --csv")
        # load_csv wants a response; the first column plays that role and is put back
        d = load_csv(args.csv, cols[0], cols[1:])
        X = np.column_stack([d.y, d.X])
        names = tuple(cols)
    target = args.target
    if target is None:
        j = 0
    elif target in names:
        j = names.index(target)
    else:
        try:
            j = int(target)
        except ValueError:
            raise DataError(f"no column named {target!r}") from None
        if not 0 <= j < len(names):
            raise ValueError(f"--target index {j} out of range")
    X = X - X.mean(axis=0)
    return np.asfortranarray(X), j, names


def cmd_tune_trace(args, argv, stage: _Stage) -> int:
    started = _now()
    stage("loading data")
    X, j, names = _trace_design(args)
    stage("candidate grid")
    if args.lambdas:
        try:
            grid = CandidateGrid.from_values([float(v) for v in _split(args.lambdas)])
        except ValueError as exc:
            raise ValueError(f"--lambdas: {exc}") from None
    else:
        grid = build_candidate_grid(X, j, args.kappa, args.path_size, args.path_ratio)
    stage("node-wise trace")
    trace = trace_grid(X, j, grid.descending())
    stage("selection")
    stps = select_stps(X, j, grid, args.folds, args.seed, trace=trace)
    zz = select_zz(X, j, grid, trace=trace)
    stage("writing output")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "f", "omega", "tau_tilde_sq", "stps_selected", "zz_selected"])
    for lam, f, om, tt in trace.rows():
        w.writerow([repr(lam), repr(f), repr(om), repr(tt), int(lam == stps.lambda1), int(lam == zz.lambda1)])
    (out / "trace.csv").write_text(buf.getvalue(), encoding="utf-8")
    selections = {
        "target": names[j],
        "target_index": j,
        "n": int(X.shape[0]),
        "p": int(X.shape[1]),
        "stps": stps.to_dict(include_trace=False),
        "zz": zz.to_dict(include_trace=False),
    }
    _write_json(out / "selection.json", selections)
    _write_json(out / "manifest.json", _manifest("tune-trace", argv, _args_dict(args), {"seed": args.seed}, started))
    print(json.dumps(selections, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- rerun


def cmd_rerun(args, argv, stage: _Stage) -> int:
    stage("reading manifest")
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        old = list(manifest["argv"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"unreadable manifest {args.manifest}: {exc}") from None
    if old and old[0] == "rerun":
        raise ValueError("manifest records a rerun; replay the original manifest instead")
    drop = {"--out"}
    extra = ["--out", args.out]
    if manifest.get("command") == "simulate":
        # replay the resolved configuration, not whatever the file says now
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = SimConfig(**manifest["config"]["simulation"])
        (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
        drop |= {"--config", "--reps", "--seed"}
        extra += ["--config", str(out / "config.txt")]
    return _dispatch([*_drop_options(old, drop), *extra])


def _drop_options(argv: list[str], names: set[str]) -> list[str]:
    kept = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
        elif tok in names:
            skip = True
        elif tok.split("=", 1)[0] not in names:
            kept.append(tok)
    return kept


# ---------------------------------------------------------------- plumbing


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="debiaslasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="debiased estimate and CI for one coefficient")
    p.add_argument("--csv", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--target", required=True, help="column whose coefficient is of interest")
    p.add_argument("--controls", required=True, help="comma-separated control columns")
    p.add_argument("--interactions", action="store_true", help="add pairwise products of the controls")
    p.add_argument("--selector", choices=("stps", "cv", "zz", "univ"), default="stps")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--kappa", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--tau1", type=float, default=None, help="tau1 for the universal rule (estimated if omitted)")
    p.add_argument("--standardize", action="store_true", help="scale columns to unit mean square before fitting")
    p.add_argument("--alternative", choices=("two-sided", "less", "greater"), default="two-sided")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    s = sub.add_parser("simulate", help="Monte Carlo coverage study")
    s.add_argument("--config", required=True, help="flat key = value file")
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--dump-estimates", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tune-trace", help="bias and variance factors over a penalty grid")
    t.add_argument("--csv")
    t.add_argument("--columns", help="comma-separated covariate columns (with --csv)")
    t.add_argument("--synthetic", help="NxP standard normal design")
    t.add_argument("--target", default=None, help="column name or 0-based index (default: first)")
    t.add_argument("--lambdas", help="explicit comma-separated grid")
    t.add_argument("--kappa", type=float, default=0.001)
    t.add_argument("--path-size", type=int, default=100)
    t.add_argument("--path-ratio", type=float, default=None)
    t.add_argument("--folds", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tune_trace)

    r = sub.add_parser("rerun", help="replay a manifest into a new directory")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rerun)
    return parser


def _dispatch(argv: list[str]) -> int:
    stage = _Stage()
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args, argv, stage)
    except _ArgumentError as exc:
        print(f"debiaslasso: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ValueError as exc:
        print(f"debiaslasso: {stage.name}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except DataError as exc:
        print(f"debiaslasso: {stage.name}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateError, DebiasLassoError, np.linalg.LinAlgError) as exc:
        print(f"debiaslasso: {stage.name}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


def main(argv: list[str] | None = None) -> int:
    return _dispatch(list(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    sys.exit(main())
