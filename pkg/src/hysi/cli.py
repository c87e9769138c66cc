"""Command-line front end: dataset ingestion, analyses, studies, figure data.

Commands
--------
analyze        one dataset, one or more penalties/predictors, JSON report
simulate       seeded Monte Carlo study, per-rep and aggregate CSVs
posi-constant  simultaneous constant for a dataset's model universe
figures        tidy CSV of length-quantile ratios from simulate aggregates
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile

import numpy as np

from .ci import ALL_METHODS, analyze, encode_json_value
from .covariance import ModelUniverse, build_universe_covariance
from .errors import HysiError, MissingColumn, ParseError
from .lasso import Dataset, Standardization
from .numerics import RngStream
from .posi import posi_constant
from .simulation import (SimulationConfig, run_study, write_aggregate_csvs,
                         write_outcomes_csv)

__all__ = ["load_csv", "main"]


def load_csv(path, response, predictor, standardize=True) -> Dataset:
    """Read a delimited file with a header row into a Dataset.

    All columns other than ``response`` and ``predictor`` become candidate
    controls.  With ``standardize`` the response is centered and every
    regressor column is centered and scaled to unit Euclidean norm; the
    applied affine maps are retained so intervals can be reported on the
    original scale too.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [name.strip() for name in header]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {line_no} has {len(row)} cells, "
                                 f"expected {len(header)}")
            parsed = []
            for name, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {line_no}, column {name!r}: "
                        f"non-numeric cell {cell.strip()!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.asarray(rows)

    for name in (response, predictor):
        if name not in header:
            raise MissingColumn(f"{path}: no column named {name!r}")
    if response == predictor:
        raise MissingColumn("response and predictor must differ")

    y = table[:, header.index(response)]
    z = table[:, header.index(predictor)]
    control_names = [h for h in header if h not in (response, predictor)]
    controls = table[:, [header.index(h) for h in control_names]]

    scaling = None
    if standardize:
        y_center = float(y.mean())
        y = y - y_center
        z_center = float(z.mean())
        z = z - z_center
        z_scale = float(np.linalg.norm(z))
        if z_scale == 0.0:
            raise ParseError(f"predictor column {predictor!r} is constant")
        z = z / z_scale
        centers, scales = [], []
        for j in range(controls.shape[1]):
            center = float(controls[:, j].mean())
            col = controls[:, j] - center
            scale = float(np.linalg.norm(col))
            if scale == 0.0:
                raise ParseError(f"control column {control_names[j]!r} is constant")
            controls[:, j] = col / scale
            centers.append(center)
            scales.append(scale)
        scaling = Standardization(y_center=y_center, z_center=z_center,
                                  z_scale=z_scale,
                                  control_centers=tuple(centers),
                                  control_scales=tuple(scales))
    return Dataset(y=y, z=z, controls=controls, labels=tuple(control_names),
                   standardization=scaling)


def _write_atomic(path, text):
    """Write only after the content is complete (no partial output files)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _parse_gamma(text, alpha):
    if text == "auto":
        return alpha / 10.0
    return float(text)


def cmd_analyze(args) -> int:
    records = []
    rng = RngStream(args.seed)
    try:
        header = _csv_header(args.data)
        predictors = args.predictor or [h for h in header if h != args.response]
        for pred_idx, predictor in enumerate(predictors):
            data_all = load_csv(args.data, args.response, predictor,
                                standardize=not args.no_standardize)
            for lam_idx, lam in enumerate(args.penalties):
                report = analyze(
                    data_all, lam, alpha=args.alpha,
                    gamma=_parse_gamma(args.gamma, args.alpha),
                    methods=args.methods, rng=rng.child(pred_idx, lam_idx),
                    posi_draws=args.draws)
                report.predictor = predictor
                records.extend(report.to_records())
    except (OSError, HysiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = json.dumps(encode_json_value(records), indent=2)
    if args.out:
        _write_atomic(args.out, payload + "\n")
    else:
        print(payload)
    return 0


def _csv_header(path):
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            return [name.strip() for name in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None


def cmd_simulate(args) -> int:
    try:
        prefix = args.out or "study"
        for lam in args.penalties:
            config = SimulationConfig(
                penalty=lam, n=args.n, p=args.p, design=args.design,
                error_dist=args.errors, reps=args.reps, alpha=args.alpha,
                gamma=(None if args.gamma == "auto" else float(args.gamma)),
                seed=args.seed, target_mode=args.target_mode,
                methods=tuple(args.methods), posi_draws=args.draws,
                workers=args.workers,
            )
            result = run_study(config)
            stem = f"{prefix}_{args.design}_{args.errors}_lam{lam:g}"
            write_outcomes_csv(result, stem + "_reps.csv")
            write_aggregate_csvs(result, stem + "_coverage.csv",
                                 stem + "_lengths.csv")
            for row in result.coverage_rows():
                print(f"lambda={lam:g} {row['method']:>9}: coverage "
                      f"{row['coverage']:.3f} (se {row['std_error']:.3f}, "
                      f"reps {row['reps_used']}, failures {row['failures']})")
    except (OSError, HysiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_posi_constant(args) -> int:
    try:
        data = load_csv(args.data, args.response, args.predictor,
                        standardize=not args.no_standardize)
        universe = ModelUniverse.all_subsets(data.p)
        cov = build_universe_covariance(data, universe)
        constant = posi_constant(cov, args.alpha, draws=args.draws,
                                 rng=RngStream(args.seed))
        payload = json.dumps(encode_json_value({
            "K": constant.value, "alpha": constant.alpha,
            "draws": constant.draws, "std_error": constant.std_error,
            "models": len(cov.universe),
        }), indent=2)
        if args.out:
            _write_atomic(args.out, payload + "\n")
        else:
            print(payload)
    except (OSError, HysiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_figures(args) -> int:
    try:
        rows = []
        with open(args.input, newline="") as handle:
            reader = csv.DictReader(handle)
            required = {"design", "errors", "lambda", "method", "quantile",
                        "ratio_to_posi"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise ParseError(f"{args.input}: expected columns {sorted(required)}")
            for row in reader:
                rows.append(row)
        if not rows:
            raise ParseError(f"{args.input}: no rows")
        out_rows = [{
            "design": row["design"], "errors": row["errors"],
            "lambda": row["lambda"], "method": row["method"],
            "quantile": row["quantile"], "ratio": row["ratio_to_posi"],
        } for row in rows]
        lines = ["design,errors,lambda,method,quantile,ratio"]
        lines += [",".join(str(row[k]) for k in
                           ("design", "errors", "lambda", "method", "quantile",
                            "ratio"))
                  for row in out_rows]
        _write_atomic(args.out, "\n".join(lines) + "\n")
        if args.plot:
            _render_plot(out_rows, args.plot)
    except (OSError, HysiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _render_plot(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    methods = sorted({row["method"] for row in rows})
    for method in methods:
        pts = [(float(r["quantile"]), float(r["ratio"])) for r in rows
               if r["method"] == method and r["ratio"] not in ("inf", "nan")]
        pts.sort()
        if pts:
            ax.plot(*zip(*pts), marker="o", label=method)
    ax.set_xlabel("length quantile")
    ax.set_ylabel("ratio to simultaneous interval")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hysi",
        description="Confidence intervals for a regression coefficient after "
                    "lasso control selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--gamma", default="auto",
                        help="hybrid tuning parameter; 'auto' means alpha/10")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--draws", type=int, default=20_000,
                        help="Monte Carlo draws per simultaneous constant")
    common.add_argument("--methods", default=",".join(ALL_METHODS),
                        type=lambda s: tuple(m.strip() for m in s.split(",")))

    pa = sub.add_parser("analyze", parents=[common],
                        help="intervals for one dataset")
    pa.add_argument("--data", required=True)
    pa.add_argument("--response", required=True)
    pa.add_argument("--predictor", action="append", default=None,
                    help="repeatable; omit to analyze every non-response column")
    pa.add_argument("--lambda", dest="penalties", type=float, action="append",
                    required=True, help="penalty value (repeatable)")
    pa.add_argument("--no-standardize", action="store_true")
    pa.add_argument("--out", default=None, help="output JSON path (default stdout)")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", parents=[common],
                        help="seeded Monte Carlo coverage/length study")
    ps.add_argument("--lambda", dest="penalties", type=float, action="append",
                    required=True)
    ps.add_argument("--design", choices=("independent", "dependent"),
                    default="independent")
    ps.add_argument("--errors", choices=("normal", "skew_normal", "laplace",
                                         "uniform"), default="normal")
    ps.add_argument("--reps", type=int, default=1000)
    ps.add_argument("--n", type=int, default=50)
    ps.add_argument("--p", type=int, default=10)
    ps.add_argument("--target-mode", choices=("conditional", "oracle"),
                    default="conditional")
    ps.add_argument("--workers", type=int, default=1)
    ps.add_argument("--out", default=None, help="output file prefix")
    ps.set_defaults(func=cmd_simulate)

    pk = sub.add_parser("posi-constant", parents=[common],
                        help="simultaneous constant for a dataset")
    pk.add_argument("--data", required=True)
    pk.add_argument("--response", required=True)
    pk.add_argument("--predictor", required=True)
    pk.add_argument("--no-standardize", action="store_true")
    pk.add_argument("--out", default=None)
    pk.set_defaults(func=cmd_posi_constant)

    pf = sub.add_parser("figures", help="tidy quantile-ratio CSV from "
                                        "simulate aggregates")
    pf.add_argument("--input", required=True,
                    help="lengths CSV produced by simulate")
    pf.add_argument("--out", required=True)
    pf.add_argument("--plot", default=None, help="optional PNG rendering")
    pf.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
