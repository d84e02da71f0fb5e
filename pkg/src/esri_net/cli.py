"""Command-line interface.

Subcommands cover the full pipeline: validate ingested data, generate
synthetic networks, propagate removal scenarios, compute per-firm risk
indices, evaluate removal strategies against a CO2 target, fit the
two-regime rank decay, and emit figure-ready CSV series.

Every run that produces files writes them atomically and drops a
config.json with the resolved options next to the outputs.  Exit codes:
0 on success (including reported-but-non-fatal conditions like an
unreachable target), 2 on usage errors, 3 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import __version__
from .calibration import (
    EssentialityMatrix,
    ProductionFunctionSet,
    UnknownSector,
    calibrate,
    classify_inputs,
)
from .indices import (
    MissingTotal,
    NoEmploymentData,
    batch_indices,
    ets_total_co2,
    resolve_total_co2,
)
from .network import NetworkError, ProductionNetwork, load_network, validate, write_network
from .propagation import InvalidScenario, propagate
from .strategies import (
    Heuristic,
    InsufficientPoints,
    fit_rank_regimes,
    rank_firms,
    run_strategy,
)
from .synth import InfeasibleParams, SynthParams, essentiality_rows, generate, write_essentiality

log = logging.getLogger(__name__)

DATA_ERRORS = (
    NetworkError,
    UnknownSector,
    InvalidScenario,
    NoEmploymentData,
    MissingTotal,
    InsufficientPoints,
    InfeasibleParams,
)

INDEX_COLUMNS = ("firm_id", "esri", "ew_esri", "co2_share_total", "co2_share_ets", "ratio")
CURVE_COLUMNS = ("rank", "firm_id", "cum_firms", "cum_co2_saved", "cum_job_loss", "benchmark_flag")


class MissingUpstream(Exception):
    """Report requested but there are no candidate results to report on."""


# -- small atomic-output helpers ------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_config(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    options = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func"
    }
    _write_json(out_dir / "config.json", {
        "command": command,
        "options": options,
        "version": __version__,
    })


def _fmt(value: float) -> str:
    return repr(float(value))


# -- shared pipeline pieces -------------------------------------------------------


def _load_net(args: argparse.Namespace) -> ProductionNetwork:
    root = Path(args.net)
    return load_network(root / "firms.csv", root / "edges.csv")


def _essentiality(args: argparse.Namespace) -> EssentialityMatrix:
    if args.essentiality is not None:
        return EssentialityMatrix.from_csv(args.essentiality)
    default_path = Path(args.net) / "essentiality.csv"
    if default_path.is_file():
        return EssentialityMatrix.from_csv(default_path)
    log.info("no essentiality file found; using the bundled supplier-letter default")
    return EssentialityMatrix.default()


def _calibrated(args: argparse.Namespace, net: ProductionNetwork) -> ProductionFunctionSet:
    matrix = _essentiality(args)
    partition = classify_inputs(net, matrix)
    return calibrate(net, partition, gamma=args.gamma, x0_rule=args.x0_rule)


def _write_audit(out: Path, pf: ProductionFunctionSet) -> None:
    _write_csv(
        out / "calibration_audit.csv",
        ("firm_id", "x0", "beta", "n_essential_groups", "n_nonessential"),
        [(fid, _fmt(x0), _fmt(beta), ng, nn) for fid, x0, beta, ng, nn in pf.audit_rows()],
    )


def _candidates(args: argparse.Namespace, net: ProductionNetwork) -> list[str]:
    spec = args.candidates
    if spec == "all-ets":
        return [f.id for f in net.firms if f.ets_member]
    path = Path(spec)
    if not path.is_file():
        raise InvalidScenario(f"candidate file not found: {spec}")
    ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return [fid for fid in ids if fid]


def _removal_ids(spec: str) -> list[str]:
    path = Path(spec)
    if path.is_file():
        ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
        return [fid for fid in ids if fid]
    return [fid.strip() for fid in spec.split(",") if fid.strip()]


# -- subcommands --------------------------------------------------------------------


def _cmd_validate(args: argparse.Namespace) -> int:
    net = _load_net(args)
    report = validate(net)
    for line in report.summary_lines():
        print(line)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.fixture is not None:
        for name in ("firms.csv", "edges.csv", "essentiality.csv"):
            shutil.copyfile(Path(args.fixture) / name, out / name)
        _write_config(out, "synth", args)
        print(f"copied fixture network from {args.fixture} to {out}")
        return 0
    params = SynthParams(
        n_firms=args.n_firms,
        n_edges=args.n_edges,
        degree_exponent=args.degree_exponent,
        n_ets=args.n_ets,
        seed=args.seed,
    )
    net = generate(params)
    write_network(net, out)
    write_essentiality(essentiality_rows(net), out / "essentiality.csv")
    _write_config(out, "synth", args)
    print(f"generated {net.n_firms} firms, {net.n_edges} edges -> {out}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    net = _load_net(args)
    pf = _calibrated(args, net)
    removed = _removal_ids(args.remove)
    eq = propagate(net, pf, removed, tol=args.tol, max_iter=args.max_iter)
    out = Path(args.out)
    _write_csv(
        out / "equilibrium.csv",
        ("firm_id", "h_d", "h_u", "h"),
        [
            (fid, _fmt(eq.h_d[i]), _fmt(eq.h_u[i]), _fmt(eq.h[i]))
            for i, fid in enumerate(net.ids)
        ],
    )
    _write_json(out / "metadata.json", {
        "iterations": eq.iterations,
        "max_delta": eq.max_delta,
        "converged": eq.converged,
        "removed": sorted(removed),
    })
    _write_audit(out, pf)
    _write_config(out, "simulate", args)
    if not eq.converged:
        print(
            f"warning: not converged after {eq.iterations} iterations "
            f"(max_delta={eq.max_delta:.3e})",
            file=sys.stderr,
        )
    print(f"equilibrium written to {out} ({eq.iterations} iterations)")
    return 0


def _cmd_esri(args: argparse.Namespace) -> int:
    net = _load_net(args)
    pf = _calibrated(args, net)
    candidates = _candidates(args, net)
    table = batch_indices(
        net, pf, candidates,
        workers=args.threads, total_co2=args.total_co2,
        tol=args.tol, max_iter=args.max_iter,
    )
    bad = [r.firm_id for r in table.rows if r.error is not None]
    if bad:
        print(f"warning: {len(bad)} candidate(s) failed: {', '.join(bad[:5])}", file=sys.stderr)
    out = Path(args.out)
    _write_csv(
        out / "indices.csv",
        INDEX_COLUMNS,
        [
            (r.firm_id, _fmt(r.esri), _fmt(r.ew_esri), _fmt(r.co2_share_total),
             _fmt(r.co2_share_ets), _fmt(r.ratio))
            for r in table.rows
            if r.error is None
        ],
    )
    _write_audit(out, pf)
    _write_config(out, "esri", args)
    print(f"indices for {len(table.rows) - len(bad)} candidate(s) written to {out}")
    return 0


def _cmd_strategy(args: argparse.Namespace) -> int:
    net = _load_net(args)
    pf = _calibrated(args, net)
    candidates = _candidates(args, net)
    heuristic = Heuristic.from_name(args.heuristic)
    table = batch_indices(
        net, pf, candidates,
        workers=args.threads, total_co2=args.total_co2,
        tol=args.tol, max_iter=args.max_iter,
    )
    ordering = rank_firms(table, heuristic)
    curve = run_strategy(
        net, pf, ordering, args.target,
        workers=args.threads, total_co2=args.total_co2,
        tol=args.tol, max_iter=args.max_iter, heuristic=heuristic,
    )
    out = Path(args.out)
    _write_csv(
        out / "curve.csv",
        CURVE_COLUMNS,
        [
            (p.rank, p.firm_id, p.cum_firms, _fmt(p.cum_co2_saved), _fmt(p.cum_job_loss),
             int(curve.benchmark_rank is not None and p.rank == curve.benchmark_rank))
            for p in curve.points
        ],
    )
    _write_json(out / "summary.json", curve.summary())
    _write_audit(out, pf)
    _write_config(out, "strategy", args)
    summary = curve.summary()
    if curve.benchmark_rank is None:
        print(
            f"warning: target {args.target} unreachable; max savings "
            f"{curve.points[-1].cum_co2_saved if curve.points else 0.0:.4f}",
            file=sys.stderr,
        )
    print(
        f"{heuristic.value}: target {args.target} -> "
        f"firms_removed={summary['firms_removed']} "
        f"co2_reduction={summary['co2_reduction']:.4f} "
        f"expected_job_loss={summary['expected_job_loss']:.4f}"
    )
    return 0


def _cmd_fit_regimes(args: argparse.Namespace) -> int:
    if args.indices is not None:
        ratios = _read_ratio_column(Path(args.indices))
    else:
        if args.net is None:
            raise MissingTotal("fit-regimes needs --indices or --net")
        net = _load_net(args)
        pf = _calibrated(args, net)
        candidates = [f.id for f in net.firms if f.ets_member]
        table = batch_indices(
            net, pf, candidates,
            workers=args.threads, tol=args.tol, max_iter=args.max_iter,
        )
        ratios = table.finite_ratios_descending()
    fit = fit_rank_regimes(ratios, hi=args.hi, lo=args.lo)
    payload = {
        "lambda1": fit.lambda1, "lambda2": fit.lambda2,
        "r2_1": fit.r2_1, "r2_2": fit.r2_2,
        "n1": fit.n1, "n2": fit.n2,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        out = Path(args.out)
        _write_json(out / "regimes.json", payload)
        _write_config(out, "fit-regimes", args)
    return 0


def _read_ratio_column(path: Path) -> list[float]:
    if not path.is_file():
        raise MissingUpstream(f"indices file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "ratio" not in reader.fieldnames:
            raise MissingUpstream(f"{path.name} has no ratio column")
        values = []
        for row in reader:
            try:
                v = float(row["ratio"])
            except ValueError:
                continue
            if v > 0.0 and v != float("inf"):
                values.append(v)
    return sorted(values, reverse=True)


def _cmd_report(args: argparse.Namespace) -> int:
    net = _load_net(args)
    pf = _calibrated(args, net)
    candidates = _candidates(args, net)
    if not candidates:
        raise MissingUpstream("no candidate firms to report on (is any firm an ETS member?)")
    out = Path(args.out)

    table = batch_indices(
        net, pf, candidates,
        workers=args.threads, total_co2=args.total_co2,
        tol=args.tol, max_iter=args.max_iter,
    )
    rows = [r for r in table.rows if r.error is None]
    _write_csv(
        out / "scatter_co2_vs_ew_esri.csv",
        ("firm_id", "sector", "ew_esri", "co2_share_total", "co2_share_ets"),
        [
            (r.firm_id, net.firm(r.firm_id).sector, _fmt(r.ew_esri),
             _fmt(r.co2_share_total), _fmt(r.co2_share_ets))
            for r in rows
        ],
    )

    for heuristic in Heuristic:
        ordering = rank_firms(table, heuristic)
        curve = run_strategy(
            net, pf, ordering, args.target,
            workers=args.threads, total_co2=args.total_co2,
            tol=args.tol, max_iter=args.max_iter, heuristic=heuristic,
        )
        _write_csv(
            out / f"strategy_curve_{heuristic.value}.csv",
            CURVE_COLUMNS,
            [
                (p.rank, p.firm_id, p.cum_firms, _fmt(p.cum_co2_saved), _fmt(p.cum_job_loss),
                 int(curve.benchmark_rank is not None and p.rank == curve.benchmark_rank))
                for p in curve.points
            ],
        )
        removed_at_benchmark = set(
            ordering[: curve.benchmark_rank] if curve.benchmark_rank else []
        )
        by_emissions = sorted(rows, key=lambda r: (-r.co2_share_total, r.firm_id))
        _write_csv(
            out / f"co2_rank_{heuristic.value}.csv",
            ("rank", "firm_id", "co2_share_total", "removed"),
            [
                (k + 1, r.firm_id, _fmt(r.co2_share_total), int(r.firm_id in removed_at_benchmark))
                for k, r in enumerate(by_emissions)
            ],
        )
    _write_config(out, "report", args)
    print(f"report series for {len(rows)} candidate(s) written to {out}")
    return 0


# -- parser -------------------------------------------------------------------------


def _gamma_type(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"gamma must be in [0, 1], got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esri-net",
        description="Shock propagation and systemic-risk indices on firm-level "
                    "production networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    p_net = argparse.ArgumentParser(add_help=False)
    p_net.add_argument("--net", required=True, help="directory with firms.csv and edges.csv")
    p_net.add_argument(
        "--essentiality",
        help="sector-pair essentiality CSV (default: <net>/essentiality.csv, "
             "else the bundled supplier-letter rule)",
    )
    p_net.add_argument("--gamma", type=_gamma_type, default=0.5,
                       help="output share attainable with no non-essential inputs (default 0.5)")
    p_net.add_argument("--x0-rule", choices=("out", "max"), default="out",
                       help="reference output rule (default out)")

    p_prop = argparse.ArgumentParser(add_help=False)
    p_prop.add_argument("--tol", type=_positive_float, default=1e-9,
                        help="sup-norm convergence tolerance (default 1e-9)")
    p_prop.add_argument("--max-iter", type=int, default=1000,
                        help="iteration cap (default 1000)")

    p_par = argparse.ArgumentParser(add_help=False)
    p_par.add_argument("--threads", type=int, default=None,
                       help="worker processes for scenario batches (default: all cores)")
    p_par.add_argument("--total-co2", type=_positive_float, default=None,
                       help="economy-wide CO2 total (default: sum of known firm emissions)")

    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", parents=[p_net], help="structural and coverage checks")
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("synth", help="generate a synthetic network")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-firms", type=int, default=1000)
    sp.add_argument("--n-edges", type=int, default=5000)
    sp.add_argument("--n-ets", type=int, default=0)
    sp.add_argument("--degree-exponent", type=float, default=2.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fixture", help="copy this fixture directory instead of sampling")
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("simulate", parents=[p_net, p_prop],
                        help="propagate one removal scenario")
    sp.add_argument("--remove", required=True, help="comma-separated firm ids or a file")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("esri", parents=[p_net, p_prop, p_par],
                        help="single-firm-removal index table")
    sp.add_argument("--candidates", default="all-ets",
                    help="'all-ets' or a file with one firm id per line")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_esri)

    sp = sub.add_parser("strategy", parents=[p_net, p_prop, p_par],
                        help="evaluate a removal heuristic against a CO2 target")
    sp.add_argument("--heuristic", required=True, choices=[h.value for h in Heuristic])
    sp.add_argument("--target", type=float, required=True,
                    help="CO2 savings target as a share of the economy-wide total")
    sp.add_argument("--candidates", default="all-ets")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_strategy)

    sp = sub.add_parser("fit-regimes", parents=[p_prop, p_par],
                        help="two-regime exponential fit of ratio vs rank")
    sp.add_argument("--indices", help="indices.csv from an esri run")
    sp.add_argument("--net", help="compute indices from this network directory instead")
    sp.add_argument("--essentiality")
    sp.add_argument("--gamma", type=_gamma_type, default=0.5)
    sp.add_argument("--x0-rule", choices=("out", "max"), default="out")
    sp.add_argument("--hi", type=_positive_float, default=1000.0)
    sp.add_argument("--lo", type=_positive_float, default=10.0)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_fit_regimes)

    sp = sub.add_parser("report", parents=[p_net, p_prop, p_par],
                        help="figure-ready CSV series (scatter, curves, CO2 ranks)")
    sp.add_argument("--candidates", default="all-ets")
    sp.add_argument("--target", type=float, default=0.2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except MissingUpstream as exc:
        print(f"error: MissingUpstream: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
