"""Command-line pipeline: generate -> evaluate -> cluster -> sensitivity.

Every subcommand writes plain CSV (or JSON) reports into --out together
with run_config.json, the resolved options plus tool version, so a run can
be reproduced from its output directory alone. Exit codes: 0 success,
1 internal/solver anomaly, 2 user-input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .clustering import (
    ClusterGrading,
    ClusteringError,
    grade_clusters,
    grade_labels_for,
    kmeans,
    select_k,
)
from .dea_core import (
    DeaError,
    SbmConfig,
    SolverAnomaly,
    SolveStatus,
    Variant,
    evaluate_all,
    static_view,
)
from .panel_data import (
    DatasetError,
    dump_dataset,
    dump_schema,
    generate_synthetic,
    load_dataset,
    parse_generator_spec,
)
from .partition_heuristic import PartitionError, evaluate_heuristic_all
from .sensitivity import (
    deltas_from_aggregates,
    aggregate_over_periods,
    apply_deltas,
    render_delta,
    sensitivity_report,
)

SEED_ENV = "FRONTIER_DYN_SEED"
EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_report(out_dir: Path, name: str, fieldnames, rows, fmt: str) -> Path:
    """Write a tabular report as CSV (12-significant-digit floats) or JSON."""
    if fmt == "json":
        path = out_dir / f"{name}.json"
        payload = [dict(zip(fieldnames, row)) for row in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fieldnames)
            for row in rows:
                writer.writerow([_fmt(cell) for cell in row])
    return path


def _echo_config(out_dir: Path, subcommand: str, options: dict) -> None:
    payload = {
        "tool": "frontier-dyn",
        "version": __version__,
        "subcommand": subcommand,
        "options": options,
    }
    with open(out_dir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_seed(flag_value, fallback: int = 0) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return fallback


def _out_dir(path_text: str) -> Path:
    out = Path(path_text)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sbm_config(args) -> SbmConfig:
    weights = None
    if args.weights:
        weights = tuple(float(w) for w in args.weights.split(","))
    return SbmConfig(
        weights=weights,
        variant=Variant(args.variant),
        lp_tol=args.tol,
    )


def cmd_generate(args) -> int:
    spec = parse_generator_spec(args.spec)
    if args.seed is not None or os.environ.get(SEED_ENV) is not None:
        seed = _resolve_seed(args.seed)
        spec = type(spec)(
            variables=spec.variables,
            dmu_count=spec.dmu_count,
            period_count=spec.period_count,
            seed=seed,
        )
    data = generate_synthetic(spec)
    out = _out_dir(args.out)
    dump_dataset(data, out / "data.csv")
    dump_schema(data.variables, out / "schema.txt")
    _echo_config(
        out,
        "generate",
        {
            "spec": args.spec,
            "out": args.out,
            "seed": spec.seed,
            "dmus": spec.dmu_count,
            "periods": spec.period_count,
            "variables": [
                [v.name, v.role.value, v.low, v.high, v.variance_target]
                for v in spec.variables
            ],
        },
    )
    print(f"wrote {data.n_dmus} DMUs x {data.n_periods} periods x "
          f"{data.n_variables} variables to {out / 'data.csv'}")
    return EXIT_OK


_RANKING_FIELDS = ["rank", "dmu", "rho", "status", "dropped_ratio_terms"]


def _ranking_rows(ranked) -> list:
    rows = []
    for rank, (dmu, res) in enumerate(ranked, 1):
        rows.append([rank, dmu, res.rho, res.status.value, res.dropped_ratio_terms])
    return rows


def cmd_evaluate(args) -> int:
    if args.heuristic and args.p is None:
        raise ValueError("--heuristic requires -p")
    if args.static and args.period is None:
        raise ValueError("--static requires --period")
    if args.compare and (args.static or args.heuristic):
        raise ValueError("--compare cannot be combined with --static or --heuristic")

    data = load_dataset(args.data, args.schema)
    config = _sbm_config(args)
    seed = _resolve_seed(args.seed)
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    out = _out_dir(args.out)

    options = {
        "data": args.data,
        "schema": args.schema,
        "out": args.out,
        "format": args.format,
        "variant": args.variant,
        "heuristic": bool(args.heuristic),
        "p": args.p,
        "seed": seed,
        "weights": args.weights,
        "static": bool(args.static),
        "period": args.period,
        "compare": bool(args.compare),
        "jobs": jobs,
        "tol": args.tol,
    }

    if args.compare:
        dynamic = evaluate_all(data, config, jobs=jobs)
        static_rho = {}
        for t, label in enumerate(data.periods, 1):
            ranked = evaluate_all(static_view(data, t), config, jobs=jobs)
            static_rho[label] = {dmu: res.rho for dmu, res in ranked}
        fields = [f"rho_{label}" for label in data.periods] + ["rho_ddea", "dmu"]
        rows = []
        for dmu, res in dynamic:
            rows.append(
                [static_rho[label][dmu] for label in data.periods] + [res.rho, dmu]
            )
        _write_report(out, "compare", fields, rows, args.format)
    elif args.heuristic:
        ranked = evaluate_heuristic_all(data, args.p, seed, config, jobs=jobs)
        fields = _RANKING_FIELDS + ["mean_rho", "min_rho", "max_rho", "feasible_count"]
        rows = []
        for rank, (dmu, res) in enumerate(ranked, 1):
            rhos = res.class_rhos
            rows.append(
                [
                    rank,
                    dmu,
                    res.mean_rho,
                    res.status.value,
                    res.dropped_ratio_terms,
                    res.mean_rho,
                    min(rhos) if rhos else float("nan"),
                    max(rhos) if rhos else float("nan"),
                    res.feasible_class_count,
                ]
            )
        _write_report(out, "ranking", fields, rows, args.format)
    elif args.static:
        if not 1 <= args.period <= data.n_periods:
            raise ValueError(
                f"--period {args.period} outside 1..{data.n_periods}"
            )
        ranked = evaluate_all(static_view(data, args.period), config, jobs=jobs)
        _write_report(out, "ranking", _RANKING_FIELDS, _ranking_rows(ranked), args.format)
    else:
        ranked = evaluate_all(data, config, jobs=jobs)
        _write_report(out, "ranking", _RANKING_FIELDS, _ranking_rows(ranked), args.format)

    _echo_config(out, "evaluate", options)
    return EXIT_OK


def _read_ranking(path: Path) -> list:
    """Rows of (dmu, rho, rank) from an evaluate report, optimal rows only."""
    if not path.exists():
        raise ValueError(f"ranking report {path} does not exist")
    records = []
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        for row in payload:
            records.append(dict(row))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            records = [dict(row) for row in reader]
    rows = []
    for i, rec in enumerate(records, 1):
        if "dmu" not in rec or "rho" not in rec:
            raise ValueError(f"ranking report {path} lacks dmu/rho columns")
        if rec.get("status", "optimal") != "optimal":
            continue
        try:
            rho = float(rec["rho"])
            rank = int(rec.get("rank", i))
        except (TypeError, ValueError):
            raise ValueError(f"ranking report {path}: malformed row {i}") from None
        rows.append((str(rec["dmu"]), rho, rank))
    if not rows:
        raise ValueError(f"ranking report {path} has no usable rows")
    return rows


def cmd_cluster(args) -> int:
    ranking = _read_ranking(Path(args.ranking))
    points = [rho for _, rho, _ in ranking]
    distinct = len(set(points))
    if distinct < 2:
        raise ValueError("clustering needs at least two distinct scores")
    seed = _resolve_seed(args.seed)
    k_min = args.k_min
    k_max = min(args.k_max, distinct)
    if k_min > k_max:
        k_min = k_max
    chosen, table = select_k(points, k_min, k_max, seed, override=args.k)
    model = kmeans(points, chosen, seed)
    grading = grade_clusters(model, points)
    model = model.with_grades(grading)

    out = _out_dir(args.out)
    _write_report(
        out,
        "silhouette_by_k",
        ["k", "silhouette", "chosen"],
        [[k, sil, 1 if k == chosen else 0] for k, sil in table],
        args.format,
    )
    # Cluster numbers in reports are quality-ordered: 1 is the best cluster.
    position = {cluster: pos + 1 for pos, cluster in enumerate(grading.order)}
    assign_rows = [
        [position[int(model.assignments[i])], rho, dmu, rank]
        for i, (dmu, rho, rank) in enumerate(ranking)
    ]
    assign_rows.sort(key=lambda r: r[3])
    _write_report(out, "assignments", ["cluster", "rho", "dmu", "rank"], assign_rows, args.format)
    _write_report(
        out,
        "centers",
        ["cluster", "grade", "center_efficiency"],
        [
            [pos + 1, grading.labels[pos], grading.center_efficiency[pos]]
            for pos in range(len(grading.order))
        ],
        args.format,
    )
    n = len(ranking)
    counts = [
        int((model.assignments == cluster).sum()) for cluster in grading.order
    ]
    _write_report(
        out,
        "grade_shares",
        ["grade", "count", "share"],
        [
            [grading.labels[pos], counts[pos], counts[pos] / n]
            for pos in range(len(grading.order))
        ],
        args.format,
    )
    _echo_config(
        out,
        "cluster",
        {
            "ranking": args.ranking,
            "out": args.out,
            "format": args.format,
            "k": args.k,
            "k_min": args.k_min,
            "k_max": args.k_max,
            "chosen_k": chosen,
            "seed": seed,
        },
    )
    return EXIT_OK


def _read_assignments(clusters_dir: Path):
    for suffix in (".csv", ".json"):
        path = clusters_dir / f"assignments{suffix}"
        if path.exists():
            break
    else:
        raise ValueError(f"no assignments report under {clusters_dir}")
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            records = json.load(fh)
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            records = list(csv.DictReader(fh))
    cluster_by_branch = {}
    rho_by_branch = {}
    for i, rec in enumerate(records, 1):
        try:
            dmu = str(rec["dmu"])
            cluster_by_branch[dmu] = int(rec["cluster"])
            rho_by_branch[dmu] = float(rec["rho"])
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"assignments report {path}: malformed row {i}") from None
    if not cluster_by_branch:
        raise ValueError(f"assignments report {path} is empty")
    return cluster_by_branch, rho_by_branch


def cmd_sensitivity(args) -> int:
    data = load_dataset(args.data, args.schema)
    clusters_dir = Path(args.clusters)
    cluster_by_branch, rho_by_branch = _read_assignments(clusters_dir)

    unknown = sorted(set(cluster_by_branch) - set(data.dmu_ids))
    if unknown:
        raise ValueError(f"cluster report names DMUs absent from the data: {unknown}")

    clusters = sorted(set(cluster_by_branch.values()))
    k = len(clusters)
    if clusters != list(range(1, k + 1)):
        raise ValueError(f"cluster numbers must be 1..k, got {clusters}")
    centers = [
        sum(rho_by_branch[d] for d, c in cluster_by_branch.items() if c == cluster)
        / sum(1 for c in cluster_by_branch.values() if c == cluster)
        for cluster in clusters
    ]
    grading = ClusterGrading(
        order=tuple(clusters),
        labels=grade_labels_for(k),
        center_efficiency=tuple(centers),
    )
    reports = sensitivity_report(data, cluster_by_branch, grading, rho_by_branch)

    out = _out_dir(args.out)
    fields = ["branch"] + [v.name for v in data.variables]
    violations = 0
    for report in reports:
        rows = []
        for branch, deltas in report.rows:
            rows.append([branch] + [render_delta(deltas[v.name]) for v in data.variables])
            if args.verify:
                post = apply_deltas(
                    aggregate_over_periods(data, branch),
                    [deltas[v.name] for v in data.variables],
                )
                target = aggregate_over_periods(data, report.worst_target_branch)
                roles = [v.role for v in data.variables]
                if any(
                    d.kind != "no_change"
                    for d in deltas_from_aggregates(roles, post, target)
                ):
                    violations += 1
                    print(
                        f"verify: residual change for {branch} vs "
                        f"{report.worst_target_branch}",
                        file=sys.stderr,
                    )
        _write_report(out, f"sensitivity_{report.source_label}", fields, rows, args.format)
    _echo_config(
        out,
        "sensitivity",
        {
            "data": args.data,
            "schema": args.schema,
            "clusters": args.clusters,
            "out": args.out,
            "format": args.format,
            "verify": bool(args.verify),
        },
    )
    if args.verify and violations:
        print(f"verify failed for {violations} branch rows", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frontier-dyn",
        description="Dynamic slacks-based efficiency benchmarking pipeline.",
    )
    parser.add_argument("--version", action="version", version=f"frontier-dyn {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic panel from a spec file")
    p_gen.add_argument("--spec", required=True, help="generator spec file")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("evaluate", help="rank DMUs by efficiency")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--schema", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--format", choices=("csv", "json"), default="csv")
    p_eval.add_argument("--variant", choices=("standard", "super"), default="standard")
    p_eval.add_argument("--heuristic", action="store_true",
                        help="partition-and-average instead of exact full-set solves")
    p_eval.add_argument("-p", type=int, default=None, help="number of heuristic classes")
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--weights", default=None, help="per-period weights w1,w2,...")
    p_eval.add_argument("--static", action="store_true", help="single-period evaluation")
    p_eval.add_argument("--period", type=int, default=None, help="1-based period ordinal")
    p_eval.add_argument("--compare", action="store_true",
                        help="per-period static columns next to the dynamic score")
    p_eval.add_argument("--jobs", type=int, default=0,
                        help="worker processes (default: machine parallelism)")
    p_eval.add_argument("--tol", type=float, default=1e-9, help="LP tolerance")
    p_eval.set_defaults(func=cmd_evaluate)

    p_clu = sub.add_parser("cluster", help="cluster a ranking into grades")
    p_clu.add_argument("--ranking", required=True, help="ranking report from evaluate")
    p_clu.add_argument("--out", required=True)
    p_clu.add_argument("--format", choices=("csv", "json"), default="csv")
    p_clu.add_argument("--k", type=int, default=None, help="override the chosen k")
    p_clu.add_argument("--k-min", type=int, default=2)
    p_clu.add_argument("--k-max", type=int, default=12)
    p_clu.add_argument("--seed", type=int, default=None)
    p_clu.set_defaults(func=cmd_cluster)

    p_sen = sub.add_parser("sensitivity", help="per-branch upgrade deltas")
    p_sen.add_argument("--data", required=True)
    p_sen.add_argument("--schema", required=True)
    p_sen.add_argument("--clusters", required=True, help="cluster output directory")
    p_sen.add_argument("--out", required=True)
    p_sen.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sen.add_argument("--verify", action="store_true",
                       help="recheck post-delta dominance and idempotence")
    p_sen.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverAnomaly as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (
        DatasetError,
        DeaError,
        PartitionError,
        ClusteringError,
        ValueError,
        KeyError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
