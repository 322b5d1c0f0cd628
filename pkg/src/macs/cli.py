"""Command-line entry points.

Subcommands cover task synthesis, edit-pair mining and sampling, campaign
runs, and small statistics utilities. Exit codes: 0 success, 2 configuration
or input error, 3 worker protocol error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import emit_report, run_discovery_campaign, run_style_campaign
from .config import (
    build_discovery_spec,
    build_style_spec,
    build_toolchain,
    discovery_editor_plan,
    discovery_start,
    load_config,
    style_editor_plan,
    style_items,
)
from .errors import (
    BridgeError,
    ConfigurationError,
    ContractViolation,
    InputError,
    ProtocolError,
)
from .pairs import (
    PairIndex,
    PairSampler,
    SamplerConfig,
    build_examples,
    delta_histogram,
    dress_pairs,
    enumerate_pairs,
    histogram_stats,
    save_examples,
    save_pools,
)
from .seeding import derive_seed
from .stats import two_prop_ztest
from .synth import (
    protein_config_doc,
    protein_space,
    style_config_doc,
    style_space,
    synth_protein_pool,
    synth_style_pools,
)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def cmd_synth_style(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pools = synth_style_pools(args.seed, groups=args.groups)
    save_pools(pools, out / "pool.jsonl", style_space())
    _write_json(out / "config.json", style_config_doc(args.seed))
    members = sum(len(p.members) for p in pools)
    print(f"wrote {len(pools)} groups ({members} members) to {out / 'pool.jsonl'}")
    print(f"wrote {out / 'config.json'}")
    return 0


def cmd_synth_protein(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pool, wild_type = synth_protein_pool(
        args.seed, mutants=args.mutants, length=args.length
    )
    save_pools([pool], out / "pool.jsonl", protein_space())
    _write_json(out / "config.json", protein_config_doc(args.seed, wild_type))
    print(
        f"wrote wild type plus {len(pool.members) - 1} mutants to {out / 'pool.jsonl'}"
    )
    print(f"wrote {out / 'config.json'}")
    return 0


def _pairs_settings(doc: dict, args: argparse.Namespace) -> dict:
    settings = dict(doc.get("pairs", {}))
    for key in ("mode", "count", "window_strategy", "weight_mode", "gamma"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if getattr(args, "anchor", False):
        settings["with_anchor"] = True
    return settings


def cmd_pairs_build(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    with build_toolchain(doc) as tc:
        settings = _pairs_settings(doc, args)
        pairs = [p for pool in tc.pools for p in enumerate_pairs(pool)]
        rng = np.random.default_rng(derive_seed(tc.seed, "pairs", "build"))
        examples = dress_pairs(
            pairs,
            tc.partitions,
            tc.pools,
            tc.reward_model,
            rng,
            window_strategy=settings.get("window_strategy", "target-satisfying"),
            with_anchor=bool(settings.get("with_anchor", False)),
            weight_mode=settings.get("weight_mode", "wbc"),
            gamma=settings.get("gamma"),
        )
        save_examples(examples, args.out, tc.space)
        print(f"wrote {len(examples)} examples from {len(pairs)} pairs to {args.out}")
    return 0


def cmd_pairs_sample(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    with build_toolchain(doc) as tc:
        settings = _pairs_settings(doc, args)
        mode = settings.get("mode", "random")
        count = int(settings.get("count", 1000))
        config = SamplerConfig(
            mode=mode,
            k=int(settings.get("k", 30)),
            tau=int(settings.get("tau", 400)),
            seed=derive_seed(tc.seed, "pairs", "sample"),
        )
        index = PairIndex(tc.pools, tc.space)
        sampler = PairSampler(index, config, tc.partitions)
        examples = build_examples(
            sampler,
            count,
            window_strategy=settings.get("window_strategy", "target-satisfying"),
            with_anchor=bool(settings.get("with_anchor", False)),
            weight_mode=settings.get("weight_mode", "wbc"),
            reward_model=tc.reward_model,
            gamma=settings.get("gamma"),
        )
        save_examples(examples, args.out, tc.space)
        print(f"wrote {len(examples)} sampled examples ({mode}) to {args.out}")
    return 0


def _hist_csv(path: Path, hist: np.ndarray, space) -> None:
    bins = hist.shape[0]
    lines = []
    span0, span1 = space.specs[0].span, space.specs[1].span
    edges1 = np.linspace(-span1, span1, bins + 1)
    edges0 = np.linspace(-span0, span0, bins + 1)
    header = "," + ",".join(
        f"{edges1[j]:.6g}..{edges1[j + 1]:.6g}" for j in range(bins)
    )
    lines.append(header)
    for i in range(bins):
        label = f"{edges0[i]:.6g}..{edges0[i + 1]:.6g}"
        lines.append(label + "," + ",".join(f"{int(v)}" for v in hist[i]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_pairs_stats(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with build_toolchain(doc) as tc:
        settings = _pairs_settings(doc, args)
        draws = int(args.draws or settings.get("count", 10000))
        configured = settings.get("mode", "knn")
        modes = ["random"] + ([configured] if configured != "random" else [])
        index = PairIndex(tc.pools, tc.space)
        stats: dict = {"draws": draws}
        for mode in modes:
            config = SamplerConfig(
                mode=mode,
                k=int(settings.get("k", 30)),
                tau=int(settings.get("tau", 400)),
                seed=derive_seed(tc.seed, "pairs", "stats", mode),
            )
            sampler = PairSampler(index, config, tc.partitions)
            sampled = sampler.sample(draws)
            hist = delta_histogram(sampled, tc.space)
            stats[mode] = histogram_stats(hist)
            _hist_csv(out / f"hist_{mode}.csv", hist, tc.space)
        if len(modes) == 2 and stats["random"]["cells"]:
            stats["cell_ratio"] = stats[modes[1]]["cells"] / stats["random"]["cells"]
        _write_json(out / "stats.json", stats)
        for mode in modes:
            print(
                f"{mode}: {stats[mode]['cells']} occupied cells, "
                f"entropy {stats[mode]['entropy']:.4f} nats"
            )
        if "cell_ratio" in stats:
            print(f"cell ratio ({modes[1]} / random): {stats['cell_ratio']:.3f}")
    return 0


def _campaign_overrides(args: argparse.Namespace) -> dict:
    return {"seed": args.seed, "strategy": args.strategy}


def cmd_campaign_style(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    workers = max(1, args.workers)
    with build_toolchain(doc, workers=workers, seed=args.seed) as tc:
        campaign_doc = doc.get("campaign", {})
        items, item_pools = style_items(tc, campaign_doc.get("max_items"))
        plan = style_editor_plan(tc, items, item_pools, workers=workers)
        try:
            spec = build_style_spec(tc, items, _campaign_overrides(args))
            report = run_style_campaign(
                spec, plan.factory, tc.scorer, tc.reward_model, workers=workers
            )
        finally:
            plan.close()
        out_dir = args.out or doc.get("output", {}).get("dir", "report")
        files = emit_report(report, out_dir)
        sat = report.metrics["satisfaction"]
        print(
            f"satisfaction {sat['mean']:.4f} +/- {sat['std']:.4f} "
            f"over {len(report.combo_labels)} combos ({len(items)} items each)"
        )
        print(f"editor calls: {report.budget['editor_calls']} "
              f"of {report.budget['configured_max_calls']} configured")
        print(f"report: {', '.join(str(f) for f in files)}")
    return 0


def cmd_campaign_discover(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    workers = max(1, args.workers)
    with build_toolchain(doc, workers=workers, seed=args.seed) as tc:
        start = discovery_start(tc)
        plan = discovery_editor_plan(tc, start, workers=workers)
        try:
            spec = build_discovery_spec(tc, start, overrides=_campaign_overrides(args))
            report = run_discovery_campaign(
                spec, plan.factory, tc.scorer, tc.reward_model, workers=workers
            )
        finally:
            plan.close()
        out_dir = args.out or doc.get("output", {}).get("dir", "report")
        files = emit_report(report, out_dir)
        total = report.metrics["total_success"]
        line = (
            f"total success {total['mean']:.4f} +/- {total['std']:.4f} "
            f"over {len(report.combo_labels)} combos"
        )
        unique = report.metrics.get("unique_success")
        if unique is not None:
            line += f"; unique success {unique['mean']:.4f} +/- {unique['std']:.4f}"
        print(line)
        print(f"editor calls: {report.budget['editor_calls']} "
              f"of {report.budget['configured_max_calls']} configured")
        print(f"report: {', '.join(str(f) for f in files)}")
    return 0


def cmd_ztest(args: argparse.Namespace) -> int:
    z, p = two_prop_ztest(args.s1, args.n1, args.s2, args.n2)
    print(f"z = {z:.6f}")
    print(f"p = {p:.6f}")
    return 0


def _load_summary(report_dir: str) -> dict:
    path = Path(report_dir) / "summary.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc


def _compare_counts(summary: dict) -> tuple[list[int], int]:
    metrics = summary.get("metrics", {})
    if summary.get("mode") == "style":
        sat = metrics.get("satisfaction", {})
        counts = sat.get("satisfied_per_combo")
        trials = metrics.get("items")
    else:
        total = metrics.get("total_success", {})
        counts = total.get("successes_per_combo")
        trials = metrics.get("combo_budget")
    if counts is None or trials is None:
        raise ConfigurationError(
            "summary.json lacks per-combo counts; regenerate the report"
        )
    return [int(c) for c in counts], int(trials)


def cmd_report_compare(args: argparse.Namespace) -> int:
    a = _load_summary(args.report_a)
    b = _load_summary(args.report_b)
    if a.get("mode") != b.get("mode"):
        raise ConfigurationError(
            f"cannot compare a {a.get('mode')} report with a {b.get('mode')} report"
        )
    labels = a.get("combo_labels", [])
    if labels != b.get("combo_labels", []):
        raise ConfigurationError("reports cover different constraint combos")
    counts_a, n_a = _compare_counts(a)
    counts_b, n_b = _compare_counts(b)
    rows = []
    for label, ca, cb in zip(labels, counts_a, counts_b):
        z, p = two_prop_ztest(ca, n_a, cb, n_b)
        rows.append((label, ca / n_a, cb / n_b, z, p))
    pooled_z, pooled_p = two_prop_ztest(
        sum(counts_a), n_a * len(labels), sum(counts_b), n_b * len(labels)
    )
    header = f"{'combo':<24} {'rate_a':>8} {'rate_b':>8} {'z':>9} {'p':>9}"
    print(header)
    for label, ra, rb, z, p in rows:
        print(f"{label:<24} {ra:>8.4f} {rb:>8.4f} {z:>9.4f} {p:>9.4f}")
    print(
        f"{'pooled':<24} {sum(counts_a) / (n_a * len(labels)):>8.4f} "
        f"{sum(counts_b) / (n_b * len(labels)):>8.4f} {pooled_z:>9.4f} {pooled_p:>9.4f}"
    )
    if args.out:
        lines = ["combo,rate_a,rate_b,z,p"]
        for label, ra, rb, z, p in rows:
            lines.append(f"{label},{ra:.10g},{rb:.10g},{z:.10g},{p:.10g}")
        lines.append(
            f"pooled,{sum(counts_a) / (n_a * len(labels)):.10g},"
            f"{sum(counts_b) / (n_b * len(labels)):.10g},{pooled_z:.10g},{pooled_p:.10g}"
        )
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macs",
        description="Multi-attribute constraint-satisfaction rewriting toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate seeded toy task instances")
    synth_sub = synth.add_subparsers(dest="task", required=True)
    ss = synth_sub.add_parser("style", help="skewed review variation pools")
    ss.add_argument("--seed", type=int, required=True)
    ss.add_argument("--out", required=True)
    ss.add_argument("--groups", type=int, default=60)
    ss.set_defaults(func=cmd_synth_style)
    sp = synth_sub.add_parser("protein", help="wild type plus nearby mutants")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mutants", type=int, default=600)
    sp.add_argument("--length", type=int, default=30)
    sp.set_defaults(func=cmd_synth_protein)

    pairs = sub.add_parser("pairs", help="edit-pair mining, sampling, diagnostics")
    pairs_sub = pairs.add_subparsers(dest="action", required=True)
    pb = pairs_sub.add_parser("build", help="export every ordered pair as examples")
    pb.add_argument("--config", required=True)
    pb.add_argument("--out", required=True)
    pb.add_argument("--window-strategy", dest="window_strategy",
                    choices=["target-satisfying", "nonneg-gain"])
    pb.add_argument("--weight-mode", dest="weight_mode", choices=["wbc", "sft"])
    pb.add_argument("--anchor", action="store_true")
    pb.add_argument("--gamma", type=float)
    pb.set_defaults(func=cmd_pairs_build)
    psample = pairs_sub.add_parser("sample", help="sample pairs and export examples")
    psample.add_argument("--config", required=True)
    psample.add_argument("--out", required=True)
    psample.add_argument("--count", type=int)
    psample.add_argument("--mode", choices=["random", "knn", "window-uniform"])
    psample.add_argument("--window-strategy", dest="window_strategy",
                         choices=["target-satisfying", "nonneg-gain"])
    psample.add_argument("--weight-mode", dest="weight_mode", choices=["wbc", "sft"])
    psample.add_argument("--anchor", action="store_true")
    psample.add_argument("--gamma", type=float)
    psample.set_defaults(func=cmd_pairs_sample)
    pstats = pairs_sub.add_parser(
        "stats", help="delta-vector coverage of random vs configured sampling"
    )
    pstats.add_argument("--config", required=True)
    pstats.add_argument("--out", required=True)
    pstats.add_argument("--draws", type=int)
    pstats.set_defaults(func=cmd_pairs_stats)

    campaign = sub.add_parser("campaign", help="run benchmark campaigns")
    campaign_sub = campaign.add_subparsers(dest="kind", required=True)
    for name, fn in (("style", cmd_campaign_style), ("discover", cmd_campaign_discover)):
        c = campaign_sub.add_parser(name)
        c.add_argument("--config", required=True)
        c.add_argument("--seed", type=int)
        c.add_argument("--out")
        c.add_argument("--workers", type=int, default=1)
        c.add_argument(
            "--strategy",
            choices=[
                "best-of-n",
                "naive-chain",
                "prioritized",
                "random-walk",
                "priority-walk",
            ],
        )
        c.set_defaults(func=fn)

    ztest = sub.add_parser("ztest", help="two-proportion z-test")
    ztest.add_argument("--s1", type=int, required=True)
    ztest.add_argument("--n1", type=int, required=True)
    ztest.add_argument("--s2", type=int, required=True)
    ztest.add_argument("--n2", type=int, required=True)
    ztest.set_defaults(func=cmd_ztest)

    report = sub.add_parser("report", help="report post-processing")
    report_sub = report.add_subparsers(dest="action", required=True)
    rc = report_sub.add_parser("compare", help="per-combo z-tests between two reports")
    rc.add_argument("report_a")
    rc.add_argument("report_b")
    rc.add_argument("--out")
    rc.set_defaults(func=cmd_report_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProtocolError, BridgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, ContractViolation, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
