"""Command-line entry point: ``cloudmr <command> ...``.

Every command that touches the block store takes ``--root DIR`` (default
``./.cloudmr``, or ``$CLOUDMR_ROOT``); the store is reopened from its
``manifest.json`` on each invocation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from cloudmr.classify import BatchStats, ClassifierConfig, classify, load_classifier_file, route, scores
from cloudmr.engine import Engine, JobSpec, format_records, load_job_file
from cloudmr.errors import CloudMRError
from cloudmr.pipeline import load_pipeline_config, run_pipeline
from cloudmr.query.session import repl, run_script
from cloudmr.store import DEFAULT_BLOCK_SIZE, DEFAULT_REPLICATION, BlockStore
from cloudmr.timing import build_report, load_profile, simulate

log = logging.getLogger("cloudmr")


def _root(args) -> Path:
    return Path(args.root or os.environ.get("CLOUDMR_ROOT", ".cloudmr"))


def _store(args) -> BlockStore:
    return BlockStore(root=_root(args))


def _write(args, data: bytes) -> None:
    if getattr(args, "output", None):
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


# -- store ------------------------------------------------------------------


def cmd_store_init(args) -> int:
    root = _root(args)
    if (root / "manifest.json").exists():
        print(f"store already initialized at {root}", file=sys.stderr)
        return 1
    store = BlockStore(args.nodes, root=root, block_size=args.block_size, replication=args.replication)
    print(f"initialized {root} with nodes {', '.join(store.alive_nodes())}")
    return 0


def cmd_store_put(args) -> int:
    store = _store(args)
    data = Path(args.file).read_bytes()
    m = store.put_file(
        args.name,
        data,
        block_size=args.block_size,
        replication=args.replication,
        align=None if args.raw else b"\n",
    )
    print(f"{m.name}: {m.total_size} bytes in {len(m.blocks)} block(s), replication {m.replication}")
    return 0


def cmd_store_get(args) -> int:
    _write(args, _store(args).get_file(args.name))
    return 0


def cmd_store_ls(args) -> int:
    store = _store(args)
    for node_id, node in sorted(store.nodes.items()):
        print(f"node {node_id} {'alive' if node.alive else 'dead'}")
    for m in store.list_files():
        print(f"{m.name}\t{m.total_size}\t{len(m.blocks)} blocks\tr={m.replication}")
        if args.blocks:
            for bid in m.blocks:
                print(f"  {bid}\t{','.join(sorted(store.placements[bid]))}")
    return 0


def cmd_store_add_node(args) -> int:
    _store(args).add_node(args.id)
    return 0


def cmd_store_rm_node(args) -> int:
    _store(args).remove_node(args.id)
    return 0


def cmd_store_kill_node(args) -> int:
    _store(args).kill_node(args.id)
    return 0


# -- classify / job / query / timing / pipeline -----------------------------


def cmd_classify(args) -> int:
    with open(args.stats) as fh:
        doc = json.load(fh)
    batches = doc if isinstance(doc, list) else [doc]
    cfg, table = load_classifier_file(args.config) if args.config else (ClassifierConfig(), None)
    for i, d in enumerate(batches):
        stats = BatchStats(d["volume_bytes"], d["arrival_rate"], d["schema_kinds"], d["value_score"])
        label = classify(stats, cfg)
        row = {"batch": d.get("id", i), "label": label.value}
        if table is not None:
            row["group"] = route(label, table)
        if args.scores:
            row["scores"] = {k.value: v for k, v in scores(stats, cfg).items()}
        print(json.dumps(row))
    return 0


def cmd_job_run(args) -> int:
    store = _store(args)
    desc = load_job_file(args.jobfile)
    if args.workers is not None:
        desc["workers"] = args.workers
    result = Engine(store).run_job(JobSpec.from_dict(desc, store))
    _write(args, format_records(result.output))
    timings = ", ".join(f"{k}={v:.4f}s" for k, v in result.phase_timings.items())
    log.info("%d block(s), %d input record(s); %s", result.blocks_processed, result.input_records, timings)
    return 0


def cmd_query(args) -> int:
    store = _store(args)
    if args.repl:
        session = repl(store, num_workers=args.workers)
    else:
        if args.script is None:
            print("query: give a script file or --repl", file=sys.stderr)
            return 2
        text = Path(args.script).read_text(encoding="utf-8")
        session = run_script(store, text, num_workers=args.workers)
    return 1 if session.error_count else 0


def cmd_timing_report(args) -> int:
    report = build_report(load_profile(args.profile))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.table())
    return 0


def cmd_timing_simulate(args) -> int:
    profile = load_profile(args.profile)
    means = simulate(profile, args.q, args.trials, args.seed)
    rows = []
    for i, (unit, mean) in enumerate(zip(profile.units, means)):
        expected = (unit.p + unit.tp) + args.q * unit.dp
        rows.append({"unit": i, "sampled_mean": mean, "expected": expected})
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'unit':>4}  {'sampled mean':>14}  {'expected':>14}")
        for r in rows:
            print(f"{r['unit']:>4}  {r['sampled_mean']:>14.6f}  {r['expected']:>14.6f}")
    return 0


def cmd_pipeline_run(args) -> int:
    cfg = load_pipeline_config(args.config)
    store = BlockStore(root=args.root) if args.root else None
    if store is not None and not store.alive_nodes():
        for i in range(cfg.nodes):
            store.add_node(f"dn{i:02d}")
    result = run_pipeline(cfg, store)
    _write(args, result.delivered)
    for sid in sorted(result.assignments):
        log.info("source %s: %s -> %s", sid, result.labels[sid].value, result.assignments[sid])
    if args.report:
        print(result.timing.table(), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudmr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_root(p):
        p.add_argument("--root", help="block store directory")
        return p

    store = sub.add_parser("store", help="block store operations").add_subparsers(dest="store_cmd", required=True)
    p = with_root(store.add_parser("init"))
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.add_argument("--replication", type=int, default=DEFAULT_REPLICATION)
    p.set_defaults(func=cmd_store_init)
    p = with_root(store.add_parser("put"))
    p.add_argument("name")
    p.add_argument("file")
    p.add_argument("--block-size", type=int)
    p.add_argument("--replication", type=int)
    p.add_argument("--raw", action="store_true", help="split at fixed offsets instead of line boundaries")
    p.set_defaults(func=cmd_store_put)
    p = with_root(store.add_parser("get"))
    p.add_argument("name")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_store_get)
    p = with_root(store.add_parser("ls"))
    p.add_argument("--blocks", action="store_true")
    p.set_defaults(func=cmd_store_ls)
    for name, func in (("add-node", cmd_store_add_node), ("rm-node", cmd_store_rm_node), ("kill-node", cmd_store_kill_node)):
        p = with_root(store.add_parser(name))
        p.add_argument("id")
        p.set_defaults(func=func)

    p = sub.add_parser("classify", help="label batch statistics by dominant V")
    p.add_argument("--stats", required=True)
    p.add_argument("--config")
    p.add_argument("--scores", action="store_true")
    p.set_defaults(func=cmd_classify)

    job = sub.add_parser("job").add_subparsers(dest="job_cmd", required=True)
    p = with_root(job.add_parser("run"))
    p.add_argument("jobfile")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_job_run)

    p = with_root(sub.add_parser("query", help="run a dataflow script or start the shell"))
    p.add_argument("script", nargs="?")
    p.add_argument("--repl", action="store_true")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_query)

    timing = sub.add_parser("timing").add_subparsers(dest="timing_cmd", required=True)
    p = timing.add_parser("report")
    p.add_argument("--profile", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_timing_report)
    p = timing.add_parser("simulate")
    p.add_argument("--profile", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_timing_simulate)

    pipe = sub.add_parser("pipeline").add_subparsers(dest="pipeline_cmd", required=True)
    p = pipe.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--root", help="persist the pipeline's store here instead of in memory")
    p.add_argument("-o", "--output")
    p.add_argument("--report", action="store_true", help="print the timing report to stderr")
    p.set_defaults(func=cmd_pipeline_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CloudMRError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
