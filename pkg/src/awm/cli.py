"""Command-line entry point.

    awm ingest   --input <path> --store <dir> [--retention-days 3]
    awm digest   --sql "<text>"
    awm embed    --store <dir> [--pooling max|mean] [--batch-size 512] [--dim 64]
    awm train    --store <dir> [--pl 0.01] [--mode random_sample|manual|hybrid]
                 [--batches 10] [--seed 0]
    awm mine     --store <dir> [--theta 0.77] [--max-ord 1] [--group-by predicted|label]
    awm optimize --patterns <file> --pattern-id <id> [--deps <file>] [--rt <file>]
    awm serve    --store <dir> [--port 8080]
    awm run      --store <dir> [--config <file>]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import classifier as clf
from . import exec_features, log_ingest, optimizer, server, service
from .embedding import EmbeddingConfig, EmbeddingStore, embed_with_store
from .errors import AwmError
from .sql_template import digest, sql_id


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awm", description="workload pattern mining toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="append query-log lines to a record store")
    p.add_argument("--input", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--retention-days", type=int, default=3)

    p = sub.add_parser("digest", help="print the template and id of one statement")
    p.add_argument("--sql", required=True)

    p = sub.add_parser("embed", help="embed all stored queries into the embedding cache")
    p.add_argument("--store", required=True)
    p.add_argument("--pooling", choices=["max", "mean"], default="max")
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="sample labels per policy and train the classifier")
    p.add_argument("--store", required=True)
    p.add_argument("--pl", type=float, default=0.01)
    p.add_argument("--mode", choices=list(clf.LABEL_MODES), default="random_sample")
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pooling", choices=["max", "mean"], default="max")
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--dim", type=int, default=64)

    p = sub.add_parser("mine", help="mine per-group patterns from the record store")
    p.add_argument("--store", required=True)
    p.add_argument("--theta", type=float, default=0.77)
    p.add_argument("--max-ord", type=int, default=1)
    p.add_argument("--group-by", choices=["predicted", "label"], default="label")

    p = sub.add_parser("optimize", help="print the parallel schedule of one pattern")
    p.add_argument("--patterns", required=True)
    p.add_argument("--pattern-id", type=int, required=True)
    p.add_argument("--deps", help="business deps file, lines of 'from -> to'")
    p.add_argument("--rt", help="per-node rt file, lines of 'index seconds'")

    p = sub.add_parser("serve", help="serve the pattern API over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("run", help="run the full pipeline end to end")
    p.add_argument("--store", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--group-by", choices=["predicted", "label"])

    return parser


def cmd_ingest(args: argparse.Namespace) -> int:
    store = log_ingest.RecordStore(args.store)
    appended = log_ingest.ingest_stream(
        log_ingest.iter_lines(args.input), store, retention_days=args.retention_days
    )
    print(f"appended {appended} records ({store.skipped} lines skipped), store size {len(store)}")
    return 0


def cmd_digest(args: argparse.Namespace) -> int:
    template = digest(args.sql)
    print(template.text)
    print(sql_id(template))
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    config = EmbeddingConfig(
        dimension=args.dim, batch_size=args.batch_size, pooling=args.pooling, seed=args.seed
    )
    records = log_ingest.RecordStore(args.store).load()
    store_path = Path(args.store) / service.EMBEDDINGS_FILE
    emb_store = EmbeddingStore.open(store_path, config.dimension)
    embed_with_store([r.sql for r in records], emb_store, config)
    emb_store.save()
    print(f"embedded {len(records)} queries, {len(emb_store)} distinct texts cached")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    store_dir = Path(args.store)
    records = log_ingest.RecordStore(store_dir).load()
    if not records:
        print("record store is empty", file=sys.stderr)
        return 1

    policy = clf.LabelPolicy(mode=args.mode, p_l=args.pl, seed=args.seed)
    labeled = clf.sample_labels(records, policy)
    if not labeled:
        print("label policy selected no records", file=sys.stderr)
        return 1

    # stage the labeled set so the post-training discard rule is observable
    staged = store_dir / service.LABELS_FILE
    with staged.open("w", encoding="utf-8") as fh:
        for record in labeled:
            fh.write(log_ingest.serialize_record(record) + "\n")

    config = EmbeddingConfig(
        dimension=args.dim, batch_size=args.batch_size, pooling=args.pooling, seed=args.seed
    )
    emb_store = EmbeddingStore.open(store_dir / service.EMBEDDINGS_FILE, config.dimension)
    embeddings = embed_with_store([r.sql for r in labeled], emb_store, config)
    emb_store.save()

    stats = exec_features.fit_stats(records)
    stats.save(store_dir / service.STATS_FILE)

    assembler = clf.FeatureAssembler()
    pairs = []
    for record, z in zip(labeled, embeddings):
        feature = assembler.assemble(
            z, exec_features.encode(record, stats), timestamp=record.timestamp
        )
        pairs.append((feature, record.group_label))

    model = clf.train(pairs, clf.TrainConfig(num_batches=args.batches, seed=args.seed))
    model.save(store_dir / service.CLASSIFIER_FILE)
    service.discard_staged_labels(store_dir)
    print(f"trained on {len(pairs)} labeled records, classes: {', '.join(model.classes)}")
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    config = service.PipelineConfig(theta=args.theta, max_order=args.max_ord, group_by=args.group_by)
    state = service.run_pipeline(args.store, config)
    print(f"mined {len(state.patterns)} patterns across "
          f"{len({e.group for e in state.patterns})} groups")
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    entries = json.loads(Path(args.patterns).read_text(encoding="utf-8"))
    entry = next((e for e in entries if e.get("id") == args.pattern_id), None)
    if entry is None:
        print(f"no pattern with id {args.pattern_id}", file=sys.stderr)
        return 1
    templates = [digest(text) for text in entry["templates"]]
    deps = optimizer.parse_deps_file(Path(args.deps).read_text(encoding="utf-8")) if args.deps else []
    graph = optimizer.build_dependency_graph(templates, deps)
    sched = optimizer.schedule(graph)
    for stage in sched.stages:
        print(", ".join(entry["templates"][node] for node in stage))
    if args.rt:
        rt: dict[int, float] = {}
        for line in Path(args.rt).read_text(encoding="utf-8").splitlines():
            if line.strip():
                index, seconds = line.split()
                rt[int(index)] = float(seconds)
        print(f"estimated speedup: {optimizer.estimate_speedup(sched, rt):.4f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    server.serve(args.store, port=args.port, host=args.host)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = service.PipelineConfig.from_file(args.config) if args.config else service.PipelineConfig()
    if args.group_by:
        config.group_by = args.group_by
    state = service.run_pipeline(args.store, config)
    groups = sorted({e.group for e in state.patterns})
    print(f"pipeline complete: {len(state.patterns)} patterns, groups: {', '.join(groups)}")
    print(f"artifacts in {args.store}: {service.PATTERNS_FILE}, {service.STATE_FILE}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "digest": cmd_digest,
    "embed": cmd_embed,
    "train": cmd_train,
    "mine": cmd_mine,
    "optimize": cmd_optimize,
    "serve": cmd_serve,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except AwmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
