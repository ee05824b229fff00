"""Command-line entry point.

Subcommands cover the whole workflow: generate or ingest a dataset, build
principal shots, train and apply a ranker, run the evaluation protocols,
and serve the interactive labeling loop.

Exit codes: 0 success, 1 usage problem, 2 data problem, 3 internal failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import evaluation
from .config import AppConfig, load_config
from .errors import ClipsiftError, DataError, UsageError
from .mil import DIVERSE_DENSITY, MI_SVM, load_model, rank_bags, save_model, train
from .model import (
    Bag,
    DatasetManifest,
    load_manifest,
    write_micro_clip_records,
    write_shot_records,
)
from .pipeline import (
    FEATURE_STORE_NAME,
    SHOT_STORE_NAME,
    build_dataset_shots,
    ensure_stores,
    extract_dataset_features,
    read_feature_store,
)
from .service import serve_forever
from .shots import bags_from_dataset
from .synth import CorpusSpec, generate_synthetic_corpus


class _Parser(argparse.ArgumentParser):
    """argparse maps its own errors to exit 2; the contract here wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _globals_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config", metavar="PATH", default=argparse.SUPPRESS,
        help="JSON config document (default: built-in defaults)",
    )
    parent.add_argument(
        "--seed", type=int, metavar="U64", default=argparse.SUPPRESS,
        help="override every seeded computation in this invocation",
    )
    parent.add_argument(
        "--out", metavar="DIR", default=argparse.SUPPRESS,
        help="directory for produced files (default: alongside inputs)",
    )
    return parent


def build_parser() -> _Parser:
    parent = _globals_parent()
    parser = _Parser(
        prog="clipsift",
        description="content-based clip retrieval: features, shots, MIL, evaluation",
        parents=[parent],
    )
    parser.set_defaults(config=None, seed=None, out=None)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[parent], help="extract micro-clip features")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--force", action="store_true", help="recompute even if stores exist")

    p = sub.add_parser("shots", parents=[parent], help="cluster micro-clips into principal shots")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("train", parents=[parent], help="train a MIL ranker from coder labels")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--coder", required=True, metavar="ID")
    p.add_argument("--algorithm", choices=(MI_SVM, DIVERSE_DENSITY))
    p.add_argument("--model-out", metavar="FILE", help="default <out>/model.json")

    p = sub.add_parser("predict", parents=[parent], help="rank clips with a trained model")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--model", required=True, metavar="FILE")

    p = sub.add_parser("eval", parents=[parent], help="replication accuracy or learning curve")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--coder", required=True, metavar="ID")
    p.add_argument("--algorithm", choices=(MI_SVM, DIVERSE_DENSITY))
    p.add_argument("--replications", type=int, default=20, metavar="N")
    p.add_argument(
        "--curve", metavar="SIZES",
        help="comma-separated train sizes; runs the learning curve instead",
    )

    p = sub.add_parser("kappa", parents=[parent], help="Fleiss' kappa agreement")
    p.add_argument("--table", metavar="CSV", help="clipId,coder1..coderN rows of pos|neg")
    p.add_argument("--manifest", metavar="PATH", help="take labels from a manifest instead")
    p.add_argument("--coders", metavar="A,B,...", help="coder ids (manifest mode)")

    p = sub.add_parser("productivity", parents=[parent], help="viewing-yield analysis")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--theoretic", action="store_true")
    mode.add_argument("--simulate", action="store_true")
    p.add_argument("--base-rate", type=float, required=True, metavar="F")
    p.add_argument("--true-positive-rate", type=float, required=True, metavar="T")
    p.add_argument("--true-negative-rate", type=float, required=True, metavar="N")
    p.add_argument("--capacity", type=float, required=True, metavar="K")
    p.add_argument("--pos", type=int, default=100, metavar="N", help="simulation pool positives")
    p.add_argument("--neg", type=int, default=100, metavar="N", help="simulation pool negatives")
    p.add_argument("--replications", type=int, default=100, metavar="N")

    p = sub.add_parser("synth", parents=[parent], help="generate the synthetic corpus")
    p.add_argument("--pos", type=int, default=20, metavar="N")
    p.add_argument("--neg", type=int, default=20, metavar="N")
    p.add_argument("--concept", choices=("motion", "tone", "motionTone"), default="motionTone")
    p.add_argument("--noise", type=float, default=0.25, metavar="X")
    p.add_argument("--duration", type=float, default=60.0, metavar="SEC")

    p = sub.add_parser("serve", parents=[parent], help="run the labeling session service")
    p.add_argument("--manifest", metavar="PATH", help="dataset to preload")
    p.add_argument("--host", metavar="ADDR")
    p.add_argument("--port", type=int, metavar="PORT")
    p.add_argument("--data-dir", metavar="DIR", help="where session state lives")

    return parser


# -- shared helpers ----------------------------------------------------------------


def _config_and_seed(args) -> tuple[AppConfig, int]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.mil.seed = args.seed
    return cfg, (args.seed if args.seed is not None else cfg.mil.seed)


def _manifest_and_root(path: str) -> tuple[DatasetManifest, Path]:
    p = Path(path)
    return load_manifest(p), p.resolve().parent


def _labeled_dataset_bags(args, cfg):
    manifest, root = _manifest_and_root(args.manifest)
    store_dir = Path(args.out) if args.out else root
    _, shots = ensure_stores(manifest, root, cfg.features, cfg.clustering, store_dir)
    return manifest, bags_from_dataset(manifest, shots, args.coder)


# -- subcommands --------------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg, _ = _config_and_seed(args)
    manifest, root = _manifest_and_root(args.manifest)
    store_dir = Path(args.out) if args.out else root
    store_dir.mkdir(parents=True, exist_ok=True)
    path = store_dir / FEATURE_STORE_NAME
    if path.exists() and not args.force:
        print(f"feature store already present: {path} (use --force to recompute)")
        return 0
    micro = extract_dataset_features(manifest, root, cfg.features)
    flat = [mc for cid in manifest.clip_ids() for mc in micro[cid]]
    write_micro_clip_records(flat, path)
    print(f"wrote {len(flat)} micro-clip records for {len(manifest.clips)} clips -> {path}")
    return 0


def cmd_shots(args) -> int:
    cfg, _ = _config_and_seed(args)
    manifest, root = _manifest_and_root(args.manifest)
    store_dir = Path(args.out) if args.out else root
    path = store_dir / SHOT_STORE_NAME
    if path.exists() and not args.force:
        print(f"shot store already present: {path} (use --force to recompute)")
        return 0
    feature_path = store_dir / FEATURE_STORE_NAME
    if feature_path.exists():
        micro = read_feature_store(feature_path)
    else:
        micro = extract_dataset_features(manifest, root, cfg.features)
        store_dir.mkdir(parents=True, exist_ok=True)
        flat = [mc for cid in manifest.clip_ids() for mc in micro[cid]]
        write_micro_clip_records(flat, feature_path)
    shots = build_dataset_shots(micro, cfg.clustering)
    write_shot_records(shots, path)
    total = sum(len(v) for v in shots.values())
    print(f"wrote {total} principal shots for {len(manifest.clips)} clips -> {path}")
    return 0


def cmd_train(args) -> int:
    cfg, _ = _config_and_seed(args)
    if args.algorithm:
        cfg.mil.algorithm = args.algorithm
    _, bags = _labeled_dataset_bags(args, cfg)
    model = train(bags, cfg.mil)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.model_out) if args.model_out else out_dir / "model.json"
    save_model(model, cfg.mil, model_path)
    print(f"trained {cfg.mil.algorithm} on {len(bags)} bags -> {model_path}")
    return 0


def cmd_predict(args) -> int:
    cfg, _ = _config_and_seed(args)
    manifest, root = _manifest_and_root(args.manifest)
    store_dir = Path(args.out) if args.out else root
    _, shots = ensure_stores(manifest, root, cfg.features, cfg.clustering, store_dir)
    model = load_model(args.model)
    bags = [
        Bag(clip_id=e.clip_id, instances=tuple(shots[e.clip_id]), media_ref=e.media_ref)
        for e in manifest.clips
    ]
    ranking = rank_bags(model, bags)
    for clip_id, score in ranking:
        print(f"{clip_id}\t{score:.6f}")
    if args.out:
        out = Path(args.out) / "ranking.json"
        evaluation.write_json(
            {"ranking": [{"clipId": c, "score": s} for c, s in ranking]}, out
        )
        print(f"ranking written -> {out}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    cfg, seed = _config_and_seed(args)
    if args.algorithm:
        cfg.mil.algorithm = args.algorithm
    manifest, bags = _labeled_dataset_bags(args, cfg)
    truth = manifest.labels_for(args.coder)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.curve:
        try:
            sizes = [int(s) for s in args.curve.split(",") if s.strip()]
        except ValueError as exc:
            raise UsageError(f"--curve wants comma-separated integers: {exc}") from exc
        points = evaluation.learning_curve(
            bags, truth, sizes, args.replications, cfg.mil, seed
        )
        evaluation.write_json({"points": [pt.to_json() for pt in points]},
                              out_dir / "curve.json")
        evaluation.write_curve_csv(points, out_dir / "curve.csv")
        for pt in points:
            print(f"trainSize={pt.train_size} mean={pt.mean:.4f} std={pt.std:.4f}")
    else:
        report = evaluation.replicate(bags, truth, cfg.mil, args.replications, seed)
        evaluation.write_json(report.to_json(), out_dir / "replications.json")
        evaluation.write_replication_csv(report, out_dir / "replications.csv")
        print(
            f"{cfg.mil.algorithm}: mean accuracy {report.mean:.4f} "
            f"(std {report.std:.4f}, {args.replications} replications, "
            f"train {report.train_size} / test {report.test_size})"
        )
    return 0


def cmd_kappa(args) -> int:
    if bool(args.table) == bool(args.manifest):
        raise UsageError("kappa wants exactly one of --table or --manifest")
    if args.table:
        table = evaluation.read_agreement_csv(args.table)
    else:
        manifest = load_manifest(args.manifest)
        labels = manifest.per_coder_labels
        if args.coders:
            wanted = [c.strip() for c in args.coders.split(",") if c.strip()]
            labels = {c: manifest.labels_for(c) for c in wanted}
        table = evaluation.agreement_table_from_labels(labels)
    kappa = evaluation.fleiss_kappa(table)
    print(f"fleiss kappa = {kappa:.6f} "
          f"({table.counts.shape[0]} items, {table.rater_count} raters)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        evaluation.write_json(
            {"kappa": kappa, "items": int(table.counts.shape[0]),
             "raters": table.rater_count},
            out / "kappa.json",
        )
    return 0


def cmd_productivity(args) -> int:
    _, seed = _config_and_seed(args)
    params = evaluation.ProductivityParams(
        base_rate=args.base_rate,
        true_positive_rate=args.true_positive_rate,
        true_negative_rate=args.true_negative_rate,
        capacity=args.capacity,
    )
    expected_random, expected_filtered = evaluation.productivity_theoretic(params)
    row = {
        "baseRate": params.base_rate,
        "truePositiveRate": params.true_positive_rate,
        "trueNegativeRate": params.true_negative_rate,
        "capacity": params.capacity,
        "expectedRandom": expected_random,
        "expectedFiltered": expected_filtered,
    }
    print(f"expectedRandom={expected_random:.4f} expectedFiltered={expected_filtered:.4f} "
          f"ratio={expected_filtered / expected_random:.3f}")
    if args.simulate:
        mean, std = evaluation.productivity_simulate(
            params, args.pos, args.neg, args.replications, seed
        )
        row["simulatedMean"] = mean
        row["simulatedStd"] = std
        print(f"simulatedMean={mean:.4f} simulatedStd={std:.4f} "
              f"({args.replications} replications, pool {args.pos}+{args.neg})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        evaluation.write_json(row, out / "productivity.json")
        evaluation.write_productivity_csv([row], out / "productivity.csv")
    return 0


def cmd_synth(args) -> int:
    _, seed = _config_and_seed(args)
    if not args.out:
        raise UsageError("synth writes a corpus; pass --out DIR")
    spec = CorpusSpec(
        pos_count=args.pos,
        neg_count=args.neg,
        concept=args.concept,
        noise_level=args.noise,
        seed=seed,
        duration_sec=args.duration,
    )
    manifest_path = generate_synthetic_corpus(args.out, spec)
    print(f"generated {args.pos}+{args.neg} clips -> {manifest_path}")
    return 0


def cmd_serve(args) -> int:
    cfg, _ = _config_and_seed(args)
    if args.host:
        cfg.service.host = args.host
    if args.port:
        cfg.service.port = args.port
    data_dir = args.data_dir if args.data_dir else cfg.service.data_dir
    serve_forever(cfg, data_dir, args.manifest)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "shots": cmd_shots,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "kappa": cmd_kappa,
    "productivity": cmd_productivity,
    "synth": cmd_synth,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:  # argparse --help exits 0, our error() exits 1
        return int(exit_.code or 0)
    if not args.command:
        parser.print_help()
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ClipsiftError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
