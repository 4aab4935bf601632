"""Command-line pipeline: synthesize data, pseudo-label, sweep thresholds,
train, infer, and evaluate.

Every command takes a dataset manifest, exits 0 on success, and reports
failures as a single `error: ...` line on stderr with a non-zero exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .core import (
    AnnotationError,
    StateVocabulary,
    VocabularyError,
    VocabularyMode,
    build_vocabulary,
    labels_from_ranges,
)
from .dataio import (
    FormatError,
    ManifestError,
    read_annotation,
    read_features,
    read_label_file,
    read_manifest,
    read_scores,
    write_label_file,
    write_scores,
)
from .decode import argmax_decode, hierarchical_decode, ordered_decode, restrict_scores, top1_frames
from .evaluation import aggregate, frame_metrics, state_precision_at_1
from .model import (
    CheckpointError,
    ModelConfig,
    TrainConfig,
    TrainingDiverged,
    infer,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .model.training import targets_from_labels
from .pseudolabel import (
    Thresholds,
    assign_video_labels,
    enforce_causal_order,
    threshold_score_surface,
)
from .synthetic import SynthConfig, default_table, generate_dataset, write_dataset

_ERRORS = (AnnotationError, CheckpointError, FormatError, ManifestError,
           TrainingDiverged, VocabularyError, ValueError, OSError)


def _filter_entries(entries, subset: str, split: str):
    kept = [e for e in entries
            if subset in ("all", e.subset) and split in ("all", e.split)]
    if not kept:
        raise ManifestError(
            f"no videos match subset={subset!r} split={split!r}")
    return kept


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"bad float list {text!r}") from None
    if not values:
        raise ValueError(f"bad float list {text!r}")
    return values


def _gt_labels(entry):
    if entry.annotations is None:
        raise ManifestError(f"{entry.video_id}: no annotations in manifest")
    _, _, ann = read_annotation(entry.annotations)
    return labels_from_ranges(ann, ann.frame_count), ann


def _vocabulary_from_manifest(entries, mode: str) -> StateVocabulary:
    table: dict[str, tuple[set, set]] = {}
    for e in entries:
        known, novel = table.setdefault(e.osc.transition, (set(), set()))
        (known if e.split == "known" else novel).add(e.osc.obj)
    return build_vocabulary(mode, {
        t: (sorted(known), sorted(novel))
        for t, (known, novel) in table.items()
    })


def cmd_synth(args) -> int:
    table = default_table(args.transitions, args.known_objects,
                          args.novel_objects)
    config = SynthConfig(
        table=table,
        feature_dim=args.feature_dim,
        videos_per_object=args.videos_per_object,
        min_frames=args.min_frames,
        max_frames=args.max_frames,
        bg_fraction=args.bg_fraction,
        separation=args.separation,
        offset_scale=args.offset_scale,
        noise_sigma=args.noise_sigma,
        jitter_sigma=args.jitter_sigma,
        confusion_rate=args.confusion_rate,
    )
    dataset = generate_dataset(config, args.seed)
    manifest = write_dataset(dataset, args.out)
    print(f"wrote {len(dataset.videos)} videos to {args.out} "
          f"(tau_hint={dataset.tau_hint:.6g}, "
          f"delta_hint={dataset.delta_hint:.6g})")
    print(f"manifest: {manifest}")
    return 0


def _pseudo_one(task):
    scores_path, tau, delta, ordering = task
    labels = assign_video_labels(read_scores(scores_path),
                                 Thresholds(tau, delta))
    if ordering:
        labels = enforce_causal_order(labels)
    return labels


def cmd_pseudo_label(args) -> int:
    entries = _filter_entries(read_manifest(args.manifest),
                              args.subset, args.split)
    tasks = [(e.scores, args.tau, args.delta, not args.no_ordering)
             for e in entries]
    if args.workers > 1:
        with Pool(args.workers) as pool:
            labeled = pool.map(_pseudo_one, tasks)
    else:
        labeled = [_pseudo_one(t) for t in tasks]
    write_label_file(args.out, {e.video_id: lab
                                for e, lab in zip(entries, labeled)})
    print(f"labeled {len(entries)} videos -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    entries = _filter_entries(read_manifest(args.manifest),
                              args.subset, args.split)
    videos = []
    for e in entries:
        gt, _ = _gt_labels(e)
        videos.append((read_scores(e.scores), gt))
    tau_grid = np.sort(np.unique(_float_list(args.tau_grid)))
    delta_grid = np.sort(np.unique(_float_list(args.delta_grid)))
    surface = threshold_score_surface(videos, tau_grid, delta_grid,
                                      refine=not args.no_ordering)
    i, j = divmod(int(np.argmax(surface)), delta_grid.size)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("tau,delta,f1\n")
            for a, tau in enumerate(tau_grid):
                for b, delta in enumerate(delta_grid):
                    fh.write(f"{tau:.9g},{delta:.9g},{surface[a, b]:.9g}\n")
    print(f"best tau={tau_grid[i]:.9g} delta={delta_grid[j]:.9g} "
          f"f1={surface[i, j]:.6f} over {len(videos)} videos")
    return 0


def cmd_train(args) -> int:
    entries = read_manifest(args.manifest)
    vocabulary = _vocabulary_from_manifest(entries, args.vocab)
    train_entries = [e for e in entries if e.subset == "train"]
    if not train_entries:
        raise ManifestError("manifest has no training videos")
    labels = read_label_file(args.labels)

    videos = []
    input_dim = None
    for e in train_entries:
        if e.video_id not in labels:
            raise ValueError(f"{e.video_id}: missing from label file")
        feats = read_features(e.features).astype(np.float64)
        if input_dim is None:
            input_dim = feats.shape[1]
        elif feats.shape[1] != input_dim:
            raise FormatError(f"{e.video_id}: feature dim {feats.shape[1]} "
                              f"differs from {input_dim}")
        if labels[e.video_id].shape[0] != feats.shape[0]:
            raise ValueError(f"{e.video_id}: labels and features disagree "
                             f"on frame count")
        targets = targets_from_labels(labels[e.video_id], vocabulary,
                                      e.osc.transition, e.osc.obj)
        videos.append((feats, targets))

    model_config = ModelConfig(
        input_dim=input_dim,
        hidden_dim=args.hidden,
        num_layers=args.layers,
        num_heads=args.heads,
        num_classes=vocabulary.num_classes,
    )
    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )
    log = (lambda e: print(f"epoch {e['epoch']}: loss={e['loss']:.6f} "
                           f"({e['frames']} frames)")) \
        if not args.quiet else None
    params, history = train(model_config, train_config, videos, on_epoch=log)
    extra = {
        "vocabulary": {
            "mode": vocabulary.mode.value,
            "table": {t: [list(vocabulary.known_objects[t]),
                          list(vocabulary.novel_objects[t])]
                      for t in vocabulary.transitions},
        },
    }
    save_checkpoint(args.out, model_config, params, extra)
    print(f"saved model to {args.out} "
          f"(final loss {history[-1]['loss']:.6f})")
    return 0


def _vocabulary_from_checkpoint(extra) -> StateVocabulary:
    try:
        doc = extra["vocabulary"]
        return build_vocabulary(doc["mode"], {
            t: (list(known), list(novel))
            for t, (known, novel) in doc["table"].items()
        })
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint lacks vocabulary info: {exc}") \
            from None


def _decode_video(probs, vocabulary, entry, mode: str):
    """Returns (labels, four-column scores used for ranking frames)."""
    if mode == "hierarchical":
        transition, labels = hierarchical_decode(probs, vocabulary)
        return labels, restrict_scores(probs, vocabulary, transition)

    obj = entry.osc.obj
    if (vocabulary.mode is VocabularyMode.PER_OSC
            and obj not in vocabulary.known_objects.get(entry.osc.transition, ())):
        obj = None  # novel object: pool the transition's known objects
    restricted = restrict_scores(probs, vocabulary, entry.osc.transition, obj)
    if mode == "ordered":
        return ordered_decode(restricted), restricted
    if vocabulary.mode is VocabularyMode.SHARED:
        return argmax_decode(probs), restricted
    return argmax_decode(probs, vocabulary), restricted


def cmd_infer(args) -> int:
    config, params, extra = load_checkpoint(args.model)
    vocabulary = _vocabulary_from_checkpoint(extra)
    if args.decode == "hierarchical" \
            and vocabulary.mode is not VocabularyMode.MULTI_TASK:
        raise ValueError("hierarchical decoding needs a multitask model")
    entries = _filter_entries(read_manifest(args.manifest),
                              args.subset, args.split)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    decoded = {}
    for e in entries:
        feats = read_features(e.features).astype(np.float64)
        if feats.shape[1] != config.input_dim:
            raise FormatError(f"{e.video_id}: feature dim {feats.shape[1]} "
                              f"does not match the model "
                              f"({config.input_dim})")
        probs = infer(params, config, feats)
        labels, restricted = _decode_video(probs, vocabulary, e, args.decode)
        decoded[e.video_id] = labels
        write_scores(out_dir / f"{e.video_id}.oscs", restricted)
    write_label_file(out_dir / "labels.json", decoded)
    print(f"decoded {len(entries)} videos -> {out_dir}")
    return 0


def cmd_eval(args) -> int:
    entries = _filter_entries(read_manifest(args.manifest),
                              args.subset, args.split)
    predictions = read_label_file(args.labels)
    results = []
    for e in entries:
        if e.video_id not in predictions:
            raise ValueError(f"{e.video_id}: missing from prediction file")
        gt, ann = _gt_labels(e)
        pred = predictions[e.video_id]
        if pred.shape[0] != gt.shape[0]:
            raise ValueError(f"{e.video_id}: prediction has {pred.shape[0]} "
                             f"frames, ground truth {gt.shape[0]}")
        result = frame_metrics(pred, gt)
        if args.scores_dir:
            scores = read_scores(Path(args.scores_dir) / f"{e.video_id}.oscs")
            if scores.shape[1] != 4:
                raise FormatError(f"{e.video_id}: expected 4 score columns "
                                  f"for ranking, got {scores.shape[1]}")
            hits, mean = state_precision_at_1(top1_frames(scores), ann)
            result.p1_hits, result.p1 = hits, mean
        results.append((result, e.osc, e.split))

    report = aggregate(results)
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    for split, row in report.overall.items():
        p1 = "-" if row["precision_at_1"] is None \
            else f"{row['precision_at_1']:.4f}"
        print(f"{split}: f1={row['f1']:.4f} precision={row['precision']:.4f} "
              f"p@1={p1} videos={row['videos']}")
    if not report.overall:
        print("no scorable videos (all ground truth is background)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscloc",
        description="Temporal localization of object state changes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transitions", type=int, default=2)
    p.add_argument("--known-objects", type=int, default=3)
    p.add_argument("--novel-objects", type=int, default=1)
    p.add_argument("--videos-per-object", type=int, default=8)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--min-frames", type=int, default=20)
    p.add_argument("--max-frames", type=int, default=40)
    p.add_argument("--bg-fraction", type=float, default=0.3)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--offset-scale", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--jitter-sigma", type=float, default=0.0)
    p.add_argument("--confusion-rate", type=float, default=0.0,
                   help="chance an in-progress frame gets a confident "
                        "end-state score")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pseudo-label", help="score matrices to frame labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--no-ordering", action="store_true",
                   help="skip the causal-order refinement")
    p.add_argument("--subset", default="all",
                   choices=("train", "val", "test", "all"))
    p.add_argument("--split", default="all",
                   choices=("known", "novel", "all"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("sweep", help="grid-search tau/delta on annotations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tau-grid", required=True,
                   help="comma-separated tau values")
    p.add_argument("--delta-grid", required=True,
                   help="comma-separated delta values")
    p.add_argument("--out", help="write the full F1 surface as CSV")
    p.add_argument("--no-ordering", action="store_true")
    p.add_argument("--subset", default="val",
                   choices=("train", "val", "test", "all"))
    p.add_argument("--split", default="known",
                   choices=("known", "novel", "all"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="fit the frame classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True,
                   help="label file from pseudo-label")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", default="shared",
                   choices=("shared", "per-osc", "multitask"))
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="decode state sequences with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True,
                   help="directory for labels.json and per-video scores")
    p.add_argument("--decode", default="ordered",
                   choices=("argmax", "ordered", "hierarchical"))
    p.add_argument("--subset", default="test",
                   choices=("train", "val", "test", "all"))
    p.add_argument("--split", default="all",
                   choices=("known", "novel", "all"))
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against annotations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", required=True,
                   help="prediction label file from infer")
    p.add_argument("--scores-dir",
                   help="per-video score files for precision@1")
    p.add_argument("--out", help="write the report as JSON")
    p.add_argument("--subset", default="test",
                   choices=("train", "val", "test", "all"))
    p.add_argument("--split", default="all",
                   choices=("known", "novel", "all"))
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
