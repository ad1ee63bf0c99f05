"""Command-line entry point: ``bike <subcommand> ...``.

Exit codes: 0 success, 1 a numerical check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import attributes, bemb, distributed, objective, recognition, store, synthetic
from .concept_spotting import temporal_saliency
from .errors import BikeError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DIST_TOLERANCE = 1e-10


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("BIKE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"BIKE_SEED must be an integer, got {env!r}") from exc


def _emit(args, payload: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _load_dataset(path):
    ds = store.load_manifest(path)
    if not isinstance(ds, store.DatasetManifest):
        raise UsageError(f"{path} is a lexicon manifest, expected a dataset")
    return ds


def _load_lexicon(args, ds):
    if getattr(args, "lexicon", None):
        lex = store.load_manifest(args.lexicon)
        if not isinstance(lex, store.Lexicon):
            raise UsageError(f"{args.lexicon} is not a lexicon manifest")
        return lex
    return ds.lexicon


def _prefix(args):
    return None if args.no_prompt else args.prefix


# --- subcommands -------------------------------------------------------------

def cmd_spot(args) -> int:
    ds = _load_dataset(args.manifest)
    rows, lines = [], []
    for video, label in ds.videos:
        cats = ds.categories if args.all_categories else [ds.categories[label]]
        for cat in cats:
            s = temporal_saliency(video, cat.word_embeddings, args.tau)
            weights = [float(f"{w:.17g}") for w in s.weights]
            rows.append({"video_id": video.video_id, "category": cat.name, "weights": weights})
            lines.append(f"{video.video_id}\t{cat.name}\t" + " ".join(f"{w:.17g}" for w in s.weights))
    config = {"manifest": os.path.abspath(args.manifest), "tau_vcs": args.tau,
              "all_categories": args.all_categories}
    _emit(args, {"config": config, "saliency": rows}, lines)
    return EXIT_OK


def cmd_attrs(args) -> int:
    ds = _load_dataset(args.manifest)
    lex = _load_lexicon(args, ds)
    if lex is None:
        raise UsageError("no lexicon: pass --lexicon or reference one in the manifest")
    source = attributes.Surrogate(_seed(args)) if args.encoder == "surrogate" else None
    out, lines, e_rows = [], [], []
    for video, _ in ds.videos:
        attrs, sentence = attributes.describe(video, lex, args.k, _prefix(args), source)
        e_rows.append(sentence.e_a)
        out.append({
            "video_id": video.video_id,
            "attributes": [{"phrase": p, "score": s} for p, s in attrs.phrases],
            "sentence": sentence.text,
        })
        lines.append(f"{video.video_id}: {sentence.text}")
        lines.extend(f"    {s:+.6f}  {p}" for p, s in attrs.phrases)
    if args.emit_bemb:
        bemb.write_bemb(args.emit_bemb, np.stack(e_rows))
    config = {"manifest": os.path.abspath(args.manifest), "k": args.k,
              "prefix": _prefix(args), "encoder": args.encoder, "seed": _seed(args)}
    _emit(args, {"config": config, "videos": out}, lines)
    return EXIT_OK


def _fusion_config(args) -> recognition.FusionConfig:
    return recognition.FusionConfig(
        lam=args.lam,
        tau_vcs=args.tau,
        k_attributes=args.k_attrs,
        prefix=_prefix(args),
        aggregation=args.agg,
        use_attributes=args.attrs == "on",
        attr_encoder=args.encoder,
        surrogate_seed=_seed(args),
    )


def cmd_eval(args) -> int:
    ds = _load_dataset(args.manifest)
    lex = _load_lexicon(args, ds)
    cfg = _fusion_config(args)
    if args.half_class:
        mean, std, accs = recognition.half_class_eval(ds, cfg, args.repeats, _seed(args), lex)
        payload = {"protocol": "half-class", "mean_top1": mean, "std_top1": std,
                   "per_repeat": accs, "repeats": args.repeats}
        lines = [f"half-class top1: {mean:.4f} +- {std:.4f} over {args.repeats} repeats"]
    else:
        report = recognition.evaluate(ds, cfg, lex)
        payload = {"protocol": "single-view", **report.to_dict()}
        lines = [f"videos: {len(report.predictions)}  classes: {ds.num_classes}",
                 f"top1: {report.top1:.4f}",
                 f"top{report.k5}: {report.top5:.4f}"]
    payload["config"] = {**cfg.to_dict(), "manifest": os.path.abspath(args.manifest),
                         "seed": _seed(args), "half_class": args.half_class}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    _emit(args, payload, lines + [f"config: {json.dumps(payload['config'], sort_keys=True)}"])
    return EXIT_OK


def cmd_loss_check(args) -> int:
    rng = np.random.default_rng(_seed(args))
    tolerance = 1e-5 if args.tau >= 0.1 else 1e-4
    worst = 0.0
    for _ in range(args.batches):
        labels = args.batch // 2 if args.dup_labels else None
        b = objective.random_batch(rng, args.batch, args.dim, args.tau, num_labels=labels)
        worst = max(worst, float(objective.finite_diff_check(b, args.eps)))
    ok = bool(worst < tolerance)
    payload = {"max_relative_error": worst, "tolerance": tolerance, "passed": ok,
               "config": {"batches": args.batches, "batch": args.batch, "dim": args.dim,
                          "tau": args.tau, "eps": args.eps, "dup_labels": args.dup_labels,
                          "seed": _seed(args)}}
    _emit(args, payload, [f"max relative error: {worst:.3e} (tolerance {tolerance:.0e}) "
                          f"{'PASS' if ok else 'FAIL'}"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_dist_check(args) -> int:
    rng = np.random.default_rng(_seed(args))
    labels = args.batch // 2 if args.dup_labels else None
    b = objective.random_batch(rng, args.batch, args.dim, args.tau, num_labels=labels,
                               with_attrs=False)
    strict = not args.multi_positive
    single = objective.symmetric_infonce(b.cat_embs, b.video_embs, b.labels, b.tau,
                                         multi_positive=not strict)[2]
    dist, per_worker = distributed.distributed_loss(
        b, args.workers, concurrent=args.concurrent, multi_positive=not strict)
    diff = abs(dist - single)
    ok = bool(diff <= DIST_TOLERANCE)
    payload = {"single_node_loss": single, "distributed_loss": dist, "abs_difference": diff,
               "per_worker": per_worker, "passed": ok,
               "config": {"batch": args.batch, "workers": args.workers, "dim": args.dim,
                          "tau": args.tau, "seed": _seed(args), "concurrent": args.concurrent,
                          "multi_positive": not strict}}
    _emit(args, payload, [f"single-node loss: {single:.17g}",
                          f"distributed loss: {dist:.17g}",
                          f"abs difference:   {diff:.3e} {'PASS' if ok else 'FAIL'}"])
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gen_synthetic(args) -> int:
    if args.distractor:
        ds = synthetic.distractor_dataset(args.classes, args.videos, args.frames, args.dim,
                                          _seed(args))
    else:
        ds = synthetic.gen_synthetic(args.classes, args.videos, args.frames, args.dim,
                                     args.noise_frames, _seed(args))
    path = store.save_dataset(args.out, ds)
    payload = {"manifest": path, "config": {k: v for k, v in vars(args).items()
                                            if k not in ("func", "json")} | {"seed": _seed(args)}}
    _emit(args, payload, [f"wrote {path}"])
    return EXIT_OK


def cmd_bemb(args) -> int:
    if args.action == "inspect":
        m = bemb.read_bemb(args.path)
        version, rows, cols = bemb.read_header(args.path)
        norms = np.linalg.norm(m, axis=1)
        payload = {"path": args.path, "version": version, "rows": rows, "cols": cols,
                   "row_norm_min": float(norms.min()), "row_norm_max": float(norms.max())}
        _emit(args, payload, [f"{args.path}: BEMB v{version} {rows}x{cols}",
                              f"row norms in [{norms.min():.6g}, {norms.max():.6g}]"])
        return EXIT_OK
    src, dst = args.src, args.dst
    if src.endswith(".npy") and dst.endswith(".bemb"):
        bemb.write_bemb(dst, np.load(src))
    elif src.endswith(".bemb") and dst.endswith(".npy"):
        np.save(dst, bemb.read_bemb(src).astype(np.float32))
    elif src.endswith(".bemb") and dst.endswith((".txt", ".tsv")):
        np.savetxt(dst, bemb.read_bemb(src).astype(np.float32), fmt="%.9g", delimiter="\t")
    else:
        raise UsageError("convert supports .npy -> .bemb, .bemb -> .npy and .bemb -> .txt/.tsv")
    _emit(args, {"src": src, "dst": dst}, [f"{src} -> {dst}"])
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return v


def _add_prompt_flags(p):
    p.add_argument("--prefix", default=attributes.DEFAULT_PREFIX,
                   help="prompt template with a {} placeholder")
    p.add_argument("--no-prompt", action="store_true", help="embed the bare attribute list")
    p.add_argument("--encoder", choices=["lexicon", "surrogate"], default="lexicon",
                   help="attribute sentence embedding: mean of phrase rows or hashing encoder")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bike", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--seed", type=int, default=None, help="random seed (else $BIKE_SEED, else 0)")
        return p

    p = add("spot", cmd_spot, "per-video temporal saliency")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tau", type=_positive_float, default=0.01)
    p.add_argument("--all-categories", action="store_true",
                   help="saliency for every category instead of the labelled one")

    p = add("attrs", cmd_attrs, "retrieve attributes and build attribute sentences")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--k", type=int, default=attributes.DEFAULT_K)
    p.add_argument("--emit-bemb", metavar="PATH", help="write e_a rows as a BEMB matrix")
    _add_prompt_flags(p)

    p = add("eval", cmd_eval, "classify and report top-1/top-5")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--lambda", dest="lam", type=_fraction, default=recognition.DEFAULT_LAMBDA)
    p.add_argument("--tau", type=_positive_float, default=0.01, help="saliency temperature")
    p.add_argument("--agg", choices=["mean", "vcs"], default="vcs")
    p.add_argument("--attrs", choices=["on", "off"], default="on")
    p.add_argument("--k-attrs", type=int, default=attributes.DEFAULT_K)
    p.add_argument("--half-class", action="store_true")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", help="also write the JSON report here")
    _add_prompt_flags(p)

    p = add("loss-check", cmd_loss_check, "finite-difference gradient check")
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--tau", type=_positive_float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--dup-labels", action="store_true")

    p = add("dist-check", cmd_dist_check, "distributed vs single-node loss")
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--workers", type=int, required=True)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--tau", type=_positive_float, default=0.01)
    p.add_argument("--concurrent", action="store_true", help="run workers on threads")
    p.add_argument("--dup-labels", action="store_true")
    p.add_argument("--strict", dest="multi_positive", action="store_false",
                   help="diagonal positives only")

    p = add("gen-synthetic", cmd_gen_synthetic, "write a seeded synthetic dataset")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--videos", type=int, default=64)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise-frames", type=int, default=0)
    p.add_argument("--distractor", action="store_true",
                   help="weak class frames plus a per-video distractor instead")
    p.add_argument("--out", required=True)

    p = add("bemb", cmd_bemb, "inspect or convert BEMB files")
    bsub = p.add_subparsers(dest="action", required=True)
    q = bsub.add_parser("inspect")
    q.add_argument("path")
    q.add_argument("--json", action="store_true")
    q = bsub.add_parser("convert")
    q.add_argument("src")
    q.add_argument("dst")
    q.add_argument("--json", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, BikeError, OSError, ValueError) as exc:
        print(f"bike {args.command}: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


run = main

if __name__ == "__main__":
    sys.exit(main())
