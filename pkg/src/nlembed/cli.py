"""Command-line interface.

Exit codes: 0 success, 1 check failure (gradcheck), 2 input or validation
error, 3 numeric failure. Every command that writes files also writes a JSON
manifest next to its main output; ``nlembed rerun MANIFEST`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .data import generate_pairs, normalize
from .errors import InputError, NlembedError, NumericError
from .evaluate import RetrievalConfig, eval_pipeline, write_report
from .fileio import (
    read_features,
    read_labels,
    read_pairs,
    write_features,
    write_labels,
    write_pairs,
)
from .kernel import KERNELS
from .model import KernelizedModel, NonlinearModel, load_model_file, save_model_file
from .pca import fit_pca
from .synth import synth_blobs, synth_nonlinear
from .train import (
    GRADCHECK_THRESHOLDS,
    LINEAR_DEFAULTS,
    NML_DEFAULTS,
    TrainConfig,
    grad_check,
    train_kml,
    train_linear,
    train_nml,
)

log = logging.getLogger("nlembed")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
REFERENCE_DISTANCE = {"l2": ("l2", "l2_raw"), "l1": ("l1", "l1_raw"), "chi2": ("l1", "chi2_raw")}


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, args, argv, inputs) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    manifest = {
        "command": args.command,
        "flags": flags,
        "seed": flags.get("seed"),
        "inputs": {str(p): _digest(p) for p in inputs if p is not None},
        "argv": list(argv),
        "version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _default_norm(model_kind: str, kernel: str) -> str:
    if model_kind == "nml" or (model_kind == "kml" and kernel == "chi2"):
        return "l1"
    return "l2"


def _model_norm(model) -> str:
    if isinstance(model, NonlinearModel):
        return _default_norm("nml", model.kernel)
    if isinstance(model, KernelizedModel):
        return _default_norm("kml", model.kernel)
    return "l2"


# ---------------------------------------------------------------- commands

def cmd_synth(args, argv):
    if args.kind == "blobs":
        feats, labels = synth_blobs(args.classes, args.per_class, args.dims,
                                    args.separation, args.seed, args.noise)
    else:
        feats, labels = synth_nonlinear(args.classes, args.per_class, args.dims, args.seed)
    write_features(args.out_features, feats)
    write_labels(args.out_labels, labels)
    _write_manifest(str(args.out_features) + ".manifest.json", args, argv, [])
    print(f"wrote {feats.rows} x {feats.dims} features, {np.unique(labels).size} classes")
    return EXIT_OK


def cmd_pairs(args, argv):
    labels = read_labels(args.labels)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pairs = generate_pairs(labels, args.budget, args.pos_fraction, args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_pairs(args.out, pairs)
    _write_manifest(str(args.out) + ".manifest.json", args, argv, [args.labels])
    print(f"wrote {len(pairs)} pairs ({pairs.pos_count} similar, {pairs.neg_count} dissimilar)")
    return EXIT_OK


def _train(args, feats, pairs):
    args.normalize = args.normalize or _default_norm(args.model, args.kernel)
    X = normalize(feats, args.normalize)
    if args.model == "pca":
        return fit_pca(X, args.dim), None
    cfg = TrainConfig(iterations=args.iters, learning_rate=args.lr, margin=args.margin,
                      bias=args.bias, update_bias=args.update_bias, seed=args.seed,
                      eval_every=args.eval_every)
    defaults = LINEAR_DEFAULTS if args.model == "ml" else NML_DEFAULTS
    resolved = cfg.resolved(defaults)
    args.bias, args.margin = resolved.bias, resolved.margin
    if args.model == "nml":
        return train_nml(X, pairs, args.dim, args.kernel, cfg)
    if args.model == "ml":
        return train_linear(X, pairs, args.dim, cfg)
    return train_kml(X, pairs, args.dim, args.kernel, cfg)


def cmd_train(args, argv):
    feats = read_features(args.features)
    pairs = None
    if args.model != "pca":
        if args.pairs is None:
            raise InputError(f"--pairs is required for --model {args.model}")
        pairs = read_pairs(args.pairs, feats.rows)
    model, report = _train(args, feats, pairs)
    save_model_file(model, args.out)
    _write_manifest(str(args.out) + ".manifest.json", args, argv, [args.features, args.pairs])
    if report is not None:
        print(f"final objective estimate {report.final_objective_estimate:.6g}")
        print(f"active fraction {report.active_fraction:.6g}")
        for it, val in report.objective_trace:
            print(f"iter {it} objective {val:.6g}")
    return EXIT_OK


def cmd_embed(args, argv):
    model = load_model_file(args.model)
    feats = read_features(args.features)
    X = normalize(feats, args.normalize or _model_norm(model))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        E = model.embed(X.values)
    write_features(args.out, E)
    _write_manifest(str(args.out) + ".manifest.json", args, argv, [args.model, args.features])
    print(f"wrote {E.shape[0]} x {E.shape[1]} embeddings")
    return EXIT_OK


def _evaluate(feats, labels, model, reference, ks, norm=None):
    if model is not None:
        X = normalize(feats, norm or _model_norm(model))
        cfg = RetrievalConfig(tuple(ks), "l2_on_embedding")
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="chi2 embedding")
            return eval_pipeline(model, X, labels, cfg)
    ref_norm, distance = REFERENCE_DISTANCE[reference]
    X = normalize(feats, norm or ref_norm)
    return eval_pipeline(None, X, labels, RetrievalConfig(tuple(ks), distance))


def cmd_eval(args, argv):
    feats = read_features(args.features)
    labels = read_labels(args.labels, feats.rows)
    model = load_model_file(args.model) if args.model else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = _evaluate(feats, labels, model, args.reference, args.k, args.normalize)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_report(report, args.out_prefix)
    _write_manifest(str(args.out_prefix) + "_manifest.json", args, argv,
                    [args.features, args.labels, args.model])
    for k, v in report.mprec.items():
        print(f"mprec@{k} {v:.4f}")
    return EXIT_OK


def cmd_sweep(args, argv):
    feats = read_features(args.features)
    labels = read_labels(args.labels, feats.rows)
    pairs = read_pairs(args.pairs, feats.rows)
    eval_feats, eval_labels = feats, labels
    if args.eval_features:
        eval_feats = read_features(args.eval_features)
        eval_labels = read_labels(args.eval_labels or args.labels, eval_feats.rows)
    norm = args.normalize or _default_norm("nml", args.kernel)
    X = normalize(feats, norm)
    rows = []
    for m in args.margins:
        for b in args.biases:
            cfg = TrainConfig(iterations=args.iters, learning_rate=args.lr, margin=m, bias=b,
                              seed=args.seed)
            model, _ = train_nml(X, pairs, args.dim, args.kernel, cfg)
            rep = _evaluate(eval_feats, eval_labels, model, None, [args.k], norm)
            rows.append((m, b, rep.mprec[args.k]))
            print(f"m={m:g} b={b:g} mprec@{args.k}={rep.mprec[args.k]:.4f}")
    with Path(args.out).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "b", f"mprec@{args.k}"])
        for m, b, v in rows:
            w.writerow([repr(m), repr(b), repr(v)])
    _write_manifest(str(args.out) + ".manifest.json", args, argv,
                    [args.features, args.labels, args.pairs, args.eval_features, args.eval_labels])
    return EXIT_OK


def cmd_gradcheck(args, argv):
    rep = grad_check(args.kernel, args.dim, args.input_dim, args.trials, args.seed)
    threshold = args.threshold if args.threshold is not None else GRADCHECK_THRESHOLDS[args.kernel]
    ok = rep.passed(threshold)
    print(f"max relative error {rep.max_rel_error:.3e} over {rep.trials} trials "
          f"(threshold {threshold:g}): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_rerun(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists() or _digest(path) != digest:
            raise InputError(f"input {path} changed since the manifest was written")
    return main(manifest["argv"])


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlembed", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic histogram dataset")
    s.add_argument("--kind", choices=("blobs", "nonlinear"), default="blobs")
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--per-class", type=int, default=100)
    s.add_argument("--dims", type=int, default=16)
    s.add_argument("--separation", type=float, default=3.0)
    s.add_argument("--noise", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-features", required=True)
    s.add_argument("--out-labels", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pairs", help="sample similar/dissimilar pairs from labels")
    s.add_argument("--labels", required=True)
    s.add_argument("--budget", type=int, default=500_000)
    s.add_argument("--pos-fraction", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pairs)

    s = sub.add_parser("train", help="train an embedding model")
    s.add_argument("--features", required=True)
    s.add_argument("--pairs")
    s.add_argument("--model", choices=("nml", "ml", "kml", "pca"), default="nml")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--kernel", choices=KERNELS, default="chi2")
    s.add_argument("--iters", type=int, default=1_000_000)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--margin", type=float, default=None)
    s.add_argument("--bias", type=float, default=None)
    s.add_argument("--update-bias", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--normalize", choices=("l1", "l2", "none"), default=None)
    s.add_argument("--eval-every", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("embed", help="embed features with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--normalize", choices=("l1", "l2", "none"), default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("eval", help="leave-one-out retrieval, mean precision@K")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--reference", choices=tuple(REFERENCE_DISTANCE))
    s.add_argument("--k", type=_int_list, default=[1, 10, 20, 30])
    s.add_argument("--normalize", choices=("l1", "l2", "none"), default=None)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="margin/bias sensitivity grid for NML")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--margins", type=_float_list, required=True)
    s.add_argument("--biases", type=_float_list, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--kernel", choices=KERNELS, default="chi2")
    s.add_argument("--iters", type=int, default=1_000_000)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--normalize", choices=("l1", "l2", "none"), default=None)
    s.add_argument("--eval-features")
    s.add_argument("--eval-labels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gradcheck", help="compare analytic and numeric subgradients")
    s.add_argument("--kernel", choices=KERNELS, default="chi2")
    s.add_argument("--dim", type=int, default=4)
    s.add_argument("--input-dim", type=int, default=16)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threshold", type=float, default=None)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NlembedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
