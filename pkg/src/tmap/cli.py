"""Command-line front end.

Subcommands: ``leakage`` (estimate information-leakage from paired CSVs),
``dp`` (perturb a CSV), ``tai`` (run the full pipeline), ``fit`` / ``classify``
(train and apply a persisted classifier). Exit codes: 0 success, 2 input or
usage error, 3 numerical or pipeline failure, 4 model-format version
mismatch. JSON goes to stdout when ``--out`` is omitted; stage timings go to
stderr so the JSON stays byte-stable across runs.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import data_io, model_store
from ._linalg import NumericalError
from .deep_models import classify_batch, fit_classifier
from .dp_mechanism import DpParams, dp_perturb
from .info_leakage import estimate_leakage
from .tai_pipeline import PipelineError, TaiConfig, run_tai

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_VERSION = 4


def _seed_arg(value: str) -> int:
    seed = int(value)
    if seed < 0:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmap",
        description="Membership-mapping models and information-leakage measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    leak = sub.add_parser("leakage", help="estimate information-leakage from paired CSVs")
    leak.add_argument("--x", required=True, help="CSV of observed samples")
    leak.add_argument("--t", required=True, help="CSV of leaked-variable samples")
    leak.add_argument("--seed", type=_seed_arg, default=0)
    leak.add_argument("--out", help="write JSON here instead of stdout")

    dp = sub.add_parser("dp", help="differentially private perturbation of a CSV")
    dp.add_argument("--in", dest="input_path", required=True)
    dp.add_argument("--out", required=True)
    dp.add_argument("--epsilon", type=float, required=True)
    dp.add_argument("--delta", type=float, required=True)
    dp.add_argument("--d", type=float, required=True)
    dp.add_argument("--seed", type=_seed_arg, default=0)

    tai = sub.add_parser("tai", help="run the full transfer-learning pipeline")
    tai.add_argument("--source", required=True, help="labelled source CSV")
    tai.add_argument("--private", required=True, help="private-variable CSV")
    tai.add_argument("--interp", required=True, help="interpretable-parameter CSV")
    tai.add_argument("--target-labeled", required=True)
    tai.add_argument("--target-unlabeled", required=True)
    tai.add_argument("--epsilon", type=float, required=True)
    tai.add_argument("--delta", type=float, required=True)
    tai.add_argument("--d", type=float, required=True)
    tai.add_argument("--eval-labels", help="true labels of the unlabeled targets")
    tai.add_argument("--seed", type=_seed_arg, default=0)
    tai.add_argument("--out", required=True)
    tai.add_argument("--measure-cap", type=int, default=5000)

    fit = sub.add_parser("fit", help="fit a classifier and persist it")
    fit.add_argument("--train", required=True, help="labelled training CSV")
    fit.add_argument("--model", required=True, help="output model path")
    fit.add_argument("--n", type=int, help="subspace dimension (default min(20, p))")
    fit.add_argument("--rmax", type=float, default=0.5)
    fit.add_argument("--layers", type=int, default=1)
    fit.add_argument("--seed", type=_seed_arg, default=0)

    cls = sub.add_parser("classify", help="label rows with a persisted classifier")
    cls.add_argument("--model", required=True)
    cls.add_argument("--in", dest="input_path", required=True)
    cls.add_argument("--out", help="write labels here instead of stdout")
    return parser


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_leakage(args) -> int:
    x = data_io.load_matrix_csv(args.x)
    t = data_io.load_matrix_csv(args.t)
    if len(x) != len(t):
        raise data_io.SchemaError(
            f"row counts differ: {args.x} has {len(x)}, {args.t} has {len(t)}"
        )
    estimate = estimate_leakage(x, t, seed=args.seed)
    _emit(data_io.dumps_report(estimate), args.out)
    return EXIT_OK


def _cmd_dp(args) -> int:
    params = DpParams(d=args.d, epsilon=args.epsilon, delta=args.delta)
    matrix = data_io.load_matrix_csv(args.input_path)
    data_io.save_matrix_csv(args.out, dp_perturb(matrix, params, seed=args.seed))
    return EXIT_OK


def _cmd_tai(args) -> int:
    source, src_indices = data_io.load_labeled_csv(args.source, return_indices=True)
    private = data_io.load_matrix_csv(args.private)
    interp = data_io.load_matrix_csv(args.interp)
    if len(private) != source.total or len(interp) != source.total:
        raise data_io.SchemaError(
            "private and interpretable CSVs must be row-aligned with the source CSV"
        )
    order = np.concatenate(src_indices)  # flatten side files in class order
    private = private[order]
    interp = interp[order]
    target_labeled = data_io.load_labeled_csv(args.target_labeled)
    target_unlabeled = data_io.load_matrix_csv(args.target_unlabeled)
    eval_labels = (
        data_io.load_label_column_csv(args.eval_labels) if args.eval_labels else None
    )
    cfg = TaiConfig(
        dp=DpParams(d=args.d, epsilon=args.epsilon, delta=args.delta),
        measure_sample_cap=args.measure_cap,
    )
    report = run_tai(
        source.classes,
        private,
        interp,
        target_labeled.classes,
        target_unlabeled,
        cfg,
        seed=args.seed,
        eval_labels=eval_labels,
    )
    for stage, seconds in report.timings.items():
        print(f"[timing] {stage}: {seconds:.2f}s", file=sys.stderr)
    data_io.write_report_json(report, args.out)
    return EXIT_OK


def _cmd_fit(args) -> int:
    dataset = data_io.load_labeled_csv(args.train)
    n = args.n if args.n is not None else min(20, dataset.dim)
    model = fit_classifier(dataset.classes, n, args.rmax, args.layers, args.seed)
    model_store.save_classifier(model, args.model)
    return EXIT_OK


def _cmd_classify(args) -> int:
    model = model_store.load_classifier(args.model)
    rows = data_io.load_matrix_csv(args.input_path)
    if rows.shape[1] != model.dim:
        raise data_io.SchemaError(
            f"{args.input_path}: rows have dimension {rows.shape[1]}, "
            f"model expects {model.dim}"
        )
    labels = classify_batch(model, rows)
    text = "".join(f"{int(label)}\n" for label in labels)
    _emit(text, args.out)
    return EXIT_OK


_HANDLERS = {
    "leakage": _cmd_leakage,
    "dp": _cmd_dp,
    "tai": _cmd_tai,
    "fit": _cmd_fit,
    "classify": _cmd_classify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return _HANDLERS[args.command](args)
    except model_store.ModelVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
