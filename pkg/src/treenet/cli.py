"""Command line interface: dataset generation, training, evaluation.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
failure (non-finite weights or outputs).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .serialize import WeightFormatError, load_tnn, save_tnn
from .tasks import (
    ArithGenParams,
    DataFormatError,
    GenerationError,
    class_histogram,
    decode_bits,
    depth_histogram,
    gen_arith_dataset,
    gen_prop_dataset,
    load_arith_dataset,
    load_examples,
    write_examples,
)
from .terms import TermError, collect_signatures, parse_term
from .tnn import (
    DEFAULT_HEAD,
    OperatorSignature,
    UnknownOperatorError,
    check_compatible,
    infer_all,
    random_tnn,
)
from .train import (
    ScheduleError,
    evaluate_accuracy,
    parse_schedule,
    round_half_up,
    train_tnn,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _NumericError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _env_ncore() -> int:
    raw = os.environ.get("TREENN_NCORE", "1")
    try:
        value = int(raw)
    except ValueError:
        raise _UsageError(f"TREENN_NCORE must be an integer, got {raw!r}") from None
    if value < 1:
        raise _UsageError(f"TREENN_NCORE must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="treenet",
        description="Train and run tree neural networks over first-order terms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-arith", help="generate an arithmetic dataset")
    g.add_argument("--train-count", type=int, default=11990)
    g.add_argument("--test-count", type=int, default=10180)
    g.add_argument("--max-leaf", type=int, default=10)
    g.add_argument("--max-depth", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_gen_arith)

    p = sub.add_parser("gen-prop", help="generate a propositional truth dataset")
    p.add_argument("--train-count", type=int, default=8000)
    p.add_argument("--test-count", type=int, default=2000)
    p.add_argument("--max-vars", type=int, default=6)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_prop)

    t = sub.add_parser("train", help="train a model on a dataset")
    t.add_argument("--train", required=True, help="training dataset file")
    t.add_argument("--test", default=None, help="held-out dataset file")
    t.add_argument("--schedule", required=True, help="schedule file")
    t.add_argument("--dim", type=int, default=12, help="embedding dimension")
    t.add_argument(
        "--hidden",
        default="12",
        help="comma-separated hidden layer widths, e.g. 12 or 16,16",
    )
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="output weight file")
    t.add_argument("--report", default=None, help="report file (default <out>.report.txt)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate weights on a dataset")
    e.add_argument("--weights", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--task", choices=("arith", "prop"), default="arith")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="run one term through a model")
    r.add_argument("--weights", required=True)
    r.add_argument("--term", required=True, help="term as an S-expression")
    r.set_defaults(func=cmd_predict)

    return parser


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise _UsageError(message)


def _histogram_lines(title: str, examples) -> list[str]:
    lines = [f"{title} examples {len(examples)}"]
    if not examples:
        return lines
    counts = class_histogram(examples)
    total = len(examples)
    lines.append(f"{title} class histogram")
    for value, count in enumerate(counts):
        lines.append(f"class {value:02d} count {count} frac {count / total:.4f}")
    lines.append(f"{title} depth histogram")
    for depth, count in depth_histogram(examples).items():
        lines.append(f"depth {depth} count {count}")
    return lines


def cmd_gen_arith(args) -> int:
    _require(args.train_count >= 0, "--train-count must be >= 0")
    _require(args.test_count >= 0, "--test-count must be >= 0")
    _require(args.max_leaf >= 0, "--max-leaf must be >= 0")
    _require(args.max_depth >= 1, "--max-depth must be >= 1")
    params = ArithGenParams(
        n_train=args.train_count,
        n_test=args.test_count,
        max_leaf=args.max_leaf,
        max_depth=args.max_depth,
        seed=args.seed,
    )
    train, test = gen_arith_dataset(params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_examples(out_dir / "train.txt", train)
    write_examples(out_dir / "test.txt", test)
    stats = _histogram_lines("train", train) + _histogram_lines("test", test)
    (out_dir / "stats.txt").write_text("\n".join(stats) + "\n")
    print(f"wrote {len(train)} train / {len(test)} test examples to {out_dir}")
    return EXIT_OK


def cmd_gen_prop(args) -> int:
    _require(args.train_count >= 0, "--train-count must be >= 0")
    _require(args.test_count >= 0, "--test-count must be >= 0")
    _require(1 <= args.max_vars, "--max-vars must be >= 1")
    _require(args.max_depth >= 1, "--max-depth must be >= 1")
    train, test = gen_prop_dataset(
        n_train=args.train_count,
        n_test=args.test_count,
        max_variables=args.max_vars,
        max_depth=args.max_depth,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_examples(out_dir / "train.txt", train)
    write_examples(out_dir / "test.txt", test)
    def balance(examples):
        ones = sum(int(ex.targets[DEFAULT_HEAD][0]) for ex in examples)
        return f"{ones} true / {len(examples) - ones} false"
    stats = [
        f"train examples {len(train)} ({balance(train)})",
        f"test examples {len(test)} ({balance(test)})",
    ]
    (out_dir / "stats.txt").write_text("\n".join(stats) + "\n")
    print(f"wrote {len(train)} train / {len(test)} test examples to {out_dir}")
    return EXIT_OK


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise _UsageError(f"--hidden must be comma-separated integers, got {text!r}")
    _require(all(h >= 1 for h in sizes), "--hidden widths must be >= 1")
    return sizes


def _all_finite(tnn) -> bool:
    return all(
        np.all(np.isfinite(layer.weights))
        for _, _, net in tnn.networks()
        for layer in net.layers
    )


def cmd_train(args) -> int:
    _require(args.dim >= 1, "--dim must be >= 1")
    hidden = _parse_hidden(args.hidden)
    train_examples = load_examples(args.train)
    if not train_examples:
        print(f"error: training set {args.train} is empty", file=sys.stderr)
        return EXIT_DATA
    test_examples = load_examples(args.test) if args.test else []
    schedule = parse_schedule(
        Path(args.schedule).read_text(), default_ncore=_env_ncore()
    )
    output_size = len(train_examples[0].targets[DEFAULT_HEAD])
    terms = [ex.term for ex in train_examples + test_examples]
    signatures = [
        OperatorSignature(name, arity, hidden)
        for name, arity in sorted(collect_signatures(terms))
    ]
    signatures.append(
        OperatorSignature(
            DEFAULT_HEAD, 0, hidden, is_head=True, output_size=output_size
        )
    )
    initial = random_tnn(signatures, args.dim, args.seed)
    tnn, report = train_tnn(
        schedule, initial, train_examples, test_examples, seed=args.seed
    )
    if not _all_finite(tnn):
        raise _NumericError("training produced non-finite weights")
    save_tnn(tnn, args.out)
    report_path = args.report or f"{args.out}.report.txt"
    Path(report_path).write_text(report.to_text())
    print(
        f"trained {schedule.total_epochs} epochs:"
        f" train accuracy {report.final_train_accuracy:.4f},"
        f" test accuracy {report.final_test_accuracy:.4f}"
    )
    print(f"weights: {args.out}")
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    tnn = load_tnn(args.weights)
    if args.task == "arith":
        examples = load_arith_dataset(args.data)
    else:
        examples = load_examples(args.data)
    for ex in examples:
        check_compatible(tnn, ex)
    accuracy = evaluate_accuracy(tnn, examples)
    hits = round(accuracy * len(examples))
    print(f"accuracy {accuracy * 100:.2f}% ({hits}/{len(examples)})")
    if args.task == "arith" and examples:
        per_class = {}
        for ex in examples:
            target = ex.targets[DEFAULT_HEAD]
            label = decode_bits(target)
            output = infer_all(tnn, ex.term)[DEFAULT_HEAD]
            if not np.all(np.isfinite(output)):
                raise _NumericError("model produced a non-finite output")
            good = bool(
                np.array_equal(round_half_up(output), round_half_up(target))
            )
            total_good, total = per_class.get(label, (0, 0))
            per_class[label] = (total_good + good, total + 1)
        for label in sorted(per_class):
            good, total = per_class[label]
            print(
                f"class {label:02d} accuracy {good / total * 100:.2f}%"
                f" ({good}/{total})"
            )
    return EXIT_OK


def cmd_predict(args) -> int:
    tnn = load_tnn(args.weights)
    term = parse_term(args.term)
    outputs = infer_all(tnn, term)
    for name, vector in outputs.items():
        if not np.all(np.isfinite(vector)):
            raise _NumericError("model produced a non-finite output")
        rendered = " ".join(f"{v:.6f}" for v in vector)
        print(f"{name}: {rendered}")
        if len(vector) == 4:
            print(f"{name} decoded: {decode_bits(vector)}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except _NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        TermError,
        DataFormatError,
        WeightFormatError,
        ScheduleError,
        GenerationError,
        UnknownOperatorError,
        OSError,
        ValueError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
