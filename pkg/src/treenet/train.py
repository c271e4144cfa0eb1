"""Minibatch SGD over term examples, driven by a phase schedule.

A schedule is a list of phases, each fixing an epoch count, learning rate,
batch size and worker count.  Each batch applies one step along the mean
of its per-example gradients, so growing the batch size reduces gradient
noise while the step scale stays put; a batch-doubling schedule anneals
the noise over the course of training.

Training is deterministic for a fixed seed: epoch shuffles derive from
(seed, epoch index), batches are consecutive slices of the shuffled order,
and per-example gradients are always reduced in example order, so any
worker count produces bit-identical weights.
"""

from __future__ import annotations

import logging
import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np

from .tnn import Example, GradientStore, Tnn, backprop_example, check_compatible
from .network import apply_update, forward

logger = logging.getLogger(__name__)

__all__ = [
    "Phase",
    "Schedule",
    "ScheduleError",
    "TrainReport",
    "train_tnn",
    "evaluate_accuracy",
    "round_half_up",
    "rounded_match",
    "parse_schedule",
]


class ScheduleError(ValueError):
    """Malformed schedule value or schedule text."""


@dataclass(frozen=True)
class Phase:
    nepoch: int
    learning_rate: float
    batch_size: int
    ncore: int = 1

    def __post_init__(self):
        if self.nepoch < 0:
            raise ScheduleError(f"nepoch must be >= 0, got {self.nepoch}")
        if not self.learning_rate > 0.0:
            raise ScheduleError(f"lr must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ScheduleError(f"batch must be >= 1, got {self.batch_size}")
        if self.ncore < 1:
            raise ScheduleError(f"ncore must be >= 1, got {self.ncore}")


@dataclass(frozen=True)
class Schedule:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ScheduleError("schedule needs at least one phase")

    @property
    def total_epochs(self) -> int:
        return sum(p.nepoch for p in self.phases)

    @classmethod
    def coerce(cls, value) -> "Schedule":
        if isinstance(value, Schedule):
            return value
        phases = [p if isinstance(p, Phase) else Phase(*p) for p in value]
        return cls(tuple(phases))

    def to_text(self) -> str:
        lines = [
            f"nepoch={p.nepoch} lr={p.learning_rate:g} batch={p.batch_size}"
            f" ncore={p.ncore}"
            for p in self.phases
        ]
        return "\n".join(lines) + "\n"


def parse_schedule(text: str, default_ncore: int = 1) -> Schedule:
    """Parse schedule text: one `nepoch=N lr=R batch=B [ncore=C]` per line.

    Blank lines and `#` comments are ignored.  ncore falls back to
    `default_ncore` when omitted.
    """
    phases = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = {}
        for item in line.split():
            key, sep, value = item.partition("=")
            if not sep or not value or key in fields:
                raise ScheduleError(f"schedule line {line_no}: bad field {item!r}")
            fields[key] = value
        try:
            phase = Phase(
                nepoch=int(fields.pop("nepoch")),
                learning_rate=float(fields.pop("lr")),
                batch_size=int(fields.pop("batch")),
                ncore=int(fields.pop("ncore", default_ncore)),
            )
        except KeyError as missing:
            raise ScheduleError(f"schedule line {line_no}: missing {missing}") from None
        except ValueError as err:
            raise ScheduleError(f"schedule line {line_no}: {err}") from None
        if fields:
            raise ScheduleError(
                f"schedule line {line_no}: unknown fields {sorted(fields)}"
            )
        phases.append(phase)
    if not phases:
        raise ScheduleError("schedule text contains no phases")
    return Schedule(tuple(phases))


@dataclass
class TrainReport:
    """Per-epoch losses and timings, plus accuracy at phase boundaries."""

    seed: int
    epoch_losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    evaluations: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def final_train_accuracy(self) -> float:
        return self.evaluations[-1][1]

    @property
    def final_test_accuracy(self) -> float:
        return self.evaluations[-1][2]

    def to_text(self) -> str:
        lines = [f"seed {self.seed}", f"epochs {len(self.epoch_losses)}"]
        for i, (mean_loss, seconds) in enumerate(
            zip(self.epoch_losses, self.epoch_seconds), 1
        ):
            lines.append(f"epoch {i} loss {mean_loss:.6f} time {seconds:.2f}")
        for epochs_done, train_acc, test_acc in self.evaluations:
            lines.append(
                f"eval epochs={epochs_done} train_acc={train_acc:.4f}"
                f" test_acc={test_acc:.4f}"
            )
        lines.append(f"train_accuracy {self.final_train_accuracy:.4f}")
        lines.append(f"test_accuracy {self.final_test_accuracy:.4f}")
        return "\n".join(lines) + "\n"


def round_half_up(values) -> np.ndarray:
    """Round each component to the nearest integer, ties away from zero
    upward, so 0.5 rounds to 1."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def rounded_match(output, target) -> bool:
    """True when every rounded output equals the rounded target."""
    return bool(np.array_equal(round_half_up(output), round_half_up(target)))


def evaluate_accuracy(tnn: Tnn, examples, criterion=rounded_match) -> float:
    """Fraction of examples whose every head satisfies the criterion.

    An empty example sequence counts as accuracy 1.0.
    """
    examples = list(examples)
    if not examples:
        return 1.0
    from .tnn import _forward_memo

    hits = 0
    for ex in examples:
        memo = _forward_memo(tnn, ex.term)
        root = memo[ex.term].output
        ok = True
        for head, target in ex.targets.items():
            output = forward(tnn.head_nets[head], root).output
            if not criterion(output, target):
                ok = False
                break
        hits += ok
    return hits / len(examples)


# Worker-side example table, installed once per pool via the initializer so
# only the weights travel with each task.
_WORKER_EXAMPLES: list[Example] | None = None


def _worker_init(examples: list[Example]) -> None:
    global _WORKER_EXAMPLES
    _WORKER_EXAMPLES = examples


def _worker_batch(payload):
    tnn, indices = payload
    examples = _WORKER_EXAMPLES
    return [backprop_example(tnn, examples[i]) for i in indices]


def _batch_results(tnn, examples, batch, pool, ncore):
    if pool is None:
        return [backprop_example(tnn, examples[i]) for i in batch]
    chunks = [c for c in np.array_split(batch, ncore) if len(c)]
    results = []
    for part in pool.map(_worker_batch, [(tnn, c.tolist()) for c in chunks]):
        results.extend(part)
    return results


def train_tnn(
    schedule,
    initial: Tnn,
    train_examples,
    test_examples,
    seed: int = 0,
    criterion=rounded_match,
) -> tuple[Tnn, TrainReport]:
    """Train a copy of `initial` through every phase of the schedule.

    Returns the trained model and a report with per-epoch mean loss and
    wall-clock time, plus train/test accuracy at each phase boundary.
    The input model is left untouched.
    """
    schedule = Schedule.coerce(schedule)
    train_examples = list(train_examples)
    test_examples = list(test_examples)
    if not train_examples:
        raise ValueError("training set is empty")
    for ex in train_examples:
        check_compatible(initial, ex)
    for ex in test_examples:
        check_compatible(initial, ex)

    tnn = initial.copy()
    report = TrainReport(seed=seed)
    entropy = seed & 0xFFFFFFFFFFFFFFFF
    n = len(train_examples)
    epoch_index = 0
    for phase in schedule.phases:
        pool = None
        try:
            if phase.ncore > 1:
                pool = multiprocessing.Pool(
                    processes=phase.ncore,
                    initializer=_worker_init,
                    initargs=(train_examples,),
                )
            for _ in range(phase.nepoch):
                started = time.perf_counter()
                order = np.random.default_rng([entropy, epoch_index]).permutation(n)
                losses = []
                for start in range(0, n, phase.batch_size):
                    batch = order[start : start + phase.batch_size]
                    results = _batch_results(
                        tnn, train_examples, batch, pool, phase.ncore
                    )
                    total: GradientStore = results[0][0]
                    losses.append(results[0][1])
                    for store, example_loss in results[1:]:
                        total.merge(store)
                        losses.append(example_loss)
                    # Mean gradient over the batch: growing the batch size
                    # reduces gradient noise while the step scale stays put.
                    for name in sorted(total.grads):
                        net = tnn.operator_nets.get(name)
                        if net is None:
                            net = tnn.head_nets[name]
                        apply_update(
                            net, total.grads[name], phase.learning_rate, len(batch)
                        )
                report.epoch_losses.append(float(np.mean(losses)))
                report.epoch_seconds.append(time.perf_counter() - started)
                epoch_index += 1
                logger.info(
                    "epoch %d/%d  mean loss %.6f  (%.2fs)",
                    epoch_index,
                    schedule.total_epochs,
                    report.epoch_losses[-1],
                    report.epoch_seconds[-1],
                )
        finally:
            if pool is not None:
                pool.close()
                pool.join()
        train_acc = evaluate_accuracy(tnn, train_examples, criterion)
        test_acc = evaluate_accuracy(tnn, test_examples, criterion)
        report.evaluations.append((epoch_index, train_acc, test_acc))
        logger.info(
            "after %d epochs: train accuracy %.4f, test accuracy %.4f",
            epoch_index,
            train_acc,
            test_acc,
        )
    return tnn, report
