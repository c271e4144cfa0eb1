"""Schedule parsing and the training loop: determinism, worker counts,
and reporting."""

import numpy as np
import pytest

from treenet.terms import parse_term
from treenet.tnn import DEFAULT_HEAD, Example, OperatorSignature, random_tnn
from treenet.train import (
    Phase,
    Schedule,
    ScheduleError,
    evaluate_accuracy,
    parse_schedule,
    round_half_up,
    rounded_match,
    train_tnn,
)

OPS = [("0", 0), ("s", 1), ("+", 2)]


def tiny_tnn(dim=3, seed=0):
    sigs = [OperatorSignature(name, arity) for name, arity in OPS]
    sigs.append(OperatorSignature(DEFAULT_HEAD, 0, is_head=True, output_size=1))
    return random_tnn(sigs, dim, seed)


def tiny_examples():
    # Parity of the number of s applications, an easy target.
    texts = ["0", "(s 0)", "(s (s 0))", "(+ (s 0) 0)", "(+ (s 0) (s 0))",
             "(s (s (s 0)))", "(+ 0 0)", "(+ (s (s 0)) (s 0))"]
    out = []
    for text in texts:
        t = parse_term(text)
        ones = sum(node.operator == "s" for node in _nodes(t))
        out.append(Example(t, {DEFAULT_HEAD: [float(ones % 2)]}))
    return out


def _nodes(t):
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.args)


def weights_of(tnn):
    return [
        layer.weights.copy()
        for _, _, net in tnn.networks()
        for layer in net.layers
    ]


def test_phase_validation():
    with pytest.raises(ScheduleError):
        Phase(-1, 0.1, 4)
    with pytest.raises(ScheduleError):
        Phase(1, 0.0, 4)
    with pytest.raises(ScheduleError):
        Phase(1, 0.1, 0)
    with pytest.raises(ScheduleError):
        Phase(1, 0.1, 4, ncore=0)
    with pytest.raises(ScheduleError):
        Schedule(())


def test_parse_schedule_accepts_comments_and_defaults():
    text = """
    # warmup
    nepoch=2 lr=0.5 batch=4
    nepoch=3 lr=0.25 batch=8 ncore=2  # widen
    """
    sched = parse_schedule(text, default_ncore=3)
    assert sched.phases == (
        Phase(2, 0.5, 4, ncore=3),
        Phase(3, 0.25, 8, ncore=2),
    )
    assert sched.total_epochs == 5


def test_parse_schedule_round_trips_through_to_text():
    sched = Schedule((Phase(50, 0.02, 8), Phase(50, 0.02, 16, ncore=2)))
    assert parse_schedule(sched.to_text()) == sched


@pytest.mark.parametrize(
    "text",
    [
        "",
        "# just a comment",
        "nepoch=2 lr=0.5",
        "nepoch=2 lr=0.5 batch=4 extra=1",
        "nepoch=two lr=0.5 batch=4",
        "nepoch=2 nepoch=2 lr=0.5 batch=4",
        "nepoch=2 lr= batch=4",
        "nepoch=2 lr=-0.5 batch=4",
    ],
)
def test_parse_schedule_rejects_malformed(text):
    with pytest.raises(ScheduleError):
        parse_schedule(text)


def test_schedule_coerce_accepts_tuples():
    sched = Schedule.coerce([(2, 0.1, 4), Phase(1, 0.2, 8)])
    assert sched.phases[0] == Phase(2, 0.1, 4)
    assert Schedule.coerce(sched) is sched


def test_round_half_up_breaks_ties_upward():
    got = round_half_up([0.49, 0.5, 1.49, 1.5, 2.51])
    assert np.array_equal(got, [0.0, 1.0, 1.0, 2.0, 3.0])
    assert rounded_match([0.6, 0.2], [1.0, 0.0])
    assert not rounded_match([0.6, 0.2], [0.0, 0.0])


def test_evaluate_accuracy_counts_full_matches():
    tnn = tiny_tnn()
    examples = tiny_examples()
    acc = evaluate_accuracy(tnn, examples)
    hits = sum(
        rounded_match(
            _head_output(tnn, ex), ex.targets[DEFAULT_HEAD]
        )
        for ex in examples
    )
    assert acc == hits / len(examples)
    assert evaluate_accuracy(tnn, []) == 1.0


def _head_output(tnn, ex):
    from treenet.tnn import infer

    return infer(tnn, ex.term, DEFAULT_HEAD)


def test_train_decreases_loss_and_reports():
    initial = tiny_tnn(seed=1)
    sched = Schedule((Phase(15, 0.1, 2), Phase(15, 0.1, 4)))
    model, report = train_tnn(sched, initial, tiny_examples(), tiny_examples()[:3], seed=5)
    assert len(report.epoch_losses) == 30
    assert len(report.epoch_seconds) == 30
    assert report.epoch_losses[-1] < report.epoch_losses[0]
    assert [e[0] for e in report.evaluations] == [15, 30]
    assert report.final_train_accuracy == report.evaluations[-1][1]
    text = report.to_text()
    assert text.splitlines()[-2].startswith("train_accuracy ")
    assert text.splitlines()[-1].startswith("test_accuracy ")


def test_train_leaves_initial_model_untouched():
    initial = tiny_tnn(seed=2)
    before = weights_of(initial)
    train_tnn(Schedule((Phase(3, 0.1, 4),)), initial, tiny_examples(), [], seed=0)
    for old, now in zip(before, weights_of(initial)):
        assert np.array_equal(old, now)


def test_train_is_deterministic_per_seed():
    a, _ = train_tnn(
        Schedule((Phase(4, 0.1, 3),)), tiny_tnn(), tiny_examples(), [], seed=9
    )
    b, _ = train_tnn(
        Schedule((Phase(4, 0.1, 3),)), tiny_tnn(), tiny_examples(), [], seed=9
    )
    c, _ = train_tnn(
        Schedule((Phase(4, 0.1, 3),)), tiny_tnn(), tiny_examples(), [], seed=10
    )
    for wa, wb in zip(weights_of(a), weights_of(b)):
        assert np.array_equal(wa, wb)
    assert any(
        not np.array_equal(wa, wc) for wa, wc in zip(weights_of(a), weights_of(c))
    )


def test_worker_count_does_not_change_weights():
    # Gradients are reduced in example order, so more workers must give
    # bit-identical results, not merely close ones.
    one, _ = train_tnn(
        Schedule((Phase(3, 0.1, 4, ncore=1),)), tiny_tnn(), tiny_examples(), [], seed=3
    )
    two, _ = train_tnn(
        Schedule((Phase(3, 0.1, 4, ncore=2),)), tiny_tnn(), tiny_examples(), [], seed=3
    )
    for wa, wb in zip(weights_of(one), weights_of(two)):
        assert np.array_equal(wa, wb)


def test_zero_epoch_phase_only_evaluates():
    initial = tiny_tnn(seed=4)
    model, report = train_tnn(
        Schedule((Phase(0, 0.1, 4),)), initial, tiny_examples(), [], seed=0
    )
    assert report.epoch_losses == []
    assert len(report.evaluations) == 1
    for old, now in zip(weights_of(initial), weights_of(model)):
        assert np.array_equal(old, now)


def test_train_validates_inputs():
    with pytest.raises(ValueError):
        train_tnn(Schedule((Phase(1, 0.1, 4),)), tiny_tnn(), [], [], seed=0)
    alien = Example(parse_term("(* 0 0)"), {DEFAULT_HEAD: [0.0]})
    with pytest.raises(Exception):
        train_tnn(Schedule((Phase(1, 0.1, 4),)), tiny_tnn(), [alien], [], seed=0)
