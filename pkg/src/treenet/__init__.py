"""Tree neural networks over first-order terms.

Each operator in a term language gets its own small dense network; a term
is embedded by composing those networks bottom-up over its tree, and head
networks decode root embeddings into task outputs.  Everything trains
end-to-end with hand-derived gradients and plain minibatch SGD.
"""

from .network import (
    SIGMOID,
    TANH,
    ActivationTrace,
    DenseNetwork,
    DimensionError,
    Layer,
    apply_update,
    backward,
    backward_from_delta,
    forward,
    init_dense,
)
from .serialize import WeightFormatError, load_tnn, save_tnn
from .terms import (
    ArityError,
    ParseError,
    Term,
    TermError,
    collect_signatures,
    index_variables,
    parse_term,
    print_term,
)
from .tnn import (
    DEFAULT_HEAD,
    Example,
    GradientStore,
    OperatorSignature,
    Tnn,
    UnknownOperatorError,
    backprop_example,
    check_compatible,
    embed,
    infer,
    infer_all,
    loss,
    random_tnn,
)
from .train import (
    Phase,
    Schedule,
    ScheduleError,
    TrainReport,
    evaluate_accuracy,
    parse_schedule,
    round_half_up,
    rounded_match,
    train_tnn,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace",
    "ArityError",
    "DEFAULT_HEAD",
    "DenseNetwork",
    "DimensionError",
    "Example",
    "GradientStore",
    "Layer",
    "OperatorSignature",
    "ParseError",
    "Phase",
    "Schedule",
    "ScheduleError",
    "SIGMOID",
    "TANH",
    "Term",
    "TermError",
    "Tnn",
    "TrainReport",
    "TreeNetClassifier",
    "UnknownOperatorError",
    "WeightFormatError",
    "apply_update",
    "backprop_example",
    "backward",
    "backward_from_delta",
    "check_compatible",
    "collect_signatures",
    "embed",
    "evaluate_accuracy",
    "forward",
    "index_variables",
    "infer",
    "infer_all",
    "init_dense",
    "load_tnn",
    "loss",
    "parse_schedule",
    "parse_term",
    "print_term",
    "random_tnn",
    "round_half_up",
    "rounded_match",
    "save_tnn",
    "train_tnn",
]


def __getattr__(name):
    # Imported lazily so the CLI does not pay the scikit-learn import cost.
    if name == "TreeNetClassifier":
        from .estimator import TreeNetClassifier

        return TreeNetClassifier
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
