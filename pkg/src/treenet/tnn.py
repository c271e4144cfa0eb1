"""Tree neural networks: one dense network per operator, plus head networks.

The embedding of `f(t1, ..., ta)` is the operator network for `f` applied
to the concatenated child embeddings; nullary operators read a fixed
one-element input so their embeddings stay trainable.  Head networks map a
root embedding to the task output space through a final sigmoid layer.

Forward passes memoize shared subterms.  The backward pass walks the term
tree occurrence by occurrence in depth-first order, reusing the memoized
traces, so gradients are bit-for-bit identical to a naive recursion that
never memoizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import (
    SIGMOID,
    TANH,
    ActivationTrace,
    DenseNetwork,
    DimensionError,
    backward,
    backward_from_delta,
    forward,
    init_dense,
)
from .terms import Term

# Single-objective datasets and the CLI use this head name throughout.
DEFAULT_HEAD = "out"

_UNIT_INPUT = np.ones(1)


class UnknownOperatorError(ValueError):
    """Term mentions an operator the model has no network for."""


@dataclass(frozen=True)
class OperatorSignature:
    """Network configuration for one operator or head name.

    hidden_sizes None means one hidden layer as wide as the embedding.
    Heads read a root embedding and must declare their output_size.
    """

    name: str
    arity: int
    hidden_sizes: tuple[int, ...] | None = None
    is_head: bool = False
    output_size: int | None = None

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError(f"negative arity for {self.name!r}")
        if self.hidden_sizes is not None:
            object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.is_head:
            if self.output_size is None or self.output_size < 1:
                raise ValueError(f"head {self.name!r} needs a positive output_size")
        elif self.output_size is not None:
            raise ValueError(f"operator {self.name!r} must not set output_size")


@dataclass
class Example:
    """A term with, per head name, a target vector of reals in [0, 1]."""

    term: Term
    targets: dict[str, np.ndarray]

    def __post_init__(self):
        cleaned = {}
        for name, values in self.targets.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"target for head {name!r} must be a 1-D vector")
            if not np.all((arr >= 0.0) & (arr <= 1.0)):
                raise ValueError(f"target for head {name!r} must lie in [0, 1]")
            cleaned[name] = arr
        if not cleaned:
            raise ValueError("example needs at least one target")
        self.targets = cleaned


@dataclass
class Tnn:
    embedding_dim: int
    operator_nets: dict[str, DenseNetwork]
    head_nets: dict[str, DenseNetwork]

    def copy(self) -> "Tnn":
        return Tnn(
            self.embedding_dim,
            {name: net.copy() for name, net in self.operator_nets.items()},
            {name: net.copy() for name, net in self.head_nets.items()},
        )

    def networks(self) -> list[tuple[str, str, DenseNetwork]]:
        """(kind, name, network) triples, operators first, names sorted."""
        out = [("op", n, self.operator_nets[n]) for n in sorted(self.operator_nets)]
        out += [("head", n, self.head_nets[n]) for n in sorted(self.head_nets)]
        return out


class GradientStore:
    """Summed per-network parameter gradients plus an example count."""

    def __init__(self):
        self.grads: dict[str, list[np.ndarray]] = {}
        self.count = 0

    def add(self, name: str, layer_grads: list[np.ndarray]) -> None:
        current = self.grads.get(name)
        if current is None:
            self.grads[name] = layer_grads
        else:
            for acc, g in zip(current, layer_grads):
                acc += g

    def merge(self, other: "GradientStore") -> None:
        for name, entry in other.grads.items():
            self.add(name, entry)
        self.count += other.count


def random_tnn(signatures, embedding_dim: int, seed: int = 0) -> Tnn:
    """Freshly initialised model for the given operator signatures.

    An operator of arity a gets layer sizes [a*dim, hidden..., dim] (input
    size 1 when a is 0); a head gets [dim, hidden..., output_size].  The
    result depends only on the signatures, the dimension and the seed.
    """
    if embedding_dim < 1:
        raise DimensionError(f"embedding_dim must be positive, got {embedding_dim}")
    sigs = sorted(signatures, key=lambda s: (s.is_head, s.name))
    if not sigs:
        raise ValueError("at least one operator signature is required")
    names = set()
    for sig in sigs:
        if sig.name in names:
            raise ValueError(f"duplicate network name {sig.name!r}")
        names.add(sig.name)
    master = np.random.default_rng(seed)
    operator_nets: dict[str, DenseNetwork] = {}
    head_nets: dict[str, DenseNetwork] = {}
    for sig in sigs:
        hidden = sig.hidden_sizes if sig.hidden_sizes is not None else (embedding_dim,)
        child_seed = int(master.integers(0, 2**63))
        if sig.is_head:
            dims = [embedding_dim, *hidden, sig.output_size]
            head_nets[sig.name] = init_dense(dims, SIGMOID, child_seed)
        else:
            input_size = sig.arity * embedding_dim if sig.arity > 0 else 1
            dims = [input_size, *hidden, embedding_dim]
            operator_nets[sig.name] = init_dense(dims, TANH, child_seed)
    return Tnn(embedding_dim, operator_nets, head_nets)


def _forward_memo(tnn: Tnn, t: Term) -> dict[Term, ActivationTrace]:
    """Forward traces for every distinct subterm of t, computed once each."""
    memo: dict[Term, ActivationTrace] = {}
    dim = tnn.embedding_dim
    stack = [t]
    while stack:
        node = stack[-1]
        if node in memo:
            stack.pop()
            continue
        pending = [arg for arg in node.args if arg not in memo]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        net = tnn.operator_nets.get(node.operator)
        if net is None:
            raise UnknownOperatorError(
                f"no network for operator {node.operator!r}"
            )
        if node.args:
            x = np.empty(len(node.args) * dim)
            for i, arg in enumerate(node.args):
                x[i * dim : (i + 1) * dim] = memo[arg].output
        else:
            x = _UNIT_INPUT
        memo[node] = forward(net, x)
    return memo


def embed(tnn: Tnn, t: Term) -> np.ndarray:
    """Root embedding of t; callers must not mutate the result."""
    return _forward_memo(tnn, t)[t].output


def infer(tnn: Tnn, t: Term, head: str) -> np.ndarray:
    """Head output for t, equal to forward(head_net, embed(tnn, t))."""
    net = tnn.head_nets.get(head)
    if net is None:
        raise UnknownOperatorError(f"no head named {head!r}")
    return forward(net, embed(tnn, t)).output


def infer_all(tnn: Tnn, t: Term) -> dict[str, np.ndarray]:
    """Outputs of every head on one shared root embedding."""
    root = embed(tnn, t)
    return {
        name: forward(net, root).output for name, net in sorted(tnn.head_nets.items())
    }


# Loss clip bound: keeps the reported value finite when a sigmoid
# output saturates; gradients do not go through the clipped value.
_CLIP = 1e-12


def loss(output, target) -> float:
    """Binary cross-entropy of a sigmoid output against targets in
    [0, 1], summed over components.

    The sum (rather than the mean) keeps the gradient scale independent
    of the output width, which is what makes the reference learning rate
    of 0.02 effective.  Through the final sigmoid the gradient of this
    loss is exactly output - target, so confidently wrong outputs keep a
    full-strength pull instead of the vanishing one squared error would
    give them.
    """
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise DimensionError(
            f"output shape {output.shape} does not match target {target.shape}"
        )
    o = np.clip(output, _CLIP, 1.0 - _CLIP)
    return float(-(target @ np.log(o) + (1.0 - target) @ np.log(1.0 - o)))


def backprop_example(tnn: Tnn, example: Example) -> tuple[GradientStore, float]:
    """Gradients of the total loss on one example, and the loss itself.

    The total loss sums the cross-entropy of every head present in the
    example's targets (heads visited in sorted name order).  Weight
    gradients accumulate per occurrence in depth-first order, children
    left to right, matching an unmemoized recursive backward pass bit for
    bit.
    """
    memo = _forward_memo(tnn, example.term)
    root = memo[example.term].output
    store = GradientStore()
    total_loss = 0.0
    root_gradient = np.zeros(tnn.embedding_dim)
    for head in sorted(example.targets):
        net = tnn.head_nets.get(head)
        if net is None:
            raise UnknownOperatorError(f"no head named {head!r}")
        target = example.targets[head]
        trace = forward(net, root)
        total_loss += loss(trace.output, target)
        head_input_grad, head_grads = backward_from_delta(
            net, trace, trace.output - target
        )
        store.add(head, head_grads)
        root_gradient += head_input_grad
    dim = tnn.embedding_dim
    stack: list[tuple[Term, np.ndarray]] = [(example.term, root_gradient)]
    while stack:
        node, g = stack.pop()
        input_grad, weight_grads = backward(
            tnn.operator_nets[node.operator], memo[node], g
        )
        store.add(node.operator, weight_grads)
        for i in range(len(node.args) - 1, -1, -1):
            stack.append((node.args[i], input_grad[i * dim : (i + 1) * dim]))
    store.count = 1
    return store, total_loss


def check_compatible(tnn: Tnn, example: Example) -> None:
    """Raise unless every operator and target head fits this model."""
    seen = set()
    stack = [example.term]
    while stack:
        node = stack.pop()
        if node.operator in seen:
            continue
        seen.add(node.operator)
        net = tnn.operator_nets.get(node.operator)
        if net is None:
            raise UnknownOperatorError(f"no network for operator {node.operator!r}")
        expected = len(node.args) * tnn.embedding_dim if node.args else 1
        if net.input_size != expected:
            raise DimensionError(
                f"operator {node.operator!r} used with arity {len(node.args)}"
                f" but its network expects input size {net.input_size}"
            )
        stack.extend(node.args)
    for head, target in example.targets.items():
        net = tnn.head_nets.get(head)
        if net is None:
            raise UnknownOperatorError(f"no head named {head!r}")
        if net.output_size != target.shape[0]:
            raise DimensionError(
                f"head {head!r} produces {net.output_size} values but the"
                f" target has {target.shape[0]}"
            )
