"""Reference implementations the library is tested against.

Everything here recomputes results the slow, obvious way: recursion
instead of memoization, one weight at a time for finite differences,
per-occurrence tree walks with no sharing.  The elementary kernels
(matrix-vector product, tanh, the stable sigmoid) are the same numpy
calls the library uses, so bitwise comparisons are meaningful; the
structure around them is written from the math, not from the library.
"""

from __future__ import annotations

import numpy as np

from treenet.terms import Term
from treenet.network import SIGMOID, TANH, DenseNetwork


def oracle_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def oracle_net_forward(net: DenseNetwork, x: np.ndarray):
    """Per-layer (extended input, activation) pairs, last activation is
    the output."""
    steps = []
    for layer in net.layers:
        ext = np.concatenate([x, [1.0]])
        z = layer.weights @ ext
        x = np.tanh(z) if layer.activation == TANH else oracle_sigmoid(z)
        steps.append((ext, x))
    return steps


def oracle_net_backward(net: DenseNetwork, steps, output_gradient):
    """Input gradient and per-layer weight gradients from the chain rule.

    tanh' and sigmoid' are recovered from the stored activations:
    1 - a^2 and a(1 - a).
    """
    g = output_gradient
    weight_grads = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        ext, a = steps[k]
        if net.layers[k].activation == SIGMOID:
            delta = g * (a * (1.0 - a))
        else:
            delta = g * (1.0 - a * a)
        weight_grads[k] = np.outer(delta, ext)
        g = (delta @ net.layers[k].weights)[:-1]
    return g, weight_grads


def oracle_net_backward_from_delta(net: DenseNetwork, steps, final_delta):
    """Chain rule with the last layer's pre-activation delta given
    directly (cross-entropy through a sigmoid leaves output - target)."""
    weight_grads = [None] * len(net.layers)
    delta = final_delta
    for k in range(len(net.layers) - 1, -1, -1):
        weight_grads[k] = np.outer(delta, steps[k][0])
        g = (delta @ net.layers[k].weights)[:-1]
        if k > 0:
            a = steps[k - 1][1]
            if net.layers[k - 1].activation == SIGMOID:
                delta = g * (a * (1.0 - a))
            else:
                delta = g * (1.0 - a * a)
    return g, weight_grads


def oracle_ce(output: np.ndarray, target: np.ndarray) -> float:
    """Binary cross-entropy summed over components, outputs clipped to
    [1e-12, 1 - 1e-12] like the library's loss."""
    o = np.clip(output, 1e-12, 1.0 - 1e-12)
    return float(-(target @ np.log(o) + (1.0 - target) @ np.log(1.0 - o)))


def oracle_embed(tnn, t: Term) -> np.ndarray:
    """Root embedding by plain recursion, recomputing shared subterms."""
    if t.args:
        x = np.concatenate([oracle_embed(tnn, arg) for arg in t.args])
    else:
        x = np.ones(1)
    steps = oracle_net_forward(tnn.operator_nets[t.operator], x)
    return steps[-1][1]


def oracle_loss(tnn, example) -> float:
    """Summed cross-entropy over every target head."""
    root = oracle_embed(tnn, example.term)
    total = 0.0
    for head in sorted(example.targets):
        steps = oracle_net_forward(tnn.head_nets[head], root)
        total += oracle_ce(steps[-1][1], example.targets[head])
    return total


def oracle_backprop(tnn, example):
    """(per-network weight gradients, loss) by unmemoized recursion.

    Visits every operator occurrence separately, node before children,
    children left to right, heads in sorted name order; this is the
    accumulation order the library promises to match bit for bit.
    """
    dim = tnn.embedding_dim
    grads: dict[str, list[np.ndarray]] = {}

    def add(name, layer_grads):
        if name in grads:
            grads[name] = [a + g for a, g in zip(grads[name], layer_grads)]
        else:
            grads[name] = [g.copy() for g in layer_grads]

    root = oracle_embed(tnn, example.term)
    total_loss = 0.0
    root_gradient = np.zeros(dim)
    for head in sorted(example.targets):
        steps = oracle_net_forward(tnn.head_nets[head], root)
        target = example.targets[head]
        total_loss += oracle_ce(steps[-1][1], target)
        g, wgrads = oracle_net_backward_from_delta(
            tnn.head_nets[head], steps, steps[-1][1] - target
        )
        add(head, wgrads)
        root_gradient += g

    def down(t: Term, g: np.ndarray) -> None:
        if t.args:
            x = np.concatenate([oracle_embed(tnn, arg) for arg in t.args])
        else:
            x = np.ones(1)
        steps = oracle_net_forward(tnn.operator_nets[t.operator], x)
        input_grad, wgrads = oracle_net_backward(
            tnn.operator_nets[t.operator], steps, g
        )
        add(t.operator, wgrads)
        for i, arg in enumerate(t.args):
            down(arg, input_grad[i * dim : (i + 1) * dim])

    down(example.term, root_gradient)
    return grads, total_loss


def fd_gradients(tnn, example, h: float = 1e-5):
    """Central finite differences of the loss over every single weight."""
    out: dict[str, list[np.ndarray]] = {}
    for kind, name, net in tnn.networks():
        del kind
        net_grads = []
        for layer in net.layers:
            g = np.zeros_like(layer.weights)
            rows, cols = layer.weights.shape
            for i in range(rows):
                for j in range(cols):
                    saved = layer.weights[i, j]
                    layer.weights[i, j] = saved + h
                    above = oracle_loss(tnn, example)
                    layer.weights[i, j] = saved - h
                    below = oracle_loss(tnn, example)
                    layer.weights[i, j] = saved
                    g[i, j] = (above - below) / (2.0 * h)
            net_grads.append(g)
        out[name] = net_grads
    return out


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-4):
    """Worst |a - n| / max(|a|, |n|, floor) across all weights.

    The floor keeps near-zero gradient pairs from blowing up the ratio;
    disagreements below the floor are within finite-difference noise.
    """
    worst = 0.0
    assert set(analytic) <= set(numeric)
    for name in numeric:
        # Networks absent from the analytic side never saw the example,
        # so their true gradient is zero.
        entry = analytic.get(name) or [np.zeros_like(n) for n in numeric[name]]
        for a, n in zip(entry, numeric[name]):
            scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(np.max(np.abs(a - n) / scale)))
    return worst


_PROP_ARITIES = {"=>": 2, "not": 1, "or": 2, "and": 2}


def brute_prop_universal(t: Term) -> bool:
    """Universal truth by trying every assignment one at a time.

    Any maximal non-connective subterm counts as one variable, which is
    how prime-tower variables behave.
    """
    import itertools

    names: list[Term] = []

    def collect(node: Term) -> None:
        if _PROP_ARITIES.get(node.operator) == len(node.args):
            for arg in node.args:
                collect(arg)
        elif node not in names:
            names.append(node)

    collect(t)

    def ev(node: Term, env) -> bool:
        if _PROP_ARITIES.get(node.operator) != len(node.args):
            return env[node]
        if node.operator == "not":
            return not ev(node.args[0], env)
        if node.operator == "and":
            return ev(node.args[0], env) and ev(node.args[1], env)
        if node.operator == "or":
            return ev(node.args[0], env) or ev(node.args[1], env)
        return (not ev(node.args[0], env)) or ev(node.args[1], env)

    for bits in itertools.product((False, True), repeat=len(names)):
        if not ev(t, dict(zip(names, bits))):
            return False
    return True


def random_term(rng: np.random.Generator, operators, max_depth: int) -> Term:
    """Random term over (name, arity) pairs; depth 0 forces a leaf."""
    leaves = [(n, a) for n, a in operators if a == 0]
    if max_depth <= 0 or rng.random() < 0.3:
        name, _ = leaves[rng.integers(len(leaves))]
        return Term(name, ())
    name, arity = operators[rng.integers(len(operators))]
    args = tuple(random_term(rng, operators, max_depth - 1) for _ in range(arity))
    return Term(name, args)


def random_shared_term(rng: np.random.Generator, operators, max_depth: int) -> Term:
    """Like random_term but reuses already-built subterms about half the
    time, so identical subtrees show up as distinct occurrences."""
    pool: list[Term] = []

    def build(depth: int) -> Term:
        if pool and rng.random() < 0.5:
            candidates = [t for t in pool if _depth(t) <= depth]
            if candidates:
                return candidates[rng.integers(len(candidates))]
        leaves = [(n, a) for n, a in operators if a == 0]
        if depth <= 0 or rng.random() < 0.3:
            name, _ = leaves[rng.integers(len(leaves))]
            t = Term(name, ())
        else:
            name, arity = operators[rng.integers(len(operators))]
            t = Term(name, tuple(build(depth - 1) for _ in range(arity)))
        pool.append(t)
        return t

    def _depth(t: Term) -> int:
        return 1 + max((_depth(a) for a in t.args), default=0)

    return build(max_depth)
