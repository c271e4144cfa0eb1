"""The two benchmark tasks and their exact oracles.

Arithmetic: terms over {0, s, +, *} labeled with the four binary digits of
their value modulo 16.  Propositional: formulas over {=>, not, or, and}
with prime-tower variables, labeled 1 when the formula holds under every
assignment.  Both labels come from exact symbolic evaluation, so generated
datasets are correct by construction and loaded datasets can be checked.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .terms import (
    CONNECTIVES,
    PRIME_TOKEN,
    ArityError,
    Term,
    TermError,
    index_variables,
    parse_term,
    print_term,
    subterms,
    term_depth,
)
from .tnn import DEFAULT_HEAD, Example
from .train import round_half_up

logger = logging.getLogger(__name__)

_ARITH_ARITIES = {"0": 0, "s": 1, "+": 2, "*": 2}


class DataFormatError(ValueError):
    """Bad dataset file content; carries the path and line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class GenerationError(RuntimeError):
    """Could not produce enough distinct examples."""


class VariableLimitError(ValueError):
    """Formula has more variables than the evaluator accepts."""

    def __init__(self, count: int, limit: int):
        super().__init__(f"formula has {count} variables, limit is {limit}")
        self.count = count
        self.limit = limit


def eval_arith(t: Term) -> int:
    """Exact value of a term over {0, s, +, *}; arbitrary precision."""
    values: dict[Term, int] = {}
    stack = [t]
    while stack:
        node = stack[-1]
        if node in values:
            stack.pop()
            continue
        arity = _ARITH_ARITIES.get(node.operator)
        if arity is None or arity != len(node.args):
            raise TermError(
                f"not an arithmetic operator: {node.operator!r} with"
                f" {len(node.args)} arguments"
            )
        pending = [arg for arg in node.args if arg not in values]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        op = node.operator
        if op == "0":
            values[node] = 0
        elif op == "s":
            values[node] = values[node.args[0]] + 1
        elif op == "+":
            values[node] = values[node.args[0]] + values[node.args[1]]
        else:
            values[node] = values[node.args[0]] * values[node.args[1]]
    return values[t]


def bits4(n: int) -> np.ndarray:
    """The four binary digits of n mod 16, most significant first."""
    m = n % 16
    return np.array(
        [(m >> 3) & 1, (m >> 2) & 1, (m >> 1) & 1, m & 1], dtype=np.float64
    )


def decode_bits(values) -> int:
    """Integer encoded by a vector of (possibly soft) binary digits."""
    result = 0
    for bit in round_half_up(values):
        result = (result << 1) | (1 if bit >= 1.0 else 0)
    return result


# ---------------------------------------------------------------------------
# Arithmetic dataset generation


@dataclass(frozen=True)
class ArithGenParams:
    n_train: int
    n_test: int
    max_leaf: int = 10
    max_depth: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 0 or self.n_test < 0:
            raise ValueError("example counts must be non-negative")
        if self.max_leaf < 0:
            raise ValueError("max_leaf must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


# Leaf probability below the root and the share of unary successor nodes
# among internal expansions; both shape how hard the corpus is.
_LEAF_PROB = 0.4
_UNARY_PROB = 0.2


def _numeral(k: int) -> Term:
    node = Term("0")
    for _ in range(k):
        node = Term("s", (node,))
    return node


def _random_arith_term(rng, max_leaf: int, max_depth: int, depth: int = 0) -> Term:
    if depth >= max_depth or (depth > 0 and rng.random() < _LEAF_PROB):
        return _numeral(int(rng.integers(0, max_leaf + 1)))
    r = rng.random()
    if r < _UNARY_PROB:
        return Term("s", (_random_arith_term(rng, max_leaf, max_depth, depth + 1),))
    operator = "+" if r < _UNARY_PROB + (1.0 - _UNARY_PROB) / 2.0 else "*"
    left = _random_arith_term(rng, max_leaf, max_depth, depth + 1)
    right = _random_arith_term(rng, max_leaf, max_depth, depth + 1)
    return Term(operator, (left, right))


def _label_arith(term: Term) -> Example:
    return Example(term, {DEFAULT_HEAD: bits4(eval_arith(term))})


def gen_arith_dataset(params: ArithGenParams) -> tuple[list[Example], list[Example]]:
    """Deterministically generate disjoint train and test splits.

    Terms are random expressions over {0, s, +, *} whose deepest subterms
    are unary numerals between 0 and max_leaf; duplicates are dropped, so
    the two splits share no term.
    """
    rng = np.random.default_rng(params.seed)
    needed = params.n_train + params.n_test
    seen: set[Term] = set()
    terms: list[Term] = []
    attempts = 0
    limit = 60 * needed + 1000
    while len(terms) < needed:
        if attempts >= limit:
            raise GenerationError(
                f"only found {len(terms)} distinct terms of {needed} after"
                f" {attempts} attempts; widen max_depth or max_leaf"
            )
        attempts += 1
        t = _random_arith_term(rng, params.max_leaf, params.max_depth)
        if t not in seen:
            seen.add(t)
            terms.append(t)
    train = [_label_arith(t) for t in terms[: params.n_train]]
    test = [_label_arith(t) for t in terms[params.n_train : needed]]
    return train, test


def class_histogram(examples) -> list[int]:
    """Counts of decoded 4-bit labels, indexed 0 to 15."""
    counts = [0] * 16
    for ex in examples:
        counts[decode_bits(ex.targets[DEFAULT_HEAD])] += 1
    return counts


def depth_histogram(examples) -> dict[int, int]:
    counts: dict[int, int] = {}
    for ex in examples:
        d = term_depth(ex.term)
        counts[d] = counts.get(d, 0) + 1
    return dict(sorted(counts.items()))


# ---------------------------------------------------------------------------
# Dataset text files: one `<term S-expression> | <label reals>` per line


def write_examples(path, examples) -> None:
    with open(path, "w") as fh:
        for ex in examples:
            if len(ex.targets) != 1:
                raise ValueError("dataset files carry exactly one objective")
            (values,) = ex.targets.values()
            labels = " ".join(format(v, ".17g") for v in values)
            fh.write(f"{print_term(ex.term)} | {labels}\n")


def _read_dataset(path):
    with open(path) as fh:
        raw_lines = fh.read().splitlines()
    rows = []
    expected_len = None
    for line_no, raw in enumerate(raw_lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        text, sep, label_text = line.rpartition(" | ")
        if not sep:
            raise DataFormatError(path, line_no, "missing ' | ' separator")
        try:
            values = [float(v) for v in label_text.split()]
        except ValueError:
            raise DataFormatError(
                path, line_no, f"bad label values {label_text!r}"
            ) from None
        if not values:
            raise DataFormatError(path, line_no, "no label values")
        if expected_len is None:
            expected_len = len(values)
        elif len(values) != expected_len:
            raise DataFormatError(
                path,
                line_no,
                f"expected {expected_len} label values, got {len(values)}",
            )
        try:
            term = parse_term(text)
        except TermError as err:
            raise DataFormatError(path, line_no, str(err)) from None
        rows.append((line_no, term, values))
    return rows


def load_examples(path) -> list[Example]:
    """Load a generic single-objective dataset file."""
    out = []
    for line_no, term, values in _read_dataset(path):
        try:
            out.append(Example(term, {DEFAULT_HEAD: values}))
        except ValueError as err:
            raise DataFormatError(path, line_no, str(err)) from None
    return out


def load_arith_dataset(path) -> list[Example]:
    """Load an arithmetic dataset, recomputing every label as a check."""
    out = []
    for line_no, term, values in _read_dataset(path):
        if len(values) != 4:
            raise DataFormatError(
                path, line_no, f"expected 4 label values, got {len(values)}"
            )
        try:
            expected = bits4(eval_arith(term))
        except TermError as err:
            raise DataFormatError(path, line_no, str(err)) from None
        if not np.array_equal(expected, np.asarray(values, dtype=np.float64)):
            raise DataFormatError(
                path, line_no, "label does not match the recomputed value"
            )
        out.append(Example(term, {DEFAULT_HEAD: values}))
    return out


# ---------------------------------------------------------------------------
# Propositional truth


@dataclass(frozen=True)
class PropProblem:
    """Hypothesis, conclusion, and whether `hypothesis => conclusion` is
    universally true."""

    hypothesis: Term
    conclusion: Term
    label: bool


def encode_prop(problem: PropProblem) -> Example:
    """Joint implication encoding with indexed variables.

    Variables are indexed over the combined formula, so towers are shared
    between the hypothesis and the conclusion.
    """
    combined = Term("=>", (problem.hypothesis, problem.conclusion))
    names = {
        node.operator
        for node in subterms(combined)
        if not node.args and node.operator not in CONNECTIVES
    }
    encoded = index_variables(combined, names)
    return Example(encoded, {DEFAULT_HEAD: [1.0 if problem.label else 0.0]})


def _variable_occurrence(node: Term) -> Term:
    """Validate a non-connective subterm as a variable occurrence."""
    base = node
    while base.operator == PRIME_TOKEN:
        if len(base.args) != 1:
            raise ArityError(PRIME_TOKEN, 1, len(base.args))
        base = base.args[0]
    if base.operator in CONNECTIVES:
        raise ArityError(base.operator, CONNECTIVES[base.operator], len(base.args))
    if base.args:
        raise TermError(f"not a propositional variable: {print_term(node)}")
    return node


def prop_variables(t: Term) -> list[Term]:
    """Distinct variable occurrences in first-appearance order."""
    order: dict[Term, None] = {}
    stack = [t]
    while stack:
        node = stack.pop()
        arity = CONNECTIVES.get(node.operator)
        if arity is not None and len(node.args) == arity:
            stack.extend(reversed(node.args))
            continue
        order.setdefault(_variable_occurrence(node), None)
    return list(order)


@lru_cache(maxsize=32)
def _truth_tables_cached(n: int) -> tuple[int, ...]:
    if n == 0:
        return ()
    prev = _truth_tables_cached(n - 1)
    width = 1 << (n - 1)
    shifted = tuple(tb | (tb << width) for tb in prev)
    return shifted + ((((1 << width) - 1) << width),)


def _truth_tables(n: int) -> tuple[int, ...]:
    """Bit a of table i is the value of variable i under assignment a."""
    if n <= 16:
        return _truth_tables_cached(n)
    tables = _truth_tables_cached(16)
    for m in range(17, n + 1):
        width = 1 << (m - 1)
        tables = tuple(tb | (tb << width) for tb in tables) + (
            (((1 << width) - 1) << width),
        )
    return tables


def eval_prop_universal(t: Term, max_variables: int = 25) -> bool:
    """True when the formula holds under every variable assignment.

    Evaluates all 2**n assignments at once on big-integer truth tables;
    refuses formulas with more than max_variables variables.
    """
    order = {key: i for i, key in enumerate(prop_variables(t))}
    n = len(order)
    if n > max_variables:
        raise VariableLimitError(n, max_variables)
    tables = _truth_tables(n)
    full = (1 << (1 << n)) - 1
    values: dict[Term, int] = {}
    stack = [t]
    while stack:
        node = stack[-1]
        if node in values:
            stack.pop()
            continue
        arity = CONNECTIVES.get(node.operator)
        if arity is None or len(node.args) != arity:
            values[node] = tables[order[node]]
            stack.pop()
            continue
        pending = [arg for arg in node.args if arg not in values]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        op = node.operator
        if op == "not":
            values[node] = full ^ values[node.args[0]]
        elif op == "and":
            values[node] = values[node.args[0]] & values[node.args[1]]
        elif op == "or":
            values[node] = values[node.args[0]] | values[node.args[1]]
        else:
            values[node] = (full ^ values[node.args[0]]) | values[node.args[1]]
    return values[t] == full


# ---------------------------------------------------------------------------
# Propositional entailment files: `A,B,label[,...]` with infix formulas


_SPLIT_FILES = {
    "train": "train.txt",
    "validate": "validate.txt",
    "easy": "test_easy.txt",
    "hard": "test_hard.txt",
    "big": "test_big.txt",
    "massive": "test_massive.txt",
    "exam": "test_exam.txt",
}


def _parse_infix_formula(text: str, path, line_no: int) -> Term:
    """Infix grammar: ~ binds tightest, then &, then |, then right-assoc >."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "~&|>()":
            tokens.append(c)
            i += 1
        elif c.isalnum() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            raise DataFormatError(path, line_no, f"bad character {c!r} in formula")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        token = peek()
        pos += 1
        return token

    def atom() -> Term:
        token = take()
        if token == "(":
            node = implication()
            if take() != ")":
                raise DataFormatError(path, line_no, "expected ')' in formula")
            return node
        if token == "~":
            return Term("not", (atom(),))
        if token is None or token in "&|>)":
            raise DataFormatError(path, line_no, f"unexpected token {token!r}")
        return Term(token)

    def conjunction() -> Term:
        node = atom()
        while peek() == "&":
            take()
            node = Term("and", (node, atom()))
        return node

    def disjunction() -> Term:
        node = conjunction()
        while peek() == "|":
            take()
            node = Term("or", (node, conjunction()))
        return node

    def implication() -> Term:
        node = disjunction()
        if peek() == ">":
            take()
            return Term("=>", (node, implication()))
        return node

    result = implication()
    if pos != len(tokens):
        raise DataFormatError(path, line_no, "trailing tokens in formula")
    return result


def load_entailment_dataset(path, split_name: str | None = None, check_limit: int = 12):
    """Load an entailment benchmark file of `A,B,label[,...]` lines.

    `path` may be a split directory (then split_name picks the file) or a
    file.  Labels of problems with at most check_limit variables are
    verified against eval_prop_universal; mismatching lines are skipped
    with a warning.
    """
    p = Path(path)
    if p.is_dir():
        if split_name is None:
            raise ValueError("split_name is required when path is a directory")
        if split_name not in _SPLIT_FILES:
            raise ValueError(
                f"unknown split {split_name!r}, expected one of"
                f" {sorted(_SPLIT_FILES)}"
            )
        p = p / _SPLIT_FILES[split_name]
    examples = []
    mismatches = 0
    with open(p) as fh:
        raw_lines = fh.read().splitlines()
    for line_no, raw in enumerate(raw_lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 3:
            raise DataFormatError(
                p, line_no, "expected at least 3 comma-separated fields"
            )
        hypothesis = _parse_infix_formula(parts[0], p, line_no)
        conclusion = _parse_infix_formula(parts[1], p, line_no)
        label_text = parts[2].strip()
        if label_text not in ("0", "1"):
            raise DataFormatError(p, line_no, f"bad label {label_text!r}")
        example = encode_prop(
            PropProblem(hypothesis, conclusion, label_text == "1")
        )
        if len(prop_variables(example.term)) <= check_limit:
            if eval_prop_universal(example.term) != (label_text == "1"):
                mismatches += 1
                logger.warning("%s:%d: label disagrees with evaluation, skipped", p, line_no)
                continue
        examples.append(example)
    logger.info(
        "loaded %d entailment examples from %s (%d mismatching lines skipped)",
        len(examples),
        p,
        mismatches,
    )
    return examples


# ---------------------------------------------------------------------------
# Generated propositional dataset, the stand-in when no benchmark files
# are on disk


_PROP_LEAF_PROB = 0.35


def _random_formula(rng, variables, max_depth: int, depth: int = 0) -> Term:
    if depth >= max_depth or rng.random() < _PROP_LEAF_PROB:
        return Term(variables[int(rng.integers(len(variables)))])
    r = rng.random()
    if r < 0.25:
        return Term("not", (_random_formula(rng, variables, max_depth, depth + 1),))
    if r < 0.55:
        operator = "and"
    elif r < 0.85:
        operator = "or"
    else:
        operator = "=>"
    left = _random_formula(rng, variables, max_depth, depth + 1)
    right = _random_formula(rng, variables, max_depth, depth + 1)
    return Term(operator, (left, right))


def gen_prop_dataset(
    n_train: int,
    n_test: int,
    max_variables: int = 6,
    max_depth: int = 3,
    seed: int = 0,
) -> tuple[list[Example], list[Example]]:
    """Generate a balanced universal-truth dataset of implications.

    Random `A => B` formulas are labeled by exact evaluation and sampled
    until half are universally true; encoded duplicates are dropped, so
    train and test are disjoint.
    """
    if n_train < 0 or n_test < 0:
        raise ValueError("example counts must be non-negative")
    if not 1 <= max_variables:
        raise ValueError("max_variables must be at least 1")
    rng = np.random.default_rng(seed)
    variables = [chr(ord("a") + i) for i in range(max_variables)]
    needed = n_train + n_test
    want_true = needed // 2 + needed % 2
    want_false = needed // 2
    true_pool: list[Example] = []
    false_pool: list[Example] = []
    seen: set[Term] = set()
    attempts = 0
    limit = 600 * needed + 2000
    while len(true_pool) < want_true or len(false_pool) < want_false:
        if attempts >= limit:
            raise GenerationError(
                f"found {len(true_pool)} true / {len(false_pool)} false of"
                f" {want_true}/{want_false} after {attempts} attempts"
            )
        attempts += 1
        hypothesis = _random_formula(rng, variables, max_depth)
        conclusion = _random_formula(rng, variables, max_depth)
        combined = Term("=>", (hypothesis, conclusion))
        names = {
            node.operator for node in subterms(combined) if not node.args
        }
        encoded = index_variables(combined, names)
        if encoded in seen:
            continue
        seen.add(encoded)
        truth = eval_prop_universal(encoded)
        pool = true_pool if truth else false_pool
        want = want_true if truth else want_false
        if len(pool) < want:
            pool.append(
                Example(encoded, {DEFAULT_HEAD: [1.0 if truth else 0.0]})
            )
    merged = true_pool + false_pool
    order = np.random.default_rng(seed + 1).permutation(len(merged))
    shuffled = [merged[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:needed]
