"""First-order terms: S-expression parsing, printing, and variable encoding.

A term is a rooted ordered tree of operator applications.  Operators are
plain tokens without binders or types, and each operator is expected to
keep a single arity within any one term or dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "Term",
    "TermError",
    "ParseError",
    "ArityError",
    "parse_term",
    "print_term",
    "collect_signatures",
    "index_variables",
    "subterms",
    "term_size",
    "term_depth",
    "CONNECTIVES",
    "VAR_TOKEN",
    "PRIME_TOKEN",
]

_FORBIDDEN_CHARS = set(" \t\r\n()")

# Propositional connectives with their arities, plus the two operators used
# to spell out indexed variables.
CONNECTIVES = {"=>": 2, "not": 1, "or": 2, "and": 2}
VAR_TOKEN = "x"
PRIME_TOKEN = "prime"


class TermError(ValueError):
    """Malformed term, token, or formula."""


class ParseError(TermError):
    """Syntax error in term text; `position` is a character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ArityError(TermError):
    """One operator used with two different arities."""

    def __init__(self, operator: str, first: int, second: int):
        super().__init__(
            f"operator {operator!r} used with arity {first} and arity {second}"
        )
        self.operator = operator
        self.arities = (first, second)


@dataclass(frozen=True, eq=False)
class Term:
    """Operator application; immutable, hashable, safe to share."""

    operator: str
    args: tuple["Term", ...] = ()

    def __post_init__(self):
        if not self.operator or _FORBIDDEN_CHARS.intersection(self.operator):
            raise TermError(f"invalid operator token {self.operator!r}")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        # Hash is cached so that memo tables over deep terms stay cheap.
        object.__setattr__(self, "_hash", hash((self.operator, self.args)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        if self._hash != other._hash:
            return False
        return self.operator == other.operator and self.args == other.args

    def __repr__(self) -> str:
        return f"Term({print_term(self)!r})"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c in "()":
            tokens.append((c, c, i))
            i += 1
        else:
            j = i
            while j < n and text[j] not in _FORBIDDEN_CHARS:
                j += 1
            tokens.append(("tok", text[i:j], i))
            i = j
    return tokens


def parse_term(text: str) -> Term:
    """Parse one S-expression: `(op arg1 ... argn)` or a bare token."""
    result = None
    stack: list[list] = []  # [operator or None, open position, children]
    for kind, value, pos in _tokenize(text):
        if result is not None:
            raise ParseError("trailing input after complete term", pos)
        if kind == "(":
            stack.append([None, pos, []])
            continue
        if kind == "tok":
            if stack and stack[-1][0] is None:
                stack[-1][0] = value
                continue
            node = Term(value)
        else:
            if not stack:
                raise ParseError("unexpected ')'", pos)
            operator, _, children = stack.pop()
            if operator is None:
                raise ParseError("missing operator after '('", pos)
            node = Term(operator, tuple(children))
        if stack:
            stack[-1][2].append(node)
        else:
            result = node
    if stack:
        raise ParseError("unbalanced '(': expected ')'", len(text))
    if result is None:
        raise ParseError("empty input", len(text))
    _check_arities(result)
    return result


def _check_arities(t: Term) -> None:
    seen: dict[str, int] = {}
    stack = [t]
    while stack:
        node = stack.pop()
        arity = seen.setdefault(node.operator, len(node.args))
        if arity != len(node.args):
            raise ArityError(node.operator, arity, len(node.args))
        stack.extend(node.args)


def print_term(t: Term) -> str:
    """Canonical S-expression text; inverse of parse_term."""
    parts: list[str] = []
    stack: list = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        if not item.args:
            parts.append(item.operator)
            continue
        parts.append("(" + item.operator)
        stack.append(")")
        stack.extend(reversed(item.args))
    pieces: list[str] = []
    for part in parts:
        if pieces and part != ")":
            pieces.append(" ")
        pieces.append(part)
    return "".join(pieces)


def subterms(t: Term):
    """Yield every node of the term, root first, children left to right."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.args))


def term_size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


def term_depth(t: Term) -> int:
    """Number of nodes on the longest root-to-leaf path."""
    best = 0
    stack = [(t, 1)]
    while stack:
        node, depth = stack.pop()
        if depth > best:
            best = depth
        for arg in node.args:
            stack.append((arg, depth + 1))
    return best


def collect_signatures(terms) -> set[tuple[str, int]]:
    """All (operator, arity) pairs occurring in `terms`.

    Raises ArityError if any operator appears with two different arities.
    """
    seen: dict[str, int] = {}
    for t in terms:
        stack = [t]
        while stack:
            node = stack.pop()
            arity = seen.setdefault(node.operator, len(node.args))
            if arity != len(node.args):
                raise ArityError(node.operator, arity, len(node.args))
            stack.extend(node.args)
    return set(seen.items())


def index_variables(t: Term, variable_names) -> Term:
    """Replace named propositional variables by prime towers over `x`.

    The i-th distinct variable, counting from zero in depth-first
    left-to-right order of first appearance, becomes `prime` applied i
    times to the constant `x`.  Existing towers are recognised as
    variables, which makes the encoding idempotent.
    """
    names = set(variable_names)
    mapping: dict[Term, Term] = {}

    def tower(i: int) -> Term:
        node = Term(VAR_TOKEN)
        for _ in range(i):
            node = Term(PRIME_TOKEN, (node,))
        return node

    def is_variable(node: Term) -> bool:
        base = node
        while base.operator == PRIME_TOKEN and len(base.args) == 1:
            base = base.args[0]
        return not base.args and base.operator in names

    def visit(node: Term) -> Term:
        if is_variable(node):
            mapped = mapping.get(node)
            if mapped is None:
                mapped = tower(len(mapping))
                mapping[node] = mapped
            return mapped
        arity = CONNECTIVES.get(node.operator)
        if arity is None:
            raise TermError(
                f"unknown symbol {node.operator!r} in propositional formula"
            )
        if len(node.args) != arity:
            raise ArityError(node.operator, arity, len(node.args))
        return Term(node.operator, tuple(visit(arg) for arg in node.args))

    return visit(t)
