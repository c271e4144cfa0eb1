import numpy as np
import pytest

from treenet.terms import (
    ArityError,
    ParseError,
    Term,
    TermError,
    collect_signatures,
    index_variables,
    parse_term,
    print_term,
    subterms,
    term_depth,
    term_size,
)

from oracles import random_term

ARITH_OPS = [("0", 0), ("s", 1), ("+", 2), ("*", 2)]


def ref_size(t):
    return 1 + sum(ref_size(a) for a in t.args)


def ref_depth(t):
    return 1 + max((ref_depth(a) for a in t.args), default=0)


def test_parse_bare_token():
    t = parse_term("0")
    assert t.operator == "0" and t.args == ()


def test_parse_nested():
    t = parse_term("(+ (s 0) (* 0 (s (s 0))))")
    assert t.operator == "+"
    assert t.args[0] == Term("s", (Term("0"),))
    assert t.args[1].operator == "*"


def test_parse_ignores_extra_whitespace():
    assert parse_term("  ( +   0\t(s   0) )\n") == parse_term("(+ 0 (s 0))")


def test_print_round_trip_fixed():
    for text in ["0", "(s 0)", "(+ (s 0) 0)", "(* (+ 0 0) (s (s 0)))"]:
        assert print_term(parse_term(text)) == text


def test_print_parse_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        t = random_term(rng, ARITH_OPS, 5)
        assert parse_term(print_term(t)) == t


@pytest.mark.parametrize(
    "text",
    ["", "   ", "(+ 0 0) 0", "(+ 0 0", ")", "(+ 0))", "()", "( )"],
)
def test_parse_rejects_malformed(text):
    with pytest.raises(ParseError):
        parse_term(text)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_term("(+ 0 0) junk")
    assert info.value.position == 8


def test_parse_rejects_arity_conflict():
    with pytest.raises(ArityError) as info:
        parse_term("(g (f 0) (f 0 0))")
    assert info.value.operator == "f"
    assert set(info.value.arities) == {1, 2}


def test_term_rejects_bad_operator_tokens():
    for bad in ["", "a b", "(", "x)", "a\nb"]:
        with pytest.raises(TermError):
            Term(bad)


def test_term_equality_and_hashing():
    a = parse_term("(+ (s 0) 0)")
    b = parse_term("(+ (s 0) 0)")
    c = parse_term("(+ 0 (s 0))")
    assert a == b and hash(a) == hash(b)
    assert a != c
    table = {a: 1}
    table[b] = 2
    table[c] = 3
    assert table == {a: 2, c: 3}
    assert a != "(+ (s 0) 0)"


def test_subterms_order_is_root_first_left_to_right():
    t = parse_term("(+ (s 0) (* 0 0))")
    ops = [node.operator for node in subterms(t)]
    assert ops == ["+", "s", "0", "*", "0", "0"]


def test_size_and_depth_match_recursive_definitions():
    rng = np.random.default_rng(11)
    for _ in range(100):
        t = random_term(rng, ARITH_OPS, 6)
        assert term_size(t) == ref_size(t)
        assert term_depth(t) == ref_depth(t)
    assert term_size(parse_term("0")) == 1
    assert term_depth(parse_term("(s (s 0))")) == 3


def test_collect_signatures():
    terms = [parse_term("(+ 0 (s 0))"), parse_term("(* 0 0)")]
    assert collect_signatures(terms) == {("+", 2), ("s", 1), ("*", 2), ("0", 0)}


def test_collect_signatures_rejects_conflicts_across_terms():
    with pytest.raises(ArityError):
        collect_signatures([parse_term("(f 0)"), parse_term("(f 0 0)")])


def test_index_variables_numbers_by_first_appearance():
    t = parse_term("(=> (and q p) (or p q))")
    indexed = index_variables(t, {"p", "q"})
    # q appears first, so q -> x and p -> (prime x).
    assert print_term(indexed) == "(=> (and x (prime x)) (or (prime x) x))"


def test_index_variables_is_idempotent():
    t = parse_term("(=> a (or b a))")
    once = index_variables(t, {"a", "b"})
    again = index_variables(once, {"x"})
    assert once == again


def test_index_variables_rejects_unknown_symbols():
    with pytest.raises(TermError):
        index_variables(parse_term("(and p mystery)"), {"p"})


def test_index_variables_rejects_connective_arity_misuse():
    t = Term("not", (Term("p"), Term("p")))
    with pytest.raises(ArityError):
        index_variables(t, {"p"})
