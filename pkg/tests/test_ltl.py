import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlplan.buchi import accepts_prefix_suffix
from ltlplan.ltl import (
    AP,
    And,
    Eventually,
    LtlSyntaxError,
    Not,
    TrueF,
    Until,
    atoms,
    eval_lasso,
    ltl_to_nba,
    normalize,
    parse_ltl,
    pretty_print,
)

E = frozenset()
L1, L2, L3 = frozenset([1]), frozenset([2]), frozenset([3])


def lassos(symbols, max_total):
    """All (prefix, cycle) pairs with |prefix|+|cycle| <= max_total."""
    for total in range(1, max_total + 1):
        for cyc_len in range(1, total + 1):
            pre_len = total - cyc_len
            for pre in itertools.product(symbols, repeat=pre_len):
                for cyc in itertools.product(symbols, repeat=cyc_len):
                    yield list(pre), list(cyc)


def agree_on_all_lassos(f, symbols, max_total=6):
    b = ltl_to_nba(f)
    for pre, cyc in lassos(symbols, max_total):
        assert accepts_prefix_suffix(b, pre, cyc) == eval_lasso(f, pre, cyc), (
            f"{pretty_print(f)} disagrees on {pre} ({cyc})^w"
        )


class TestParse:
    def test_case_study_formula(self):
        f = parse_ltl("[]<> l1 && (!l1 U l2) && <> l3")
        # conjunction of the three sub-tasks with the right operators
        assert isinstance(f, And)
        assert atoms(f) == {1, 2, 3}
        g = parse_ltl("G F l1 & (! l1 U l2) & F l3")
        assert normalize(f) == normalize(g)

    def test_true(self):
        assert normalize(parse_ltl("true")) == TrueF()

    def test_incomplete_until(self):
        with pytest.raises(LtlSyntaxError) as e:
            parse_ltl("l1 U")
        assert e.value.offset == 4

    def test_precedence(self):
        # unary > U > && > ||
        f = parse_ltl("!l1 U l2 && l3 || l1")
        g = parse_ltl("(((!l1) U l2) && l3) || l1")
        assert normalize(f) == normalize(g)

    def test_until_right_associative(self):
        f = parse_ltl("l1 U l2 U l3")
        g = parse_ltl("l1 U (l2 U l3)")
        assert normalize(f) == normalize(g)

    def test_pi_alias(self):
        assert normalize(parse_ltl("pi2")) == normalize(parse_ltl("l2"))

    def test_roundtrip_pretty_print(self):
        for text in ("[]<> l1 && (!l1 U l2) && <> l3", "l1 U (l2 || !l3)", "true U l1"):
            f = normalize(parse_ltl(text))
            assert normalize(parse_ltl(pretty_print(f))) == f


class TestEvalLasso:
    def test_eventually(self):
        assert eval_lasso(parse_ltl("<> l1"), [E], [L1])

    def test_always_fails_on_empty_cycle_symbol(self):
        assert not eval_lasso(parse_ltl("[] l1"), [L1], [E])

    def test_until_order_violated(self):
        assert not eval_lasso(parse_ltl("!l1 U l2"), [L1], [L2])

    def test_until_satisfied(self):
        assert eval_lasso(parse_ltl("!l1 U l2"), [E, L2], [L1])

    def test_cycle_wraps(self):
        # []<>l1 holds iff the cycle contains l1
        f = parse_ltl("[]<> l1")
        assert eval_lasso(f, [L1], [E, L1])
        assert not eval_lasso(f, [L1, L1], [E])


class TestLtlToNba:
    def test_true_single_state(self):
        b = ltl_to_nba(parse_ltl("true"))
        assert b.n == 1 and b.accepting == frozenset([0])
        assert b.has_transition(0, E, 0) and b.has_transition(0, L1, 0)

    def test_unique_initial_state(self):
        for text in ("<> l1", "[]<> l1 && (!l1 U l2) && <> l3", "l1 U l2"):
            b = ltl_to_nba(parse_ltl(text))
            assert isinstance(b.init, int)

    def test_eventually_agrees(self):
        agree_on_all_lassos(parse_ltl("<> l1"), [E, L1])

    def test_case_study_agrees(self):
        agree_on_all_lassos(
            parse_ltl("[]<> l1 && (!l1 U l2) && <> l3"), [E, L1, L2, L3], max_total=5
        )

    def test_case_study_equivalent_to_reference_five_state(self, fig):
        f = parse_ltl("[]<> l1 && (!l1 U l2) && <> l3")
        mine = ltl_to_nba(f)
        for pre, cyc in lassos([E, L1, L2, L3], 5):
            assert accepts_prefix_suffix(mine, pre, cyc) == accepts_prefix_suffix(fig, pre, cyc)


def random_formula(draw, depth):
    if depth == 0:
        return draw(st.sampled_from([TrueF(), AP(1), AP(2), AP(3)]))
    kind = draw(st.sampled_from(["ap", "not", "and", "until", "ev"]))
    if kind == "ap":
        return draw(st.sampled_from([TrueF(), AP(1), AP(2), AP(3)]))
    if kind == "not":
        return Not(random_formula(draw, depth - 1))
    if kind == "ev":
        return Eventually(random_formula(draw, depth - 1))
    a = random_formula(draw, depth - 1)
    b = random_formula(draw, depth - 1)
    return And(a, b) if kind == "and" else Until(a, b)


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_random_formulas_agree_with_lasso_oracle(data):
    f = random_formula(data.draw, 3)
    agree_on_all_lassos(f, [E, L1, L2], max_total=4)
