import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catlplus.formulas import (
    And,
    Always,
    Atom,
    Circle,
    Eventually,
    Halfplane,
    Interval,
    Not,
    Or,
    Task,
    TrueNode,
    Until,
)
from catlplus.parsing import ParseError, PrintError, parse_formula, parse_inner_formula, print_formula

REGIONS = {
    "C": Atom(Circle((5.0, 2.5), 1.5, label="C")),
    "B": Atom(Circle((5.0, 4.6), 0.8, label="B")),
    "Zone": Atom(Halfplane((1.0, 0.0), -2.0, label="Zone")),
}


def test_parse_task_with_eventually():
    out = parse_formula("<F[0,8] in(C), Delivery, 6>", REGIONS)
    assert out == Task(Eventually(REGIONS["C"], Interval(0, 8)), "Delivery", 6)


def test_parse_negated_until():
    out = parse_formula("!<in(B), Ground, 1> U[0,5] <in(B), Inspection, 2>", REGIONS)
    assert out == Until(
        Not(Task(REGIONS["B"], "Ground", 1)),
        Task(REGIONS["B"], "Inspection", 2),
        Interval(0, 5),
    )


def test_parse_true_literal():
    assert parse_formula("true") == TrueNode()
    assert parse_inner_formula("true") == TrueNode()


def test_parse_linear_atoms():
    assert parse_inner_formula("x >= 3") == Atom(Halfplane((1.0, 0.0), -3.0))
    assert parse_inner_formula("x <= 4.2") == Atom(Halfplane((-1.0, 0.0), 4.2))
    assert parse_inner_formula("2*x - 3*y >= 1") == Atom(Halfplane((2.0, -3.0), -1.0))
    assert parse_inner_formula("-x + 0.5 >= -2") == Atom(Halfplane((-1.0, 0.0), 2.5))
    assert parse_inner_formula("2x + y >= 0") == Atom(Halfplane((2.0, 1.0), 0.0))


def test_boolean_precedence():
    out = parse_inner_formula("x >= 0 && y >= 0 || x <= 1", {})
    assert isinstance(out, Or)
    assert isinstance(out.children[0], And)


def test_chain_flattening():
    out = parse_inner_formula("x >= 0 && y >= 0 && x >= 1")
    assert isinstance(out, And)
    assert len(out.children) == 3
    grouped = parse_inner_formula("(x >= 0 && y >= 0) && x >= 1")
    assert isinstance(grouped, And)
    assert len(grouped.children) == 2
    assert isinstance(grouped.children[0], And)


def test_temporal_binds_tighter_than_boolean():
    out = parse_formula("G[0,2] <x >= 0, c, 1> && <y >= 0, c, 1>")
    assert isinstance(out, And)
    assert isinstance(out.children[0], Always)


def test_until_non_associative():
    with pytest.raises(ParseError, match="non-associative"):
        parse_formula("<x>=0,c,1> U[0,1] <x>=0,c,1> U[0,1] <x>=0,c,1>")
    # parenthesized chains are fine
    parse_formula("(<x>=0,c,1> U[0,1] <x>=0,c,1>) U[0,1] <x>=0,c,1>")


def test_unknown_region_label_reports_position():
    with pytest.raises(ParseError) as err:
        parse_formula("<in(Lagoon), c, 1>", REGIONS)
    assert "Lagoon" in str(err.value)
    assert err.value.line == 1
    assert err.value.column == 5


def test_error_carries_expected_and_found():
    with pytest.raises(ParseError) as err:
        parse_formula("<x >= 0, c>", REGIONS)
    assert err.value.found == ">"


def test_interval_requires_integers():
    with pytest.raises(ParseError):
        parse_formula("F[0.5,2] <x>=0,c,1>")
    with pytest.raises(ParseError):
        parse_formula("F[3,2] <x>=0,c,1>")


def test_constant_comparison_rejected():
    with pytest.raises(ParseError, match="constant"):
        parse_inner_formula("3 >= 1")


def test_print_spec_formulas_round_trip():
    for text in (
        "<F[0,8] in(C), Delivery, 6>",
        "!<in(B), Ground, 1> U[0,5] <in(B), Inspection, 2>",
        "true",
        "G[0,25] !<in(B), Ground, 2> && <F[0,25] in(C), Delivery, 3>",
    ):
        formula = parse_formula(text, REGIONS)
        assert parse_formula(print_formula(formula), REGIONS) == formula


def test_unlabeled_circle_is_unprintable():
    with pytest.raises(PrintError):
        print_formula(Task(Atom(Circle((0.0, 0.0), 1.0)), "c", 1))


def test_prefix_corruption_errors_at_or_after_token_boundary():
    text = "<F[0,8] in(C), Delivery, 6> && !<in(B), Ground, 1>"
    parse_formula(text, REGIONS)  # sanity
    boundaries = [i for i in range(len(text) + 1) if i in (0, len(text)) or text[i - 1] == " "]
    for cut in boundaries:
        corrupted = text[:cut] + "?" + text[cut:]
        with pytest.raises(ParseError) as err:
            parse_formula(corrupted, REGIONS)
        assert err.value.column >= cut + 1 - 1  # token starting at the cut


# -- generated round-trips ---------------------------------------------------

_finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
_nonzero = _finite.filter(lambda v: v != 0.0)
_ident = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s not in ("true", "in", "F", "G", "U", "x", "y")
)


@st.composite
def _halfplane(draw):
    pick = draw(st.integers(0, 2))
    if pick == 0:
        normal = (draw(_nonzero), draw(_finite))
    elif pick == 1:
        normal = (draw(_finite), draw(_nonzero))
    else:
        normal = (draw(_nonzero), draw(_nonzero))
    return Atom(Halfplane(normal, draw(_finite)))


def _interval_strategy():
    return st.tuples(st.integers(0, 9), st.integers(0, 9)).map(
        lambda ab: Interval(min(ab), max(ab))
    )


def _inner_formulas():
    leaves = st.one_of(
        st.just(TrueNode()),
        _halfplane(),
        st.sampled_from(sorted(REGIONS)).map(REGIONS.get),
    )

    def extend(children):
        return st.one_of(
            children.map(Not),
            st.tuples(children, _interval_strategy()).map(lambda p: Eventually(*p)),
            st.tuples(children, _interval_strategy()).map(lambda p: Always(*p)),
            st.tuples(children, children, _interval_strategy()).map(lambda p: Until(*p)),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: And(tuple(cs))),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: Or(tuple(cs))),
        )

    return st.recursive(leaves, extend, max_leaves=8)


def _outer_formulas():
    tasks = st.tuples(_inner_formulas(), _ident, st.integers(1, 5)).map(
        lambda p: Task(p[0], p[1], p[2])
    )
    leaves = st.one_of(st.just(TrueNode()), tasks)

    def extend(children):
        return st.one_of(
            children.map(Not),
            st.tuples(children, _interval_strategy()).map(lambda p: Eventually(*p)),
            st.tuples(children, _interval_strategy()).map(lambda p: Always(*p)),
            st.tuples(children, children, _interval_strategy()).map(lambda p: Until(*p)),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: And(tuple(cs))),
            st.lists(children, min_size=2, max_size=3).map(lambda cs: Or(tuple(cs))),
        )

    return st.recursive(leaves, extend, max_leaves=6)


@settings(max_examples=300, deadline=None)
@given(_outer_formulas())
def test_generated_round_trip(formula):
    assert parse_formula(print_formula(formula), REGIONS) == formula


@settings(max_examples=200, deadline=None)
@given(_inner_formulas())
def test_generated_inner_round_trip(formula):
    assert parse_inner_formula(print_formula(formula), REGIONS) == formula
