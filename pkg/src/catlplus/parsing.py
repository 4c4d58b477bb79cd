"""Concrete text syntax for the two-layer logic, with an inverting printer.

Grammar (whitespace-insensitive)::

    outer := "true" | task | "!" outer | outer "&&" outer | outer "||" outer
           | "F[" int "," int "]" outer | "G[" int "," int "]" outer
           | outer "U[" int "," int "]" outer | "(" outer ")"
    task  := "<" inner "," ident "," int ">"
    inner := like outer but with atoms instead of tasks
    atom  := "in(" ident ")" | linexpr (">="|"<=") number
    linexpr := signed terms over the workspace variables x and y

Precedence: ``!``/``F``/``G`` bind tightest, then ``U``, then ``&&``, then
``||``. ``U`` is non-associative: chains must be parenthesized. Chains of
the same boolean operator collapse into one n-ary node, so `a && b && c`
is a single three-child conjunction.

``in(LABEL)`` splices in the formula registered for LABEL in the caller's
region map. `print_formula` inverts `parse_formula` up to structural
equality; `<=` atoms are normalized to `>=`-form predicates while parsing.
"""

from __future__ import annotations

import re

from .formulas import (
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Halfplane,
    Interval,
    Not,
    Or,
    Task,
    TrueNode,
    Until,
)


class ParseError(ValueError):
    """Syntax or region-lookup failure with the offending position."""

    def __init__(self, message: str, line: int, column: int, expected: str = "", found: str = ""):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"{message} at line {line}, column {column}")


class PrintError(ValueError):
    """The formula contains a node the grammar cannot express."""


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<symbol>&&|\|\||>=|<=|[!<>\[\](),+\-*])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, found=text[pos])
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], region_map: dict[str, Formula]):
        self.tokens = tokens
        self.pos = 0
        self.region_map = region_map

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str) -> ParseError:
        tok = self.peek()
        found = tok.text or "end of input"
        return ParseError(
            f"expected {expected}, found {found!r}", tok.line, tok.column,
            expected=expected, found=found,
        )

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise self.fail(f"'{text}'")
        return self.advance()

    # -- shared expression grammar (outer=True parses tasks, else atoms) ----

    def formula(self, outer: bool) -> Formula:
        return self.or_chain(outer)

    def or_chain(self, outer: bool) -> Formula:
        parts = [self.and_chain(outer)]
        while self.peek().text == "||":
            self.advance()
            parts.append(self.and_chain(outer))
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def and_chain(self, outer: bool) -> Formula:
        parts = [self.until_level(outer)]
        while self.peek().text == "&&":
            self.advance()
            parts.append(self.until_level(outer))
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def until_level(self, outer: bool) -> Formula:
        left = self.unary(outer)
        if self.peek().text == "U":
            self.advance()
            window = self.interval()
            right = self.unary(outer)
            if self.peek().text == "U":
                tok = self.peek()
                raise ParseError(
                    "until is non-associative, parenthesize the chain",
                    tok.line, tok.column, expected="'&&', '||' or end", found="U",
                )
            return Until(left, right, window)
        return left

    def unary(self, outer: bool) -> Formula:
        tok = self.peek()
        if tok.text == "!":
            self.advance()
            return Not(self.unary(outer))
        if tok.kind == "ident" and tok.text in ("F", "G") and self.tokens[self.pos + 1].text == "[":
            self.advance()
            window = self.interval()
            child = self.unary(outer)
            return Eventually(child, window) if tok.text == "F" else Always(child, window)
        return self.primary(outer)

    def interval(self) -> Interval:
        self.expect("[")
        start = self.integer()
        self.expect(",")
        end = self.integer()
        self.expect("]")
        tok = self.tokens[self.pos - 1]
        if end < start:
            raise ParseError(f"empty interval [{start},{end}]", tok.line, tok.column)
        return Interval(start, end)

    def integer(self) -> int:
        tok = self.peek()
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.fail("a nonnegative integer")
        self.advance()
        return int(tok.text)

    def primary(self, outer: bool) -> Formula:
        tok = self.peek()
        if tok.text == "true":
            self.advance()
            return TRUE
        if tok.text == "(":
            self.advance()
            inner = self.formula(outer)
            self.expect(")")
            return inner
        if outer:
            if tok.text == "<":
                return self.task()
            raise self.fail("'true', a task '<...>', '!', 'F[', 'G[' or '('")
        return self.atom()

    def task(self) -> Formula:
        self.expect("<")
        inner = self.formula(outer=False)
        self.expect(",")
        cap = self.peek()
        if cap.kind != "ident":
            raise self.fail("a capability name")
        self.advance()
        self.expect(",")
        count = self.integer()
        if count < 1:
            raise ParseError("task count must be >= 1", cap.line, cap.column)
        self.expect(">")
        return Task(inner, cap.text, count)

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.text == "in" and self.tokens[self.pos + 1].text == "(":
            self.advance()
            self.advance()
            label = self.peek()
            if label.kind != "ident":
                raise self.fail("a region label")
            self.advance()
            self.expect(")")
            if label.text not in self.region_map:
                raise ParseError(
                    f"unknown region label '{label.text}'", label.line, label.column,
                    expected="a region from the region map", found=label.text,
                )
            return self.region_map[label.text]
        return self.linear_atom()

    def linear_atom(self) -> Formula:
        cx, cy, const = 0.0, 0.0, 0.0
        sign = 1.0
        tok = self.peek()
        if tok.text in ("+", "-"):
            self.advance()
            sign = -1.0 if tok.text == "-" else 1.0
        cx, cy, const = self.term(sign, cx, cy, const)
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            cx, cy, const = self.term(-1.0 if op == "-" else 1.0, cx, cy, const)
        cmp_tok = self.peek()
        if cmp_tok.text not in (">=", "<="):
            raise self.fail("'>=' or '<='")
        self.advance()
        rhs_sign = 1.0
        if self.peek().text in ("+", "-"):
            rhs_sign = -1.0 if self.advance().text == "-" else 1.0
        rhs_tok = self.peek()
        if rhs_tok.kind != "number":
            raise self.fail("a number")
        self.advance()
        rhs = rhs_sign * float(rhs_tok.text)
        if cx == 0.0 and cy == 0.0:
            raise ParseError(
                "atom compares a constant (no x or y term)", cmp_tok.line, cmp_tok.column
            )
        if cmp_tok.text == ">=":
            return Atom(Halfplane((cx, cy), const - rhs))
        return Atom(Halfplane((-cx, -cy), rhs - const))

    def term(self, sign: float, cx: float, cy: float, const: float):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            coeff = sign * float(tok.text)
            if self.peek().text == "*":
                self.advance()
                var = self.peek()
                if var.text not in ("x", "y"):
                    raise self.fail("'x' or 'y'")
                self.advance()
                return (cx + coeff, cy, const) if var.text == "x" else (cx, cy + coeff, const)
            if self.peek().text in ("x", "y"):
                var = self.advance()
                return (cx + coeff, cy, const) if var.text == "x" else (cx, cy + coeff, const)
            return cx, cy, const + coeff
        if tok.text in ("x", "y"):
            self.advance()
            return (cx + sign, cy, const) if tok.text == "x" else (cx, cy + sign, const)
        raise self.fail("a number, 'x' or 'y'")


def parse_formula(text: str, region_map: dict[str, Formula] | None = None) -> Formula:
    """Parse an outer-layer formula; `in(LABEL)` atoms resolve via region_map."""
    parser = _Parser(_tokenize(text), region_map or {})
    out = parser.formula(outer=True)
    if parser.peek().kind != "eof":
        raise parser.fail("end of input")
    return out


def parse_inner_formula(text: str, region_map: dict[str, Formula] | None = None) -> Formula:
    """Parse a bare inner-layer (single-trajectory) formula."""
    parser = _Parser(_tokenize(text), region_map or {})
    out = parser.formula(outer=False)
    if parser.peek().kind != "eof":
        raise parser.fail("end of input")
    return out


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC_OR, _PREC_AND, _PREC_UNTIL, _PREC_UNARY, _PREC_LEAF = 1, 2, 3, 4, 5


def _fmt(x: float) -> str:
    return repr(float(x))


def _coeff_term(coeff: float, var: str) -> str:
    if coeff == 1.0:
        return var
    if coeff == -1.0:
        return f"-{var}"
    return f"{_fmt(coeff)}*{var}"


def _print_halfplane(pred: Halfplane) -> str:
    nx, ny = pred.normal
    # flip to <=-form when the leading coefficient is negative, so the
    # printed text reparses to the identical predicate
    lead = nx if nx != 0.0 else ny
    if lead < 0:
        nx, ny, op, rhs = -nx, -ny, "<=", pred.offset
    else:
        op, rhs = ">=", -pred.offset
    if nx != 0.0 and ny != 0.0:
        if ny > 0:
            lhs = f"{_coeff_term(nx, 'x')} + {_coeff_term(ny, 'y')}"
        else:
            lhs = f"{_coeff_term(nx, 'x')} - {_coeff_term(-ny, 'y')}"
    elif nx != 0.0:
        lhs = _coeff_term(nx, "x")
    else:
        lhs = _coeff_term(ny, "y")
    return f"{lhs} {op} {_fmt(rhs)}"


def _render(node: Formula, min_prec: int) -> str:
    if isinstance(node, TrueNode):
        return "true"
    if isinstance(node, Atom):
        pred = node.predicate
        if pred.label is not None:
            return f"in({pred.label})"
        if isinstance(pred, Halfplane):
            return _print_halfplane(pred)
        raise PrintError(
            "a circle predicate can only be printed through a region label"
        )
    if isinstance(node, Task):
        inner = _render(node.inner, _PREC_OR)
        return f"<{inner}, {node.capability}, {node.count}>"
    if isinstance(node, Not):
        return f"!{_render(node.child, _PREC_UNARY)}"
    if isinstance(node, Eventually):
        body = f"F{node.interval} {_render(node.child, _PREC_UNARY)}"
        return body if _PREC_UNARY >= min_prec else f"({body})"
    if isinstance(node, Always):
        body = f"G{node.interval} {_render(node.child, _PREC_UNARY)}"
        return body if _PREC_UNARY >= min_prec else f"({body})"
    if isinstance(node, Until):
        body = (
            f"{_render(node.left, _PREC_UNARY)} U{node.interval} "
            f"{_render(node.right, _PREC_UNARY)}"
        )
        return body if _PREC_UNTIL >= min_prec else f"({body})"
    if isinstance(node, And):
        body = " && ".join(_render(c, _PREC_AND + 1) for c in node.children)
        return body if _PREC_AND >= min_prec else f"({body})"
    if isinstance(node, Or):
        body = " || ".join(_render(c, _PREC_OR + 1) for c in node.children)
        return body if _PREC_OR >= min_prec else f"({body})"
    raise PrintError(f"not a formula node: {node!r}")


def print_formula(formula: Formula) -> str:
    """Render a formula so that parse_formula(print_formula(f)) == f.

    Labeled predicates print as `in(LABEL)` and reparse through the same
    region map; unlabeled circle predicates are not printable.
    """
    return _render(formula, _PREC_OR)
