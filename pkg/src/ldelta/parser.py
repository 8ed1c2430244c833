"""Concrete surface syntax: lexer, recursive-descent parser, pretty-printer.

Programs are files of semicolon-terminated items: an optional signature
`name : type;` followed by `name = term;`.  Comparisons and boolean
connectives are only accepted inside `pred(...){ ... }` bodies; natural
literals there coerce to reals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    App, Arith, BoolAnd, BoolNot, BoolOr, BoxLit, Bump, Compare, Dirac,
    DistAdd, DistApply, Indicator, Iter, Lam, Let, LetPair, Lift, NatLit,
    Pair, PartialDeriv, Plateau, PredLit, RealLit, ScalarMul, Span, Term,
    TArrow, TDist, TNat, TPosReal, TPred, TProd, TReal, TTest, Ty, Var,
    vec_type,
)

KEYWORDS = {
    "fun", "let", "in", "lift", "ind", "pred", "dirac", "iter",
    "exp", "log", "sin", "cos", "sqrt", "min", "max",
    "R", "N", "Pred", "Test", "Dist",
}

_UNARY_FNS = ("exp", "log", "sin", "cos", "sqrt")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<dderiv>d/d[0-9]+)
  | (?P<real>[0-9]+\.[0-9]*(?:[eE][+-]?[0-9]+)?|[0-9]+[eE][+-]?[0-9]+)
  | (?P<nat>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\+\.|\*\.|->|<=|>=|==|!=|&&|\|\||[()\[\]{}<>,;:+\-*/^=!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'real' | 'nat' | 'ident' | 'kw' | 'op' | 'dderiv' | 'eof'
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + max(len(self.text), 1))


class ParseError(Exception):
    def __init__(self, span: Span, expected: str, found: str):
        self.span = span
        self.expected = expected
        self.found = found
        super().__init__(f"{span}: expected {expected}, found {found}")

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.span}: expected {self.expected}, found {self.found}"


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(Span(line, col, line, col + 1), "a token", repr(text[pos]))
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tok_kind = kind
            if kind == "ident" and value in KEYWORDS:
                tok_kind = "kw"
            tokens.append(Token(tok_kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, col))
    return tokens


@dataclass
class SourceFile:
    definitions: list[tuple[str, Optional[Ty], Term]]
    main: Optional[Term]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at_op(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == text

    def at_kw(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "kw" and tok.text == text

    def expect_op(self, text: str) -> Token:
        if not self.at_op(text):
            raise self.error(f"'{text}'")
        return self.next()

    def expect_kw(self, text: str) -> Token:
        if not self.at_kw(text):
            raise self.error(f"'{text}'")
        return self.next()

    def expect_ident(self, what: str = "an identifier") -> Token:
        tok = self.peek()
        if tok.kind == "kw":
            raise ParseError(tok.span, what, f"reserved word '{tok.text}'")
        if tok.kind != "ident":
            raise self.error(what)
        return self.next()

    def error(self, expected: str) -> ParseError:
        tok = self.peek()
        return ParseError(tok.span, expected, f"'{tok.text}'")

    # -- program ------------------------------------------------------------

    def parse_program(self) -> SourceFile:
        defs: list[tuple[str, Optional[Ty], Term]] = []
        pending_sig: Optional[tuple[str, Ty]] = None
        seen: set[str] = set()
        while self.peek().kind != "eof":
            name_tok = self.expect_ident("a definition name")
            if self.at_op(":"):
                self.next()
                ty = self.parse_type()
                self.expect_op(";")
                if pending_sig is not None:
                    raise ParseError(
                        name_tok.span, f"a definition for '{pending_sig[0]}'",
                        f"signature '{name_tok.text}'",
                    )
                pending_sig = (name_tok.text, ty)
                continue
            self.expect_op("=")
            body = self.parse_term()
            self.expect_op(";")
            sig: Optional[Ty] = None
            if pending_sig is not None:
                if pending_sig[0] != name_tok.text:
                    raise ParseError(
                        name_tok.span, f"a definition for '{pending_sig[0]}'",
                        f"'{name_tok.text}'",
                    )
                sig = pending_sig[1]
                pending_sig = None
            if name_tok.text in seen:
                raise ParseError(name_tok.span, "a fresh definition name",
                                 f"duplicate '{name_tok.text}'")
            seen.add(name_tok.text)
            defs.append((name_tok.text, sig, body))
        if pending_sig is not None:
            raise self.error(f"a definition for '{pending_sig[0]}'")
        main = next((t for n, _, t in defs if n == "main"), None)
        return SourceFile(defs, main)

    # -- types --------------------------------------------------------------

    def parse_type(self) -> Ty:
        left = self.parse_type_prod()
        if self.at_op("->"):
            self.next()
            return TArrow(left, self.parse_type())
        return left

    def parse_type_prod(self) -> Ty:
        left = self.parse_type_atom()
        if self.at_op("*"):
            self.next()
            return TProd(left, self.parse_type_prod())
        return left

    def parse_type_atom(self) -> Ty:
        tok = self.peek()
        if self.at_op("("):
            self.next()
            ty = self.parse_type()
            self.expect_op(")")
            return ty
        if tok.kind == "kw" and tok.text == "R":
            self.next()
            if self.at_op("+"):
                self.next()
                return TPosReal()
            if self.at_op("^"):
                self.next()
                return vec_type(self._nat_lit("a dimension"))
            return TReal()
        if tok.kind == "kw" and tok.text == "N":
            self.next()
            return TNat()
        if tok.kind == "kw" and tok.text in ("Pred", "Test", "Dist"):
            self.next()
            self.expect_op("(")
            dim = self._vec_dim_syntax()
            self.expect_op(")")
            return {"Pred": TPred, "Test": TTest, "Dist": TDist}[tok.text](dim)
        raise self.error("a type")

    def _vec_dim_syntax(self) -> int:
        self.expect_kw("R")
        if self.at_op("^"):
            self.next()
            return self._nat_lit("a dimension")
        return 1

    def _nat_lit(self, what: str) -> int:
        tok = self.peek()
        if tok.kind != "nat":
            raise self.error(what)
        self.next()
        n = int(tok.text)
        if n < 1:
            raise ParseError(tok.span, f"{what} >= 1", tok.text)
        return n

    # -- terms ---------------------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.peek()
        if self.at_kw("fun"):
            self.next()
            name = self.expect_ident("a binder")
            self.expect_op(":")
            annot = self.parse_type_prod()  # arrow binder types need parens
            self.expect_op("->")
            body = self.parse_term()
            return Lam(name.text, annot, body, span=tok.span)
        if self.at_kw("let"):
            self.next()
            if self.at_op("("):
                self.next()
                x = self.expect_ident("a binder")
                self.expect_op(",")
                y = self.expect_ident("a binder")
                self.expect_op(")")
                self.expect_op("=")
                bound = self.parse_term()
                self.expect_kw("in")
                body = self.parse_term()
                return LetPair(x.text, y.text, bound, body, span=tok.span)
            x = self.expect_ident("a binder")
            self.expect_op("=")
            bound = self.parse_term()
            self.expect_kw("in")
            body = self.parse_term()
            return Let(x.text, bound, body, span=tok.span)
        return self.parse_dist_sum()

    def parse_dist_sum(self) -> Term:
        left = self.parse_scalar_mul()
        while self.at_op("+."):
            self.next()
            right = self.parse_scalar_mul()
            left = DistAdd(left, right, span=left.span)
        return left

    def parse_scalar_mul(self) -> Term:
        left = self.parse_additive()
        if self.at_op("*."):
            self.next()
            right = self.parse_scalar_mul()
            return ScalarMul(left, right, span=left.span)
        return left

    def parse_additive(self, in_pred: bool = False) -> Term:
        left = self.parse_multiplicative(in_pred)
        while self.at_op("+") or self.at_op("-"):
            op = self.next().text
            right = self.parse_multiplicative(in_pred)
            left = Arith(op, (left, right), span=left.span)
        return left

    def parse_multiplicative(self, in_pred: bool) -> Term:
        left = self.parse_unary(in_pred)
        while self.at_op("*") or self.at_op("/"):
            op = self.next().text
            right = self.parse_unary(in_pred)
            left = Arith(op, (left, right), span=left.span)
        return left

    def parse_unary(self, in_pred: bool) -> Term:
        if self.at_op("-"):
            tok = self.next()
            return Arith("neg", (self.parse_unary(in_pred),), span=tok.span)
        return self.parse_power(in_pred)

    def parse_power(self, in_pred: bool) -> Term:
        base = self.parse_app(in_pred)
        if self.at_op("^"):
            self.next()
            tok = self.peek()
            exponent = self._nat_lit("a natural exponent")
            return Arith("pow", (base, NatLit(exponent, span=tok.span)), span=base.span)
        return base

    def parse_app(self, in_pred: bool) -> Term:
        head = self.parse_applicand(in_pred)
        while self._at_atom_start(in_pred):
            arg = self.parse_atom(in_pred)
            head = App(head, arg, span=head.span)
        return head

    def _at_atom_start(self, in_pred: bool) -> bool:
        tok = self.peek()
        if tok.kind in ("real", "nat"):
            return True
        if tok.kind == "ident":
            return True
        if tok.kind == "op" and tok.text == "(":
            return True
        if not in_pred and tok.kind == "op" and tok.text == "<":
            return True
        if not in_pred and tok.kind == "kw" and tok.text == "pred":
            return True
        return False

    def parse_applicand(self, in_pred: bool) -> Term:
        tok = self.peek()
        if not in_pred:
            if tok.kind == "dderiv":
                self.next()
                index = int(tok.text[3:])
                return PartialDeriv(index, self.parse_atom(in_pred), span=tok.span)
            if self.at_kw("lift"):
                self.next()
                return Lift(self.parse_atom(in_pred), span=tok.span)
            if self.at_kw("dirac"):
                self.next()
                return Dirac(self.parse_atom(in_pred), span=tok.span)
            if self.at_kw("ind"):
                self.next()
                pred = self.parse_atom(in_pred)
                fn = self.parse_atom(in_pred)
                return Indicator(pred, fn, span=tok.span)
            if self.at_kw("iter"):
                self.next()
                seed = self.parse_atom(in_pred)
                step = self.parse_atom(in_pred)
                return Iter(seed, step, span=tok.span)
        if tok.kind == "kw" and tok.text in _UNARY_FNS:
            self.next()
            return Arith(tok.text, (self.parse_atom(in_pred),), span=tok.span)
        if tok.kind == "kw" and tok.text in ("min", "max"):
            self.next()
            a = self.parse_atom(in_pred)
            b = self.parse_atom(in_pred)
            return Arith(tok.text, (a, b), span=tok.span)
        return self.parse_atom(in_pred)

    def parse_atom(self, in_pred: bool = False) -> Term:
        tok = self.peek()
        if tok.kind == "real":
            self.next()
            return RealLit(float(tok.text), span=tok.span)
        if tok.kind == "nat":
            self.next()
            if in_pred:
                return RealLit(float(tok.text), span=tok.span)
            return NatLit(int(tok.text), span=tok.span)
        if tok.kind == "ident":
            m = re.fullmatch(r"(bump|plateau)([0-9]+)", tok.text)
            if m and not in_pred:
                return self._parse_test_constructor(m.group(1), int(m.group(2)))
            self.next()
            return Var(tok.text, span=tok.span)
        if self.at_op("("):
            self.next()
            first = self.parse_term() if not in_pred else self.parse_additive(True)
            if self.at_op(",") and not in_pred:
                self.next()
                second = self.parse_term()
                self.expect_op(")")
                return Pair(first, second, span=tok.span)
            self.expect_op(")")
            return first
        if self.at_op("<") and not in_pred:
            self.next()
            dist = self.parse_term()
            if not self.at_op(","):
                raise ParseError(tok.span, "',' in a distribution pairing",
                                 f"'{self.peek().text}'")
            self.next()
            test = self.parse_term()
            if not self.at_op(">"):
                raise ParseError(tok.span, "'>' closing a distribution pairing",
                                 f"'{self.peek().text}'")
            self.next()
            return DistApply(dist, test, span=tok.span)
        if self.at_kw("pred") and not in_pred:
            return self._parse_pred_lit()
        if tok.kind == "kw":
            raise ParseError(tok.span, "a term", f"reserved word '{tok.text}'")
        raise self.error("a term")

    def _parse_test_constructor(self, kind: str, dim: int) -> Term:
        tok = self.next()
        if dim < 1:
            raise ParseError(tok.span, "a dimension >= 1", tok.text)
        self.expect_op("(")
        if kind == "bump":
            center = self.parse_term()
            self.expect_op(",")
            radius = self.parse_term()
            self.expect_op(")")
            return Bump(dim, center, radius, span=tok.span)
        inner = self._parse_boxes(dim)
        self.expect_op(";")
        outer = self._parse_boxes(dim)
        self.expect_op(")")
        return Plateau(dim, inner, outer, span=tok.span)

    def _parse_boxes(self, dim: int) -> BoxLit:
        lows: list[float] = []
        highs: list[float] = []
        while True:
            self.expect_op("[")
            lows.append(self._signed_number())
            self.expect_op(",")
            highs.append(self._signed_number())
            self.expect_op("]")
            if self.at_op("*"):
                self.next()
                continue
            break
        if len(lows) != dim:
            raise self.error(f"{dim} box interval(s), got {len(lows)}")
        try:
            return BoxLit(tuple(lows), tuple(highs))
        except ValueError as exc:
            raise self.error(f"a valid box ({exc})") from None

    def _signed_number(self) -> float:
        sign = 1.0
        if self.at_op("-"):
            self.next()
            sign = -1.0
        tok = self.peek()
        if tok.kind not in ("real", "nat"):
            raise self.error("a number")
        self.next()
        return sign * float(tok.text)

    def _parse_pred_lit(self) -> Term:
        tok = self.expect_kw("pred")
        self.expect_op("(")
        names = [self.expect_ident("a binder").text]
        while self.at_op(","):
            self.next()
            names.append(self.expect_ident("a binder").text)
        self.expect_op(":")
        dim = self._vec_dim_syntax()
        self.expect_op(")")
        if len(names) != dim:
            raise ParseError(
                tok.span, f"{dim} binder(s) for a {dim}-dimensional predicate",
                f"{len(names)} binder(s)",
            )
        if len(set(names)) != len(names):
            raise ParseError(tok.span, "distinct predicate binders", "a duplicate")
        self.expect_op("{")
        body = self.parse_bool_or()
        self.expect_op("}")
        return PredLit(tuple(names), dim, body, span=tok.span)

    # -- predicate bodies ----------------------------------------------------

    def parse_bool_or(self) -> Term:
        left = self.parse_bool_and()
        while self.at_op("||"):
            self.next()
            left = BoolOr(left, self.parse_bool_and(), span=left.span)
        return left

    def parse_bool_and(self) -> Term:
        left = self.parse_bool_not()
        while self.at_op("&&"):
            self.next()
            left = BoolAnd(left, self.parse_bool_not(), span=left.span)
        return left

    def parse_bool_not(self) -> Term:
        if self.at_op("!"):
            tok = self.next()
            return BoolNot(self.parse_bool_not(), span=tok.span)
        return self.parse_bool_atom()

    def parse_bool_atom(self) -> Term:
        # A leading '(' may open either an arithmetic group or a boolean group;
        # try the comparison reading first and fall back on the boolean one.
        if self.at_op("("):
            start = self.pos
            try:
                return self.parse_compare()
            except ParseError:
                self.pos = start
            self.expect_op("(")
            inner = self.parse_bool_or()
            self.expect_op(")")
            return inner
        return self.parse_compare()

    def parse_compare(self) -> Term:
        lhs = self.parse_additive(in_pred=True)
        tok = self.peek()
        ops = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "==": "==", "!=": "!=", "=": "=="}
        if tok.kind == "op" and tok.text in ops:
            self.next()
            rhs = self.parse_additive(in_pred=True)
            return Compare(ops[tok.text], lhs, rhs, span=lhs.span)
        raise self.error("a comparison operator")


def parse(text: str) -> SourceFile:
    """Parse a whole program into its definitions."""
    parser = _Parser(_lex(text))
    return parser.parse_program()


def parse_term(text: str) -> Term:
    """Parse a single term; the whole input must be consumed."""
    parser = _Parser(_lex(text))
    term = parser.parse_term()
    if parser.peek().kind != "eof":
        raise parser.error("end of input")
    return term


# ---------------------------------------------------------------------------
# Pretty-printer

_LVL_TERM = 0     # fun / let
_LVL_DSUM = 1     # +.
_LVL_SMUL = 2     # *.
_LVL_ADD = 3      # + -
_LVL_MUL = 4      # * /
_LVL_NEG = 5
_LVL_POW = 6
_LVL_APP = 7
_LVL_ATOM = 8


def _real_text(v: float) -> str:
    if v != v or v in (float("inf"), float("-inf")):
        raise ValueError(f"cannot print non-finite literal {v}")
    return repr(v)


def _fmt(t: Term, in_pred: bool = False) -> tuple[str, int]:
    match t:
        case Var(name):
            return name, _LVL_ATOM
        case RealLit(v):
            if v < 0:
                return f"-{_real_text(-v)}", _LVL_NEG
            return _real_text(v), _LVL_ATOM
        case NatLit(n):
            return str(n), _LVL_ATOM
        case Pair(a, b):
            return f"({_at(a, _LVL_TERM)}, {_at(b, _LVL_TERM)})", _LVL_ATOM
        case DistApply(d, phi):
            return f"<{_at(d, _LVL_TERM)}, {_at(phi, _LVL_TERM)}>", _LVL_ATOM
        case Lam(x, annot, body):
            ann = str(annot)
            if isinstance(annot, TArrow):
                ann = f"({ann})"
            return f"fun {x}: {ann} -> {_at(body, _LVL_TERM)}", _LVL_TERM
        case Let(x, bound, body):
            return f"let {x} = {_at(bound, _LVL_TERM)} in {_at(body, _LVL_TERM)}", _LVL_TERM
        case LetPair(x, y, bound, body):
            return (
                f"let ({x}, {y}) = {_at(bound, _LVL_TERM)} in {_at(body, _LVL_TERM)}",
                _LVL_TERM,
            )
        case App(f, a):
            return f"{_at(f, _LVL_APP, in_pred)} {_at(a, _LVL_ATOM, in_pred)}", _LVL_APP
        case Lift(f):
            return f"lift {_at(f, _LVL_ATOM)}", _LVL_APP
        case Dirac(p):
            return f"dirac {_at(p, _LVL_ATOM)}", _LVL_APP
        case PartialDeriv(i, a):
            return f"d/d{i} {_at(a, _LVL_ATOM)}", _LVL_APP
        case Indicator(p, f):
            return f"ind {_at(p, _LVL_ATOM)} {_at(f, _LVL_ATOM)}", _LVL_APP
        case Iter(seed, step):
            return f"iter {_at(seed, _LVL_ATOM)} {_at(step, _LVL_ATOM)}", _LVL_APP
        case DistAdd(a, b):
            return f"{_at(a, _LVL_DSUM)} +. {_at(b, _LVL_SMUL)}", _LVL_DSUM
        case ScalarMul(s, d):
            return f"{_at(s, _LVL_ADD)} *. {_at(d, _LVL_SMUL)}", _LVL_SMUL
        case Bump(dim, c, r):
            return f"bump{dim}({_at(c, _LVL_TERM)}, {_at(r, _LVL_TERM)})", _LVL_ATOM
        case Plateau(dim, inner, outer):
            return f"plateau{dim}({inner}; {outer})", _LVL_ATOM
        case Arith(op, args):
            return _fmt_arith(op, args, in_pred)
        case Compare(op, lhs, rhs):
            return f"{_at(lhs, _LVL_ADD, True)} {op} {_at(rhs, _LVL_ADD, True)}", _LVL_ADD
        case BoolOr(a, b):
            sa = _bool_at(a, outer_or=True)
            sb = _bool_at(b, outer_or=True, rhs=True)
            return f"{sa} || {sb}", _LVL_TERM
        case BoolAnd(a, b):
            sa = _bool_at(a, outer_or=False)
            sb = _bool_at(b, outer_or=False, rhs=True)
            return f"{sa} && {sb}", _LVL_DSUM
        case BoolNot(a):
            inner, lvl = _fmt(a, True)
            if lvl < _LVL_ADD:
                inner = f"({inner})"
            return f"!{inner}", _LVL_SMUL
        case PredLit(vars_, dim, body):
            binder = ", ".join(vars_)
            vec = "R" if dim == 1 else f"R^{dim}"
            body_s, _ = _fmt(body, True)
            return f"pred({binder}: {vec}){{ {body_s} }}", _LVL_ATOM
    raise AssertionError(f"unhandled term {t!r}")


def _fmt_arith(op: str, args: tuple[Term, ...], in_pred: bool) -> tuple[str, int]:
    if op in ("+", "-"):
        a, b = args
        return f"{_at(a, _LVL_ADD, in_pred)} {op} {_at(b, _LVL_MUL, in_pred)}", _LVL_ADD
    if op in ("*", "/"):
        a, b = args
        return f"{_at(a, _LVL_MUL, in_pred)} {op} {_at(b, _LVL_NEG, in_pred)}", _LVL_MUL
    if op == "neg":
        return f"-{_at(args[0], _LVL_NEG, in_pred)}", _LVL_NEG
    if op == "pow":
        base, expo = args
        return f"{_at(base, _LVL_APP, in_pred)} ^ {_at(expo, _LVL_ATOM, in_pred)}", _LVL_POW
    if op in _UNARY_FNS:
        return f"{op} {_at(args[0], _LVL_ATOM, in_pred)}", _LVL_APP
    if op in ("min", "max"):
        a, b = args
        return f"{op} {_at(a, _LVL_ATOM, in_pred)} {_at(b, _LVL_ATOM, in_pred)}", _LVL_APP
    raise AssertionError(f"unknown arithmetic op {op}")


def _at(t: Term, min_level: int, in_pred: bool = False) -> str:
    text, lvl = _fmt(t, in_pred)
    if lvl < min_level:
        return f"({text})"
    return text


def _bool_at(t: Term, outer_or: bool, rhs: bool = False) -> str:
    text, _ = _fmt(t, True)
    needs = isinstance(t, BoolOr) and (not outer_or or rhs)
    needs = needs or (isinstance(t, BoolAnd) and not outer_or and rhs)
    if needs:
        return f"({text})"
    return text


def print_term(t: Term) -> str:
    """Render a term; parse_term(print_term(t)) is alpha-equivalent to t."""
    return _fmt(t)[0]


def print_program(src: SourceFile) -> str:
    lines = []
    for name, sig, term in src.definitions:
        if sig is not None:
            lines.append(f"{name} : {sig};")
        lines.append(f"{name} = {print_term(term)};")
        lines.append("")
    return "\n".join(lines)
