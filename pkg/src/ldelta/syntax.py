"""Abstract syntax: types, terms, boxes and source spans."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0)


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class Ty:
    pass


@dataclass(frozen=True)
class TReal(Ty):
    def __str__(self) -> str:
        return "R"


@dataclass(frozen=True)
class TPosReal(Ty):
    def __str__(self) -> str:
        return "R+"


@dataclass(frozen=True)
class TNat(Ty):
    def __str__(self) -> str:
        return "N"


@dataclass(frozen=True)
class TPred(Ty):
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("Pred dimension must be >= 1")

    def __str__(self) -> str:
        return f"Pred(R^{self.dim})"


@dataclass(frozen=True)
class TTest(Ty):
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("Test dimension must be >= 1")

    def __str__(self) -> str:
        return f"Test(R^{self.dim})"


@dataclass(frozen=True)
class TDist(Ty):
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("Dist dimension must be >= 1")

    def __str__(self) -> str:
        return f"Dist(R^{self.dim})"


@dataclass(frozen=True)
class TProd(Ty):
    left: Ty
    right: Ty

    def __str__(self) -> str:
        l = f"({self.left})" if isinstance(self.left, (TProd, TArrow)) else str(self.left)
        r = f"({self.right})" if isinstance(self.right, TArrow) else str(self.right)
        return f"{l} * {r}"


@dataclass(frozen=True)
class TArrow(Ty):
    domain: Ty
    codomain: Ty

    def __str__(self) -> str:
        d = f"({self.domain})" if isinstance(self.domain, TArrow) else str(self.domain)
        return f"{d} -> {self.codomain}"


def vec_type(n: int) -> Ty:
    """R^n as the right-nested product R * (R * ...); R^1 is R."""
    if n < 1:
        raise ValueError("vector dimension must be >= 1")
    ty: Ty = TReal()
    for _ in range(n - 1):
        ty = TProd(TReal(), ty)
    return ty


def vec_dim(ty: Ty) -> Optional[int]:
    """Dimension n if ty is structurally R^n, else None."""
    n = 0
    while isinstance(ty, TProd):
        if not isinstance(ty.left, TReal):
            return None
        n += 1
        ty = ty.right
    if isinstance(ty, TReal):
        return n + 1
    return None


# ---------------------------------------------------------------------------
# Boxes

@dataclass(frozen=True)
class BoxLit:
    """Axis-aligned box; lower[i] < upper[i] per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("box bounds must be nonempty and of equal length")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"box requires lower < upper per axis, got [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x: tuple[float, ...]) -> bool:
        return all(lo <= v <= hi for lo, v, hi in zip(self.lower, x, self.upper))

    def strictly_inside(self, other: "BoxLit") -> bool:
        return all(
            olo < lo and hi < ohi
            for lo, hi, olo, ohi in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def union(self, other: "BoxLit") -> "BoxLit":
        return BoxLit(
            tuple(min(a, b) for a, b in zip(self.lower, other.lower)),
            tuple(max(a, b) for a, b in zip(self.upper, other.upper)),
        )

    def intersect(self, other: "BoxLit") -> Optional["BoxLit"]:
        lo = tuple(max(a, b) for a, b in zip(self.lower, other.lower))
        hi = tuple(min(a, b) for a, b in zip(self.upper, other.upper))
        if any(l >= h for l, h in zip(lo, hi)):
            return None
        return BoxLit(lo, hi)

    def __str__(self) -> str:
        return "*".join(f"[{lo:g},{hi:g}]" for lo, hi in zip(self.lower, self.upper))


# ---------------------------------------------------------------------------
# Terms

ARITH_OPS = {
    "+": 2, "-": 2, "*": 2, "/": 2, "neg": 1, "pow": 2,
    "exp": 1, "log": 1, "sin": 1, "cos": 1, "sqrt": 1, "min": 2, "max": 2,
}

COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")


@dataclass(frozen=True)
class Term:
    span: Span = field(default=NO_SPAN, compare=False, kw_only=True)

    def with_span(self, span: Span) -> "Term":
        return replace(self, span=span)


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class RealLit(Term):
    value: float


@dataclass(frozen=True)
class NatLit(Term):
    value: int


@dataclass(frozen=True)
class Pair(Term):
    fst: Term
    snd: Term


@dataclass(frozen=True)
class LetPair(Term):
    x: str
    y: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class Let(Term):
    x: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class Lam(Term):
    x: str
    annot: Ty
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Lift(Term):
    fn: Term


@dataclass(frozen=True)
class Indicator(Term):
    pred: Term
    fn: Term


@dataclass(frozen=True)
class PartialDeriv(Term):
    index: int
    arg: Term


@dataclass(frozen=True)
class DistAdd(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class ScalarMul(Term):
    scalar: Term
    dist: Term


@dataclass(frozen=True)
class DistApply(Term):
    dist: Term
    test: Term


@dataclass(frozen=True)
class Bump(Term):
    dim: int
    center: Term
    radius: Term


@dataclass(frozen=True)
class Plateau(Term):
    dim: int
    inner: BoxLit
    outer: BoxLit


@dataclass(frozen=True)
class Dirac(Term):
    point: Term


@dataclass(frozen=True)
class Iter(Term):
    seed: Term
    step: Term


@dataclass(frozen=True)
class Arith(Term):
    op: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Compare(Term):
    op: str
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class BoolAnd(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class BoolOr(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class BoolNot(Term):
    arg: Term


@dataclass(frozen=True)
class PredLit(Term):
    """Predicate literal binding one scalar name per vector component."""

    vars: tuple[str, ...]
    dim: int
    body: Term


# ---------------------------------------------------------------------------
# Free variables and substitution

def free_vars(t: Term) -> set[str]:
    match t:
        case Var(name):
            return {name}
        case RealLit() | NatLit() | Plateau():
            return set()
        case Pair(a, b) | DistAdd(a, b) | DistApply(a, b) | Indicator(a, b) | \
                ScalarMul(a, b) | Iter(a, b) | BoolAnd(a, b) | BoolOr(a, b) | App(a, b):
            return free_vars(a) | free_vars(b)
        case Compare(_, a, b):
            return free_vars(a) | free_vars(b)
        case Lift(a) | PartialDeriv(_, a) | Dirac(a) | BoolNot(a):
            return free_vars(a)
        case Bump(_, c, r):
            return free_vars(c) | free_vars(r)
        case Lam(x, _, body):
            return free_vars(body) - {x}
        case Let(x, bound, body):
            return free_vars(bound) | (free_vars(body) - {x})
        case LetPair(x, y, bound, body):
            return free_vars(bound) | (free_vars(body) - {x, y})
        case PredLit(vs, _, body):
            return free_vars(body) - set(vs)
        case Arith(_, args):
            out: set[str] = set()
            for a in args:
                out |= free_vars(a)
            return out
    raise AssertionError(f"unhandled term {t!r}")


_fresh_counter = 0


def fresh_name(base: str, avoid: set[str]) -> str:
    global _fresh_counter
    if base not in avoid:
        return base
    stem = base.rstrip("0123456789'") or "x"
    while True:
        _fresh_counter += 1
        cand = f"{stem}'{_fresh_counter}"
        if cand not in avoid:
            return cand


def subst(t: Term, x: str, s: Term) -> Term:
    """Capture-avoiding substitution t[x := s]."""
    fv_s = free_vars(s)

    def go(t: Term) -> Term:
        match t:
            case Var(name):
                return s if name == x else t
            case RealLit() | NatLit() | Plateau():
                return t
            case Pair(a, b):
                return replace(t, fst=go(a), snd=go(b))
            case App(a, b):
                return replace(t, fn=go(a), arg=go(b))
            case DistAdd(a, b):
                return replace(t, left=go(a), right=go(b))
            case DistApply(a, b):
                return replace(t, dist=go(a), test=go(b))
            case Indicator(a, b):
                return replace(t, pred=go(a), fn=go(b))
            case ScalarMul(a, b):
                return replace(t, scalar=go(a), dist=go(b))
            case Iter(a, b):
                return replace(t, seed=go(a), step=go(b))
            case BoolAnd(a, b):
                return replace(t, left=go(a), right=go(b))
            case BoolOr(a, b):
                return replace(t, left=go(a), right=go(b))
            case Compare(_, a, b):
                return replace(t, lhs=go(a), rhs=go(b))
            case Lift(a):
                return replace(t, fn=go(a))
            case PartialDeriv(_, a):
                return replace(t, arg=go(a))
            case Dirac(a):
                return replace(t, point=go(a))
            case BoolNot(a):
                return replace(t, arg=go(a))
            case Bump(_, c, r):
                return replace(t, center=go(c), radius=go(r))
            case Arith(_, args):
                return replace(t, args=tuple(go(a) for a in args))
            case Lam(y, annot, body):
                if y == x:
                    return t
                if y in fv_s and x in free_vars(body):
                    y2 = fresh_name(y, fv_s | free_vars(body))
                    body = subst(body, y, Var(y2))
                    return replace(t, x=y2, body=go(body))
                return replace(t, body=go(body))
            case Let(y, bound, body):
                bound = go(bound)
                if y == x:
                    return replace(t, bound=bound)
                if y in fv_s and x in free_vars(body):
                    y2 = fresh_name(y, fv_s | free_vars(body))
                    body = subst(body, y, Var(y2))
                    return replace(t, x=y2, bound=bound, body=go(body))
                return replace(t, bound=bound, body=go(body))
            case LetPair(y, z, bound, body):
                bound = go(bound)
                if x in (y, z):
                    return replace(t, bound=bound)
                fv_body = free_vars(body)
                y2, z2 = y, z
                if y in fv_s and x in fv_body:
                    y2 = fresh_name(y, fv_s | fv_body | {z})
                    body = subst(body, y, Var(y2))
                if z in fv_s and x in free_vars(body):
                    z2 = fresh_name(z, fv_s | free_vars(body) | {y2})
                    body = subst(body, z, Var(z2))
                return replace(t, x=y2, y=z2, bound=bound, body=go(body))
            case PredLit(vs, _, body):
                if x in vs:
                    return t
                clash = [v for v in vs if v in fv_s]
                if clash and x in free_vars(body):
                    avoid = fv_s | free_vars(body) | set(vs)
                    renamed = list(vs)
                    for v in clash:
                        v2 = fresh_name(v, avoid)
                        avoid.add(v2)
                        body = subst(body, v, Var(v2))
                        renamed[renamed.index(v)] = v2
                    return replace(t, vars=tuple(renamed), body=go(body))
                return replace(t, body=go(body))
        raise AssertionError(f"unhandled term {t!r}")

    return go(t)


# ---------------------------------------------------------------------------
# Alpha equivalence (spans ignored; dataclass eq already ignores spans)

def alpha_eq(a: Term, b: Term) -> bool:
    return _alpha(a, b, {}, {})


def _alpha(a: Term, b: Term, ra: dict[str, int], rb: dict[str, int]) -> bool:
    if type(a) is not type(b):
        return False
    match a, b:
        case Var(n1), Var(n2):
            k1, k2 = ra.get(n1, n1), rb.get(n2, n2)
            return k1 == k2
        case RealLit(v1), RealLit(v2):
            return v1 == v2
        case NatLit(v1), NatLit(v2):
            return v1 == v2
        case Plateau(d1, i1, o1), Plateau(d2, i2, o2):
            return d1 == d2 and i1 == i2 and o1 == o2
        case Lam(x1, t1, b1), Lam(x2, t2, b2):
            if t1 != t2:
                return False
            lvl = len(ra)
            return _alpha(b1, b2, {**ra, x1: lvl}, {**rb, x2: lvl})
        case Let(x1, s1, b1), Let(x2, s2, b2):
            if not _alpha(s1, s2, ra, rb):
                return False
            lvl = len(ra)
            return _alpha(b1, b2, {**ra, x1: lvl}, {**rb, x2: lvl})
        case LetPair(x1, y1, s1, b1), LetPair(x2, y2, s2, b2):
            if not _alpha(s1, s2, ra, rb):
                return False
            lvl = len(ra)
            return _alpha(
                b1, b2,
                {**ra, x1: lvl, y1: lvl + 1},
                {**rb, x2: lvl, y2: lvl + 1},
            )
        case PredLit(v1, d1, b1), PredLit(v2, d2, b2):
            if d1 != d2 or len(v1) != len(v2):
                return False
            lvl = len(ra)
            ra2 = {**ra, **{v: lvl + i for i, v in enumerate(v1)}}
            rb2 = {**rb, **{v: lvl + i for i, v in enumerate(v2)}}
            return _alpha(b1, b2, ra2, rb2)
        case Arith(op1, args1), Arith(op2, args2):
            return op1 == op2 and len(args1) == len(args2) and all(
                _alpha(p, q, ra, rb) for p, q in zip(args1, args2)
            )
        case Compare(op1, l1, r1), Compare(op2, l2, r2):
            return op1 == op2 and _alpha(l1, l2, ra, rb) and _alpha(r1, r2, ra, rb)
        case PartialDeriv(i1, t1), PartialDeriv(i2, t2):
            return i1 == i2 and _alpha(t1, t2, ra, rb)
        case Bump(d1, c1, r1), Bump(d2, c2, r2):
            return d1 == d2 and _alpha(c1, c2, ra, rb) and _alpha(r1, r2, ra, rb)
        case _:
            pass
    subs_a = _subterms(a)
    subs_b = _subterms(b)
    if len(subs_a) != len(subs_b):
        return False
    return all(_alpha(p, q, ra, rb) for p, q in zip(subs_a, subs_b))


def _subterms(t: Term) -> list[Term]:
    match t:
        case Pair(a, b) | App(a, b) | DistAdd(a, b) | DistApply(a, b) | \
                Indicator(a, b) | ScalarMul(a, b) | Iter(a, b) | \
                BoolAnd(a, b) | BoolOr(a, b):
            return [a, b]
        case Lift(a) | Dirac(a) | BoolNot(a):
            return [a]
        case _:
            return []
