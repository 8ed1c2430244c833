"""Bidirectional-free syntax-directed typing of terms and programs.

Positive real literals inhabit both R and R+ (literal typing only; variables
never coerce).  Comparisons and boolean connectives type only inside
predicate literal bodies, which are restricted to arithmetic over reals.
"""

from __future__ import annotations

from typing import Optional

from .parser import SourceFile
from .syntax import (
    App, Arith, BoolAnd, BoolNot, BoolOr, Bump, Compare, Dirac, DistAdd,
    DistApply, Indicator, Iter, Lam, Let, LetPair, Lift, NatLit, NO_SPAN,
    Pair, PartialDeriv, Plateau, PredLit, RealLit, ScalarMul, Span, Term,
    TArrow, TDist, TNat, TPosReal, TPred, TProd, TReal, TTest, Ty, Var,
    vec_dim, vec_type,
)


class TypeCheckError(Exception):
    def __init__(self, span: Span, rule: str, message: str):
        self.span = span
        self.rule = rule
        self.message = message
        super().__init__(f"{span}: [{rule}] {message}")

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.span}: [{self.rule}] {self.message}"


class UnboundVariable(TypeCheckError):
    def __init__(self, span: Span, name: str):
        super().__init__(span, "Variable", f"unbound variable '{name}'")


class IndexOutOfRange(TypeCheckError):
    def __init__(self, span: Span, rule: str, index: int, dim: int):
        super().__init__(
            span, rule,
            f"axis index {index} out of range for dimension {dim}",
        )


class Ctx:
    """Ordered typing context; lookup returns the rightmost binding."""

    __slots__ = ("bindings",)

    def __init__(self, bindings: tuple[tuple[str, Ty], ...] = ()):
        self.bindings = bindings

    def extend(self, name: str, ty: Ty) -> "Ctx":
        return Ctx(self.bindings + ((name, ty),))

    def lookup(self, name: str) -> Optional[Ty]:
        for n, ty in reversed(self.bindings):
            if n == name:
                return ty
        return None


def _conforms(term: Term, actual: Ty, expected: Ty) -> bool:
    if actual == expected:
        return True
    if expected == TPosReal() and isinstance(term, RealLit) and term.value > 0:
        return True
    return False


def check(ctx: Ctx, t: Term) -> Ty:
    """Synthesize the unique type of t under ctx, or fail."""
    match t:
        case Var(name):
            ty = ctx.lookup(name)
            if ty is None:
                raise UnboundVariable(t.span, name)
            return ty
        case RealLit():
            return TReal()
        case NatLit():
            return TNat()
        case Pair(a, b):
            return TProd(check(ctx, a), check(ctx, b))
        case LetPair(x, y, bound, body):
            bound_ty = check(ctx, bound)
            if not isinstance(bound_ty, TProd):
                raise TypeCheckError(
                    t.span, "Unpair", f"expected a product type, found {bound_ty}"
                )
            return check(ctx.extend(x, bound_ty.left).extend(y, bound_ty.right), body)
        case Let(x, bound, body):
            return check(ctx.extend(x, check(ctx, bound)), body)
        case Lam(x, annot, body):
            return TArrow(annot, check(ctx.extend(x, annot), body))
        case App(fn, arg):
            fn_ty = check(ctx, fn)
            if not isinstance(fn_ty, TArrow):
                raise TypeCheckError(
                    t.span, "Application", f"expected a function type, found {fn_ty}"
                )
            arg_ty = check(ctx, arg)
            if not _conforms(arg, arg_ty, fn_ty.domain):
                raise TypeCheckError(
                    arg.span, "Application",
                    f"expected argument of type {fn_ty.domain}, found {arg_ty}",
                )
            return fn_ty.codomain
        case Lift(fn):
            fn_ty = check(ctx, fn)
            dim = vec_dim(fn_ty.domain) if isinstance(fn_ty, TArrow) else None
            if dim is None or not isinstance(fn_ty, TArrow) or fn_ty.codomain != TReal():
                raise TypeCheckError(
                    t.span, "Lift",
                    f"expected a function of type R^n -> R, found {fn_ty}",
                )
            return TDist(dim)
        case Indicator(pred, fn):
            pred_ty = check(ctx, pred)
            if not isinstance(pred_ty, TPred):
                raise TypeCheckError(
                    t.span, "Indicator Function",
                    f"expected a predicate, found {pred_ty}",
                )
            fn_ty = check(ctx, fn)
            want = TArrow(vec_type(pred_ty.dim), TReal())
            if fn_ty != want:
                raise TypeCheckError(
                    fn.span, "Indicator Function",
                    f"expected a function of type {want}, found {fn_ty}",
                )
            return TDist(pred_ty.dim)
        case PartialDeriv(index, arg):
            arg_ty = check(ctx, arg)
            if not isinstance(arg_ty, TDist):
                raise TypeCheckError(
                    t.span, "Differentiation",
                    f"expected a distribution, found {arg_ty}",
                )
            if not 1 <= index <= arg_ty.dim:
                raise IndexOutOfRange(t.span, "Differentiation", index, arg_ty.dim)
            return arg_ty
        case DistAdd(left, right):
            lt = check(ctx, left)
            rt = check(ctx, right)
            if not isinstance(lt, TDist) or lt != rt:
                raise TypeCheckError(
                    t.span, "Distribution Addition",
                    f"expected two distributions of one dimension, found {lt} and {rt}",
                )
            return lt
        case ScalarMul(scalar, dist):
            s_ty = check(ctx, scalar)
            if not _conforms(scalar, s_ty, TReal()):
                raise TypeCheckError(
                    scalar.span, "Scalar Multiplication",
                    f"expected a real scalar, found {s_ty}",
                )
            d_ty = check(ctx, dist)
            if not isinstance(d_ty, TDist):
                raise TypeCheckError(
                    dist.span, "Scalar Multiplication",
                    f"expected a distribution, found {d_ty}",
                )
            return d_ty
        case DistApply(dist, test):
            d_ty = check(ctx, dist)
            if not isinstance(d_ty, TDist):
                raise TypeCheckError(
                    dist.span, "Distribution Application",
                    f"expected a distribution, found {d_ty}",
                )
            t_ty = check(ctx, test)
            if not isinstance(t_ty, TTest) or t_ty.dim != d_ty.dim:
                raise TypeCheckError(
                    test.span, "Distribution Application",
                    f"expected a test function over R^{d_ty.dim}, found {t_ty}",
                )
            return TReal()
        case Bump(dim, center, radius):
            c_ty = check(ctx, center)
            if c_ty != vec_type(dim):
                raise TypeCheckError(
                    center.span, "Bump Function",
                    f"expected a center of type R^{dim}, found {c_ty}",
                )
            r_ty = check(ctx, radius)
            if not _conforms(radius, r_ty, TPosReal()):
                raise TypeCheckError(
                    radius.span, "Bump Function",
                    f"expected a radius of type R+, found {r_ty}",
                )
            return TTest(dim)
        case Plateau(dim, inner, outer):
            if inner.dim != dim or outer.dim != dim:
                raise TypeCheckError(
                    t.span, "Plateau Function",
                    f"box dimension does not match the declared dimension {dim}",
                )
            if not inner.strictly_inside(outer):
                raise TypeCheckError(
                    t.span, "Plateau Function",
                    "inner box must lie strictly inside the outer box",
                )
            return TTest(dim)
        case Dirac(point):
            p_ty = check(ctx, point)
            dim = vec_dim(p_ty)
            if dim is None:
                raise TypeCheckError(
                    t.span, "Dirac delta", f"expected a point of type R^n, found {p_ty}"
                )
            return TDist(dim)
        case Iter(seed, step):
            seed_ty = check(ctx, seed)
            step_ty = check(ctx, step)
            if step_ty != TArrow(seed_ty, seed_ty):
                raise TypeCheckError(
                    t.span, "Iteration",
                    f"expected a step of type {seed_ty} -> {seed_ty}, found {step_ty}",
                )
            return TArrow(TNat(), seed_ty)
        case Arith(op, args):
            return _check_arith(ctx, t, op, args)
        case Compare() | BoolAnd() | BoolOr() | BoolNot():
            raise TypeCheckError(
                t.span, "Comparison",
                "comparisons and boolean connectives are only legal inside "
                "predicate literals",
            )
        case PredLit(names, dim, body):
            inner = ctx
            for name in names:
                inner = inner.extend(name, TReal())
            _check_pred_body(inner, body)
            return TPred(dim)
    raise AssertionError(f"unhandled term {t!r}")


def _check_arith(ctx: Ctx, t: Term, op: str, args: tuple[Term, ...]) -> Ty:
    if op == "pow":
        base_ty = check(ctx, args[0])
        if base_ty != TReal():
            raise TypeCheckError(
                args[0].span, "Arithmetic", f"expected a real base, found {base_ty}"
            )
        expo_ty = check(ctx, args[1])
        if expo_ty != TNat():
            raise TypeCheckError(
                args[1].span, "Arithmetic",
                f"expected a natural exponent, found {expo_ty}",
            )
        return TReal()
    if op in ("exp", "log", "sin", "cos", "sqrt", "neg", "/"):
        for a in args:
            ty = check(ctx, a)
            if ty != TReal():
                raise TypeCheckError(
                    a.span, "Arithmetic", f"'{op}' expects reals, found {ty}"
                )
        return TReal()
    if op in ("min", "max"):
        for a in args:
            ty = check(ctx, a)
            if ty != TNat():
                raise TypeCheckError(
                    a.span, "Arithmetic", f"'{op}' is defined on naturals, found {ty}"
                )
        return TNat()
    if op in ("+", "-", "*"):
        lt = check(ctx, args[0])
        rt = check(ctx, args[1])
        if lt == rt and lt in (TReal(), TNat()):
            return lt
        raise TypeCheckError(
            t.span, "Arithmetic",
            f"'{op}' expects two reals or two naturals, found {lt} and {rt}",
        )
    raise AssertionError(f"unknown arithmetic op {op}")


def _check_pred_body(ctx: Ctx, t: Term) -> None:
    match t:
        case BoolAnd(a, b) | BoolOr(a, b):
            _check_pred_body(ctx, a)
            _check_pred_body(ctx, b)
        case BoolNot(a):
            _check_pred_body(ctx, a)
        case Compare(_, lhs, rhs):
            _check_pred_arith(ctx, lhs)
            _check_pred_arith(ctx, rhs)
        case _:
            raise TypeCheckError(
                t.span, "Predicate",
                "predicate bodies are boolean combinations of comparisons",
            )


def _check_pred_arith(ctx: Ctx, t: Term) -> None:
    match t:
        case Var(name):
            ty = ctx.lookup(name)
            if ty is None:
                raise UnboundVariable(t.span, name)
            if ty != TReal():
                raise TypeCheckError(
                    t.span, "Predicate",
                    f"predicate comparisons range over reals, found {ty}",
                )
        case RealLit():
            pass
        case Arith("pow", (base, expo)):
            _check_pred_arith(ctx, base)
            if not isinstance(expo, NatLit):
                raise TypeCheckError(
                    expo.span, "Predicate", "exponents in predicates must be literals"
                )
        case Arith(op, args) if op != "pow":
            if op in ("min", "max"):
                raise TypeCheckError(
                    t.span, "Predicate", f"'{op}' is not available inside predicates"
                )
            for a in args:
                _check_pred_arith(ctx, a)
        case _:
            raise TypeCheckError(
                t.span, "Predicate",
                "predicate comparisons are arithmetic over the bound variables "
                "and real context variables",
            )


def check_program(src: SourceFile, ctx: Optional[Ctx] = None) -> list[tuple[str, Ty]]:
    """Check definitions in order, each extending the context."""
    ctx = ctx or Ctx()
    out: list[tuple[str, Ty]] = []
    for name, sig, term in src.definitions:
        ty = check(ctx, term)
        if sig is not None and not _conforms(term, ty, sig):
            raise TypeCheckError(
                term.span, "Signature",
                f"definition '{name}' has type {ty}, signature says {sig}",
            )
        declared = sig if sig is not None else ty
        out.append((name, declared))
        ctx = ctx.extend(name, declared)
    return out
