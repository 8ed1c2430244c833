"""Big-step call-by-value evaluator from well-typed terms to values.

Lifted functions defer all integration to pairing time; distribution
applications nested inside a lifted body run at a tightened quadrature
tolerance so outer pairings are not refining against inner noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from . import dist as D
from .dist import DistExpr, PredVal
from .parser import parse, print_term
from .quad import QuadConfig
from .syntax import (
    App, Arith, BoolAnd, BoolNot, BoolOr, BoxLit, Bump, Compare, Dirac,
    DistAdd, DistApply, Indicator, Iter, Lam, Let, LetPair, Lift, NatLit,
    Pair, PartialDeriv, Plateau, PredLit, RealLit, ScalarMul, Span, TArrow,
    TDist, Term, TReal, Ty, Var, vec_dim, vec_type,
)
from .testfn import TestFn, TFBump, TFPlateau
from .typecheck import Ctx, check_program


class EvalError(Exception):
    def __init__(self, span: Span, message: str):
        self.span = span
        self.message = message
        super().__init__(f"{span}: {message}")

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.span}: {self.message}"


@dataclass(frozen=True)
class Value:
    pass


@dataclass(frozen=True)
class VReal(Value):
    value: float


@dataclass(frozen=True)
class VNat(Value):
    value: int


@dataclass(frozen=True)
class VPair(Value):
    fst: Value
    snd: Value


@dataclass(frozen=True)
class VClosure(Value):
    param: str
    annot: Ty
    body: Term
    env: dict[str, Value]


@dataclass(frozen=True)
class VPred(Value):
    pred: PredVal


@dataclass(frozen=True)
class VTest(Value):
    fn: TestFn


@dataclass(frozen=True)
class VDist(Value):
    dist: DistExpr


@dataclass(frozen=True)
class VBuiltin(Value):
    name: str
    fn: Callable[[Value, QuadConfig], Value]


Env = dict[str, Value]


def value_to_vec(v: Value) -> tuple[float, ...]:
    out: list[float] = []
    while isinstance(v, VPair):
        assert isinstance(v.fst, VReal), "vector components must be reals"
        out.append(v.fst.value)
        v = v.snd
    assert isinstance(v, VReal), "vector tail must be a real"
    out.append(v.value)
    return tuple(out)


def vec_to_value(x: tuple[float, ...]) -> Value:
    v: Value = VReal(x[-1])
    for xi in reversed(x[:-1]):
        v = VPair(VReal(xi), v)
    return v


def show_value(v: Value, digits: int = 12) -> str:
    match v:
        case VReal(x):
            return f"{x:.{digits}g}"
        case VNat(n):
            return str(n)
        case VPair(a, b):
            return f"({show_value(a, digits)}, {show_value(b, digits)})"
        case VClosure(param, annot, _, _):
            return f"<fun {param}: {annot}>"
        case VBuiltin(name, _):
            return f"<builtin {name}>"
        case VPred(p):
            return f"<pred dim={p.dim}>"
        case VTest(f):
            return f"<test dim={f.dim} support={f.support}>"
        case VDist(d):
            return f"<dist dim={d.dim}: {d.summary()}>"
    raise AssertionError(f"unhandled value {v!r}")


# ---------------------------------------------------------------------------
# Predicate compilation

def _compile_pred_arith(
    t: Term, slots: dict[str, int], env: Env
) -> Callable[[tuple[float, ...]], float]:
    match t:
        case RealLit(v):
            return lambda x: v
        case Var(name):
            if name in slots:
                i = slots[name]
                return lambda x: x[i]
            bound = env[name]
            assert isinstance(bound, VReal)
            captured = bound.value
            return lambda x: captured
        case Arith(op, args):
            ops = [_compile_pred_arith(a, slots, env) for a in args]
            if op == "+":
                f, g = ops
                return lambda x: f(x) + g(x)
            if op == "-":
                f, g = ops
                return lambda x: f(x) - g(x)
            if op == "*":
                f, g = ops
                return lambda x: f(x) * g(x)
            if op == "/":
                f, g = ops
                return lambda x: f(x) / g(x)
            if op == "neg":
                (f,) = ops
                return lambda x: -f(x)
            if op == "pow":
                f = ops[0]
                k = t.args[1].value  # NatLit by typing
                return lambda x: f(x) ** k
            fn = {"exp": math.exp, "log": math.log, "sin": math.sin,
                  "cos": math.cos, "sqrt": math.sqrt}[op]
            (f,) = ops
            return lambda x: fn(f(x))
    raise AssertionError(f"non-arithmetic term in predicate: {t!r}")


def _compile_pred_bool(
    t: Term, slots: dict[str, int], env: Env
) -> Callable[[tuple[float, ...]], bool]:
    match t:
        case Compare(op, lhs, rhs):
            f = _compile_pred_arith(lhs, slots, env)
            g = _compile_pred_arith(rhs, slots, env)
            if op == "<":
                return lambda x: f(x) < g(x)
            if op == "<=":
                return lambda x: f(x) <= g(x)
            if op == ">":
                return lambda x: f(x) > g(x)
            if op == ">=":
                return lambda x: f(x) >= g(x)
            if op == "==":
                return lambda x: f(x) == g(x)
            return lambda x: f(x) != g(x)
        case BoolAnd(a, b):
            f = _compile_pred_bool(a, slots, env)
            g = _compile_pred_bool(b, slots, env)
            return lambda x: f(x) and g(x)
        case BoolOr(a, b):
            f = _compile_pred_bool(a, slots, env)
            g = _compile_pred_bool(b, slots, env)
            return lambda x: f(x) or g(x)
        case BoolNot(a):
            f = _compile_pred_bool(a, slots, env)
            return lambda x: not f(x)
    raise AssertionError(f"non-boolean term in predicate: {t!r}")


def compile_pred(lit: PredLit, env: Env) -> PredVal:
    slots = {name: i for i, name in enumerate(lit.vars)}
    fn = _compile_pred_bool(lit.body, slots, env)
    return PredVal(lit.dim, fn, None, print_term(lit))


# ---------------------------------------------------------------------------
# Evaluation

def _label(t: Term, limit: int = 48) -> str:
    s = print_term(t)
    return s if len(s) <= limit else s[: limit - 3] + "..."


def eval_term(env: Env, t: Term, cfg: QuadConfig = QuadConfig()) -> Value:
    match t:
        case Var(name):
            return env[name]
        case RealLit(v):
            return VReal(v)
        case NatLit(n):
            return VNat(n)
        case Pair(a, b):
            return VPair(eval_term(env, a, cfg), eval_term(env, b, cfg))
        case LetPair(x, y, bound, body):
            pair_v = eval_term(env, bound, cfg)
            assert isinstance(pair_v, VPair)
            return eval_term({**env, x: pair_v.fst, y: pair_v.snd}, body, cfg)
        case Let(x, bound, body):
            return eval_term({**env, x: eval_term(env, bound, cfg)}, body, cfg)
        case Lam(x, annot, body):
            return VClosure(x, annot, body, env)
        case App(fn, arg):
            fn_v = eval_term(env, fn, cfg)
            arg_v = eval_term(env, arg, cfg)
            return apply_value(fn_v, arg_v, cfg)
        case Lift(fn):
            fn_v = eval_term(env, fn, cfg)
            assert isinstance(fn_v, VClosure)
            dim = vec_dim(fn_v.annot)
            assert dim is not None
            return VDist(D.lift_dist(_host_fn(fn_v, cfg), dim, _label(fn)))
        case Indicator(pred, fn):
            pred_v = eval_term(env, pred, cfg)
            assert isinstance(pred_v, VPred)
            fn_v = eval_term(env, fn, cfg)
            assert isinstance(fn_v, VClosure)
            return VDist(D.indicator(pred_v.pred, _host_fn(fn_v, cfg), _label(fn)))
        case PartialDeriv(index, arg):
            arg_v = eval_term(env, arg, cfg)
            assert isinstance(arg_v, VDist)
            return VDist(D.deriv(arg_v.dist, index))
        case DistAdd(left, right):
            lv = eval_term(env, left, cfg)
            rv = eval_term(env, right, cfg)
            assert isinstance(lv, VDist) and isinstance(rv, VDist)
            return VDist(D.add(lv.dist, rv.dist))
        case ScalarMul(scalar, d):
            sv = eval_term(env, scalar, cfg)
            dv = eval_term(env, d, cfg)
            assert isinstance(sv, VReal) and isinstance(dv, VDist)
            return VDist(D.scale(sv.value, dv.dist))
        case DistApply(d, test):
            dv = eval_term(env, d, cfg)
            tv = eval_term(env, test, cfg)
            assert isinstance(dv, VDist) and isinstance(tv, VTest)
            return VReal(D.pair(dv.dist, tv.fn, cfg))
        case Bump(_, center, radius):
            c = value_to_vec(eval_term(env, center, cfg))
            r_v = eval_term(env, radius, cfg)
            assert isinstance(r_v, VReal)
            if r_v.value <= 0:
                raise EvalError(t.span, f"bump radius must be positive, got {r_v.value:g}")
            return VTest(TFBump(c, r_v.value))
        case Plateau(_, inner, outer):
            return VTest(TFPlateau(inner, outer))
        case Dirac(point):
            p = value_to_vec(eval_term(env, point, cfg))
            return VDist(D.dirac(p))
        case Iter(seed, step):
            seed_v = eval_term(env, seed, cfg)
            step_v = eval_term(env, step, cfg)

            def run(n_v: Value, cfg2: QuadConfig) -> Value:
                assert isinstance(n_v, VNat)
                return iterate(seed_v, step_v, n_v.value, cfg2)

            return VBuiltin("iter", run)
        case Arith(op, args):
            vals = [eval_term(env, a, cfg) for a in args]
            return _eval_arith(t.span, op, vals)
        case PredLit():
            return VPred(compile_pred(t, env))
    raise AssertionError(f"unhandled term {t!r}")


def _host_fn(closure: VClosure, cfg: QuadConfig) -> Callable[[tuple[float, ...]], float]:
    """Wrap a closure over R^n as a host evaluator on flat vectors."""
    inner_cfg = cfg.nested_pairing()

    def host(x: tuple[float, ...]) -> float:
        res = apply_value(closure, vec_to_value(x), inner_cfg)
        assert isinstance(res, VReal)
        return res.value

    return host


def apply_value(fn: Value, arg: Value, cfg: QuadConfig) -> Value:
    match fn:
        case VClosure(param, _, body, env):
            return eval_term({**env, param: arg}, body, cfg)
        case VBuiltin(_, f):
            return f(arg, cfg)
    raise AssertionError(f"application of a non-function value {fn!r}")


def iterate(seed: Value, step: Value, n: int, cfg: QuadConfig = QuadConfig()) -> Value:
    """Apply step to seed n times; a loop, not recursion."""
    cur = seed
    for _ in range(n):
        cur = apply_value(step, cur, cfg)
    return cur


def _eval_arith(span: Span, op: str, vals: list[Value]) -> Value:
    if op in ("min", "max"):
        a, b = vals
        assert isinstance(a, VNat) and isinstance(b, VNat)
        return VNat(min(a.value, b.value) if op == "min" else max(a.value, b.value))
    if op in ("+", "-", "*") and isinstance(vals[0], VNat):
        a, b = vals
        assert isinstance(a, VNat) and isinstance(b, VNat)
        if op == "+":
            return VNat(a.value + b.value)
        if op == "*":
            return VNat(a.value * b.value)
        return VNat(max(0, a.value - b.value))  # truncated natural subtraction
    if op == "pow":
        base, expo = vals
        assert isinstance(base, VReal) and isinstance(expo, VNat)
        return VReal(base.value ** expo.value)
    nums = []
    for v in vals:
        assert isinstance(v, VReal)
        nums.append(v.value)
    try:
        match op, nums:
            case "+", [a, b]:
                return VReal(a + b)
            case "-", [a, b]:
                return VReal(a - b)
            case "*", [a, b]:
                return VReal(a * b)
            case "/", [a, b]:
                if b == 0.0:
                    raise EvalError(span, "division by zero")
                return VReal(a / b)
            case "neg", [a]:
                return VReal(-a)
            case "exp", [a]:
                return VReal(math.exp(a))
            case "log", [a]:
                if a <= 0.0:
                    raise EvalError(span, f"log of non-positive value {a:g}")
                return VReal(math.log(a))
            case "sin", [a]:
                return VReal(math.sin(a))
            case "cos", [a]:
                return VReal(math.cos(a))
            case "sqrt", [a]:
                if a < 0.0:
                    raise EvalError(span, f"sqrt of negative value {a:g}")
                return VReal(math.sqrt(a))
    except OverflowError:
        raise EvalError(span, f"arithmetic overflow in '{op}'") from None
    raise AssertionError(f"unknown arithmetic op {op}")


# ---------------------------------------------------------------------------
# Prelude

PRELUDE_SOURCE = """\
-- probe the derivative of a distribution around a point, normalizing the
-- bump to unit volume in-language
der : Dist(R^1) -> R -> R+ -> R;
der = fun f: Dist(R^1) -> fun x: R -> fun eps: R+ ->
    <d/d1 f, bump1(x, eps)> / <lift (fun y: R -> 1.0), bump1(x, eps)>;

gradDesc : Dist(R^1) -> R -> R+ -> R -> N -> R;
gradDesc = fun f: Dist(R^1) -> fun x0: R -> fun eps: R+ -> fun lr: R -> fun n: N ->
    (iter x0 (fun xn: R -> xn - lr * (der f xn eps))) n;
"""


def _integral_builtin() -> VBuiltin:
    def stage1(dist_v: Value, _cfg: QuadConfig) -> Value:
        assert isinstance(dist_v, VDist)

        def stage2(p1: Value, _cfg2: QuadConfig) -> Value:
            x1, y1 = value_to_vec(p1)

            def stage3(p2: Value, cfg3: QuadConfig) -> Value:
                x2, y2 = value_to_vec(p2)
                if not (x1 < x2 and y1 < y2):
                    raise EvalError(
                        Span(0, 0), "integral corners must satisfy x1 < x2 and y1 < y2"
                    )
                inner = BoxLit((x1, y1), (x2, y2))
                mx, my = 0.5 * (x2 - x1), 0.5 * (y2 - y1)
                outer = BoxLit((x1 - mx, y1 - my), (x2 + mx, y2 + my))
                value = D.pair(dist_v.dist, TFPlateau(inner, outer), cfg3)
                return VReal(value)

            return VBuiltin("integral#2", stage3)

        return VBuiltin("integral#1", stage2)

    return VBuiltin("integral", stage1)


def prelude(cfg: QuadConfig = QuadConfig()) -> tuple[Ctx, Env]:
    """Typing context and environment with der, gradDesc and integral bound."""
    src = parse(PRELUDE_SOURCE)
    names = check_program(src)
    ctx = Ctx()
    for name, ty in names:
        ctx = ctx.extend(name, ty)
    env: Env = {}
    for name, _, term in src.definitions:
        env[name] = eval_term(env, term, cfg)
    vec2 = vec_type(2)
    ctx = ctx.extend(
        "integral", TArrow(TDist(2), TArrow(vec2, TArrow(vec2, TReal())))
    )
    env["integral"] = _integral_builtin()
    return ctx, env
