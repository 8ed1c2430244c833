"""Smooth compactly supported test functions with exact derivatives.

The algebra is closed: bumps, plateaus, scalings, sums and coordinate
derivatives.  Every node is a finite product/sum of univariate profiles, so
any mixed partial derivative factors into per-axis univariate derivatives,
which are computed by forward propagation of truncated Taylor series through
the closed-form profile definitions.  No finite differences anywhere.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

from .quad import QuadConfig, integrate_box
from .syntax import BoxLit

# Below this margin of 1 - u^2 the bump is treated as exactly 0; the true
# value there is under exp(-1e14), far below double underflow.
EDGE_EPS = 1e-14

DEFAULT_MAX_ORDER = 8
_max_order = int(os.environ.get("LDELTA_MAX_ORDER", DEFAULT_MAX_ORDER))


def get_max_order() -> int:
    return _max_order


def set_max_order(k: int) -> None:
    global _max_order
    if k < 1:
        raise ValueError("max derivative order must be >= 1")
    _max_order = k


class DimensionMismatch(Exception):
    pass


class IndexOutOfRange(Exception):
    pass


class OrderLimitExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# Truncated univariate Taylor arithmetic (lists of coefficients around x0)

def _t_var(x0: float, k: int) -> list[float]:
    c = [0.0] * (k + 1)
    c[0] = x0
    if k >= 1:
        c[1] = 1.0
    return c


def _t_affine(x0: float, slope: float, k: int) -> list[float]:
    c = [0.0] * (k + 1)
    c[0] = x0
    if k >= 1:
        c[1] = slope
    return c


def _t_mul(a: list[float], b: list[float]) -> list[float]:
    k = len(a) - 1
    out = [0.0] * (k + 1)
    for i, ai in enumerate(a):
        if ai == 0.0:
            continue
        for j in range(k + 1 - i):
            out[i + j] += ai * b[j]
    return out


def _t_div(a: list[float], b: list[float]) -> list[float]:
    k = len(a) - 1
    out = [0.0] * (k + 1)
    b0 = b[0]
    for n in range(k + 1):
        acc = a[n]
        for i in range(n):
            acc -= out[i] * b[n - i]
        out[n] = acc / b0
    return out


def _t_exp(a: list[float]) -> list[float]:
    k = len(a) - 1
    out = [0.0] * (k + 1)
    out[0] = math.exp(a[0])
    for n in range(1, k + 1):
        acc = 0.0
        for j in range(1, n + 1):
            acc += j * a[j] * out[n - j]
        out[n] = acc / n
    return out


# ---------------------------------------------------------------------------
# Univariate profiles: value and derivatives of given order

def eval_bump_1d(c: float, r: float, x: float) -> float:
    """exp(-1/(1-((x-c)/r)^2)) strictly inside (c-r, c+r), exactly 0 outside."""
    if r <= 0:
        raise ValueError("bump radius must be positive")
    u = (x - c) / r
    g = 1.0 - u * u
    if g <= EDGE_EPS:
        return 0.0
    return math.exp(-1.0 / g)


def _bump_axis_deriv(c: float, r: float, x: float, k: int) -> float:
    """k-th derivative of the 1D bump profile at x."""
    if k == 0:
        return eval_bump_1d(c, r, x)
    u0 = (x - c) / r
    if 1.0 - u0 * u0 <= EDGE_EPS:
        return 0.0
    u = _t_affine(u0, 1.0 / r, k)
    g = _t_mul(u, u)
    g = [1.0 - g[0]] + [-v for v in g[1:]]
    h = _t_div([-1.0] + [0.0] * k, g)
    phi = _t_exp(h)
    return phi[k] * math.factorial(k)


def _smoothstep_jet(t0: float, slope: float, k: int) -> list[float]:
    """Taylor coefficients of s(t(x)) with s = g(t)/(g(t)+g(1-t)), g = exp(-1/t)."""
    if t0 <= EDGE_EPS:
        return [0.0] * (k + 1)
    if t0 >= 1.0 - EDGE_EPS:
        return [1.0] + [0.0] * k
    t = _t_affine(t0, slope, k)
    one_minus_t = [1.0 - t[0]] + [-v for v in t[1:]]
    minus_one = [-1.0] + [0.0] * k
    g1 = _t_exp(_t_div(minus_one, t))
    g2 = _t_exp(_t_div(minus_one, one_minus_t))
    denom = [p + q for p, q in zip(g1, g2)]
    return _t_div(g1, denom)


def _plateau_axis_deriv(a2: float, a1: float, b1: float, b2: float, x: float, k: int) -> float:
    """k-th derivative of the axis profile: 0 | rise | 1 | fall | 0."""
    if x <= a2 or x >= b2:
        return 0.0
    if a1 <= x <= b1:
        return 1.0 if k == 0 else 0.0
    if x < a1:
        width = a1 - a2
        jet = _smoothstep_jet((x - a2) / width, 1.0 / width, k)
    else:
        width = b2 - b1
        jet = _smoothstep_jet((b2 - x) / width, -1.0 / width, k)
    return jet[k] * math.factorial(k)


# ---------------------------------------------------------------------------
# TestFn nodes

@dataclass(frozen=True)
class TestFn:
    @property
    def dim(self) -> int:
        raise NotImplementedError

    @cached_property
    def support(self) -> BoxLit:
        raise NotImplementedError


@dataclass(frozen=True)
class TFBump(TestFn):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if not self.center:
            raise DimensionMismatch("bump center must have dimension >= 1")
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @cached_property
    def support(self) -> BoxLit:
        r = self.radius
        return BoxLit(tuple(c - r for c in self.center), tuple(c + r for c in self.center))


@dataclass(frozen=True)
class TFPlateau(TestFn):
    inner: BoxLit
    outer: BoxLit

    def __post_init__(self) -> None:
        if self.inner.dim != self.outer.dim:
            raise DimensionMismatch("plateau boxes must share a dimension")
        if not self.inner.strictly_inside(self.outer):
            raise ValueError("plateau inner box must lie strictly inside the outer box")

    @property
    def dim(self) -> int:
        return self.inner.dim

    @cached_property
    def support(self) -> BoxLit:
        return self.outer


@dataclass(frozen=True)
class TFScale(TestFn):
    coeff: float
    arg: TestFn

    @property
    def dim(self) -> int:
        return self.arg.dim

    @cached_property
    def support(self) -> BoxLit:
        return self.arg.support


@dataclass(frozen=True)
class TFSum(TestFn):
    left: TestFn
    right: TestFn

    def __post_init__(self) -> None:
        if self.left.dim != self.right.dim:
            raise DimensionMismatch(
                f"sum of test functions of dimensions {self.left.dim} and {self.right.dim}"
            )

    @property
    def dim(self) -> int:
        return self.left.dim

    @cached_property
    def support(self) -> BoxLit:
        return self.left.support.union(self.right.support)


@dataclass(frozen=True)
class TFDeriv(TestFn):
    index: int
    arg: TestFn

    def __post_init__(self) -> None:
        if not 1 <= self.index <= self.arg.dim:
            raise IndexOutOfRange(
                f"derivative axis {self.index} out of range for dimension {self.arg.dim}"
            )

    @property
    def dim(self) -> int:
        return self.arg.dim

    @cached_property
    def support(self) -> BoxLit:
        return self.arg.support


def deriv_depth(f: TestFn) -> int:
    match f:
        case TFDeriv(_, arg):
            return 1 + deriv_depth(arg)
        case TFScale(_, arg):
            return deriv_depth(arg)
        case TFSum(left, right):
            return max(deriv_depth(left), deriv_depth(right))
        case _:
            return 0


# ---------------------------------------------------------------------------
# Evaluation

def _eval_mixed(f: TestFn, x: tuple[float, ...], alpha: tuple[int, ...]) -> float:
    """Mixed partial derivative of f at x with per-axis orders alpha."""
    match f:
        case TFSum(left, right):
            return _eval_mixed(left, x, alpha) + _eval_mixed(right, x, alpha)
        case TFScale(coeff, arg):
            return coeff * _eval_mixed(arg, x, alpha)
        case TFDeriv(index, arg):
            bumped = alpha[: index - 1] + (alpha[index - 1] + 1,) + alpha[index:]
            return _eval_mixed(arg, x, bumped)
        case TFBump(center, radius):
            out = 1.0
            for c, xi, k in zip(center, x, alpha):
                out *= _bump_axis_deriv(c, radius, xi, k)
                if out == 0.0:
                    return 0.0
            return out
        case TFPlateau(inner, outer):
            out = 1.0
            for a2, a1, b1, b2, xi, k in zip(
                outer.lower, inner.lower, inner.upper, outer.upper, x, alpha
            ):
                out *= _plateau_axis_deriv(a2, a1, b1, b2, xi, k)
                if out == 0.0:
                    return 0.0
            return out
    raise AssertionError(f"unhandled test function {f!r}")


def _check_order(f: TestFn, extra: int) -> None:
    total = extra + deriv_depth(f)
    if total > _max_order:
        raise OrderLimitExceeded(
            f"requested total derivative order {total} exceeds the cap {_max_order} "
            "(set LDELTA_MAX_ORDER to raise it)"
        )


def eval_test_fn(f: TestFn, x: tuple[float, ...]) -> float:
    if len(x) != f.dim:
        raise DimensionMismatch(f"point of dimension {len(x)} fed to a {f.dim}-d test function")
    _check_order(f, 0)
    return _eval_mixed(f, x, (0,) * f.dim)


def compile_evaluator(f: TestFn) -> Callable[[tuple[float, ...]], float]:
    """Specialize a test function into a closure; derivative chains are folded."""
    _check_order(f, 0)
    return _compile(f, (0,) * f.dim)


def _compile(f: TestFn, alpha: tuple[int, ...]) -> Callable[[tuple[float, ...]], float]:
    match f:
        case TFDeriv(index, arg):
            bumped = alpha[: index - 1] + (alpha[index - 1] + 1,) + alpha[index:]
            return _compile(arg, bumped)
        case TFScale(coeff, arg):
            inner = _compile(arg, alpha)
            return lambda x: coeff * inner(x)
        case TFSum(left, right):
            lf, rf = _compile(left, alpha), _compile(right, alpha)
            return lambda x: lf(x) + rf(x)
        case TFBump(center, radius):
            if all(k == 0 for k in alpha):
                r2 = radius * radius

                def bump_val(x: tuple[float, ...]) -> float:
                    out = 1.0
                    for c, xi in zip(center, x):
                        d = xi - c
                        g = 1.0 - d * d / r2
                        if g <= EDGE_EPS:
                            return 0.0
                        out *= math.exp(-1.0 / g)
                    return out

                return bump_val
            axes = tuple(enumerate(alpha))

            def bump_deriv(x: tuple[float, ...]) -> float:
                out = 1.0
                for a, k in axes:
                    out *= _bump_axis_deriv(center[a], radius, x[a], k)
                    if out == 0.0:
                        return 0.0
                return out

            return bump_deriv
        case TFPlateau(inner_box, outer_box):
            lo_o, lo_i = outer_box.lower, inner_box.lower
            hi_i, hi_o = inner_box.upper, outer_box.upper

            def plateau_val(x: tuple[float, ...]) -> float:
                out = 1.0
                for a, xi in enumerate(x):
                    out *= _plateau_axis_deriv(lo_o[a], lo_i[a], hi_i[a], hi_o[a], xi, alpha[a])
                    if out == 0.0:
                        return 0.0
                return out

            return plateau_val
    raise AssertionError(f"unhandled test function {f!r}")


# ---------------------------------------------------------------------------
# Jets

@dataclass(frozen=True)
class Jet:
    point: tuple[float, ...]
    order: int
    coefficients: dict[tuple[int, ...], float]

    @property
    def value(self) -> float:
        return self.coefficients[(0,) * len(self.point)]

    def partial(self, alpha: tuple[int, ...]) -> float:
        """Partial derivative value (coefficient times alpha factorial)."""
        fact = 1
        for k in alpha:
            fact *= math.factorial(k)
        return self.coefficients[alpha] * fact


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    if dim == 1:
        return [(k,) for k in range(order + 1)]
    out = []
    for k in range(order + 1):
        for rest in _multi_indices(dim - 1, order - k):
            out.append((k,) + rest)
    return out


def eval_jet(f: TestFn, x: tuple[float, ...], order: int) -> Jet:
    """Exact partial derivatives of f at x, up to the given total order."""
    if len(x) != f.dim:
        raise DimensionMismatch(f"point of dimension {len(x)} fed to a {f.dim}-d test function")
    if order < 0:
        raise ValueError("jet order must be >= 0")
    _check_order(f, order)
    coeffs: dict[tuple[int, ...], float] = {}
    for alpha in _multi_indices(f.dim, order):
        fact = 1
        for k in alpha:
            fact *= math.factorial(k)
        coeffs[alpha] = _eval_mixed(f, x, alpha) / fact
    return Jet(x, order, coeffs)


def derivative(f: TestFn, index: int) -> TestFn:
    if not 1 <= index <= f.dim:
        raise IndexOutOfRange(f"axis {index} out of range for dimension {f.dim}")
    return TFDeriv(index, f)


def bump_volume(dim: int, radius: float, cfg: Optional[QuadConfig] = None) -> float:
    """Volume of the bump of the given radius, by quadrature over its support."""
    bump = TFBump((0.0,) * dim, radius)
    ev = compile_evaluator(bump)
    return integrate_box(ev, bump.support, cfg or QuadConfig()).value


def normalized_bump(
    center: tuple[float, ...], radius: float, cfg: Optional[QuadConfig] = None
) -> TestFn:
    """Bump scaled to unit volume (localizing probe: pairing a lifted f recovers f)."""
    v = bump_volume(len(center), radius, cfg)
    return TFScale(1.0 / v, TFBump(center, radius))
