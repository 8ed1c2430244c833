"""Distribution values in normal form and the pairing with test functions.

Distributions stay unevaluated trees; all numeric work happens at pairing
time.  Derivatives pair by the sign-flip rule, so a derivative applied to a
Dirac node is evaluated exactly through jets, with no quadrature at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .quad import NonConvergence, QuadConfig, QuadResult, integrate_box
from .syntax import BoxLit
from .testfn import (
    DimensionMismatch,
    IndexOutOfRange,
    TestFn,
    compile_evaluator,
    derivative,
)


@dataclass(frozen=True)
class PredVal:
    """Total boolean evaluator over points of R^n.

    bounds, when present, is a box outside of which the predicate is known to
    be false; pairings then restrict quadrature to it.
    """

    dim: int
    fn: Callable[[tuple[float, ...]], bool]
    bounds: Optional[BoxLit] = None
    label: str = "pred"

    def negate(self) -> "PredVal":
        f = self.fn
        return PredVal(self.dim, lambda x: not f(x), None, f"!{self.label}")

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class DistExpr:
    @property
    def dim(self) -> int:
        raise NotImplementedError

    def summary(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class DDirac(DistExpr):
    point: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.point)

    def summary(self) -> str:
        pt = ", ".join(f"{v:g}" for v in self.point)
        return f"dirac({pt})"


@dataclass(frozen=True)
class DLift(DistExpr):
    _dim: int
    fn: Callable[[tuple[float, ...]], float]
    label: str = "fn"

    @property
    def dim(self) -> int:
        return self._dim

    def summary(self) -> str:
        return f"lift({self.label})"


@dataclass(frozen=True)
class DInd(DistExpr):
    pred: PredVal
    fn: Callable[[tuple[float, ...]], float]
    label: str = "fn"

    @property
    def dim(self) -> int:
        return self.pred.dim

    def summary(self) -> str:
        return f"ind({self.pred}, {self.label})"


@dataclass(frozen=True)
class DSum(DistExpr):
    left: DistExpr
    right: DistExpr

    def __post_init__(self) -> None:
        if self.left.dim != self.right.dim:
            raise DimensionMismatch(
                f"sum of distributions of dimensions {self.left.dim} and {self.right.dim}"
            )

    @property
    def dim(self) -> int:
        return self.left.dim

    def summary(self) -> str:
        return f"{self.left.summary()} +. {self.right.summary()}"


@dataclass(frozen=True)
class DScale(DistExpr):
    coeff: float
    arg: DistExpr

    @property
    def dim(self) -> int:
        return self.arg.dim

    def summary(self) -> str:
        return f"{self.coeff:g} *. ({self.arg.summary()})"


@dataclass(frozen=True)
class DDeriv(DistExpr):
    index: int
    arg: DistExpr

    def __post_init__(self) -> None:
        if not 1 <= self.index <= self.arg.dim:
            raise IndexOutOfRange(
                f"derivative axis {self.index} out of range for dimension {self.arg.dim}"
            )

    @property
    def dim(self) -> int:
        return self.arg.dim

    def summary(self) -> str:
        return f"d/d{self.index} ({self.arg.summary()})"


# ---------------------------------------------------------------------------
# Constructors

def dirac(point: tuple[float, ...]) -> DistExpr:
    if not point:
        raise DimensionMismatch("dirac point must have dimension >= 1")
    return DDirac(tuple(float(v) for v in point))


def lift_dist(fn: Callable[[tuple[float, ...]], float], dim: int, label: str = "fn") -> DistExpr:
    if dim < 1:
        raise DimensionMismatch("lift dimension must be >= 1")
    return DLift(dim, fn, label)


def indicator(pred: PredVal, fn: Callable[[tuple[float, ...]], float], label: str = "fn") -> DistExpr:
    return DInd(pred, fn, label)


def add(left: DistExpr, right: DistExpr) -> DistExpr:
    return DSum(left, right)


def scale(coeff: float, arg: DistExpr) -> DistExpr:
    return DScale(coeff, arg)


def deriv(arg: DistExpr, index: int) -> DistExpr:
    return DDeriv(index, arg)


def zero(dim: int) -> DistExpr:
    return DScale(0.0, DDirac((0.0,) * dim))


# ---------------------------------------------------------------------------
# Pairing

def pair_result(t: DistExpr, phi: TestFn, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """Pairing with an aggregated quadrature error estimate and eval count."""
    if t.dim != phi.dim:
        raise DimensionMismatch(
            f"pairing a {t.dim}-d distribution with a {phi.dim}-d test function"
        )
    return _pair(t, phi, cfg)


def pair(t: DistExpr, phi: TestFn, cfg: QuadConfig = QuadConfig()) -> float:
    return pair_result(t, phi, cfg).value


def pair_best(t: DistExpr, phi: TestFn, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """Pairing that accepts the best value when quadrature limits are hit."""
    try:
        return pair_result(t, phi, cfg)
    except NonConvergence as exc:
        return exc.result


def _pair(t: DistExpr, phi: TestFn, cfg: QuadConfig) -> QuadResult:
    match t:
        case DDirac(point):
            ev = compile_evaluator(phi)
            return QuadResult(ev(point), 0.0, 1)
        case DScale(coeff, arg):
            r = _pair(arg, phi, cfg)
            return QuadResult(coeff * r.value, abs(coeff) * r.error_estimate, r.evals)
        case DSum(left, right):
            rl = _pair(left, phi, cfg)
            rr = _pair(right, phi, cfg)
            return QuadResult(
                rl.value + rr.value,
                rl.error_estimate + rr.error_estimate,
                rl.evals + rr.evals,
            )
        case DDeriv(index, arg):
            r = _pair(arg, derivative(phi, index), cfg)
            return QuadResult(-r.value, r.error_estimate, r.evals)
        case DLift(_, fn, label):
            phi_ev = compile_evaluator(phi)
            try:
                return integrate_box(lambda x: fn(x) * phi_ev(x), phi.support, cfg)
            except NonConvergence as exc:
                raise NonConvergence(exc.result, f"pairing lift({label})") from None
        case DInd(pred, fn, label):
            domain = phi.support
            if pred.bounds is not None:
                clipped = domain.intersect(pred.bounds)
                if clipped is None:
                    return QuadResult(0.0, 0.0, 0)
                domain = clipped
            phi_ev = compile_evaluator(phi)
            pred_fn = pred.fn

            def integrand(x: tuple[float, ...]) -> float:
                return fn(x) * phi_ev(x) if pred_fn(x) else 0.0

            try:
                # seed with a uniform subdivision: predicates can carve regions
                # thin enough to slip between the nodes of a single panel
                return integrate_box(integrand, domain, cfg, initial_panels=8)
            except NonConvergence as exc:
                raise NonConvergence(exc.result, f"pairing ind({pred}, {label})") from None
    raise AssertionError(f"unhandled distribution {t!r}")
