"""Deterministic adaptive Gauss-Kronrod integration over intervals and boxes.

Dimensions 2 and 3 are integrated as iterated 1D integrals (outermost axis
first) with tightened inner tolerances, so that jump integrands localize at
1D cost per axis instead of requiring a full tensor-product refinement.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .syntax import BoxLit

# 15-point Kronrod nodes with embedded 7-point Gauss rule, on [-1, 1].
# (node, Kronrod weight, Gauss weight); Gauss weight 0 marks Kronrod-only nodes.
_GK15 = (
    (0.991455371120813, 0.022935322010529, 0.0),
    (0.949107912342759, 0.063092092629979, 0.129484966168870),
    (0.864864423359769, 0.104790010322250, 0.0),
    (0.741531185599394, 0.140653259715525, 0.279705391489277),
    (0.586087235467691, 0.169004726639267, 0.0),
    (0.405845151377397, 0.190350578064785, 0.381830050505119),
    (0.207784955007898, 0.204432940075298, 0.0),
    (0.0, 0.209482141084728, 0.417959183673469),
)

# Inner integrals of an iterated multi-D integral run at this fraction of the
# outer tolerance so the outer rule is not chasing inner noise.
INNER_TOL_SCALE = 0.02


class UnsupportedDimension(Exception):
    pass


@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_depth: Optional[int] = None  # None: 40 in 1D, 24 per axis in 2D/3D
    max_evals: int = 5_000_000

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_evals <= 0 or (self.max_depth is not None and self.max_depth <= 0):
            raise ValueError("limits must be positive")

    def depth_limit(self, nested: bool) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return 24 if nested else 40

    def inner(self) -> "QuadConfig":
        return replace(
            self,
            abs_tol=max(self.abs_tol * INNER_TOL_SCALE, 1e-15),
            rel_tol=max(self.rel_tol * INNER_TOL_SCALE, 1e-15),
        )

    def nested_pairing(self) -> "QuadConfig":
        """Config for distribution pairings nested inside an integrand."""
        return replace(
            self,
            abs_tol=max(self.abs_tol * 0.01, 1e-13),
            rel_tol=max(self.rel_tol * 0.01, 1e-13),
        )


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    evals: int


class NonConvergence(Exception):
    """Raised when limits are hit before the tolerance; carries the best result."""

    def __init__(self, result: QuadResult, detail: str = ""):
        self.result = result
        self.detail = detail
        super().__init__(
            f"quadrature did not converge ({detail}): value={result.value!r} "
            f"error={result.error_estimate:.3e} evals={result.evals}"
        )


class _Budget:
    __slots__ = ("evals", "limit")

    def __init__(self, limit: int):
        self.evals = 0
        self.limit = limit

    def spend(self, n: int) -> bool:
        self.evals += n
        return self.evals <= self.limit


def _gk_panel(f: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    """Kronrod value and |Kronrod - Gauss| estimate on [a, b]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    kron = 0.0
    gauss = 0.0
    for node, wk, wg in _GK15:
        if node == 0.0:
            fv = f(mid)
            kron += wk * fv
            gauss += wg * fv
        else:
            f1 = f(mid + half * node)
            f2 = f(mid - half * node)
            kron += wk * (f1 + f2)
            if wg != 0.0:
                gauss += wg * (f1 + f2)
    return kron * half, abs(kron - gauss) * half


def _adaptive_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadConfig,
    budget: _Budget,
    depth_limit: int,
    initial_panels: int = 1,
) -> QuadResult:
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    if a > b:
        raise ValueError("integrate1D requires a <= b")
    start_evals = budget.evals
    if not budget.spend(15 * initial_panels):
        raise NonConvergence(QuadResult(0.0, 0.0, budget.evals - start_evals), "eval limit")
    # heap entries: (-err, a, b, depth, value); ties broken by coordinates
    heap: list[tuple[float, float, float, int, float]] = []
    total_val = 0.0
    total_err = 0.0
    for i in range(initial_panels):
        pa = a + (b - a) * i / initial_panels
        pb = a + (b - a) * (i + 1) / initial_panels
        val, err = _gk_panel(f, pa, pb)
        heapq.heappush(heap, (-err, pa, pb, 0, val))
        total_val += val
        total_err += err
    frozen_val = 0.0
    frozen_err = 0.0

    def done() -> bool:
        return total_err <= max(cfg.abs_tol, cfg.rel_tol * abs(total_val))

    while heap and not done():
        neg_err, pa, pb, depth, pval = heapq.heappop(heap)
        perr = -neg_err
        if depth >= depth_limit:
            frozen_val += pval
            frozen_err += perr
            continue
        if not budget.spend(30):
            heapq.heappush(heap, (neg_err, pa, pb, depth, pval))
            break
        mid = 0.5 * (pa + pb)
        lv, le = _gk_panel(f, pa, mid)
        rv, re = _gk_panel(f, mid, pb)
        total_val += lv + rv - pval
        total_err += le + re - perr
        heapq.heappush(heap, (-le, pa, mid, depth + 1, lv))
        heapq.heappush(heap, (-re, mid, pb, depth + 1, rv))

    # recompute the final sums in a deterministic order to shed drift
    panels = sorted([(pa, pb, pval, -ne) for ne, pa, pb, _, pval in heap])
    total_val = frozen_val + sum(p[2] for p in panels)
    total_err = frozen_err + sum(p[3] for p in panels)
    result = QuadResult(total_val, total_err, budget.evals - start_evals)
    if total_err > max(cfg.abs_tol, cfg.rel_tol * abs(total_val)):
        raise NonConvergence(result, "tolerance not met within limits")
    return result


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadConfig = QuadConfig(),
    initial_panels: int = 1,
) -> QuadResult:
    """Adaptive bisection with a 15-point Gauss-Kronrod pair per panel."""
    budget = _Budget(cfg.max_evals)
    return _adaptive_1d(
        f, a, b, cfg, budget, cfg.depth_limit(nested=False), initial_panels
    )


def _iterated(
    f: Callable[[tuple[float, ...]], float],
    box: BoxLit,
    cfg: QuadConfig,
    budget: _Budget,
    prefix: tuple[float, ...],
    initial_panels: int = 1,
) -> QuadResult:
    dim_left = box.dim - len(prefix)
    axis = len(prefix)
    a, b = box.lower[axis], box.upper[axis]
    depth_limit = cfg.depth_limit(nested=box.dim > 1)
    if dim_left == 1:
        return _adaptive_1d(
            lambda x: f(prefix + (x,)), a, b, cfg, budget, depth_limit, initial_panels
        )

    inner_cfg = cfg.inner()
    max_inner_err = 0.0

    def g(x: float) -> float:
        nonlocal max_inner_err
        try:
            r = _iterated(f, box, inner_cfg, budget, prefix + (x,), initial_panels)
        except NonConvergence as exc:
            r = exc.result
        max_inner_err = max(max_inner_err, r.error_estimate)
        return r.value

    start = budget.evals
    try:
        outer = _adaptive_1d(g, a, b, cfg, budget, depth_limit, initial_panels)
    except NonConvergence as exc:
        outer = exc.result
    err = outer.error_estimate + max_inner_err * (b - a)
    result = QuadResult(outer.value, err, budget.evals - start)
    if err > max(cfg.abs_tol, cfg.rel_tol * abs(outer.value)):
        raise NonConvergence(result, "tolerance not met within limits")
    return result


def integrate_box(
    f: Callable[[tuple[float, ...]], float],
    box: BoxLit,
    cfg: QuadConfig = QuadConfig(),
    initial_panels: int = 1,
) -> QuadResult:
    """Integrate f over an axis-aligned box of dimension 1-3."""
    if box.dim > 3:
        raise UnsupportedDimension(f"dimension {box.dim} not supported (max 3)")
    budget = _Budget(cfg.max_evals)
    if box.dim == 1:
        return _adaptive_1d(
            lambda x: f((x,)), box.lower[0], box.upper[0], cfg, budget,
            cfg.depth_limit(nested=False), initial_panels,
        )
    return _iterated(f, box, cfg, budget, (), initial_panels)


def integrate_box_best(
    f: Callable[[tuple[float, ...]], float],
    box: BoxLit,
    cfg: QuadConfig = QuadConfig(),
    initial_panels: int = 1,
) -> QuadResult:
    """integrate_box, accepting the best value when limits preempt the tolerance."""
    try:
        return integrate_box(f, box, cfg, initial_panels)
    except NonConvergence as exc:
        return exc.result
