"""Scene descriptions for the pixel-integral pipeline.

A scene is a list of primitives (triangles, halfplanes) whose geometry and
coefficient functions may depend on a scalar parameter.  The pixel value is
the integral over the pixel box of the sum of indicator-masked coefficient
functions; its parameter derivative is taken distributionally, by pairing
the lifted pixel-value function with a narrow volume-1 bump.

Scene files are line-oriented plain text; see docs/scene-format.md.
Numbers may depend on the parameter as `a`, `PHI`, `a+b*PHI` or `a-b*PHI`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Optional

from . import dist as D
from .dist import DistExpr, PredVal
from .quad import NonConvergence, QuadConfig, QuadResult
from .syntax import BoxLit
from .testfn import TFPlateau, normalized_bump


class SceneError(Exception):
    pass


_AFFINE_RE = re.compile(
    r"""^(?:
        (?P<base_only>[+-]?[0-9.eE+-]*[0-9.])                       # plain number
      | (?P<base>[+-]?[0-9.eE]*[0-9.])?(?P<sign>[+-])?(?P<slope>[0-9.eE]*[0-9.]?)\*?PHI
    )$""",
    re.VERBOSE,
)


def _parse_affine(token: str) -> tuple[float, float]:
    """Parse `a`, `PHI`, `b*PHI`, `a+b*PHI`, `a-b*PHI` into (a, b)."""
    if "PHI" not in token:
        try:
            return float(token), 0.0
        except ValueError:
            raise SceneError(f"bad number {token!r}") from None
    m = _AFFINE_RE.match(token)
    if m is None or m.group("base_only") is not None:
        raise SceneError(f"bad parameter expression {token!r}")
    base = float(m.group("base")) if m.group("base") else 0.0
    slope_txt = m.group("slope")
    slope = float(slope_txt) if slope_txt else 1.0
    if m.group("sign") == "-":
        slope = -slope
    return base, slope


@dataclass(frozen=True)
class Affine:
    base: float
    slope: float

    def at(self, phi: float) -> float:
        return self.base + self.slope * phi


@dataclass(frozen=True)
class Coefficient:
    """Smooth coefficient function of (x, y, phi): constant or affine."""

    ax: float = 0.0
    ay: float = 0.0
    aphi: float = 0.0
    b: float = 0.0

    def bind(self, phi: float) -> Callable[[tuple[float, ...]], float]:
        ax, ay, c = self.ax, self.ay, self.aphi * phi + self.b
        if ax == 0.0 and ay == 0.0:
            return lambda p: c
        return lambda p: ax * p[0] + ay * p[1] + c


@dataclass(frozen=True)
class ScenePrim:
    kind: str  # "triangle" | "halfplane"
    geometry: tuple[Affine, ...]
    coefficient: Coefficient


@dataclass(frozen=True)
class Scene:
    pixel: BoxLit
    prims: tuple[ScenePrim, ...]
    sweep: tuple[float, ...] = (0.25, 0.5, 0.75)


def parse_scene(text: str) -> Scene:
    pixel: Optional[BoxLit] = None
    prims: list[ScenePrim] = []
    sweep: Optional[tuple[float, ...]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        head, args = fields[0], fields[1:]
        try:
            if head == "pixel":
                x1, y1, x2, y2 = (float(v) for v in args)
                pixel = BoxLit((x1, y1), (x2, y2))
            elif head == "sweep":
                sweep = tuple(float(v) for v in args)
            elif head == "halfplane":
                geo = tuple(_parse_affine(v) for v in args[:3])
                prims.append(ScenePrim(
                    "halfplane",
                    tuple(Affine(*g) for g in geo),
                    _parse_coefficient(args[3:]),
                ))
            elif head == "triangle":
                geo = tuple(_parse_affine(v) for v in args[:6])
                prims.append(ScenePrim(
                    "triangle",
                    tuple(Affine(*g) for g in geo),
                    _parse_coefficient(args[6:]),
                ))
            else:
                raise SceneError(f"unknown primitive {head!r}")
        except (ValueError, SceneError) as exc:
            raise SceneError(f"line {lineno}: {exc}") from None
    if pixel is None:
        raise SceneError("scene has no pixel line")
    if not prims:
        raise SceneError("scene has no primitives")
    return Scene(pixel, tuple(prims), sweep or (0.25, 0.5, 0.75))


def _parse_coefficient(args: list[str]) -> Coefficient:
    if not args:
        raise SceneError("missing coefficient spec")
    if args[0] == "const":
        (v,) = (float(x) for x in args[1:])
        return Coefficient(b=v)
    if args[0] == "affine":
        ax, ay, aphi, b = (float(x) for x in args[1:])
        return Coefficient(ax, ay, aphi, b)
    raise SceneError(f"unknown coefficient kind {args[0]!r}")


# ---------------------------------------------------------------------------
# Geometry predicates (always intersected with the pixel, so that the scene
# function is supported inside the plateau's inner box)

def _halfplane_pred(prim: ScenePrim, phi: float, pixel: BoxLit) -> PredVal:
    a = prim.geometry[0].at(phi)
    b = prim.geometry[1].at(phi)
    c = prim.geometry[2].at(phi)
    (px1, py1), (px2, py2) = pixel.lower, pixel.upper

    def fn(p: tuple[float, ...]) -> bool:
        x, y = p
        return a * x + b * y < c and px1 <= x <= px2 and py1 <= y <= py2

    return PredVal(2, fn, pixel, "halfplane&pixel")


def _triangle_pred(prim: ScenePrim, phi: float, pixel: BoxLit) -> PredVal:
    ax, ay = prim.geometry[0].at(phi), prim.geometry[1].at(phi)
    bx, by = prim.geometry[2].at(phi), prim.geometry[3].at(phi)
    cx, cy = prim.geometry[4].at(phi), prim.geometry[5].at(phi)
    (px1, py1), (px2, py2) = pixel.lower, pixel.upper

    def fn(p: tuple[float, ...]) -> bool:
        x, y = p
        if not (px1 <= x <= px2 and py1 <= y <= py2):
            return False
        d1 = (x - bx) * (ay - by) - (ax - bx) * (y - by)
        d2 = (x - cx) * (by - cy) - (bx - cx) * (y - cy)
        d3 = (x - ax) * (cy - ay) - (cx - ax) * (y - ay)
        has_neg = d1 < 0 or d2 < 0 or d3 < 0
        has_pos = d1 > 0 or d2 > 0 or d3 > 0
        return not (has_neg and has_pos)

    bbox = BoxLit(
        (min(ax, bx, cx), min(ay, by, cy)),
        (max(ax, bx, cx), max(ay, by, cy)),
    )
    bounds = bbox.intersect(pixel)
    if bounds is None:
        return PredVal(2, lambda p: False, None, "triangle&pixel(empty)")
    return PredVal(2, fn, bounds, "triangle&pixel")


def char_func(scene: Scene, phi: float) -> DistExpr:
    """Sum of indicator distributions for the scene at a parameter value."""
    out: Optional[DistExpr] = None
    for prim in scene.prims:
        if prim.kind == "halfplane":
            pred = _halfplane_pred(prim, phi, scene.pixel)
        else:
            pred = _triangle_pred(prim, phi, scene.pixel)
        term = D.indicator(pred, prim.coefficient.bind(phi), prim.kind)
        out = term if out is None else D.add(out, term)
    return out if out is not None else D.zero(2)


def _pixel_plateau(pixel: BoxLit) -> TFPlateau:
    margins = tuple(0.5 * (hi - lo) for lo, hi in zip(pixel.lower, pixel.upper))
    outer = BoxLit(
        tuple(lo - m for lo, m in zip(pixel.lower, margins)),
        tuple(hi + m for hi, m in zip(pixel.upper, margins)),
    )
    return TFPlateau(pixel, outer)


# Budgets for the nested derivative pipeline.  The outer pairing cannot
# certify below the inner integral's noise floor, so both levels run at
# matched tolerances and the result of record is the best value.
_INNER_ABS_FLOOR = 2e-7
_OUTER_ABS_FLOOR = 5e-6
_INNER_MAX_EVALS = 400_000


def _inner_cfg(cfg: QuadConfig) -> QuadConfig:
    return replace(
        cfg,
        abs_tol=max(cfg.abs_tol, _INNER_ABS_FLOOR),
        rel_tol=max(cfg.rel_tol, _INNER_ABS_FLOOR),
        max_evals=min(cfg.max_evals, _INNER_MAX_EVALS),
    )


def pixel_value(scene: Scene, phi: float, cfg: QuadConfig = QuadConfig()) -> float:
    """I(phi): pairing of the scene distribution with the pixel plateau."""
    dist_expr = char_func(scene, phi)
    probe = _pixel_plateau(scene.pixel)
    return D.pair_best(dist_expr, probe, _inner_cfg(cfg)).value


def pixel_gradient(
    scene: Scene, phi0: float, cfg: QuadConfig = QuadConfig(), eps: float = 0.1
) -> float:
    """dI/dphi at phi0, via the distributional derivative of lifted I."""
    inner = _inner_cfg(cfg)
    lifted = D.lift_dist(lambda p: pixel_value(scene, p[0], inner), 1, "pixel value")
    probe = normalized_bump((phi0,), eps)
    outer = replace(
        cfg,
        abs_tol=max(cfg.abs_tol, _OUTER_ABS_FLOOR),
        rel_tol=max(cfg.rel_tol, _OUTER_ABS_FLOOR),
    )
    return D.pair_best(D.deriv(lifted, 1), probe, outer).value
