"""Dense optical flow by duality-based TV-L1 minimization.

The energy is lambda * sum |rho(u)| + TV(u, v) with rho the linearized
brightness-constancy residual. The solver runs a coarse-to-fine pyramid;
at each level the moving image is repeatedly warped by the current flow
and a fix-point alternation between a pointwise shrinkage step and dual
ascent on the total-variation term refines the field. The hot per-warp
iteration lives in the kernel backend (compiled when available).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from .. import _kernels as kernels

# Levels whose short side would fall below this are dropped from the pyramid.
MIN_LEVEL_SIZE = 16

# Intensities are rescaled jointly to [0, 255] before solving so that the
# classic parameter scale (lambda ~ 0.15) behaves as expected regardless of
# the input range.
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement in pixels per frame (u right, v down)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float32)
        v = np.ascontiguousarray(self.v, dtype=np.float32)
        if u.shape != v.shape or u.ndim != 2:
            raise ValueError("u and v must be 2-D arrays of equal shape")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValueError("flow must be finite everywhere")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def shape(self):
        return self.u.shape


@dataclass(frozen=True)
class TvL1Params:
    """The eleven solver parameters.

    tau               dual ascent step
    lambda_           data-attachment weight (JSON key "lambda")
    theta             coupling tightness between flow and auxiliary variable
    nscales           pyramid levels requested
    scale_step        inter-level downscale factor
    warps             relinearizations per level
    epsilon           RMS-update stopping tolerance
    inner_iterations  dual ascent steps per shrinkage round
    outer_iterations  shrinkage rounds per warp
    gamma             brightness-offset (illumination) term weight
    median_filter_radius  flow median filter after each warp (0 disables)
    """

    tau: float = 0.25
    lambda_: float = 0.15
    theta: float = 0.3
    nscales: int = 5
    scale_step: float = 0.5
    warps: int = 5
    epsilon: float = 0.01
    inner_iterations: int = 30
    outer_iterations: int = 10
    gamma: float = 0.0
    median_filter_radius: int = 2

    def __post_init__(self):
        if min(self.tau, self.lambda_, self.theta, self.epsilon) <= 0:
            raise ValueError("tau, lambda, theta, epsilon must be positive")
        if not 0.0 < self.scale_step < 1.0:
            raise ValueError("scale_step must lie strictly between 0 and 1")
        for name in ("nscales", "warps", "inner_iterations", "outer_iterations"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.median_filter_radius < 0:
            raise ValueError("median_filter_radius must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TvL1Params":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TV-L1 parameters: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "TvL1Params":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    @property
    def n_parameters(self) -> int:
        return len(fields(self))


def _resize_bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Area-aligned bilinear resample (pixel centers at half-integers)."""
    zy = img.shape[0] / h
    zx = img.shape[1] / w
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    coords = np.stack([(yy + 0.5) * zy - 0.5, (xx + 0.5) * zx - 0.5])
    out = ndimage.map_coordinates(img.astype(np.float64), coords, order=1, mode="nearest")
    return out.astype(np.float32)


def _pyramid_shapes(h: int, w: int, nscales: int, scale_step: float):
    shapes = [(h, w)]
    for s in range(1, nscales):
        sh = round(h * scale_step ** s)
        sw = round(w * scale_step ** s)
        if min(sh, sw) < MIN_LEVEL_SIZE:
            break
        shapes.append((sh, sw))
    return shapes


def _build_pyramid(img: np.ndarray, shapes, scale_step: float):
    sigma = 0.6 * np.sqrt(1.0 / scale_step ** 2 - 1.0)
    levels = [img]
    for shape in shapes[1:]:
        blurred = ndimage.gaussian_filter(levels[-1], sigma, mode="nearest")
        levels.append(_resize_bilinear(blurred, *shape))
    return levels


def _central_gradients(img: np.ndarray):
    gy, gx = np.gradient(img.astype(np.float64))
    return gx.astype(np.float32), gy.astype(np.float32)


def estimate_flow(from_plane: np.ndarray, to_plane: np.ndarray,
                  params: TvL1Params = TvL1Params()) -> FlowField:
    """Estimate flow f with from(x) ~= to(x + f(x)).

    A jointly constant pair is degenerate and yields exactly zero flow. Flow
    starts from zero at the coarsest level, so the result is deterministic.
    """
    i0 = np.ascontiguousarray(from_plane, dtype=np.float32)
    i1 = np.ascontiguousarray(to_plane, dtype=np.float32)
    if i0.shape != i1.shape or i0.ndim != 2:
        raise ValueError("input planes must be 2-D and share dimensions")

    lo = min(float(i0.min()), float(i1.min()))
    hi = max(float(i0.max()), float(i1.max()))
    if hi - lo <= 1e-12:
        zero = np.zeros_like(i0)
        return FlowField(zero, zero.copy())
    scale = np.float32(INTENSITY_SCALE / (hi - lo))
    i0 = (i0 - np.float32(lo)) * scale
    i1 = (i1 - np.float32(lo)) * scale

    shapes = _pyramid_shapes(*i0.shape, params.nscales, params.scale_step)
    pyr0 = _build_pyramid(i0, shapes, params.scale_step)
    pyr1 = _build_pyramid(i1, shapes, params.scale_step)

    u = np.zeros(shapes[-1], dtype=np.float32)
    v = np.zeros(shapes[-1], dtype=np.float32)
    for level in range(len(shapes) - 1, -1, -1):
        i0s, i1s = pyr0[level], pyr1[level]
        i1x, i1y = _central_gradients(i1s)
        w_illum = np.zeros_like(u) if params.gamma > 0 else None
        for _ in range(params.warps):
            i1w = kernels.warp_bilinear(i1s, u, v)
            i1wx = kernels.warp_bilinear(i1x, u, v)
            i1wy = kernels.warp_bilinear(i1y, u, v)
            kernels.solve_warp(
                i0s, i1w, i1wx, i1wy, u, v, w_illum,
                params.lambda_, params.theta, params.tau, params.epsilon,
                params.gamma, params.outer_iterations, params.inner_iterations,
            )
            if params.median_filter_radius > 0:
                u = kernels.median_filter(u, params.median_filter_radius)
                v = kernels.median_filter(v, params.median_filter_radius)
        if level > 0:
            nh, nw = shapes[level - 1]
            u = _resize_bilinear(u, nh, nw) * np.float32(nw / shapes[level][1])
            v = _resize_bilinear(v, nh, nw) * np.float32(nh / shapes[level][0])
    return FlowField(u, v)
