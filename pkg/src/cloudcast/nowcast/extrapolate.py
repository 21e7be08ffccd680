"""Forecasters: flow-based extrapolation and the persistence baseline."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np
from scipy import ndimage

from .. import _kernels as kernels
from ..grids import CADENCE, LabelGrid, Taxonomy
from .tvl1 import FlowField, TvL1Params, estimate_flow

HORIZON = 16


def to_intensity(grid: LabelGrid, sigma: float = 0.0) -> np.ndarray:
    """Map reduced class codes to intensities code/3 in [0, 1].

    Optional Gaussian pre-smoothing (sigma in pixels) is applied afterward.
    """
    if grid.taxonomy is not Taxonomy.REDUCED4:
        raise ValueError("to_intensity expects the reduced 4-class taxonomy")
    plane = grid.labels.astype(np.float32) / np.float32(3.0)
    if sigma > 0:
        plane = ndimage.gaussian_filter(plane, sigma, mode="nearest").astype(np.float32)
    return plane


def round_to_class(plane: np.ndarray) -> np.ndarray:
    """Quantize an intensity plane back to the nearest class code 0-3."""
    return np.clip(np.rint(plane * 3.0), 0, 3).astype(np.uint8)


@dataclass(frozen=True)
class ForecastSet:
    """Predicted frames from one origin time at +15 min increments.

    ``probabilities``, when present, is a (steps, 4, H, W) tensor whose class
    axis sums to one and whose argmax matches the frame labels. Deterministic
    forecasters leave it as None; one_hot_probabilities() materializes the
    degenerate tensor on demand.
    """

    origin: datetime
    frames: tuple
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a forecast needs at least one frame")
        for k, f in enumerate(frames):
            expected = self.origin + (k + 1) * CADENCE
            if f.timestamp != expected:
                raise ValueError(
                    f"frame {k} stamped {f.timestamp}, expected {expected}"
                )
        object.__setattr__(self, "frames", frames)
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=np.float32)
            n_classes = frames[0].taxonomy.cardinality
            want = (len(frames), n_classes) + frames[0].labels.shape
            if p.shape != want:
                raise ValueError(f"probability tensor shape {p.shape}, expected {want}")
            if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
                raise ValueError("class probabilities must sum to 1")
            labels = np.stack([f.labels for f in frames])
            if not np.array_equal(p.argmax(axis=1).astype(np.uint8), labels):
                raise ValueError("probabilities are not argmax-consistent with labels")
            object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return len(self.frames)

    def to_array(self) -> np.ndarray:
        return np.stack([f.labels for f in self.frames])

    def one_hot_probabilities(self) -> np.ndarray:
        """Degenerate per-class probabilities implied by the labels."""
        if self.probabilities is not None:
            return self.probabilities
        labels = self.to_array()
        n_classes = self.frames[0].taxonomy.cardinality
        eye = np.eye(n_classes, dtype=np.float32)
        return np.moveaxis(eye[labels], -1, 1)


def persistence_forecast(last_frame: LabelGrid, steps: int = HORIZON) -> ForecastSet:
    """Replicate the most recent observation across the horizon."""
    frames = tuple(
        LabelGrid(last_frame.labels, last_frame.taxonomy,
                  last_frame.timestamp + (k + 1) * CADENCE)
        for k in range(steps)
    )
    return ForecastSet(origin=last_frame.timestamp, frames=frames)


def invert_and_extrapolate(last_frame: LabelGrid, prev_frame: LabelGrid,
                           params: TvL1Params = TvL1Params(),
                           steps: int = HORIZON,
                           smoothing_sigma: float = 0.0) -> ForecastSet:
    """Forecast by advecting the latest frame with time-reversed flow.

    Flow is estimated from last_frame toward prev_frame, i.e. in reversed
    frame order, which makes backward-warping by it push content forward in
    time without numerically inverting the field. The same flow is applied
    at every step (re-estimating from quantized predictions would compound
    rounding noise), with bilinear edge-clamped sampling and re-quantization
    to the nearest class code after each step.
    """
    if last_frame.taxonomy is not Taxonomy.REDUCED4 or prev_frame.taxonomy is not Taxonomy.REDUCED4:
        raise ValueError("extrapolation expects the reduced 4-class taxonomy")
    if last_frame.timestamp - prev_frame.timestamp != CADENCE:
        raise ValueError("frames must be consecutive (15 minutes apart)")
    flow = estimate_flow(
        to_intensity(last_frame, smoothing_sigma),
        to_intensity(prev_frame, smoothing_sigma),
        params,
    )
    return extrapolate_with_flow(last_frame, flow, steps)


def extrapolate_with_flow(last_frame: LabelGrid, flow: FlowField,
                          steps: int = HORIZON) -> ForecastSet:
    """Advect a frame repeatedly by a fixed flow field, quantizing each step."""
    if last_frame.taxonomy is not Taxonomy.REDUCED4:
        raise ValueError("extrapolation expects the reduced 4-class taxonomy")
    if flow.shape != last_frame.labels.shape:
        raise ValueError("flow dimensions must match the frame")
    intensity = last_frame.labels.astype(np.float32) / np.float32(3.0)
    frames = []
    for k in range(steps):
        intensity = kernels.warp_bilinear(intensity, flow.u, flow.v)
        labels = round_to_class(intensity)
        intensity = labels.astype(np.float32) / np.float32(3.0)
        frames.append(
            LabelGrid(labels, last_frame.taxonomy,
                      last_frame.timestamp + (k + 1) * CADENCE)
        )
    return ForecastSet(origin=last_frame.timestamp, frames=tuple(frames))
