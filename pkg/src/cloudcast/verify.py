"""Categorical forecast verification and synthetic ground-truth generation.

Scores cover per-pixel accuracy breakdowns, frequency bias, the multi-class
Brier score and skill score, plus SSIM and PSNR on class maps normalized to
[0, 1] intensities. The synthetic generator advects an analytic scalar field
by a known flow so every estimate can be checked against an exact oracle.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

import numpy as np
from scipy import ndimage

from .grids import CADENCE, LabelGrid, LabelSequence, Taxonomy
from .nowcast.extrapolate import ForecastSet
from .nowcast.tvl1 import FlowField

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_CAP_DB = 100.0
PSNR_MSE_FLOOR = 1e-10

SYNTHETIC_START = datetime(2017, 1, 1, tzinfo=timezone.utc)


# ---------------------------------------------------------------------------
# probability container


@dataclass(frozen=True)
class ProbForecast:
    """Probability tensor f and one-hot truth y, both (N, M, H, W)."""

    f: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if f.shape != y.shape or f.ndim != 4:
            raise ValueError("f and y must be 4-D tensors of equal shape")
        if np.abs(f.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("class probabilities must sum to 1 (tolerance 1e-9)")
        if not (np.isin(y, (0.0, 1.0)).all() and (y.sum(axis=1) == 1.0).all()):
            raise ValueError("y must be exactly one-hot")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "y", y)


def prob_forecast_from_labels(pred: np.ndarray, truth: np.ndarray,
                              n_classes: int = 4) -> ProbForecast:
    """Degenerate one-hot probabilities for deterministic label forecasts."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    eye = np.eye(n_classes, dtype=np.float64)
    return ProbForecast(
        f=np.moveaxis(eye[pred], -1, 1),
        y=np.moveaxis(eye[truth], -1, 1),
    )


# ---------------------------------------------------------------------------
# categorical scores


@dataclass(frozen=True)
class AccuracyBreakdown:
    mean: float
    per_class: tuple     # one entry per class code, None when absent in truth
    per_step: tuple


def _as_label_array(obj) -> np.ndarray:
    if isinstance(obj, (ForecastSet, LabelSequence)):
        return obj.to_array()
    if isinstance(obj, LabelGrid):
        return obj.labels[None]
    if isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], LabelGrid):
        return np.stack([g.labels for g in obj])
    arr = np.asarray(obj)
    if arr.ndim == 2:
        arr = arr[None]
    return arr


def accuracy_report(pred, truth, n_classes: int = 4) -> AccuracyBreakdown:
    """Mean, per-class (conditioned on truth), and per-step accuracy."""
    p = _as_label_array(pred)
    t = _as_label_array(truth)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != truth shape {t.shape}")
    hits = p == t
    per_step = tuple(float(h.mean()) for h in hits)
    per_class = []
    for k in range(n_classes):
        sel = t == k
        per_class.append(float(hits[sel].mean()) if sel.any() else None)
    return AccuracyBreakdown(
        mean=float(hits.mean()), per_class=tuple(per_class), per_step=per_step
    )


def frequency_bias(pred, truth, n_classes: int = 4) -> float:
    """Macro-average over truth-present classes of predicted/observed counts.

    Values above one mean the forecaster overcalls events, below one that it
    undercalls them.
    """
    p = _as_label_array(pred)
    t = _as_label_array(truth)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != truth shape {t.shape}")
    if t.size == 0:
        raise ValueError("empty truth")
    ratios = []
    for k in range(n_classes):
        observed = int((t == k).sum())
        if observed == 0:
            continue
        ratios.append(int((p == k).sum()) / observed)
    if not ratios:
        raise ValueError("no class present in truth")
    return float(np.mean(ratios))


def brier_score(pf: ProbForecast) -> float:
    """Mean squared probability error over steps, classes, and pixels."""
    return float(np.mean((pf.f - pf.y) ** 2))


def brier_skill_score(bs_model: float, bs_reference: float):
    """1 - BS_model / BS_reference; None when the reference score is zero."""
    if bs_reference <= 0.0:
        return None
    return 1.0 - bs_model / bs_reference


# ---------------------------------------------------------------------------
# image-quality scores on class-code intensities


def _to_intensity_plane(frame) -> np.ndarray:
    if isinstance(frame, LabelGrid):
        frame = frame.labels
    return np.asarray(frame, dtype=np.float64) / 3.0


def _gaussian_window_filter(img: np.ndarray) -> np.ndarray:
    radius = SSIM_WINDOW // 2
    return ndimage.gaussian_filter(img, SSIM_SIGMA, mode="nearest",
                                   truncate=radius / SSIM_SIGMA)


def ssim(pred_frame, truth_frame) -> float:
    """Structural similarity on code/3 intensities.

    11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1,
    averaged over fully interior window positions.
    """
    a = _to_intensity_plane(pred_frame)
    b = _to_intensity_plane(truth_frame)
    if a.shape != b.shape:
        raise ValueError("frames must share dimensions")
    radius = SSIM_WINDOW // 2
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"frames must be at least {SSIM_WINDOW} pixels per side")

    mu_a = _gaussian_window_filter(a)
    mu_b = _gaussian_window_filter(b)
    var_a = _gaussian_window_filter(a * a) - mu_a * mu_a
    var_b = _gaussian_window_filter(b * b) - mu_b * mu_b
    cov = _gaussian_window_filter(a * b) - mu_a * mu_b

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    interior = ssim_map[radius:-radius, radius:-radius]
    return float(interior.mean())


def psnr(pred_frame, truth_frame) -> float:
    """Peak signal-to-noise ratio in dB on code/3 intensities, capped at 100."""
    a = _to_intensity_plane(pred_frame)
    b = _to_intensity_plane(truth_frame)
    if a.shape != b.shape:
        raise ValueError("frames must share dimensions")
    mse = float(np.mean((a - b) ** 2))
    if mse < PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return 10.0 * math.log10(1.0 / mse)


# ---------------------------------------------------------------------------
# synthetic oracle


class FieldType(Enum):
    BANDLIMITED_NOISE = "bandlimited_noise"
    GAUSSIAN_BLOBS = "gaussian_blobs"


@dataclass(frozen=True)
class Translation:
    vx: float
    vy: float


@dataclass(frozen=True)
class Rotation:
    center: tuple
    omega: float    # radians per frame


@dataclass(frozen=True)
class SyntheticSpec:
    field_type: FieldType = FieldType.BANDLIMITED_NOISE
    flow: object = Translation(0.0, 0.0)
    grid_size: tuple = (128, 128)
    frame_count: int = 2
    breakpoints: tuple = (0.25, 0.5, 0.75)
    seed: int = 0

    def __post_init__(self):
        h, w = self.grid_size
        if h <= 0 or w <= 0 or self.frame_count < 1:
            raise ValueError("grid_size and frame_count must be positive")
        bp = tuple(self.breakpoints)
        if not all(0.0 < a < 1.0 for a in bp) or list(bp) != sorted(set(bp)):
            raise ValueError("breakpoints must be strictly increasing in (0, 1)")
        object.__setattr__(self, "breakpoints", bp)


def _analytic_field(spec: SyntheticSpec, rng: np.random.Generator):
    """A smooth scalar field evaluable at arbitrary (y, x) coordinates."""
    h, w = spec.grid_size
    if spec.field_type is FieldType.BANDLIMITED_NOISE:
        n_modes, cutoff = 24, 6.0
        kx = rng.uniform(-cutoff, cutoff, n_modes)
        ky = rng.uniform(-cutoff, cutoff, n_modes)
        amp = rng.normal(0.0, 1.0, n_modes) / math.sqrt(n_modes)
        phase = rng.uniform(0.0, 2.0 * np.pi, n_modes)

        def field(y, x):
            val = np.zeros(np.broadcast(y, x).shape)
            for m in range(n_modes):
                val += amp[m] * np.cos(
                    2.0 * np.pi * (kx[m] * x / w + ky[m] * y / h) + phase[m]
                )
            return val

    else:
        n_blobs = 12
        cy = rng.uniform(0, h, n_blobs)
        cx = rng.uniform(0, w, n_blobs)
        sig = rng.uniform(min(h, w) / 16, min(h, w) / 6, n_blobs)
        amp = rng.choice((-1.0, 1.0), n_blobs) * rng.uniform(0.5, 1.5, n_blobs)

        def field(y, x):
            val = np.zeros(np.broadcast(y, x).shape)
            for m in range(n_blobs):
                val += amp[m] * np.exp(
                    -((y - cy[m]) ** 2 + (x - cx[m]) ** 2) / (2.0 * sig[m] ** 2)
                )
            return val

    return field


def _frame_coordinates(spec: SyntheticSpec, k: int):
    """Source coordinates of frame k under the inverse of k flow steps."""
    h, w = spec.grid_size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    flow = spec.flow
    if isinstance(flow, Translation):
        return yy - k * flow.vy, xx - k * flow.vx
    if isinstance(flow, Rotation):
        cy, cx = flow.center
        angle = -k * flow.omega
        dy, dx = yy - cy, xx - cx
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        return cy + sin_a * dx + cos_a * dy, cx + cos_a * dx - sin_a * dy
    raise ValueError(f"unsupported flow type: {flow!r}")


def _true_flow(spec: SyntheticSpec) -> FlowField:
    h, w = spec.grid_size
    flow = spec.flow
    if isinstance(flow, Translation):
        u = np.full((h, w), flow.vx, dtype=np.float32)
        v = np.full((h, w), flow.vy, dtype=np.float32)
        return FlowField(u, v)
    cy, cx = flow.center
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    cos_a, sin_a = math.cos(flow.omega), math.sin(flow.omega)
    u = cos_a * dx - sin_a * dy + cx - xx
    v = sin_a * dx + cos_a * dy + cy - yy
    return FlowField(u.astype(np.float32), v.astype(np.float32))


def _max_displacement(spec: SyntheticSpec) -> float:
    truth = _true_flow(spec)
    return float(np.sqrt(truth.u.astype(np.float64) ** 2
                         + truth.v.astype(np.float64) ** 2).max())


def generate_synthetic(spec: SyntheticSpec):
    """Seeded analytic field advected by a known flow, quantized to 4 classes.

    Returns the LabelSequence and the exact per-frame FlowField. Quantile
    breakpoints come from the first frame and apply to all frames, so class
    boundaries advect with the field.
    """
    h, w = spec.grid_size
    if _max_displacement(spec) >= min(h, w) / 8.0:
        raise ValueError("per-frame displacement must stay below grid/8")
    rng = np.random.default_rng(spec.seed)
    field = _analytic_field(spec, rng)

    first = field(*_frame_coordinates(spec, 0))
    thresholds = np.quantile(first, spec.breakpoints)
    frames = []
    for k in range(spec.frame_count):
        values = field(*_frame_coordinates(spec, k))
        labels = np.digitize(values, thresholds).astype(np.uint8)
        frames.append(
            LabelGrid(labels, Taxonomy.REDUCED4, SYNTHETIC_START + k * CADENCE)
        )
    return LabelSequence(tuple(frames)), _true_flow(spec)


def endpoint_error(estimated: FlowField, truth: FlowField) -> float:
    """Mean Euclidean distance between estimated and true flow vectors."""
    if estimated.shape != truth.shape:
        raise ValueError("flow fields must share dimensions")
    du = estimated.u.astype(np.float64) - truth.u.astype(np.float64)
    dv = estimated.v.astype(np.float64) - truth.v.astype(np.float64)
    return float(np.mean(np.sqrt(du * du + dv * dv)))


# ---------------------------------------------------------------------------
# aggregate report


@dataclass(frozen=True)
class MetricsReport:
    mean_accuracy: float
    per_class_accuracy: tuple
    per_step_accuracy: tuple
    frequency_bias: float
    brier_score: float
    brier_skill_score: float | None
    ssim: float
    psnr: float

    def __post_init__(self):
        for name in ("mean_accuracy",):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {value}")
        m = len(self.per_class_accuracy)
        if not 0.0 <= self.brier_score <= 2.0 * (m - 1) / m:
            raise ValueError(f"brier score {self.brier_score} outside its range")
        if not -1.0 <= self.ssim <= 1.0:
            raise ValueError(f"ssim {self.ssim} outside [-1, 1]")

    def to_dict(self, config: dict | None = None) -> dict:
        d = {
            "mean_accuracy": self.mean_accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "per_step_accuracy": list(self.per_step_accuracy),
            "frequency_bias": self.frequency_bias,
            "brier_score": self.brier_score,
            "brier_skill_score": self.brier_skill_score,
            "ssim": self.ssim,
            "psnr": self.psnr,
        }
        if config is not None:
            d["config"] = config
        return d

    def write_json(self, path, config: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(config), f, indent=2)
            f.write("\n")

    def write_per_step_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "accuracy"])
            for step, acc in enumerate(self.per_step_accuracy, start=1):
                writer.writerow([step, f"{acc:.6f}"])


def evaluate_forecast(pred, truth, reference=None, n_classes: int = 4) -> MetricsReport:
    """Assemble the full verification report for one forecast.

    ``reference`` (another forecast over the same truth, normally the
    persistence baseline) enables the skill score; without it the skill
    score is reported as absent.
    """
    p = _as_label_array(pred)
    t = _as_label_array(truth)
    acc = accuracy_report(p, t, n_classes)
    bias = frequency_bias(p, t, n_classes)
    if isinstance(pred, ForecastSet) and pred.probabilities is not None:
        pf = ProbForecast(pred.probabilities.astype(np.float64),
                          prob_forecast_from_labels(t, t, n_classes).y)
    else:
        pf = prob_forecast_from_labels(p, t, n_classes)
    bs = brier_score(pf)
    bss = None
    if reference is not None:
        r = _as_label_array(reference)
        bs_ref = brier_score(prob_forecast_from_labels(r, t, n_classes))
        bss = brier_skill_score(bs, bs_ref)
    ssim_vals = [ssim(p[k], t[k]) for k in range(p.shape[0])]
    psnr_vals = [psnr(p[k], t[k]) for k in range(p.shape[0])]
    return MetricsReport(
        mean_accuracy=acc.mean,
        per_class_accuracy=acc.per_class,
        per_step_accuracy=acc.per_step,
        frequency_bias=bias,
        brier_score=bs,
        brier_skill_score=bss,
        ssim=float(np.mean(ssim_vals)),
        psnr=float(np.mean(psnr_vals)),
    )
