"""Per-pixel cloud typing from brightness temperatures and NWP temperatures.

Height separation uses four NWP-derived temperature thresholds tested against
the 10.8 um brightness temperature. Opacity separation uses split-window
brightness-temperature differences, a daytime reflectance veto, and a
water-vapor-channel test for thin cloud above low or medium layers. The exact
operational threshold tables are proprietary, so every opacity constant lives
in :class:`OpacityConfig` and can be overridden from JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from enum import Enum

import numpy as np

from .grids import (ChannelStack, GeoContext, Illumination, LabelGrid,
                    LabelSequence, Taxonomy, _freeze)

UNIX_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# Full-taxonomy class codes.
CLOUD_FREE = 0
VERY_LOW = 1
LOW = 2
MEDIUM = 3
HIGH = 4
VERY_HIGH = 5
FRACTIONAL = 6
SEMI_THIN = 7
SEMI_MODERATE = 8
SEMI_THICK = 9
SEMI_ABOVE_LOW = 10

# Full class -> height-grouped class (0 none, 1 low, 2 medium, 3 high).
REDUCTION_TABLE = np.array([0, 1, 1, 2, 3, 3, 1, 3, 3, 3, 3], dtype=np.uint8)


class HeightClass(Enum):
    VERY_LOW = VERY_LOW
    LOW = LOW
    MEDIUM = MEDIUM
    HIGH = HIGH
    VERY_HIGH = VERY_HIGH


class OpacityClass(Enum):
    OPAQUE = "opaque"
    FRACTIONAL = "fractional"
    SEMI_THIN = "semi_thin"
    SEMI_MODERATE = "semi_moderate"
    SEMI_THICK = "semi_thick"
    SEMI_ABOVE_LOW = "semi_above_low"


@dataclass(frozen=True)
class NwpFields:
    """Model air temperatures per pixel, in kelvin.

    ``tcwv`` (total column water vapor, kg/m2) is carried for completeness
    but not consumed by any implemented formula.
    """

    t_sfc: np.ndarray
    t_950: np.ndarray
    t_850: np.ndarray
    t_700: np.ndarray
    t_500: np.ndarray
    t_tropo: np.ndarray
    tcwv: np.ndarray | None = None

    def __post_init__(self):
        shape = None
        for f in fields(self):
            plane = getattr(self, f.name)
            if plane is None:
                continue
            plane = np.asarray(plane, dtype=np.float64)
            if plane.ndim != 2:
                raise ValueError(f"{f.name} must be 2-D")
            if shape is None:
                shape = plane.shape
            elif plane.shape != shape:
                raise ValueError("NWP planes must share dimensions")
            if f.name != "tcwv" and (plane.min() < 150.0 or plane.max() > 350.0):
                raise ValueError(f"{f.name} outside the plausible 150-350 K range")
            object.__setattr__(self, f.name, _freeze(plane))

    @property
    def shape(self):
        return self.t_500.shape


def raw_height_thresholds(t500, t700, t850, t_tropo):
    """Uncanonicalized (vh, hi, me, lo) kelvin thresholds from NWP temperatures.

    vh = 0.4*T500 + 0.6*T_tropo - 5
    hi = 0.5*T500 - 0.2*T700 + 178
    me = 0.8*T850 + 0.2*T700 - 8
    lo = 1.2*T850 - 0.2*T700 - 5
    """
    t500 = np.asarray(t500, dtype=np.float64)
    t700 = np.asarray(t700, dtype=np.float64)
    t850 = np.asarray(t850, dtype=np.float64)
    t_tropo = np.asarray(t_tropo, dtype=np.float64)
    vh = 0.4 * t500 + 0.6 * t_tropo - 5.0
    hi = 0.5 * t500 - 0.2 * t700 + 178.0
    me = 0.8 * t850 + 0.2 * t700 - 8.0
    lo = 1.2 * t850 - 0.2 * t700 - 5.0
    return vh, hi, me, lo


@dataclass(frozen=True)
class HeightThresholds:
    """Canonicalized per-pixel height thresholds, vh <= hi <= me <= lo.

    ``inverted`` flags pixels whose raw thresholds were out of order (thermal
    inversion) and had to be sorted.
    """

    vh: np.ndarray
    hi: np.ndarray
    me: np.ndarray
    lo: np.ndarray
    inverted: np.ndarray

    def at(self, row: int, col: int) -> "HeightThresholds":
        """Scalar view of one pixel, usable with classify_height."""
        return HeightThresholds(
            vh=self.vh[row, col],
            hi=self.hi[row, col],
            me=self.me[row, col],
            lo=self.lo[row, col],
            inverted=self.inverted[row, col],
        )


def compute_height_thresholds(nwp: NwpFields) -> HeightThresholds:
    """Evaluate the threshold formulas and sort each pixel's tuple ascending."""
    vh, hi, me, lo = raw_height_thresholds(nwp.t_500, nwp.t_700, nwp.t_850, nwp.t_tropo)
    stacked = np.stack([vh, hi, me, lo])
    ordered = np.sort(stacked, axis=0)
    inverted = ~np.all(stacked[:-1] <= stacked[1:], axis=0)
    return HeightThresholds(
        vh=ordered[0], hi=ordered[1], me=ordered[2], lo=ordered[3], inverted=inverted
    )


def classify_height(t108: float, thr: HeightThresholds) -> HeightClass:
    """Assign a height class from the 10.8 um brightness temperature.

    Intervals are half-open, closed on the lower temperature bound of each
    colder class, so exactly one branch fires for any finite input.
    """
    if t108 < thr.vh:
        return HeightClass.VERY_HIGH
    if t108 < thr.hi:
        return HeightClass.HIGH
    if t108 < thr.me:
        return HeightClass.MEDIUM
    if t108 < thr.lo:
        return HeightClass.LOW
    return HeightClass.VERY_LOW


@dataclass(frozen=True)
class OpacityConfig:
    """Tunable constants for the opacity/semitransparency separation.

    None of these values is authoritative; the operational tables are not
    public, so these defaults are placeholders with the right orders of
    magnitude, overridable via JSON (:meth:`from_json`).

    A pixel is semitransparent when either split-window difference reaches
    its minimum (daytime additionally requires 0.6 um reflectance below
    ``day_reflectance_max``; bright cloud tops veto the spectral test).
    Semitransparent pixels subtype on BTD(10.8-12.0) against
    ``subtype_breakpoints`` = (thin, moderate, thick): below the thin
    breakpoint is thin, below the moderate breakpoint is moderately thick,
    anything beyond is thick. The 7.3 um test declares low/medium cloud
    beneath when BT(10.8) - BT(7.3) >= secant_coefficient * sec(satellite
    zenith). Pixels missing semitransparency by less than
    ``fractional_btd_margin`` are fractional.
    """

    btd_87_108_min: float = 1.0
    btd_108_120_min: float = 1.5
    day_reflectance_max: float = 0.4
    fractional_btd_margin: float = 0.5
    subtype_breakpoints: tuple = (1.5, 3.5, 6.0)
    secant_coefficient: float = 2.0

    def __post_init__(self):
        bp = tuple(float(b) for b in self.subtype_breakpoints)
        if len(bp) != 3 or not (bp[0] < bp[1] < bp[2]):
            raise ValueError("subtype_breakpoints must be three strictly increasing values")
        if self.fractional_btd_margin < 0:
            raise ValueError("fractional_btd_margin must be >= 0")
        object.__setattr__(self, "subtype_breakpoints", bp)

    def to_dict(self) -> dict:
        return {
            "btd_87_108_min": self.btd_87_108_min,
            "btd_108_120_min": self.btd_108_120_min,
            "day_reflectance_max": self.day_reflectance_max,
            "fractional_btd_margin": self.fractional_btd_margin,
            "subtype_breakpoints": list(self.subtype_breakpoints),
            "secant_coefficient": self.secant_coefficient,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpacityConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown opacity config fields: {sorted(unknown)}")
        if "subtype_breakpoints" in d:
            d = dict(d, subtype_breakpoints=tuple(d["subtype_breakpoints"]))
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "OpacityConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _secant(satellite_zenith_deg: float) -> float:
    # clamp so near-limb geometry cannot blow the correction up
    c = math.cos(math.radians(min(float(satellite_zenith_deg), 89.0)))
    return min(1.0 / max(c, 1e-6), 10.0)


def classify_opacity(stack: ChannelStack, geo: GeoContext, cfg: OpacityConfig,
                     pixel) -> OpacityClass | None:
    """Opacity class of one already-cloudy pixel; None when the channels
    required for its illumination regime are unavailable."""
    i, j = pixel
    regime = Illumination(int(geo.regime[i, j]))
    if not (stack.available("bt087") and stack.available("bt108") and stack.available("bt120")):
        return None
    if regime is Illumination.DAY and not stack.available("refl006"):
        return None

    btd_87_108 = stack.bt087[i, j] - stack.bt108[i, j]
    btd_108_120 = stack.bt108[i, j] - stack.bt120[i, j]
    spectral = (btd_87_108 >= cfg.btd_87_108_min) or (btd_108_120 >= cfg.btd_108_120_min)
    if regime is Illumination.DAY:
        semitransparent = spectral and (stack.refl006[i, j] < cfg.day_reflectance_max)
    else:
        semitransparent = spectral

    if semitransparent:
        if stack.available("bt073"):
            threshold = cfg.secant_coefficient * _secant(geo.satellite_zenith[i, j])
            if stack.bt108[i, j] - stack.bt073[i, j] >= threshold:
                return OpacityClass.SEMI_ABOVE_LOW
        thin, moderate, _thick = cfg.subtype_breakpoints
        if btd_108_120 < thin:
            return OpacityClass.SEMI_THIN
        if btd_108_120 < moderate:
            return OpacityClass.SEMI_MODERATE
        return OpacityClass.SEMI_THICK

    near_1 = cfg.btd_87_108_min - cfg.fractional_btd_margin <= btd_87_108 < cfg.btd_87_108_min
    near_2 = cfg.btd_108_120_min - cfg.fractional_btd_margin <= btd_108_120 < cfg.btd_108_120_min
    if near_1 or near_2:
        return OpacityClass.FRACTIONAL
    return OpacityClass.OPAQUE


_HEIGHT_TO_CLASS = {
    HeightClass.VERY_LOW: VERY_LOW,
    HeightClass.LOW: LOW,
    HeightClass.MEDIUM: MEDIUM,
    HeightClass.HIGH: HIGH,
    HeightClass.VERY_HIGH: VERY_HIGH,
}

_OPACITY_TO_CLASS = {
    OpacityClass.FRACTIONAL: FRACTIONAL,
    OpacityClass.SEMI_THIN: SEMI_THIN,
    OpacityClass.SEMI_MODERATE: SEMI_MODERATE,
    OpacityClass.SEMI_THICK: SEMI_THICK,
    OpacityClass.SEMI_ABOVE_LOW: SEMI_ABOVE_LOW,
}


def segment_frame(stack: ChannelStack, nwp: NwpFields, geo: GeoContext,
                  cfg: OpacityConfig, cloud_mask: np.ndarray,
                  timestamp: datetime | None = None) -> LabelGrid:
    """Annotate one scene with the full 11-class taxonomy.

    ``cloud_mask`` marks cloudy pixels (cloud detection is an input, not
    computed here). Pixels whose regime lacks a required channel come out
    as class 0. The computation is pixel-local: it vectorizes the same
    decision path that classify_opacity and classify_height take.
    """
    cloud_mask = np.asarray(cloud_mask, dtype=bool)
    shape = stack.shape
    if cloud_mask.shape != shape or nwp.shape != shape or geo.regime.shape != shape:
        raise ValueError("segmentation inputs must share dimensions")
    if timestamp is None:
        timestamp = UNIX_EPOCH

    out = np.zeros(shape, dtype=np.uint8)
    have_core = stack.available("bt087") and stack.available("bt108") and stack.available("bt120")
    if not have_core:
        return LabelGrid(out, Taxonomy.FULL11, timestamp)

    day = geo.regime == Illumination.DAY.value
    classifiable = cloud_mask.copy()
    if not stack.available("refl006"):
        classifiable &= ~day

    btd_87_108 = stack.bt087 - stack.bt108
    btd_108_120 = stack.bt108 - stack.bt120
    spectral = (btd_87_108 >= cfg.btd_87_108_min) | (btd_108_120 >= cfg.btd_108_120_min)
    semi = spectral.copy()
    if stack.available("refl006"):
        semi &= ~day | (stack.refl006 < cfg.day_reflectance_max)
    semi &= classifiable

    # semitransparent subtypes
    thin, moderate, _thick = cfg.subtype_breakpoints
    sub = np.where(btd_108_120 < thin, SEMI_THIN,
                   np.where(btd_108_120 < moderate, SEMI_MODERATE, SEMI_THICK)).astype(np.uint8)
    if stack.available("bt073"):
        cosv = np.cos(np.radians(np.minimum(geo.satellite_zenith, 89.0)))
        secant = np.minimum(1.0 / np.maximum(cosv, 1e-6), 10.0)
        beneath = (stack.bt108 - stack.bt073) >= cfg.secant_coefficient * secant
        sub = np.where(beneath, np.uint8(SEMI_ABOVE_LOW), sub)
    out[semi] = sub[semi]

    near = ((btd_87_108 >= cfg.btd_87_108_min - cfg.fractional_btd_margin)
            & (btd_87_108 < cfg.btd_87_108_min)) | \
           ((btd_108_120 >= cfg.btd_108_120_min - cfg.fractional_btd_margin)
            & (btd_108_120 < cfg.btd_108_120_min))
    fractional = classifiable & ~semi & near
    out[fractional] = FRACTIONAL

    opaque = classifiable & ~semi & ~near
    if opaque.any():
        thr = compute_height_thresholds(nwp)
        t108 = stack.bt108
        height = np.full(shape, VERY_LOW, dtype=np.uint8)
        height[t108 < thr.lo] = LOW
        height[t108 < thr.me] = MEDIUM
        height[t108 < thr.hi] = HIGH
        height[t108 < thr.vh] = VERY_HIGH
        out[opaque] = height[opaque]

    return LabelGrid(out, Taxonomy.FULL11, timestamp)


def reduce_to_four(grid: LabelGrid) -> LabelGrid:
    """Collapse the 11 classes into the 4 height groups (exact count-preserving)."""
    if grid.taxonomy is not Taxonomy.FULL11:
        raise ValueError("reduce_to_four expects a full-taxonomy grid")
    return LabelGrid(REDUCTION_TABLE[grid.labels], Taxonomy.REDUCED4, grid.timestamp)


def reduce_sequence(seq: LabelSequence) -> LabelSequence:
    return LabelSequence(tuple(reduce_to_four(f) for f in seq.frames))
