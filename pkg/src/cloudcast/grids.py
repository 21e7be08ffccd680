"""Raster cloud-label types, the 15-minute sequence container, and file I/O.

The on-disk interchange is a plain NPY array (T x H x W, uint8, C-order)
plus a JSON sidecar ``{"timestamps": ["2017-04-01T13:00:00Z", ...]}``.
Class maps render to 8-bit palette PNGs with a versioned palette so images
stay comparable across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

CADENCE = timedelta(minutes=15)

# Solar-zenith limits (degrees) separating the illumination regimes.
DAY_MAX_SOLAR_ZENITH = 80.0
NIGHT_MIN_SOLAR_ZENITH = 90.0


class Taxonomy(Enum):
    """Label alphabets: the full 11-class set or the 4-class height grouping."""

    FULL11 = "full11"
    REDUCED4 = "reduced4"

    @property
    def cardinality(self) -> int:
        return 11 if self is Taxonomy.FULL11 else 4


class Illumination(Enum):
    DAY = 0
    NIGHT = 1
    TWILIGHT = 2


# Palette version 1. Index order follows the class codes.
PALETTE_FULL11_V1 = (
    (20, 20, 40),      # 0 cloud-free / missing
    (120, 80, 40),     # 1 very low
    (180, 120, 60),    # 2 low
    (220, 180, 80),    # 3 medium
    (160, 200, 220),   # 4 high opaque
    (220, 240, 255),   # 5 very high opaque
    (120, 140, 120),   # 6 fractional
    (140, 80, 160),    # 7 semitransparent thin
    (170, 110, 190),   # 8 semitransparent moderately thick
    (200, 140, 220),   # 9 semitransparent thick
    (90, 60, 120),     # 10 semitransparent above low/medium
)
PALETTE_REDUCED4_V1 = (
    (20, 20, 40),      # 0 no cloud
    (180, 120, 60),    # 1 low
    (220, 180, 80),    # 2 medium
    (200, 220, 240),   # 3 high
)


def _check_timestamp(ts: datetime) -> None:
    if ts.tzinfo is None or ts.utcoffset() != timedelta(0):
        raise ValueError(f"timestamp must be UTC-aware: {ts!r}")
    if ts.minute not in (0, 15, 30, 45) or ts.second != 0 or ts.microsecond != 0:
        raise ValueError(f"timestamp not aligned to the 15-minute grid: {ts!r}")


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class LabelGrid:
    """A single time-stamped 2-D raster of cloud-class codes."""

    labels: np.ndarray
    taxonomy: Taxonomy
    timestamp: datetime

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ValueError("labels must be a non-empty 2-D array")
        if labels.dtype != np.uint8:
            if not np.issubdtype(labels.dtype, np.integer):
                raise ValueError("labels must be an integer array")
            labels = labels.astype(np.uint8)
        if labels.max(initial=0) >= self.taxonomy.cardinality:
            raise ValueError(
                f"label {int(labels.max())} outside taxonomy {self.taxonomy.value}"
            )
        _check_timestamp(self.timestamp)
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LabelGrid):
            return NotImplemented
        return (
            self.taxonomy is other.taxonomy
            and self.timestamp == other.timestamp
            and self.labels.shape == other.labels.shape
            and bool(np.array_equal(self.labels, other.labels))
        )

    def __hash__(self):
        return hash((self.taxonomy, self.timestamp, self.labels.tobytes()))


@dataclass(frozen=True, eq=False)
class LabelSequence:
    """Ordered frames at a fixed 15-minute cadence; holes are allowed until
    gap repair but must land on the cadence grid."""

    frames: tuple

    cadence = CADENCE

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("sequence must contain at least one frame")
        first = frames[0]
        for prev, cur in zip(frames, frames[1:]):
            if cur.labels.shape != first.labels.shape:
                raise ValueError("all frames must share dimensions")
            if cur.taxonomy is not first.taxonomy:
                raise ValueError("all frames must share a taxonomy")
            delta = cur.timestamp - prev.timestamp
            if delta <= timedelta(0):
                raise ValueError("timestamps must be strictly increasing")
            if delta % CADENCE != timedelta(0):
                raise ValueError(f"timestamp step {delta} is off the 15-minute grid")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i) -> LabelGrid:
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    def __eq__(self, other):
        if not isinstance(other, LabelSequence):
            return NotImplemented
        return self.frames == other.frames

    @property
    def taxonomy(self) -> Taxonomy:
        return self.frames[0].taxonomy

    @property
    def timestamps(self) -> list:
        return [f.timestamp for f in self.frames]

    def to_array(self) -> np.ndarray:
        """Stack all frames into a T x H x W uint8 array."""
        return np.stack([f.labels for f in self.frames])


@dataclass(frozen=True)
class ChannelStack:
    """Per-pixel brightness temperatures (K) and 0.6 um reflectance.

    A plane set to None marks that channel as unavailable for the scene.
    """

    bt073: np.ndarray | None = None
    bt087: np.ndarray | None = None
    bt108: np.ndarray | None = None
    bt120: np.ndarray | None = None
    refl006: np.ndarray | None = None

    def __post_init__(self):
        shape = None
        for name in ("bt073", "bt087", "bt108", "bt120"):
            plane = getattr(self, name)
            if plane is None:
                continue
            plane = np.asarray(plane, dtype=np.float64)
            if np.nanmin(plane) < 150.0 or np.nanmax(plane) > 350.0:
                raise ValueError(f"{name} outside the plausible 150-350 K range")
            shape = self._check_shape(name, plane, shape)
            object.__setattr__(self, name, _freeze(plane))
        if self.refl006 is not None:
            refl = np.asarray(self.refl006, dtype=np.float64)
            if np.nanmin(refl) < 0.0 or np.nanmax(refl) > 1.0:
                raise ValueError("refl006 must lie in [0, 1]")
            self._check_shape("refl006", refl, shape)
            object.__setattr__(self, "refl006", _freeze(refl))
        if all(getattr(self, n) is None for n in ("bt073", "bt087", "bt108", "bt120", "refl006")):
            raise ValueError("at least one channel plane is required")

    @staticmethod
    def _check_shape(name, plane, shape):
        if plane.ndim != 2:
            raise ValueError(f"{name} must be 2-D")
        if shape is not None and plane.shape != shape:
            raise ValueError("all channel planes must share dimensions")
        return plane.shape

    def available(self, name: str) -> bool:
        return getattr(self, name) is not None

    @property
    def shape(self):
        for name in ("bt073", "bt087", "bt108", "bt120", "refl006"):
            plane = getattr(self, name)
            if plane is not None:
                return plane.shape
        raise ValueError("empty stack")


@dataclass(frozen=True)
class GeoContext:
    """Viewing geometry and the illumination regime derived from it."""

    solar_zenith: np.ndarray
    satellite_zenith: np.ndarray
    land_sea: np.ndarray | None = None
    regime: np.ndarray = field(init=False)

    def __post_init__(self):
        sza = np.asarray(self.solar_zenith, dtype=np.float64)
        vza = np.asarray(self.satellite_zenith, dtype=np.float64)
        if sza.shape != vza.shape or sza.ndim != 2:
            raise ValueError("zenith-angle planes must be 2-D and share dimensions")
        for name, a in (("solar_zenith", sza), ("satellite_zenith", vza)):
            if a.min() < 0.0 or a.max() > 180.0:
                raise ValueError(f"{name} must lie in [0, 180] degrees")
        regime = np.full(sza.shape, Illumination.TWILIGHT.value, dtype=np.uint8)
        regime[sza <= DAY_MAX_SOLAR_ZENITH] = Illumination.DAY.value
        regime[sza > NIGHT_MIN_SOLAR_ZENITH] = Illumination.NIGHT.value
        object.__setattr__(self, "solar_zenith", _freeze(sza))
        object.__setattr__(self, "satellite_zenith", _freeze(vza))
        object.__setattr__(self, "regime", _freeze(regime))
        if self.land_sea is not None:
            mask = np.asarray(self.land_sea, dtype=bool)
            if mask.shape != sza.shape:
                raise ValueError("land_sea mask must match the zenith planes")
            object.__setattr__(self, "land_sea", _freeze(mask))


def _format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_timestamp(s: str) -> datetime:
    ts = datetime.fromisoformat(s.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_sequence(path, meta_path, taxonomy: Taxonomy = Taxonomy.FULL11) -> LabelSequence:
    """Read an NPY label cube and its JSON timestamp sidecar.

    The taxonomy is forced to FULL11 whenever a label above 3 occurs;
    otherwise the declared ``taxonomy`` applies.
    """
    with open(path, "rb") as f:
        cube = np.load(f, allow_pickle=False)
    if cube.ndim != 3:
        raise ValueError(f"expected a T x H x W array, got shape {cube.shape}")
    if cube.dtype != np.uint8:
        raise ValueError(f"expected uint8 labels, got {cube.dtype}")
    if cube.max(initial=0) > 10:
        raise ValueError(f"label {int(cube.max())} exceeds the 0-10 class range")
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    stamps = meta["timestamps"]
    if len(stamps) != cube.shape[0]:
        raise ValueError(
            f"{cube.shape[0]} frames but {len(stamps)} timestamps in sidecar"
        )
    if (cube > 3).any():
        taxonomy = Taxonomy.FULL11
    frames = tuple(
        LabelGrid(cube[t], taxonomy, _parse_timestamp(stamps[t]))
        for t in range(cube.shape[0])
    )
    return LabelSequence(frames)


def save_sequence(seq: LabelSequence, path, meta_path) -> None:
    """Write the NPY + JSON pair; byte-deterministic for identical input."""
    with open(path, "wb") as f:
        np.save(f, seq.to_array())
    meta = {"timestamps": [_format_timestamp(t) for t in seq.timestamps]}
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
        f.write("\n")


def palette_for(taxonomy: Taxonomy):
    return PALETTE_FULL11_V1 if taxonomy is Taxonomy.FULL11 else PALETTE_REDUCED4_V1


def render_frame(grid: LabelGrid, path) -> None:
    """Render one class map to an 8-bit palette PNG (deterministic bytes)."""
    img = Image.fromarray(np.asarray(grid.labels), mode="P")
    flat = []
    for rgb in palette_for(grid.taxonomy):
        flat.extend(rgb)
    img.putpalette(flat)
    img.save(path, format="PNG")
