"""Sequence preprocessing: gap repair, temporal split, downsampling, cropping."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .grids import CADENCE, LabelGrid, LabelSequence

# Holes of this many frames or more (6 hours) are left unrepaired.
MAX_REPAIR_FRAMES = 24


@dataclass(frozen=True)
class GapRun:
    """One run of missing frames: [start, end] are the missing instants."""

    start: datetime
    end: datetime
    count: int
    repaired: bool


@dataclass(frozen=True)
class GapReport:
    runs: tuple

    @property
    def repaired_frames(self) -> int:
        return sum(r.count for r in self.runs if r.repaired)


@dataclass(frozen=True)
class SplitSpec:
    """A single temporal cut: boundary timestamp wins over the fraction."""

    train_fraction: float = 0.75
    boundary: datetime | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def repair_gaps(seq: LabelSequence):
    """Fill sub-6-hour holes with the nearest-in-time neighbor frame.

    An inserted frame at interpolation fraction a copies the earlier
    neighbor when a <= 0.5, else the later one. Class codes cannot be
    blended linearly, so nearest-in-time is the order-preserving stand-in
    for interpolation; original frames are never altered. Holes of 24+
    frames are reported but left open.
    """
    if len(seq) < 2:
        raise ValueError("gap repair needs at least two frames")
    frames = [seq.frames[0]]
    runs = []
    for prev, cur in zip(seq.frames, seq.frames[1:]):
        n_missing = (cur.timestamp - prev.timestamp) // CADENCE - 1
        if n_missing > 0:
            repaired = n_missing < MAX_REPAIR_FRAMES
            runs.append(
                GapRun(
                    start=prev.timestamp + CADENCE,
                    end=cur.timestamp - CADENCE,
                    count=int(n_missing),
                    repaired=repaired,
                )
            )
            if repaired:
                for i in range(1, n_missing + 1):
                    alpha = i / (n_missing + 1)
                    source = prev if alpha <= 0.5 else cur
                    frames.append(
                        LabelGrid(
                            source.labels,
                            source.taxonomy,
                            prev.timestamp + i * CADENCE,
                        )
                    )
        frames.append(cur)
    return LabelSequence(tuple(frames)), GapReport(tuple(runs))


def split(seq: LabelSequence, spec: SplitSpec):
    """Cut the sequence into a contiguous train prefix and test suffix."""
    if spec.boundary is not None:
        n_train = sum(1 for f in seq.frames if f.timestamp < spec.boundary)
    else:
        n_train = int(len(seq) * spec.train_fraction)
    if n_train <= 0 or n_train >= len(seq):
        raise ValueError(f"split leaves an empty side (train={n_train} of {len(seq)})")
    train = LabelSequence(seq.frames[:n_train])
    test = LabelSequence(seq.frames[n_train:])
    return train, test


def downsample_majority(seq: LabelSequence, factor: int) -> LabelSequence:
    """Reduce resolution by majority vote over factor x factor blocks.

    Ties break toward the smallest class code. Majority voting (rather than
    striding) keeps class frequencies comparable before and after.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return seq
    h, w = seq.frames[0].labels.shape
    if h % factor or w % factor:
        raise ValueError(f"dimensions {h}x{w} not divisible by factor {factor}")
    n_classes = seq.taxonomy.cardinality
    out_frames = []
    for frame in seq.frames:
        blocks = (
            frame.labels.reshape(h // factor, factor, w // factor, factor)
            .transpose(0, 2, 1, 3)
            .reshape(h // factor, w // factor, factor * factor)
        )
        counts = (blocks[..., None] == np.arange(n_classes, dtype=np.uint8)).sum(axis=2)
        modal = counts.argmax(axis=-1).astype(np.uint8)  # first max = smallest code
        out_frames.append(LabelGrid(modal, frame.taxonomy, frame.timestamp))
    return LabelSequence(tuple(out_frames))


def crop_center(seq: LabelSequence, out_h: int, out_w: int) -> LabelSequence:
    """Axis-centered crop with offsets floor((in - out) / 2)."""
    h, w = seq.frames[0].labels.shape
    if out_h > h or out_w > w or out_h <= 0 or out_w <= 0:
        raise ValueError(f"cannot crop {h}x{w} to {out_h}x{out_w}")
    r0 = (h - out_h) // 2
    c0 = (w - out_w) // 2
    return LabelSequence(
        tuple(
            LabelGrid(f.labels[r0:r0 + out_h, c0:c0 + out_w], f.taxonomy, f.timestamp)
            for f in seq.frames
        )
    )
