from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from cloudcast.grids import CADENCE, LabelGrid, LabelSequence, Taxonomy

BASE_TS = datetime(2017, 1, 1, tzinfo=timezone.utc)


def ts(index: int) -> datetime:
    return BASE_TS + index * CADENCE


def make_grid(labels, taxonomy=Taxonomy.FULL11, index=0) -> LabelGrid:
    return LabelGrid(np.asarray(labels, dtype=np.uint8), taxonomy, ts(index))


def make_seq(arrays, taxonomy=Taxonomy.FULL11, indices=None) -> LabelSequence:
    if indices is None:
        indices = range(len(arrays))
    return LabelSequence(
        tuple(make_grid(a, taxonomy, i) for a, i in zip(arrays, indices))
    )


def constant_seq(value, shape, count, taxonomy=Taxonomy.REDUCED4) -> LabelSequence:
    frame = np.full(shape, value, dtype=np.uint8)
    return make_seq([frame] * count, taxonomy)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
