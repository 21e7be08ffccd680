"""Deterministic grid search over TV-L1 parameter combinations."""

from __future__ import annotations

import itertools
import os
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..grids import LabelSequence
from .extrapolate import HORIZON, invert_and_extrapolate
from .tvl1 import TvL1Params

EXPECTED_LATTICE_SIZE = 360

# Default factorization: 5 x 4 x 3 x 3 x 2 = 360 combinations around the
# stock parameter values.
LAMBDA_GRID = (0.05, 0.10, 0.15, 0.25, 0.40)
THETA_GRID = (0.1, 0.2, 0.3, 0.5)
WARPS_GRID = (3, 5, 7)
NSCALES_GRID = (3, 5, 7)
MEDIAN_GRID = (1, 2)


def default_lattice(base: TvL1Params = TvL1Params()):
    """The 360-point search lattice, ordered by combination index."""
    combos = []
    for lam, theta, warps, nscales, mfr in itertools.product(
        LAMBDA_GRID, THETA_GRID, WARPS_GRID, NSCALES_GRID, MEDIAN_GRID
    ):
        combos.append(
            TvL1Params(
                tau=base.tau,
                lambda_=lam,
                theta=theta,
                nscales=nscales,
                scale_step=base.scale_step,
                warps=warps,
                epsilon=base.epsilon,
                inner_iterations=base.inner_iterations,
                outer_iterations=base.outer_iterations,
                gamma=base.gamma,
                median_filter_radius=mfr,
            )
        )
    return combos


def _thread_count() -> int:
    cap = os.environ.get("CLOUDCAST_THREADS")
    available = os.cpu_count() or 1
    if cap:
        return max(1, min(available, int(cap)))
    return available


def _score_params(params, train, origins, steps):
    total = 0.0
    count = 0
    for origin in origins:
        forecast = invert_and_extrapolate(
            train.frames[origin], train.frames[origin - 1], params, steps
        )
        truth = train.frames[origin + 1:origin + 1 + steps]
        for pred, obs in zip(forecast.frames, truth):
            total += float((pred.labels == obs.labels).mean())
            count += 1
    return total / count


def tune_tvl1(train: LabelSequence, lattice=None, n_origins: int = 20,
              seed: int = 0, steps: int = HORIZON):
    """Pick the lattice point with the best 16-step mean accuracy.

    Origin times are sampled deterministically from ``seed``; ties resolve
    to the lower combination index. The objective is plain mean accuracy
    over the sampled origins. Returns (best params, report dict); the report
    carries every combination's score.
    """
    if lattice is None:
        lattice = default_lattice()
    lattice = list(lattice)
    if len(lattice) != EXPECTED_LATTICE_SIZE:
        warnings.warn(
            f"lattice has {len(lattice)} combinations, expected {EXPECTED_LATTICE_SIZE}",
            stacklevel=2,
        )

    # an origin needs one frame before it and `steps` frames after it
    valid = np.arange(1, len(train) - steps)
    if valid.size == 0:
        raise ValueError(
            f"sequence of {len(train)} frames is too short for a {steps}-step horizon"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(valid, size=min(n_origins, valid.size), replace=False))

    n_threads = min(_thread_count(), len(lattice))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            scores = list(pool.map(
                lambda p: _score_params(p, train, chosen, steps), lattice
            ))
    else:
        scores = [_score_params(p, train, chosen, steps) for p in lattice]

    best = int(np.argmax(scores))
    report = {
        "objective": "mean_accuracy",
        "seed": seed,
        "steps": steps,
        "origin_indices": [int(i) for i in chosen],
        "best_index": best,
        "combinations": [
            {"index": i, "params": p.to_dict(), "score": s}
            for i, (p, s) in enumerate(zip(lattice, scores))
        ],
    }
    return lattice[best], report
