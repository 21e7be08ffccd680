"""Forecasters: TV-L1 optical-flow extrapolation and the persistence baseline."""

from .extrapolate import (HORIZON, ForecastSet, extrapolate_with_flow,
                          invert_and_extrapolate, persistence_forecast,
                          round_to_class, to_intensity)
from .tuning import default_lattice, tune_tvl1
from .tvl1 import FlowField, TvL1Params, estimate_flow

__all__ = [
    "HORIZON",
    "FlowField",
    "ForecastSet",
    "TvL1Params",
    "default_lattice",
    "estimate_flow",
    "extrapolate_with_flow",
    "invert_and_extrapolate",
    "persistence_forecast",
    "round_to_class",
    "to_intensity",
    "tune_tvl1",
]
