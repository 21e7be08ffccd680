"""Cloud-type nowcasting and verification toolkit.

Segment multispectral scenes into layered cloud types, extrapolate label
maps with TV-L1 optical flow, and score forecasts with the categorical
verification suite. See the README for the CLI and file formats.
"""

from ._kernels import backend as kernel_backend
from .grids import (CADENCE, ChannelStack, GeoContext, Illumination,
                    LabelGrid, LabelSequence, Taxonomy, load_sequence,
                    render_frame, save_sequence)
from .nowcast import (HORIZON, FlowField, ForecastSet, TvL1Params,
                      estimate_flow, invert_and_extrapolate,
                      persistence_forecast, tune_tvl1)
from .pipeline import (GapReport, GapRun, SplitSpec, crop_center,
                       downsample_majority, repair_gaps, split)
from .segmentation import (HeightThresholds, NwpFields, OpacityConfig,
                           classify_height, classify_opacity,
                           compute_height_thresholds, reduce_to_four,
                           segment_frame)
from .verify import (MetricsReport, ProbForecast, SyntheticSpec,
                     accuracy_report, brier_score, brier_skill_score,
                     endpoint_error, evaluate_forecast, frequency_bias,
                     generate_synthetic, psnr, ssim)

__version__ = "0.1.0"
