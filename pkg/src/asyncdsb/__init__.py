"""Pixel-asynchronous diffusion Schrodinger bridge sampling for inpainting.

The library builds mass-preserving triangular noise schedules (global or
per-pixel, driven by a gradient-frequency prior), samples the analytic
bridge posterior forwards and backwards, and measures how well the realized
restoration process of a run tracks its schedule.
"""

from .bridge import (
    AnalyticOracle,
    BridgeEndpoints,
    PosteriorParams,
    SamplerConfig,
    ScoreModel,
    Trajectory,
    analytic_score,
    posterior_params,
    predict_x0,
    reverse_params,
    reverse_step,
    run_reverse,
    sample_xt,
    score_matching_loss,
    theoretical_speed,
    training_target,
)
from .diagnostics import (
    BandMasks,
    Curve,
    MismatchReport,
    band_split,
    mismatch_report,
    normalized_derivative,
    restoration_curve,
    ssim,
    theoretical_curve,
)
from .errors import AsyncDSBError, ConfigurationError, SingularityError, ValidationError
from .imaging import apply_mask, make_mask, mask_ratio, synth_corpus
from .priorgrad import (
    AsyncConfig,
    complete_gradient,
    gaussian_filter,
    sobel_magnitude,
    tau_from_gradient,
)
from .rng import CounterRng, ZeroRng
from .schedule import (
    NoiseSchedule,
    PixelScheduleField,
    ScheduleConfig,
    VarianceTable,
    accumulate,
    build_field,
    build_shifted,
    build_symmetric,
)

__version__ = "0.1.0"
