"""Camera-based detection of displaced squeezed vacuum light.

Closed-form photon statistics (:mod:`squeezecam.state`), an exact Fock-basis
oracle (:mod:`squeezecam.fock`), a Monte Carlo camera (:mod:`squeezecam.camera`)
and the noise-law estimator (:mod:`squeezecam.estimator`).
"""

from .camera import FrameBatch, SensorGeometry, read_batch, simulate_batch, write_batch
from .estimator import (
    IntegrationCurve,
    PixelStats,
    QFit,
    SqueezingEstimate,
    accumulate_stats,
    estimate_squeezing,
    fit_q,
    integrate_pixels,
    precision_study,
)
from .fock import FockDistribution, apply_loss, dsv_distribution, exact_mix_and_trace, moments
from .state import (
    PHI_ANTISQUEEZED,
    PHI_SQUEEZED,
    SensitivityReport,
    StateParams,
    camera_sensitivity,
    homodyne_sensitivity,
    invert_q,
    mean_total,
    pixel_mean,
    pixel_variance,
    q_coefficient,
    sensitivity_report,
    shot_noise_limit,
    variance_total,
)

__version__ = "0.1.0"
