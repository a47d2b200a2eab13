"""Closed-form photon statistics of a displaced squeezed vacuum.

The state is described by three numbers: the mean number of displacement
photons ``n_alpha``, the mean number of squeezed-vacuum photons ``n_s`` and
the relative phase ``phi1`` between displacement and squeezing. With the
squeezing axis fixed along the real quadrature, ``phi1 = 0`` gives amplitude
squeezing (sub-Poissonian counts) and ``phi1 = pi/2`` anti-squeezing.

Attenuation by a transmission ``eta`` is modelled as binomial thinning, so a
single camera pixel with weight ``eta`` sees

    mean(eta)     = eta * M
    variance(eta) = eta * (1 - eta) * M + eta**2 * V

with ``M``/``V`` the mean/variance of the full beam. The quadratic noise law
``variance = mean + q * mean**2`` then holds with an ``eta``-free ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateDerivativeError,
    InvalidParameterError,
    NonPhysicalEstimateError,
)

PHI_SQUEEZED = 0.0
PHI_ANTISQUEEZED = math.pi / 2

_DERIVATIVE_FLOOR = 1e-30


@dataclass(frozen=True)
class StateParams:
    """Displaced squeezed vacuum ``D(beta) S(r)|0>`` in photon-number units.

    Attributes:
        n_alpha: mean photon number of the displacement, ``|beta|**2``.
        n_s: mean photon number of the squeezed vacuum, ``sinh(r)**2``.
        phi1: displacement phase relative to the squeezing axis (radians).
    """

    n_alpha: float
    n_s: float
    phi1: float = 0.0

    def __post_init__(self):
        for name in ("n_alpha", "n_s", "phi1"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.n_alpha < 0:
            raise InvalidParameterError(f"n_alpha must be >= 0, got {self.n_alpha}")
        if self.n_s < 0:
            raise InvalidParameterError(f"n_s must be >= 0, got {self.n_s}")

    @property
    def r(self) -> float:
        """Squeezing magnitude ``arcsinh(sqrt(n_s))``."""
        return math.asinh(math.sqrt(self.n_s))

    @property
    def beta(self) -> complex:
        """Complex displacement amplitude ``sqrt(n_alpha) * exp(i phi1)``."""
        return math.sqrt(self.n_alpha) * complex(math.cos(self.phi1), math.sin(self.phi1))

    @classmethod
    def from_pump(cls, n_pump: float, theta: float, n_s: float, phi1: float = 0.0) -> StateParams:
        """Build the state leaked through a beam splitter of small angle ``theta``."""
        return cls(n_alpha=n_pump * theta**2, n_s=n_s, phi1=phi1)

    def n_pump(self, theta: float) -> float:
        return self.n_alpha / theta**2

    def with_phase(self, phi1: float) -> StateParams:
        return StateParams(self.n_alpha, self.n_s, phi1)


class SensitivityReport(NamedTuple):
    homodyne_var_ns: float
    camera_var_ns: float
    ratio: float
    phase_branch: str


def _check_eta(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(~np.isfinite(eta)) or np.any(eta < 0) or np.any(eta > 1):
        raise InvalidParameterError(f"transmission must lie in [0, 1], got {eta}")
    return eta


def _pair_term(p: StateParams) -> float:
    # sqrt(n_s (1 + n_s)) = sinh(r) cosh(r)
    return math.sqrt(p.n_s * (1.0 + p.n_s))


def excess_noise(p: StateParams) -> float:
    """Variance minus mean of the full beam, the numerator of ``q``."""
    return (p.n_s * (1.0 + 2.0 * p.n_alpha + 2.0 * p.n_s)
            - 2.0 * p.n_alpha * _pair_term(p) * math.cos(2.0 * p.phi1))


def mean_total(p: StateParams) -> float:
    return p.n_alpha + p.n_s


def variance_total(p: StateParams) -> float:
    """Photon-number variance of the unattenuated state."""
    return (p.n_alpha + 2.0 * p.n_alpha * p.n_s + 2.0 * p.n_s + 2.0 * p.n_s**2
            - 2.0 * math.cos(2.0 * p.phi1) * p.n_alpha * _pair_term(p))


def shot_noise_limit(p: StateParams) -> float:
    """Variance of coherent light carrying the same mean photon number."""
    return p.n_alpha + p.n_s


def pixel_mean(p: StateParams, eta):
    eta = _check_eta(eta)
    out = eta * mean_total(p)
    return float(out) if out.ndim == 0 else out


def pixel_variance(p: StateParams, eta):
    """Variance after binomial thinning with transmission ``eta``.

    ``eta`` may be a scalar or an array.
    """
    eta = _check_eta(eta)
    out = eta * mean_total(p) + eta**2 * excess_noise(p)
    return float(out) if out.ndim == 0 else out


def q_coefficient(p: StateParams) -> float:
    """Quadratic coefficient of the noise law ``var = mean + q mean**2``.

    Negative values certify sub-Poissonian statistics.
    """
    m = mean_total(p)
    if m <= 0:
        raise InvalidParameterError("q is undefined for the vacuum (mean photon number 0)")
    return excess_noise(p) / m**2


def q_from_moments(mean, variance):
    """``q`` read off a single (mean, variance) pair."""
    mean = np.asarray(mean, dtype=float)
    return (np.asarray(variance, dtype=float) - mean) / mean**2


def phase_sweep(p: StateParams, phases) -> list[tuple[float, float, float]]:
    """Tabulate ``(phi1, variance_total, shot_noise_limit)`` over ``phases``."""
    phases = list(phases)
    if not phases:
        raise InvalidParameterError("phase list must not be empty")
    snl = shot_noise_limit(p)
    return [(float(phi), variance_total(p.with_phase(phi)), snl) for phi in phases]


def crossing_phase(p: StateParams) -> float | None:
    """Phase in ``[0, pi/2]`` where the variance meets the shot-noise limit.

    Returns None when the state never dips below the shot-noise limit.
    """
    if p.n_s == 0 or p.n_alpha == 0:
        return None
    c = p.n_s * (1 + 2 * p.n_alpha + 2 * p.n_s) / (2 * p.n_alpha * _pair_term(p))
    if c > 1:
        return None
    return 0.5 * math.acos(c)


def crossing_phase_bisect(p: StateParams, xtol: float = 1e-14) -> float | None:
    """Root of ``q(phi1)`` on ``[0, pi/2]`` found numerically."""
    if p.n_s == 0 or p.n_alpha == 0:
        return None

    def f(phi):
        return excess_noise(p.with_phase(phi))

    if f(0.0) >= 0:
        return None
    return brentq(f, 0.0, math.pi / 2, xtol=xtol)


def homodyne_quadrature_variance(p: StateParams) -> float:
    """Quadrature variance seen by a homodyne detector at local-oscillator phase ``phi1``.

    Vacuum gives 1/2. Note the phase enters as ``cos(phi1)`` here, not
    ``cos(2 phi1)``.
    """
    return 0.5 * (2.0 * p.n_s + 1.0 - 2.0 * _pair_term(p) * math.cos(p.phi1))


def homodyne_sensitivity(n_s: float) -> float:
    """Variance of the ``n_s`` estimate from one homodyne variance sample."""
    if n_s < 0:
        raise InvalidParameterError(f"n_s must be >= 0, got {n_s}")
    return 2.0 * n_s * (n_s + 1.0)


def homodyne_sensitivity_quotient(n_s: float, phi1: float) -> float:
    """Signal-variance over squared slope, with ``Var(X^2) = 2 <X^2>^2``.

    Agrees with :func:`homodyne_sensitivity` on the principal quadratures
    (``phi1`` = 0 or pi). Away from them the quotient exceeds the closed form
    by the factor ``(a - b c)^2 / (b - a c)^2`` with ``a = 2 n_s + 1``,
    ``b = 2 sqrt(n_s (n_s + 1))``, ``c = cos(phi1)``.
    """
    if n_s <= 0:
        raise InvalidParameterError("the slope d<X^2>/dn_s needs n_s > 0")
    s = math.sqrt(n_s * (n_s + 1.0))
    signal = 0.5 * (2.0 * n_s + 1.0 - 2.0 * s * math.cos(phi1))
    slope = 1.0 - math.cos(phi1) * (2.0 * n_s + 1.0) / (2.0 * s)
    if abs(slope) < _DERIVATIVE_FLOOR:
        raise DegenerateDerivativeError(f"homodyne slope vanishes at phi1={phi1}")
    return 2.0 * signal**2 / slope**2


def dq_dn_s(p: StateParams) -> float:
    """Partial derivative of ``q`` with respect to ``n_s`` at fixed ``n_alpha``, ``phi1``."""
    if p.n_s <= 0:
        raise InvalidParameterError("dq/dn_s diverges at n_s = 0")
    m = mean_total(p)
    a = excess_noise(p)
    da = (1.0 + 2.0 * p.n_alpha + 4.0 * p.n_s
          - p.n_alpha * math.cos(2.0 * p.phi1) * (1.0 + 2.0 * p.n_s) / _pair_term(p))
    return da / m**2 - 2.0 * a / m**3


def camera_partials(p: StateParams, eta: float) -> dict[str, float]:
    """Analytic partials entering the error propagation of ``q``.

    ``q = (V - x) / x**2`` with ``x`` the pixel mean and ``V`` the pixel
    variance; the returned keys are ``dq_dmean``, ``dq_dvar`` and ``dq_dns``.
    """
    x = pixel_mean(p, eta)
    v = pixel_variance(p, eta)
    return {
        "dq_dmean": (x - 2.0 * v) / x**3,
        "dq_dvar": 1.0 / x**2,
        "dq_dns": dq_dn_s(p),
    }


def camera_q_variance(p: StateParams, eta: float) -> float:
    """Single-sample variance of ``q`` propagated from the first two pixel moments."""
    v = pixel_variance(p, eta)
    d = camera_partials(p, eta)
    return d["dq_dmean"] ** 2 * v + d["dq_dvar"] ** 2 * 2.0 * v**2


def camera_sensitivity(p: StateParams, eta: float = 1.0) -> float:
    """Variance of the ``n_s`` estimate obtained through ``q`` (per sample).

    Raises:
        InvalidParameterError: ``eta`` not in (0, 1] or ``n_s`` not positive.
        DegenerateDerivativeError: ``|dq/dn_s|`` is below 1e-30.
    """
    if not 0 < eta <= 1:
        raise InvalidParameterError(f"transmission must lie in (0, 1], got {eta}")
    if p.n_s <= 0:
        raise InvalidParameterError("camera sensitivity needs n_s > 0")
    slope = dq_dn_s(p)
    if abs(slope) < _DERIVATIVE_FLOOR:
        raise DegenerateDerivativeError(f"dq/dn_s = {slope!r} is numerically zero")
    return camera_q_variance(p, eta) / slope**2


def phase_branch(phi1: float) -> str:
    return "squeezed" if math.cos(2.0 * phi1) >= 0 else "anti-squeezed"


def sensitivity_report(p: StateParams, eta: float = 1.0) -> SensitivityReport:
    hom = homodyne_sensitivity(p.n_s)
    cam = camera_sensitivity(p, eta)
    return SensitivityReport(hom, cam, cam / hom, phase_branch(p.phi1))


class Inversion(NamedTuple):
    n_s: float
    n_alpha: float
    consistency_residual: float
    physical: bool


def invert_q(q_s: float, q_as: float, n_total: float, strict: bool = True) -> Inversion:
    """Recover ``(n_s, n_alpha)`` from ``q`` at the squeezed and anti-squeezed phases.

    The sum ``q_s + q_as = 2 n_s (1 + 2 n_total) / n_total**2`` is inverted in
    closed form. The difference ``q_as - q_s`` must equal
    ``4 n_alpha sqrt(n_s (n_s + 1)) / n_total**2``; its relative mismatch is
    returned as ``consistency_residual``.

    With ``strict`` a result outside ``0 <= n_s <= n_total`` raises
    :class:`NonPhysicalEstimateError`; otherwise it is flagged via ``physical``.
    """
    if not n_total > 0:
        raise InvalidParameterError(f"n_total must be positive, got {n_total}")
    n_s = (q_s + q_as) * n_total**2 / (2.0 * (1.0 + 2.0 * n_total))
    n_alpha = n_total - n_s
    physical = 0.0 <= n_s <= n_total
    if strict and not physical:
        raise NonPhysicalEstimateError(
            f"recovered n_s={n_s!r} outside [0, {n_total}] (q_s={q_s}, q_as={q_as})")
    predicted = 4.0 * n_alpha * math.sqrt(max(n_s * (n_s + 1.0), 0.0)) / n_total**2
    diff = q_as - q_s
    if predicted == 0.0:
        residual = 0.0 if diff == 0.0 else math.inf
    else:
        residual = diff / predicted - 1.0
    return Inversion(n_s, n_alpha, residual, physical)


def inversion_gradient(n_total: float) -> float:
    """``d n_s / d q`` for either branch of :func:`invert_q`."""
    return n_total**2 / (2.0 * (1.0 + 2.0 * n_total))
