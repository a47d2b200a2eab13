"""Exact photon-number distributions in a truncated Fock basis.

These routines are slow but exact; they are the ground truth against which
the closed forms in :mod:`squeezecam.state` and the Monte Carlo sampler are
checked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm
from scipy.stats import binom

from .errors import InsufficientCutoffError, InvalidParameterError

DEFAULT_TAIL_TOL = 1e-12
MAX_CUTOFF = 4096

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


@dataclass(frozen=True, eq=False)
class FockDistribution:
    """Photon-number probabilities for ``n = 0 .. cutoff``.

    ``tail_mass`` is the probability not represented, i.e. beyond ``cutoff``.
    """

    probs: np.ndarray
    tail_mass: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("probs must be a non-empty 1-d array")
        if np.any(probs < 0) or np.any(probs > 1 + 1e-12):
            raise InvalidParameterError("probabilities must lie in [0, 1]")
        if not 0 <= self.tail_mass <= 1:
            raise InvalidParameterError(f"tail mass {self.tail_mass} outside [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    @classmethod
    def from_probs(cls, probs, tail_tol: float = DEFAULT_TAIL_TOL) -> FockDistribution:
        probs = np.asarray(probs, dtype=float)
        tail = max(0.0, 1.0 - math.fsum(probs))
        if tail > tail_tol:
            raise InsufficientCutoffError(
                f"tail mass {tail:.3e} exceeds tolerance {tail_tol:.1e} at cutoff {probs.size - 1}")
        return cls(probs, tail)

    def to_csv(self, path) -> None:
        """Write columns ``n, probability``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "probability"])
            for n, p in enumerate(self.probs):
                writer.writerow([n, repr(float(p))])


class Moments(NamedTuple):
    mean: float
    variance: float
    tail_mass: float


def moments(d: FockDistribution) -> Moments:
    """Mean and variance of the represented part of ``d``.

    The probabilities are renormalized by their sum; ``tail_mass`` says how
    much was left out.
    """
    n = np.arange(d.probs.size, dtype=float)
    total = math.fsum(d.probs)
    mean = math.fsum(n * d.probs) / total
    variance = math.fsum((n - mean) ** 2 * d.probs) / total
    return Moments(mean, variance, d.tail_mass)


def poisson(mean: float, tail_tol: float = DEFAULT_TAIL_TOL) -> FockDistribution:
    """Coherent-state statistics, truncated where the tail drops below ``tail_tol``."""
    return dsv_distribution(math.sqrt(mean), 0.0, 0.0, tail_tol=tail_tol)


def _dsv_log_probs(beta: complex, r: float, phi1: float, stop):
    """Run the amplitude recurrence and yield ``log P(n)`` until ``stop`` says so.

    Amplitudes of ``D(b) S(r)|0>`` (``b = beta e^{i phi1}``, real ``r``)
    obey ``sqrt(n+1) c[n+1] = g c[n] - t sqrt(n) c[n-1]`` with
    ``t = tanh r`` and ``g = b + conj(b) t``.
    """
    b = complex(beta) * complex(math.cos(phi1), math.sin(phi1))
    t = math.tanh(r)
    g = b + b.conjugate() * t
    log_c0_sq = -abs(b) ** 2 - (b.conjugate() ** 2 * t).real - math.log(math.cosh(r))

    # u[n] = c[n] / c[0], kept finite by rescaling; offset tracks log of the scale.
    prev, cur = 0j, 1 + 0j
    offset = 0.0
    log_probs = []
    n = 0
    while True:
        mag = abs(cur)
        log_probs.append(log_c0_sq + 2.0 * (math.log(mag) + offset) if mag > 0 else -math.inf)
        if stop(n, log_probs):
            return np.array(log_probs)
        nxt = (g * cur - t * math.sqrt(n) * prev) / math.sqrt(n + 1)
        prev, cur = cur, nxt
        n += 1
        if abs(cur) > _RESCALE or abs(prev) > _RESCALE:
            prev /= _RESCALE
            cur /= _RESCALE
            offset += _LOG_RESCALE


def dsv_distribution(beta: complex, r: float, phi1: float = 0.0, cutoff: int | None = None,
                     tail_tol: float = DEFAULT_TAIL_TOL,
                     max_cutoff: int = MAX_CUTOFF) -> FockDistribution:
    """Photon statistics of the displaced squeezed vacuum ``D(beta e^{i phi1}) S(r)|0>``.

    Args:
        beta: displacement amplitude; ``|beta|**2`` is the coherent photon number.
        r: squeezing magnitude, squeezing the real quadrature.
        phi1: extra displacement phase; 0 yields amplitude squeezing.
        cutoff: highest photon number kept. None grows the cutoff until the
            tail mass falls below ``tail_tol``, up to ``max_cutoff``.
        tail_tol: largest acceptable probability beyond the cutoff.

    Raises:
        InsufficientCutoffError: if the tail mass exceeds ``tail_tol``.
    """
    if r < 0 or not math.isfinite(r):
        raise InvalidParameterError(f"squeezing magnitude must be >= 0, got {r}")
    if cutoff is not None and cutoff < 0:
        raise InvalidParameterError(f"cutoff must be >= 0, got {cutoff}")

    mean = abs(beta) ** 2 + math.sinh(r) ** 2

    if cutoff is not None:
        def stop(n, _):
            return n >= cutoff
    else:
        acc = [0.0, 0.0]  # Neumaier sum and compensation

        def stop(n, log_probs):
            x = math.exp(log_probs[-1])
            t = acc[0] + x
            acc[1] += (acc[0] - t) + x if abs(acc[0]) >= x else (x - t) + acc[0]
            acc[0] = t
            if n >= max_cutoff:
                return True
            # the tail test is meaningless until the bulk has been passed
            return n > mean and 1.0 - (acc[0] + acc[1]) < 0.5 * tail_tol

    with np.errstate(under="ignore"):
        probs = np.exp(_dsv_log_probs(beta, r, phi1, stop))
    return FockDistribution.from_probs(probs, tail_tol)


def thinning_matrix(cutoff: int, eta: float) -> np.ndarray:
    """``T[m, n] = C(n, m) eta^m (1 - eta)^(n - m)``."""
    if not 0 <= eta <= 1:
        raise InvalidParameterError(f"transmission must lie in [0, 1], got {eta}")
    n = np.arange(cutoff + 1)
    return binom.pmf(n[:, None], n[None, :], eta)


def apply_loss(d: FockDistribution, eta: float) -> FockDistribution:
    """Pass ``d`` through a loss channel of transmission ``eta``."""
    if eta == 1:
        return FockDistribution(d.probs.copy(), d.tail_mass)
    probs = thinning_matrix(d.cutoff, eta) @ d.probs
    return FockDistribution(np.clip(probs, 0.0, 1.0), d.tail_mass)


def _coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    log_mag = -0.5 * abs(alpha) ** 2 + n * (math.log(abs(alpha)) if alpha != 0 else 0.0)
    log_mag -= 0.5 * np.array([math.lgamma(k + 1) for k in n])
    amps = np.exp(log_mag).astype(complex)
    if alpha == 0:
        amps[1:] = 0
    return amps * np.exp(1j * n * np.angle(alpha))


def _squeezed_vacuum_amplitudes(r: float, cutoff: int) -> np.ndarray:
    t = math.tanh(r)
    amps = np.zeros(cutoff + 1)
    amps[0] = 1 / math.sqrt(math.cosh(r))
    for n in range(2, cutoff + 1, 2):
        amps[n] = -amps[n - 2] * t * math.sqrt((n - 1) / n)
    return amps


def _auto_cutoff(mass_fn, tail_tol, cap=MAX_CUTOFF):
    for cutoff in range(cap + 1):
        if 1.0 - mass_fn(cutoff) < tail_tol:
            return cutoff
    raise InsufficientCutoffError(f"no cutoff below {cap} reaches tail {tail_tol}")


def beam_splitter_block(total: int, theta: float) -> np.ndarray:
    """Beam-splitter unitary ``exp(theta (a^dag b - a b^dag))`` on ``|total-j, j>``.

    Index ``j`` counts photons in the second (signal) mode. The generator is
    real antisymmetric and tridiagonal in this basis.
    """
    j = np.arange(total)
    off = np.sqrt((total - j) * (j + 1.0))
    gen = np.diag(off, 1) - np.diag(off, -1)
    return expm(theta * gen)


def exact_mix_and_trace(alpha: complex, r: float, theta: float, cutoff: int | None = None,
                        tail_tol: float = 1e-10) -> FockDistribution:
    """Signal-mode statistics after mixing a coherent pump into squeezed vacuum.

    The pump ``|alpha>`` and the squeezed vacuum ``S(r)|0>`` enter a beam
    splitter that routes a fraction ``sin(theta)**2`` of the pump into the
    signal mode. The two-mode state is propagated exactly (block by block in
    total photon number) and the pump mode is traced out.

    Args:
        cutoff: per-mode input cutoff. None picks the smallest cutoffs whose
            joint input tail is below ``tail_tol``.
    """
    if cutoff is None:
        pump_mass = np.cumsum(np.abs(_coherent_amplitudes(alpha, MAX_CUTOFF)) ** 2)
        sv_mass = np.cumsum(_squeezed_vacuum_amplitudes(r, MAX_CUTOFF) ** 2)
        kp = _auto_cutoff(lambda c: pump_mass[c], 0.5 * tail_tol)
        ks = _auto_cutoff(lambda c: sv_mass[c], 0.5 * tail_tol)
    else:
        kp = ks = cutoff
    pump = _coherent_amplitudes(alpha, kp)
    sv = _squeezed_vacuum_amplitudes(r, ks)
    joint = np.outer(pump, sv)
    input_tail = max(0.0, 1.0 - math.fsum(np.abs(joint.ravel()) ** 2))
    if input_tail > tail_tol:
        raise InsufficientCutoffError(
            f"joint input tail {input_tail:.3e} exceeds {tail_tol:.1e}; raise the cutoff")

    n_max = kp + ks
    probs = np.zeros(n_max + 1)
    for total in range(n_max + 1):
        j = np.arange(max(0, total - kp), min(total, ks) + 1)
        vec = np.zeros(total + 1, dtype=complex)
        vec[j] = joint[total - j, j]
        if not np.any(vec):
            continue
        out = beam_splitter_block(total, theta) @ vec
        probs[: total + 1] += np.abs(out) ** 2
    return FockDistribution(np.clip(probs, 0.0, 1.0), input_tail)


def approximate_mixed_state(alpha: complex, r: float, theta: float,
                            tail_tol: float = DEFAULT_TAIL_TOL) -> FockDistribution:
    """Pure displaced squeezed vacuum standing in for :func:`exact_mix_and_trace`.

    Keeps the full squeezing and the leaked displacement ``alpha sin(theta)``.
    """
    return dsv_distribution(alpha * math.sin(theta), r, 0.0, tail_tol=tail_tol)


def sample_from(d: FockDistribution, rng: np.random.Generator, size=None):
    """Draw photon numbers by inverting the cumulative distribution.

    Uniforms landing in the unrepresented tail map to ``cutoff``.
    """
    cdf = np.cumsum(d.probs)
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, d.cutoff)
    return int(idx) if size is None else idx
