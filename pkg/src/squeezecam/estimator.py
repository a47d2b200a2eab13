"""From frame batches to the noise-law coefficient ``q`` and the state parameters."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .camera import FrameBatch, SensorGeometry, derive_seed, simulate_batch
from .errors import DegenerateFitError, InvalidParameterError
from .state import StateParams, inversion_gradient, invert_q


@dataclass
class PixelStats:
    per_pixel_mean: np.ndarray
    per_pixel_var: np.ndarray
    n_frames: int


@dataclass
class IntegrationCurve:
    """Mean and variance of per-frame partial sums over the first ``k`` pixels."""

    eta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    n_frames: int

    def __len__(self):
        return self.mean.size

    def to_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header is not None:
                fh.write(f"# {json.dumps(header, sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(["k", "eta", "mean", "variance"])
            for k, row in enumerate(zip(self.eta, self.mean, self.var), start=1):
                writer.writerow([k, *(repr(float(x)) for x in row)])


@dataclass
class QFit:
    q: float
    q_se: float
    mode: str
    residual_norm: float
    coefficients: tuple = ()
    diagnostic: QFit | None = None
    q_se_frames: float | None = None

    @property
    def se(self) -> float:
        """Best available error: the frame jackknife when present."""
        return self.q_se if self.q_se_frames is None else self.q_se_frames

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "diagnostic"}
        out["coefficients"] = list(self.coefficients)
        if self.diagnostic is not None:
            out["diagnostic"] = self.diagnostic.to_dict()
        return out


@dataclass
class SqueezingEstimate:
    n_s_hat: float
    n_alpha_hat: float
    n_s_se: float
    n_alpha_se: float
    consistency_residual: float
    physical: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _require_frames(b: FrameBatch):
    if b.n_frames < 2:
        raise InvalidParameterError(
            f"at least 2 frames are needed for a variance, batch has {b.n_frames}")


def accumulate_stats(b: FrameBatch) -> PixelStats:
    """Per-pixel sample mean and unbiased variance across frames."""
    _require_frames(b)
    counts = b.counts.astype(float)
    return PixelStats(counts.mean(axis=0), counts.var(axis=0, ddof=1), b.n_frames)


def _check_order(b: FrameBatch, order):
    n_pix = b.geometry.n_pixels
    if order is None:
        return np.arange(n_pix)
    order = np.asarray(order)
    if order.shape != (n_pix,) or not np.array_equal(np.sort(order), np.arange(n_pix)):
        raise InvalidParameterError("order must be a permutation of the pixel indices")
    return order


def _partial_sums(b: FrameBatch, order, block: int):
    """Yield ``(start, S)`` with ``S[f, j]`` the frame-``f`` sum over ``order[:start + j + 1]``."""
    running = np.zeros(b.n_frames, dtype=np.int64)
    for start in range(0, order.size, block):
        partial = running[:, None] + np.cumsum(b.counts[:, order[start:start + block]], axis=1)
        yield start, partial.astype(float)
        running = partial[:, -1]


def integrate_pixels(b: FrameBatch, order=None, block: int = 128) -> IntegrationCurve:
    """Statistics of nested pixel sums, sweeping the collected fraction ``eta``.

    Point ``k`` is the mean and unbiased variance over frames of
    ``sum(counts[f, order[:k]])``. Sums are formed per frame, so pixel
    correlations are kept.

    Args:
        order: pixel permutation; defaults to row-major order.
        block: pixels processed per pass, bounding memory use.
    """
    _require_frames(b)
    order = _check_order(b, order)
    means = np.empty(order.size)
    variances = np.empty(order.size)
    for start, fp in _partial_sums(b, order, block):
        means[start:start + fp.shape[1]] = fp.mean(axis=0)
        variances[start:start + fp.shape[1]] = fp.var(axis=0, ddof=1)
    eta = np.cumsum(b.geometry.weights[order])
    return IntegrationCurve(eta, means, variances, b.n_frames)


def jackknife_q_se(b: FrameBatch, order=None, n_blocks: int = 20, block: int = 128) -> float:
    """Delete-one-block jackknife standard error of the constrained ``q``.

    Frames are cut into ``n_blocks`` contiguous groups and the curve is refit
    with each group left out. Unlike the residual-based ``q_se`` this sees
    the correlation between nested curve points.
    """
    if not 2 <= n_blocks <= b.n_frames // 2:
        raise InvalidParameterError(
            f"need 2 <= n_blocks <= n_frames/2, got {n_blocks} for {b.n_frames} frames")
    order = _check_order(b, order)
    edges = np.linspace(0, b.n_frames, n_blocks + 1).astype(int)
    sizes = np.diff(edges).astype(float)[:, None]
    bm = np.empty((n_blocks, order.size))  # per-block means
    b2 = np.empty((n_blocks, order.size))  # per-block centred sums of squares
    for start, fp in _partial_sums(b, order, block):
        cols = slice(start, start + fp.shape[1])
        for g in range(n_blocks):
            chunk = fp[edges[g]:edges[g + 1]]
            bm[g, cols] = chunk.mean(axis=0)
            b2[g, cols] = ((chunk - bm[g, cols]) ** 2).sum(axis=0)

    q = np.empty(n_blocks)
    for g in range(n_blocks):
        keep = np.arange(n_blocks) != g
        n = sizes[keep].sum()
        mean = (sizes[keep] * bm[keep]).sum(axis=0) / n
        m2 = b2[keep].sum(axis=0) + (sizes[keep] * (bm[keep] - mean) ** 2).sum(axis=0)
        q[g] = fit_q((mean, m2 / (n - 1))).q
    return float(math.sqrt((n_blocks - 1) / n_blocks * np.sum((q - q.mean()) ** 2)))


def _free_quadratic(x, v):
    # scale x to O(1) so the normal equations stay well conditioned
    scale = np.max(np.abs(x))
    u = x / scale
    design = np.column_stack([np.ones_like(u), u, u**2])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    resid = v - design @ coef
    dof = x.size - 3
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(design.T @ design)
    a, b, c = coef[0], coef[1] / scale, coef[2] / scale**2
    q_se = math.sqrt(cov[2, 2]) / scale**2
    return QFit(float(c), float(q_se), "free-quadratic", float(math.sqrt(resid @ resid)),
                (float(a), float(b), float(c)))


def fit_q(c: IntegrationCurve | tuple) -> QFit:
    """Fit ``var = mean + q * mean**2`` with the unit linear term held fixed.

    ``c`` is an :class:`IntegrationCurve` or a ``(means, variances)`` pair.
    The returned fit carries the unconstrained ``a + b x + q x^2`` fit as
    ``diagnostic`` when there are enough points for it.

    Raises:
        DegenerateFitError: fewer than two points or all means equal.
    """
    if isinstance(c, IntegrationCurve):
        x, v = c.mean, c.var
    else:
        x, v = c
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.size < 2 or x.size != v.size:
        raise DegenerateFitError("need at least two (mean, variance) points")
    if np.any(x <= 0):
        raise InvalidParameterError("means must be strictly positive")
    if np.ptp(x) == 0:
        raise DegenerateFitError("all means are equal; q is not identifiable")

    x2 = x**2
    sxx = x2 @ x2
    q = (x2 @ (v - x)) / sxx
    resid = v - x - q * x2
    rss = resid @ resid
    q_se = math.sqrt(rss / (x.size - 1) / sxx)
    diag = _free_quadratic(x, v) if x.size > 3 else None
    return QFit(float(q), q_se, "constrained", float(math.sqrt(rss)), (1.0, float(q)), diag)


def estimate_squeezing(q_s_fit: QFit, q_as_fit: QFit, n_total: float,
                       n_total_se: float = 0.0) -> SqueezingEstimate:
    """Recover ``(n_s, n_alpha)`` from the two branch fits.

    Standard errors follow from first-order propagation through the closed
    inversion, using each fit's jackknife error when it has one. A negative ``n_s`` is reported with ``physical=False``.
    """
    inv = invert_q(q_s_fit.q, q_as_fit.q, n_total, strict=False)
    grad = inversion_gradient(n_total)
    n_s_se = grad * math.hypot(q_s_fit.se, q_as_fit.se)
    # d n_s / d n_total is tiny compared with 1, so n_alpha inherits both errors
    dns_dn = (q_s_fit.q + q_as_fit.q) * n_total * (1 + n_total) / (1 + 2 * n_total) ** 2
    n_alpha_se = math.hypot(n_s_se, (1 - dns_dn) * n_total_se)
    return SqueezingEstimate(inv.n_s, inv.n_alpha, n_s_se, n_alpha_se,
                             inv.consistency_residual, inv.physical)


def analyze_batch(b: FrameBatch, order=None,
                  jackknife_blocks: int = 20) -> tuple[IntegrationCurve, QFit]:
    """Integration curve and constrained fit; ``jackknife_blocks=0`` skips the jackknife."""
    curve = integrate_pixels(b, order)
    fit = fit_q(curve)
    if jackknife_blocks and b.n_frames >= 2 * jackknife_blocks:
        fit.q_se_frames = jackknife_q_se(b, order, jackknife_blocks)
    return curve, fit


def mean_frame_total(*batches: FrameBatch) -> tuple[float, float]:
    """Average frame total over batches, with its standard error."""
    totals = np.concatenate([b.totals.astype(float) for b in batches])
    return float(totals.mean()), float(totals.std(ddof=1) / math.sqrt(totals.size))


@dataclass
class PrecisionStudy:
    """Spread of the run-averaged ``q`` against the number of runs averaged."""

    run_counts: list
    sd_q: list
    n_groups: list
    slope: float
    slope_se: float
    q_runs: np.ndarray = field(repr=False)

    def rows(self):
        return list(zip(self.run_counts, self.sd_q, self.n_groups))


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its standard error."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        return math.nan, math.nan
    coef, cov = np.polyfit(lx, ly, 1, cov=True) if lx.size > 3 else (np.polyfit(lx, ly, 1), None)
    se = math.sqrt(cov[0, 0]) if cov is not None else math.nan
    return float(coef[0]), se


def run_q_values(p: StateParams, g: SensorGeometry, frames_per_run: int, n_runs: int,
                 seed: int, threads: int = 1) -> np.ndarray:
    """Fitted ``q`` of ``n_runs`` independent simulate-and-fit pipelines."""
    q = np.empty(n_runs)
    for i in range(n_runs):
        batch = simulate_batch(p, g, frames_per_run, derive_seed(seed, i), threads=threads)
        q[i] = analyze_batch(batch, jackknife_blocks=0)[1].q
    return q


def precision_study(p: StateParams, g: SensorGeometry, frames_per_run: int, run_counts,
                    seed: int, groups: int = 32, threads: int = 1,
                    q_runs: np.ndarray | None = None) -> PrecisionStudy:
    """How the precision of ``q`` improves with the number of runs combined.

    A pool of ``groups * max(run_counts)`` independent runs is simulated and
    fitted once. For each ``R`` the pool is cut into disjoint groups of ``R``
    runs; the standard deviation of the group-averaged ``q`` across groups
    is the precision achievable with ``R`` runs.

    Args:
        q_runs: reuse an existing pool of per-run ``q`` values instead of
            simulating one.
    """
    run_counts = sorted(int(r) for r in run_counts)
    if not run_counts or run_counts[0] < 1:
        raise InvalidParameterError("run_counts must be non-empty positive integers")
    if q_runs is None:
        q_runs = run_q_values(p, g, frames_per_run, groups * run_counts[-1], seed, threads)
    q_runs = np.asarray(q_runs, dtype=float)

    sds, n_groups = [], []
    for r in run_counts:
        k = q_runs.size // r
        if k < 2:
            raise InvalidParameterError(f"pool of {q_runs.size} runs gives < 2 groups of {r}")
        means = q_runs[: k * r].reshape(k, r).mean(axis=1)
        sds.append(float(means.std(ddof=1)))
        n_groups.append(k)
    slope, slope_se = loglog_slope(run_counts, sds)
    return PrecisionStudy(run_counts, sds, n_groups, slope, slope_se, q_runs)
