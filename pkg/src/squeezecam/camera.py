"""Monte Carlo camera frames for a displaced squeezed vacuum.

Each frame draws a total photon number from the state's statistics and
scatters it over the pixels with a multinomial split. Every frame owns a
Philox stream keyed by ``(seed, frame_index)``, so a batch is bit-identical
whatever the number of worker threads.
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .errors import (
    CorruptFrameFileError,
    FormatVersionError,
    FrameFileError,
    InvalidParameterError,
)
from .state import StateParams, mean_total, variance_total

GAUSSIAN_THRESHOLD = 1e4
EXACT_MAX_CUTOFF = 1 << 16
# round-off in the amplitude recurrence reaches ~1e-12 near 1e4 photons
EXACT_TAIL_TOL = 1e-10
STREAM_LABEL = "philox4x64:key=(seed,frame)"

MAGIC = b"SQZFRAME"
FORMAT_VERSION = 1
_CHECKSUM_BYTES = 8


@dataclass(frozen=True, eq=False)
class SensorGeometry:
    """Pixel grid whose weights are the multinomial cell probabilities."""

    rows: int
    cols: int
    weights: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidParameterError("a sensor needs at least one row and one column")
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != self.rows * self.cols:
            raise InvalidParameterError(
                f"expected {self.rows * self.cols} weights, got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidParameterError("pixel weights must be finite and non-negative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidParameterError(f"pixel weights sum to {math.fsum(w)!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, rows: int = 32, cols: int = 32) -> SensorGeometry:
        return cls(rows, cols, np.full(rows * cols, 1.0 / (rows * cols)))

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols

    def __eq__(self, other):
        if not isinstance(other, SensorGeometry):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(
            self.weights, other.weights)


@dataclass(eq=False)
class FrameBatch:
    """``n_frames`` x ``n_pixels`` integer counts plus the recipe that made them."""

    geometry: SensorGeometry
    counts: np.ndarray
    seed: int
    params: StateParams
    stream: str = field(default=STREAM_LABEL)

    @property
    def n_frames(self) -> int:
        return self.counts.shape[0]

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def frame_rng(seed: int, frame: int) -> np.random.Generator:
    """Independent counter-based stream for one frame."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, frame], dtype=np.uint64)))


def derive_seed(*words: int) -> int:
    """Mix integers into a single 64-bit seed (e.g. base seed, branch, run)."""
    return int(np.random.SeedSequence(list(words)).generate_state(1, np.uint64)[0])


def exact_total_distribution(p: StateParams) -> fock.FockDistribution:
    return fock.dsv_distribution(p.beta, p.r, 0.0, tail_tol=EXACT_TAIL_TOL,
                                 max_cutoff=EXACT_MAX_CUTOFF)


def sample_total_photons(p: StateParams, rng: np.random.Generator,
                         exact: fock.FockDistribution | None = None, size=None):
    """Draw a frame's total photon number (or ``size`` of them).

    Above a mean of 1e4 photons a normal draw with the exact mean and
    variance is rounded and clamped at zero. Below it the count is drawn
    exactly from the Fock distribution (``exact`` may carry a cached one).
    """
    m = mean_total(p)
    if m == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    if m >= GAUSSIAN_THRESHOLD:
        n = np.rint(rng.normal(m, math.sqrt(variance_total(p)), size))
        n = np.maximum(n, 0).astype(np.int64)
        return int(n) if size is None else n
    if exact is None:
        exact = exact_total_distribution(p)
    return fock.sample_from(exact, rng, size)


def distribute_to_pixels(n: int, g: SensorGeometry, rng: np.random.Generator) -> np.ndarray:
    """Multinomial split of ``n`` photons over the pixels.

    numpy's multinomial is a sequence of conditional binomial draws over the
    remaining mass, so pixel sums equal ``n`` exactly.
    """
    if n < 0:
        raise InvalidParameterError(f"photon count must be >= 0, got {n}")
    if g.n_pixels == 1:
        return np.array([n], dtype=np.int64)
    return rng.multinomial(n, g.weights)


def _simulate_frames(p, g, seed, frames, exact):
    out = np.empty((len(frames), g.n_pixels), dtype=np.int64)
    for i, f in enumerate(frames):
        rng = frame_rng(seed, f)
        out[i] = distribute_to_pixels(sample_total_photons(p, rng, exact), g, rng)
    return out


def simulate_batch(p: StateParams, g: SensorGeometry, n_frames: int, seed: int,
                   threads: int = 1, chunk: int = 1024) -> FrameBatch:
    """Simulate ``n_frames`` independent camera frames.

    Frame ``f`` uses only ``frame_rng(seed, f)``, so ``threads`` changes the
    wall time and nothing else.
    """
    if n_frames < 1:
        raise InvalidParameterError(f"n_frames must be >= 1, got {n_frames}")
    if not 0 <= seed < 2**64:
        raise InvalidParameterError("seed must fit in an unsigned 64-bit integer")
    exact = None
    if 0 < mean_total(p) < GAUSSIAN_THRESHOLD:
        exact = exact_total_distribution(p)

    blocks = [range(i, min(i + chunk, n_frames)) for i in range(0, n_frames, chunk)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda b: _simulate_frames(p, g, seed, b, exact), blocks))
    else:
        parts = [_simulate_frames(p, g, seed, b, exact) for b in blocks]
    return FrameBatch(g, np.concatenate(parts), seed, p)


# -- frame container -------------------------------------------------------
#
# magic(8) version(u32)
# n_alpha n_s phi1 (3 x f64)
# rows cols (2 x u32) weights (rows*cols x f64)
# seed (u64) label_len (u16) label (utf-8)
# n_frames (u64) counts (n_frames*rows*cols x u32, frame-major, row-major)
# blake2b-64 checksum of everything above
# all little-endian


def encode_batch(b: FrameBatch) -> bytes:
    if b.counts.size and (b.counts.min() < 0 or b.counts.max() > 0xFFFFFFFF):
        raise InvalidParameterError("counts do not fit in unsigned 32-bit integers")
    label = b.stream.encode()
    parts = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<3d", b.params.n_alpha, b.params.n_s, b.params.phi1),
        struct.pack("<2I", b.geometry.rows, b.geometry.cols),
        b.geometry.weights.astype("<f8").tobytes(),
        struct.pack("<QH", b.seed, len(label)),
        label,
        struct.pack("<Q", b.n_frames),
        np.ascontiguousarray(b.counts, dtype="<u4").tobytes(),
    ]
    payload = b"".join(parts)
    return payload + hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()


def checksum(data: bytes) -> str:
    """Hex form of the trailing checksum of an encoded batch."""
    return data[-_CHECKSUM_BYTES:].hex()


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptFrameFileError("frame file is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_batch(data: bytes) -> FrameBatch:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FrameFileError("not a frame file (bad magic bytes)")
    reader = _Reader(data[:-_CHECKSUM_BYTES] if len(data) > _CHECKSUM_BYTES else b"")
    reader.take(len(MAGIC))
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"frame file version {version} is not supported (expected {FORMAT_VERSION})")
    n_alpha, n_s, phi1 = reader.unpack("<3d")
    rows, cols = reader.unpack("<2I")
    weights = np.frombuffer(reader.take(8 * rows * cols), dtype="<f8").astype(float)
    seed, label_len = reader.unpack("<QH")
    label = reader.take(label_len).decode()
    (n_frames,) = reader.unpack("<Q")
    counts = np.frombuffer(reader.take(4 * n_frames * rows * cols), dtype="<u4")
    if reader.pos != len(reader.data):
        raise CorruptFrameFileError("trailing bytes after frame payload")
    payload = data[:-_CHECKSUM_BYTES]
    if hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest() != data[-_CHECKSUM_BYTES:]:
        raise CorruptFrameFileError("frame file checksum mismatch")
    return FrameBatch(
        SensorGeometry(rows, cols, weights),
        counts.reshape(n_frames, rows * cols).astype(np.int64),
        seed,
        StateParams(n_alpha, n_s, phi1),
        label,
    )


def write_batch(b: FrameBatch, path) -> str:
    """Write ``b`` to ``path``; returns the hex checksum."""
    data = encode_batch(b)
    with open(path, "wb") as fh:
        fh.write(data)
    return checksum(data)


def read_batch(path) -> FrameBatch:
    with open(path, "rb") as fh:
        return decode_batch(fh.read())


def export_csv(b: FrameBatch, path) -> None:
    """Long-format CSV with columns ``frame, pixel, count``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "pixel", "count"])
        for f, row in enumerate(b.counts):
            writer.writerows((f, i, int(c)) for i, c in enumerate(row))
