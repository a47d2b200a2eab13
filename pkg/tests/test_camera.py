import math

import numpy as np
import pytest
from scipy import stats

from squeezecam import camera, fock
from squeezecam import state as st
from squeezecam.errors import (
    CorruptFrameFileError,
    FormatVersionError,
    FrameFileError,
    InvalidParameterError,
)

from test_fock import P_4SIGMA, chi2_pvalue


@pytest.fixture(scope="module")
def small_batch():
    g = camera.SensorGeometry(2, 3, np.array([0.1, 0.2, 0.05, 0.3, 0.15, 0.2]))
    return camera.simulate_batch(st.StateParams(6.0, 1.0, 0.3), g, 200, seed=5)


class TestGeometry:
    def test_uniform(self):
        g = camera.SensorGeometry.uniform()
        assert g.n_pixels == 1024
        assert np.all(g.weights == 1 / 1024)

    @pytest.mark.parametrize("weights", [[0.5, 0.6], [1.5, -0.5], [0.5, math.nan], [1.0]])
    def test_invalid_weights(self, weights):
        with pytest.raises(InvalidParameterError):
            camera.SensorGeometry(1, 2, np.array(weights))

    def test_equality(self):
        assert camera.SensorGeometry.uniform(2, 2) == camera.SensorGeometry.uniform(2, 2)
        assert camera.SensorGeometry.uniform(2, 2) != camera.SensorGeometry.uniform(1, 4)


class TestTotalPhotons:
    def test_vacuum(self):
        rng = camera.frame_rng(1, 0)
        assert camera.sample_total_photons(st.StateParams(0, 0), rng) == 0
        assert np.all(camera.sample_total_photons(st.StateParams(0, 0), rng, size=10) == 0)

    def test_exact_path_is_poisson_for_coherent_light(self):
        p = st.StateParams(10.0, 0.0)
        draws = camera.sample_total_photons(p, np.random.default_rng(3), size=10**6)
        d = fock.poisson(10.0)
        counts = np.bincount(draws, minlength=d.cutoff + 1)[: d.cutoff + 1]
        assert chi2_pvalue(counts, d.probs) > P_4SIGMA

    def test_gaussian_path_variance(self):
        p = st.StateParams(1e6, 1.0, 0.0)
        n = 10**5
        draws = camera.sample_total_photons(p, np.random.default_rng(4), size=n).astype(float)
        v = st.variance_total(p)
        assert abs(draws.var(ddof=1) - v) < 3 * v * math.sqrt(2 / n)
        assert abs(draws.mean() - st.mean_total(p)) < 3 * math.sqrt(v / n)

    @pytest.mark.parametrize("phi", [0.0, math.pi / 2])
    def test_gaussian_regime_at_threshold(self, phi):
        p = st.StateParams(1e4, 1.0, phi)
        n = 2 * 10**5
        draws = camera.sample_total_photons(p, np.random.default_rng(8), size=n).astype(float)
        v = st.variance_total(p)
        assert abs(draws.mean() - st.mean_total(p)) < 3 * math.sqrt(v / n)
        assert abs(draws.var(ddof=1) - v) < 3 * v * math.sqrt(2 / n)
        assert abs(stats.skew(draws)) < 0.05

    def test_exact_state_skewness_near_threshold(self):
        # the true distribution is already close to normal at 1e4 photons
        for phi in (0.0, math.pi / 2):
            d = camera.exact_total_distribution(st.StateParams(1e4, 1.0, phi))
            n = np.arange(d.cutoff + 1)
            m = fock.moments(d)
            skew = np.sum((n - m.mean) ** 3 * d.probs) / m.variance**1.5
            assert abs(skew) < 0.1

    def test_scalar_and_vector_agree(self):
        p = st.StateParams(30.0, 0.5, 0.2)
        a = [camera.sample_total_photons(p, camera.frame_rng(9, i)) for i in range(5)]
        b = [int(camera.sample_total_photons(p, camera.frame_rng(9, i), size=1)[0])
             for i in range(5)]
        assert a == b


class TestDistribute:
    def test_zero(self):
        g = camera.SensorGeometry.uniform(4, 4)
        assert np.all(camera.distribute_to_pixels(0, g, camera.frame_rng(0, 0)) == 0)

    def test_single_pixel(self):
        g = camera.SensorGeometry.uniform(1, 1)
        assert camera.distribute_to_pixels(12345, g, camera.frame_rng(0, 0)).tolist() == [12345]

    def test_conserves_photons(self):
        g = camera.SensorGeometry(1, 3, np.array([0.2, 0.5, 0.3]))
        rng = camera.frame_rng(2, 2)
        for n in (0, 1, 17, 10**9):
            assert camera.distribute_to_pixels(n, g, rng).sum() == n

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameterError):
            camera.distribute_to_pixels(-1, camera.SensorGeometry.uniform(1, 2),
                                        camera.frame_rng(0, 0))

    def test_uniform_pixel_means(self):
        g = camera.SensorGeometry.uniform()
        n, frames = 10**6, 1024
        total = np.zeros(g.n_pixels)
        for f in range(frames):
            total += camera.distribute_to_pixels(n, g, camera.frame_rng(77, f))
        w = 1 / 1024
        mean = total / frames
        se = math.sqrt(n * w * (1 - w) / frames)
        assert np.all(np.abs(mean - n * w) < 4 * se)


class TestBatch:
    def test_shape_and_totals(self, small_batch):
        assert small_batch.counts.shape == (200, 6)
        assert small_batch.n_frames == 200
        assert np.all(small_batch.counts >= 0)

    def test_totals_match_sampled_total(self, small_batch):
        p, g = small_batch.params, small_batch.geometry
        exact = camera.exact_total_distribution(p)
        for f in (0, 57, 199):
            rng = camera.frame_rng(small_batch.seed, f)
            assert camera.sample_total_photons(p, rng, exact) == small_batch.counts[f].sum()

    def test_determinism_and_thread_invariance(self):
        p, g = st.StateParams(1e6, 1.0, math.pi / 2), camera.SensorGeometry.uniform(8, 8)
        a = camera.simulate_batch(p, g, 300, seed=42, threads=1, chunk=64)
        b = camera.simulate_batch(p, g, 300, seed=42, threads=8, chunk=64)
        c = camera.simulate_batch(p, g, 300, seed=43)
        np.testing.assert_array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)

    def test_frame_order_independent(self):
        p, g = st.StateParams(1e5, 1.0), camera.SensorGeometry.uniform(2, 2)
        full = camera.simulate_batch(p, g, 50, seed=3)
        rng = camera.frame_rng(3, 31)
        frame = camera.distribute_to_pixels(camera.sample_total_photons(p, rng), g, rng)
        np.testing.assert_array_equal(full.counts[31], frame)

    def test_rejects_bad_input(self):
        g = camera.SensorGeometry.uniform(2, 2)
        with pytest.raises(InvalidParameterError):
            camera.simulate_batch(st.StateParams(1, 1), g, 0, seed=1)
        with pytest.raises(InvalidParameterError):
            camera.simulate_batch(st.StateParams(1, 1), g, 5, seed=-1)

    def test_single_frame_batch(self):
        b = camera.simulate_batch(st.StateParams(1e6, 1), camera.SensorGeometry.uniform(2, 2), 1, 0)
        assert b.n_frames == 1

    def test_pixel_marginals_follow_thinning_law(self):
        # exact-sampling regime, N = 1e5 frames, non-uniform weights
        p = st.StateParams(10.0, 1.0, 0.0)
        weights = np.array([0.4, 0.3, 0.2, 0.1])
        g = camera.SensorGeometry(2, 2, weights)
        n = 10**5
        counts = camera.simulate_batch(p, g, n, seed=2024).counts.astype(float)
        d = fock.dsv_distribution(p.beta, p.r, 0.0, tail_tol=1e-14)
        for i, w in enumerate(weights):
            pix = fock.apply_loss(d, w)
            k = np.arange(pix.cutoff + 1)
            mean, var = st.pixel_mean(p, w), st.pixel_variance(p, w)
            mu4 = np.sum((k - mean) ** 4 * pix.probs)
            assert abs(counts[:, i].mean() - mean) < 4 * math.sqrt(var / n)
            assert abs(counts[:, i].var(ddof=1) - var) < 4 * math.sqrt((mu4 - var**2) / n)


class TestFrameFile:
    def test_roundtrip(self, small_batch, tmp_path):
        path = tmp_path / "b.sqzf"
        digest = camera.write_batch(small_batch, path)
        back = camera.read_batch(path)
        np.testing.assert_array_equal(back.counts, small_batch.counts)
        assert back.params == small_batch.params
        assert back.geometry == small_batch.geometry
        assert back.seed == small_batch.seed
        assert back.stream == small_batch.stream
        assert digest == path.read_bytes()[-8:].hex()

    def test_layout(self, small_batch):
        data = camera.encode_batch(small_batch)
        assert data[:8] == b"SQZFRAME"
        assert int.from_bytes(data[8:12], "little") == camera.FORMAT_VERSION
        n_counts = small_batch.counts.size
        payload_counts = np.frombuffer(data[-8 - 4 * n_counts:-8], dtype="<u4")
        np.testing.assert_array_equal(payload_counts, small_batch.counts.ravel())

    def test_truncated(self, small_batch, tmp_path):
        data = camera.encode_batch(small_batch)
        for cut in (len(data) - 3, len(data) // 2, 20):
            path = tmp_path / "t.sqzf"
            path.write_bytes(data[:cut])
            with pytest.raises(CorruptFrameFileError):
                camera.read_batch(path)

    def test_version_bump(self, small_batch):
        data = bytearray(camera.encode_batch(small_batch))
        data[8:12] = (camera.FORMAT_VERSION + 1).to_bytes(4, "little")
        with pytest.raises(FormatVersionError):
            camera.decode_batch(bytes(data))

    def test_flipped_bit(self, small_batch):
        data = bytearray(camera.encode_batch(small_batch))
        data[-20] ^= 0x01
        with pytest.raises(CorruptFrameFileError):
            camera.decode_batch(bytes(data))

    def test_not_a_frame_file(self):
        with pytest.raises(FrameFileError):
            camera.decode_batch(b"hello world")

    def test_csv_export(self, small_batch, tmp_path):
        path = tmp_path / "b.csv"
        camera.export_csv(small_batch, path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64)
        assert rows.shape == (small_batch.counts.size, 3)
        np.testing.assert_array_equal(rows[:, 2], small_batch.counts.ravel())
