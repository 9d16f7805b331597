import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from barcsim import baselines as bl
from barcsim import chanmodel as cm
from barcsim.errors import DegenerateConstraintError, SingularMatrixError

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def q_func(x):
    return 0.5 * erfc(x / np.sqrt(2))


def angle_between(a, b):
    c = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return np.degrees(np.arccos(min(1.0, c)))


class TestFullRankSg:
    def test_init_meets_constraint(self):
        p = crandn(np.random.default_rng(0), 9)
        st_ = bl.fullrank_init(p, 2.0)
        assert np.vdot(st_.w_full, p) == pytest.approx(2.0, abs=1e-14)

    def test_zero_signature(self):
        with pytest.raises(DegenerateConstraintError):
            bl.fullrank_init(np.zeros(4))
        with pytest.raises(DegenerateConstraintError):
            bl.fullrank_ccm_sg_step(bl.FullRankState(np.ones(4)), np.ones(4), np.zeros(4), 0.1)

    def test_zero_step(self):
        rng = np.random.default_rng(1)
        p = crandn(rng, 6)
        st_ = bl.fullrank_init(p)
        st_.w_full = st_.w_full + crandn(rng, 6)
        w0 = st_.w_full.copy()
        _, z = bl.fullrank_ccm_sg_step(st_, crandn(rng, 6), p, 0.0, enforce=False)
        np.testing.assert_array_equal(st_.w_full, w0)

    def test_constraint_invariant(self):
        rng = np.random.default_rng(2)
        p = crandn(rng, 8)
        st_ = bl.FullRankState(bl.fullrank_init(p).w_full + 0.1 * crandn(rng, 8))
        for _ in range(50):
            before = np.vdot(p, st_.w_full)
            bl.fullrank_ccm_sg_step(st_, crandn(rng, 8), p, 0.01, enforce=False)
            assert abs(np.vdot(p, st_.w_full) - before) < 1e-12

    def test_output_before_update(self):
        rng = np.random.default_rng(3)
        p, r = crandn(rng, 5), crandn(rng, 5)
        st_ = bl.fullrank_init(p)
        want = np.vdot(st_.w_full, r)
        _, z = bl.fullrank_ccm_sg_step(st_, r, p, 0.1)
        assert z == want


def batch_fullrank(frames, zs, p, nu):
    w2 = np.abs(zs) ** 2
    r = np.einsum("q,qi,qj->ij", w2, frames, frames.conj()) / len(zs)
    d = (zs.conj()[:, None] * frames).mean(axis=0)
    rd, rp = np.linalg.solve(r, d), np.linalg.solve(r, p)
    return rd - rp * (np.vdot(p, rd) - nu) / np.vdot(p, rp)


class TestFullRankRls:
    def test_first_step(self):
        rng = np.random.default_rng(4)
        p = crandn(rng, 7)
        st_ = bl.fullrank_init(p)
        bl.fullrank_ccm_rls_step(st_, crandn(rng, 7), p, 0.998)
        assert np.all(np.isfinite(st_.w_full))
        assert abs(np.vdot(st_.w_full, p) - 1) < 1e-10

    def test_residual_every_step(self):
        ens = cm.draw_user_ensemble(6, 16, 4, 1.5, seed=1, num_symbols=1000)
        frames = cm.synthesize_block(ens, 0.05, np.random.default_rng(1))
        p = ens.desired_signature(0)
        st_ = bl.fullrank_init(p)
        for r in frames:
            bl.fullrank_ccm_rls_step(st_, r, p, 0.998)
            assert abs(np.vdot(st_.w_full, p) - 1) < 1e-6

    def test_matches_batch_closed_form(self):
        rng = np.random.default_rng(5)
        m = 6
        frames = crandn(rng, 50, m) + 2 * np.outer(np.sign(rng.standard_normal(50)), crandn(rng, m))
        p = crandn(rng, m)
        st_ = bl.fullrank_init(p)
        zs = []
        for r in frames:
            _, z = bl.fullrank_ccm_rls_step(st_, r, p, 1.0, delta=1e8, rho=1e-12, cross_weight="sum")
            zs.append(z)
        w_ref = batch_fullrank(frames, np.array(zs), p, 1.0)
        assert np.linalg.norm(st_.w_full - w_ref) < 1e-4

    def test_white_noise_direction(self):
        rng = np.random.default_rng(6)
        p = crandn(rng, 12)
        st_ = bl.fullrank_init(p)
        st_.w_full = st_.w_full + 0.3 * np.linalg.norm(st_.w_full) * crandn(rng, 12) / np.sqrt(24)
        for r in crandn(rng, 500, 12) / np.sqrt(2):
            bl.fullrank_ccm_rls_step(st_, r, p, 0.998)
        assert angle_between(st_.w_full, p) < 5.0


class TestAnalyticCovariance:
    def test_matches_sample_covariance(self):
        ens = cm.draw_user_ensemble(3, 8, 4, 1.5, seed=2, num_symbols=60_000)
        frames = cm.synthesize_block(ens, 0.1, np.random.default_rng(2))
        sample = frames.T @ frames.conj() / frames.shape[0]
        cov = bl.analytic_covariance(ens, 0, 0.1)
        assert np.linalg.norm(sample - cov) / np.linalg.norm(cov) < 0.03

    def test_hermitian_pd(self):
        ens = cm.draw_user_ensemble(4, 16, 5, 1.5, seed=3, num_symbols=3)
        cov = bl.analytic_covariance(ens, 1, 0.01)
        np.testing.assert_allclose(cov, cov.conj().T)
        assert np.linalg.eigvalsh(cov).min() > 0


class TestMmseOracle:
    def test_single_user_matched_filter(self):
        ens = cm.draw_user_ensemble(1, 16, 1, 1.5, seed=4, num_symbols=2)
        p = ens.desired_signature(0)
        w = bl.mmse_oracle(bl.analytic_covariance(ens, 0, 0.3), p)
        assert angle_between(w, p) < 1e-6
        assert np.vdot(w, p) == pytest.approx(1.0)

    def test_large_noise_limit(self):
        ens = cm.draw_user_ensemble(5, 16, 4, 1.5, seed=5, num_symbols=2)
        p = ens.desired_signature(0)
        angles = [angle_between(bl.mmse_oracle(bl.analytic_covariance(ens, 0, s2), p), p) for s2 in (1.0, 1e2, 1e4)]
        assert angles[0] > angles[1] > angles[2]
        assert angles[2] < 0.05

    def test_beats_random_probes(self):
        ens = cm.draw_user_ensemble(4, 16, 4, 1.5, seed=6, num_symbols=2)
        p = ens.desired_signature(0)
        s2 = 0.05
        cov = bl.analytic_covariance(ens, 0, s2)
        w = bl.mmse_oracle(cov, p)
        best = bl.sinr(w, ens, 0, s2)
        rng = np.random.default_rng(7)
        probes = crandn(rng, 10_000, ens.m)
        probes += np.outer(1 - probes @ p.conj(), p) / np.vdot(p, p).real  # w^H p = 1
        a1 = ens.amplitudes[0] ** 2
        sig = a1 * np.abs(probes.conj() @ p) ** 2
        total = np.einsum("qi,ij,qj->q", probes.conj(), cov, probes).real
        assert np.max(sig / (total - sig)) <= best * (1 + 1e-9)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            bl.mmse_oracle(np.zeros((3, 3)), np.ones(3))


class TestSinr:
    def test_single_user(self):
        ens = cm.draw_user_ensemble(1, 16, 1, 1.5, seed=8, num_symbols=2)
        p = ens.desired_signature(0)
        want = ens.amplitudes[0] ** 2 * np.vdot(p, p).real / 0.2
        assert bl.sinr(p, ens, 0, 0.2) == pytest.approx(want)


class TestBlindEstimate:
    def test_noise_only_matches_dense_solve(self):
        code = cm.random_code(16, np.random.default_rng(9))
        c = cm.build_constraint_matrix(code, 4)
        est = bl.blind_channel_estimate(np.eye(19) / 0.5, c)
        vals, vecs = np.linalg.eigh(c.T @ c / 0.5)
        assert abs(abs(np.vdot(vecs[:, 0], est.h_hat)) - 1) < 1e-8

    def test_single_user_alignment(self):
        ens = cm.draw_user_ensemble(1, 16, 5, 1.5, seed=10, num_symbols=2)
        h = ens.taps(0, 0)
        r_inv = np.linalg.inv(bl.analytic_covariance(ens, 0, 1e-4))
        est = bl.blind_channel_estimate(r_inv, ens.constraints[0])
        assert abs(np.vdot(est.h_hat, h)) / np.linalg.norm(h) > 0.99

    def test_multiuser_alignment(self):
        ens = cm.draw_user_ensemble(6, 32, 9, 1.5, seed=11, num_symbols=2)
        h = ens.taps(0, 0)
        r_inv = np.linalg.inv(bl.analytic_covariance(ens, 0, 0.03))
        est = bl.blind_channel_estimate(r_inv, ens.constraints[0])
        assert abs(np.vdot(est.h_hat, h)) / np.linalg.norm(h) > 0.95

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1e3))
    def test_contract_and_scaling(self, seed, scale):
        rng = np.random.default_rng(seed)
        c = cm.build_constraint_matrix(cm.random_code(8, rng), 3)
        a = crandn(rng, 10, 10)
        r_inv = a @ a.conj().T + np.eye(10)
        h1 = bl.blind_channel_estimate(r_inv, c).h_hat
        h2 = bl.blind_channel_estimate(scale * r_inv, c).h_hat
        assert np.linalg.norm(h1) == pytest.approx(1.0, abs=1e-12)
        assert abs(h1[0].imag) < 1e-12 and h1[0].real >= 0
        assert np.linalg.norm(h1 - h2) < 1e-7

    def test_tracker_converges(self):
        ens = cm.draw_user_ensemble(3, 16, 5, 1.5, seed=12, num_symbols=1500)
        frames = cm.synthesize_block(ens, 0.03, np.random.default_rng(12))
        tracker = bl.BlindChannelTracker(ens.constraints[0])
        for r in frames:
            h_hat = tracker.update(r)
        h = ens.taps(0, 0)
        assert abs(np.vdot(h_hat, h)) / np.linalg.norm(h) > 0.95


class TestPhaseReference:
    def test_genie_is_real_positive(self):
        h = crandn(np.random.default_rng(13), 4)
        ref = bl.phase_reference(h, h)
        assert abs(np.angle(ref)) < 1e-15

    def test_blind_estimate_rotation(self):
        h = np.array([np.exp(0.7j), 0.3])
        h_hat = np.array([1.0, 0.3 * np.exp(-0.7j)])
        assert np.angle(bl.phase_reference(h, h_hat)) == pytest.approx(0.7)


class TestDetection:
    def test_identity(self):
        assert bl.detect_qpsk((1 + 1j) / np.sqrt(2), 1.0) == pytest.approx((1 + 1j) / np.sqrt(2))

    def test_rotated_recovery(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            b = QPSK[rng.integers(4)]
            ref = np.exp(1j * rng.uniform(-np.pi, np.pi)) * rng.uniform(0.1, 3)
            assert bl.detect_qpsk(b * np.exp(1j * np.angle(ref)) * 0.8, ref) == pytest.approx(b)

    def test_array_input(self):
        out = bl.detect_qpsk(np.array([0.3 - 2j, -1 + 0.1j]))
        np.testing.assert_allclose(out, np.array([1 - 1j, -1 + 1j]) / np.sqrt(2))

    def test_zero_reference(self):
        with pytest.raises(DegenerateConstraintError):
            bl.detect_qpsk(1.0, 0.0)

    def test_bpsk(self):
        np.testing.assert_array_equal(bl.detect_bpsk(np.array([0.2j + 0.1, -3])), [1, -1])

    @pytest.mark.parametrize("ebn0_db", [4.0, 8.0])
    def test_awgn_matched_filter_ber(self, ebn0_db):
        q = 200_000
        ens = cm.draw_user_ensemble(1, 16, 1, 0.0, seed=15, num_symbols=q, fading="static")
        # Eb/N0 = A^2 / (2 sigma^2) for QPSK with unit-norm code.
        noise_var = ens.amplitudes[0] ** 2 / (2 * 10 ** (ebn0_db / 10))
        frames = cm.synthesize_block(ens, noise_var, np.random.default_rng(15))
        p = ens.desired_signature(0)
        det = bl.detect_qpsk(frames @ p.conj())
        truth = ens.symbols[0, 1:-1]
        errors = np.sum(np.sign(det.real) != np.sign(truth.real)) + np.sum(np.sign(det.imag) != np.sign(truth.imag))
        ber = errors / (2 * q)
        want = q_func(np.sqrt(2 * 10 ** (ebn0_db / 10)))
        assert abs(ber - want) < 3 * np.sqrt(want * (1 - want) / (2 * q))
