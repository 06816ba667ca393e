import numpy as np
import pytest

from cfmimo.channel import (PilotBook, UplinkPilotRx, draw_small_scale,
                            make_pilot_book, mmse_estimate,
                            uplink_pilot_receive)


def eye_pilots(tau_p, assignment):
    # identity pilot base makes the received-signal structure transparent
    return PilotBook(base=np.eye(tau_p, dtype=complex),
                     assignment=np.asarray(assignment))


class TestPilotBook:
    def test_base_orthonormal(self):
        book = make_pilot_book(8, 5, np.random.default_rng(0))
        gram = book.base.conj().T @ book.base
        assert np.allclose(gram, np.eye(8), atol=1e-12)

    def test_gram_binary(self):
        book = make_pilot_book(4, 9, np.random.default_rng(1))
        gram = book.gram()
        assert np.allclose(gram, np.round(gram), atol=1e-12)
        assert set(np.round(gram).ravel().astype(int)) <= {0, 1}

    def test_orthogonal_assignment_when_pilots_suffice(self):
        book = make_pilot_book(8, 6, np.random.default_rng(2))
        assert len(set(book.assignment.tolist())) == 6
        assert np.allclose(book.gram(), np.eye(6), atol=1e-12)

    def test_sharing_forced_when_pilots_scarce(self):
        book = make_pilot_book(2, 5, np.random.default_rng(3))
        assert book.assignment.shape == (5,)
        assert set(book.assignment.tolist()) <= {0, 1}
        # pigeonhole: some pair must collide
        assert (book.gram().sum() > 5)

    def test_sequences_unit_norm(self):
        book = make_pilot_book(5, 7, np.random.default_rng(4))
        norms = np.linalg.norm(book.sequences(), axis=0)
        assert np.allclose(norms, 1.0, atol=1e-12)


class TestSmallScale:
    def test_moments(self):
        h = draw_small_scale(1000, 1000, np.random.default_rng(5))
        assert abs(h.mean()) < 0.01
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.01)

    def test_deterministic(self):
        a = draw_small_scale(6, 3, np.random.default_rng(9))
        b = draw_small_scale(6, 3, np.random.default_rng(9))
        assert np.array_equal(a, b)


class TestUplinkReceive:
    def test_zero_channel_noiseless(self):
        book = eye_pilots(4, [0, 1])
        g = np.zeros((3, 2), dtype=complex)
        rx = uplink_pilot_receive(g, book, rho_p=5.0, tau_p=4,
                                  rng=np.random.default_rng(0), noise_scale=0.0)
        assert np.array_equal(rx.y, np.zeros((3, 4)))

    def test_single_user_basis_pilot(self):
        book = eye_pilots(4, [0])
        g = (np.arange(3) + 1.0).reshape(3, 1) * (1 + 1j)
        rx = uplink_pilot_receive(g, book, rho_p=2.0, tau_p=4,
                                  rng=np.random.default_rng(0), noise_scale=0.0)
        expected = np.zeros((3, 4), dtype=complex)
        expected[:, 0] = np.sqrt(8.0) * g[:, 0]
        assert np.allclose(rx.y, expected)

    def test_received_covariance(self):
        # E[y y^H] = tau rho sum_k beta_k phi_k phi_k^H + I, checked by MC
        tau_p, rho_p = 2, 2.5
        beta = np.array([2.0, 0.5])
        book = eye_pilots(tau_p, [0, 1])
        rng = np.random.default_rng(12)
        n = 200_000
        g = np.sqrt(beta) * draw_small_scale(n, 2, rng)  # rows = indep draws
        rx = uplink_pilot_receive(g, book, rho_p, tau_p, rng)
        cov = (rx.y[:, :, None] * rx.y[:, None, :].conj()).mean(axis=0)
        seq = book.sequences()
        target = tau_p * rho_p * (seq * beta) @ seq.conj().T + np.eye(tau_p)
        assert np.allclose(cov, target, atol=0.03 * np.abs(target).max())


class TestMmseEstimate:
    def test_single_user_variances(self):
        # tau rho = 10, beta = 1: gamma = 10/11, delta = 1/11
        book = eye_pilots(2, [0])
        rx = UplinkPilotRx(y=np.zeros((1, 2), dtype=complex))
        state = mmse_estimate(rx, book, beta=np.array([[1.0]]), rho_p=5.0, tau_p=2)
        assert state.gamma[0, 0] == pytest.approx(10.0 / 11.0, rel=1e-12)
        assert state.delta[0, 0] == pytest.approx(1.0 / 11.0, rel=1e-12)

    def test_noiseless_limit(self):
        book = eye_pilots(4, [0, 1, 2])
        beta = np.array([[0.5, 1.5, 2.0], [3.0, 0.1, 0.7]])
        rx = UplinkPilotRx(y=np.zeros((2, 4), dtype=complex))
        state = mmse_estimate(rx, book, beta, rho_p=1e12, tau_p=4)
        assert np.allclose(state.gamma, beta, rtol=1e-9)

    def test_shared_pilot_variance(self):
        beta_val, rho_p, tau_p = 0.8, 5.0, 2
        book = eye_pilots(tau_p, [0, 0])
        rx = UplinkPilotRx(y=np.zeros((1, tau_p), dtype=complex))
        beta = np.full((1, 2), beta_val)
        state = mmse_estimate(rx, book, beta, rho_p, tau_p)
        trp = tau_p * rho_p
        expected = trp * beta_val ** 2 / (2 * trp * beta_val + 1)
        assert np.allclose(state.gamma, expected, rtol=1e-12)

    def test_error_variance_identity_exact(self):
        rng = np.random.default_rng(8)
        book = make_pilot_book(3, 5, rng)
        beta = rng.uniform(0.1, 3.0, size=(4, 5))
        g = np.sqrt(beta) * draw_small_scale(4, 5, rng)
        rx = uplink_pilot_receive(g, book, 2.0, 3, rng)
        state = mmse_estimate(rx, book, beta, 2.0, 3)
        assert np.array_equal(state.delta, beta - state.gamma)
        assert np.all(state.gamma >= 0) and np.all(state.gamma <= beta)

    def test_estimate_variance_matches_gamma(self):
        # 1e5 independent rows; contaminated pair plus an orthogonal user
        n, tau_p, rho_p = 100_000, 2, 4.0
        book = eye_pilots(tau_p, [0, 0, 1])
        beta_row = np.array([1.5, 0.7, 2.0])
        rng = np.random.default_rng(21)
        beta = np.tile(beta_row, (n, 1))
        g = np.sqrt(beta) * draw_small_scale(n, 3, rng)
        rx = uplink_pilot_receive(g, book, rho_p, tau_p, rng)
        state = mmse_estimate(rx, book, beta, rho_p, tau_p)
        observed = np.mean(np.abs(state.g_hat) ** 2, axis=0)
        assert np.allclose(observed, state.gamma[0], rtol=0.03)

    def test_estimate_orthogonal_to_error(self):
        n = 100_000
        book = eye_pilots(2, [0, 0])
        beta = np.tile([1.2, 0.4], (n, 1))
        rng = np.random.default_rng(22)
        g = np.sqrt(beta) * draw_small_scale(n, 2, rng)
        rx = uplink_pilot_receive(g, book, 3.0, 2, rng)
        state = mmse_estimate(rx, book, beta, 3.0, 2)
        err = g - state.g_hat
        prod = state.g_hat * err.conj()
        corr = prod.mean(axis=0)
        stderr = prod.std(axis=0) / np.sqrt(n)
        assert np.all(np.abs(corr) < 3 * stderr)

    def test_contamination_reduces_gamma(self):
        beta = np.array([[1.0, 1.0]])
        rx = UplinkPilotRx(y=np.zeros((1, 2), dtype=complex))
        shared = mmse_estimate(rx, eye_pilots(2, [0, 0]), beta, 5.0, 2)
        clean = mmse_estimate(rx, eye_pilots(2, [0, 1]), beta, 5.0, 2)
        assert np.all(shared.gamma < clean.gamma)

    def test_linear_in_observation(self):
        rng = np.random.default_rng(30)
        book = make_pilot_book(4, 3, rng)
        beta = rng.uniform(0.2, 2.0, size=(2, 3))
        g = np.sqrt(beta) * draw_small_scale(2, 3, rng)
        rx = uplink_pilot_receive(g, book, 2.0, 4, rng)
        state = mmse_estimate(rx, book, beta, 2.0, 4)
        scaled = mmse_estimate(UplinkPilotRx(y=2.5 * rx.y), book, beta, 2.0, 4)
        assert np.allclose(scaled.g_hat, 2.5 * state.g_hat)
