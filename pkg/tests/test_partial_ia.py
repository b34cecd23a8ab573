import numpy as np
import pytest

from relay_ia.channel import NetworkTopology, generate_realization
from relay_ia.linalg import rank_eps
from relay_ia.partial_ia import (
    effective_channel_partial,
    solve_alignment_scalars,
    solve_beamformers,
    solve_partial_precoders,
    solve_partial_transforms,
)
from relay_ia.x_alignment import effective_channel_x, solve_x_precoders

from conftest import receiver_ranks


def k_user(K, seed, **kw):
    return generate_realization(NetworkTopology.x_channel(K, K, 1, K - 1), seed, **kw)


class TestTransforms:
    def test_three_user_equations(self):
        real = k_user(3, 5)
        u = solve_partial_transforms(real)
        hR = real.tx_to_relay[0]
        # u_2(1): relay output matches receiver 2's slot-1 coefficients of d_12, d_13
        assert abs(u[0, 1] @ hR[1, 0] - real.direct[1, 1, 0]) <= 1e-10
        assert abs(u[0, 1] @ hR[2, 0] - real.direct[1, 2, 0]) <= 1e-10
        assert abs(u[0, 2] @ hR[1, 0] - real.direct[2, 1, 0]) <= 1e-10
        assert abs(u[0, 2] @ hR[2, 0] - real.direct[2, 2, 0]) <= 1e-10

    def test_identity_relay_channel(self):
        real = k_user(4, 1)
        hr = real.tx_to_relay.copy()
        t = 2
        others = [k for k in range(4) if k != t]
        for idx, k in enumerate(others):
            hr[0, k, t] = np.eye(3)[idx]
        u = solve_partial_transforms(real.replace(tx_to_relay=hr))
        for i in others:
            np.testing.assert_allclose(u[t, i], real.direct[i, others, t], atol=1e-14)

    def test_four_user_count_and_residuals(self):
        real = k_user(4, 9)
        u = solve_partial_transforms(real)
        count = 0
        for t in range(4):
            assert not u[t, t].any()
            for i in range(4):
                if i == t:
                    continue
                count += 1
                for k in range(4):
                    if k != t:
                        assert abs(u[t, i] @ real.tx_to_relay[0, k, t] - real.direct[i, k, t]) <= 1e-8
        assert count == 12


class TestBeamformers:
    def test_three_user_orthogonality(self):
        real = k_user(3, 2)
        v = solve_beamformers(real)
        for r in range(2):
            tp = 3 + r
            # v_12 is orthogonal to h_3R
            assert abs(real.relay_to_rx[2, 0, tp] @ v[0, 1, r]) <= 1e-12
            # v_31 = v_13, both orthogonal to h_2R
            np.testing.assert_array_equal(v[2, 0, r], v[0, 2, r])
            assert abs(real.relay_to_rx[1, 0, tp] @ v[2, 0, r]) <= 1e-12

    def test_four_user_orthogonality_and_phase(self):
        real = k_user(4, 3)
        v = solve_beamformers(real)
        for r in range(3):
            for t in range(4):
                for i in range(4):
                    if i == t:
                        continue
                    vec = v[t, i, r]
                    assert abs(np.linalg.norm(vec) - 1) < 1e-12
                    j = np.argmax(np.abs(vec))
                    assert vec[j].imag == 0 and vec[j].real > 0
                    for l in set(range(4)) - {t, i}:
                        assert abs(real.relay_to_rx[l, 0, 4 + r] @ vec) <= 1e-8


class TestScalars:
    def test_three_user_closed_forms(self):
        real = k_user(3, 6)
        u = solve_partial_transforms(real)
        v = solve_beamformers(real)
        alpha = solve_alignment_scalars(real, u, v)
        h, hR, hx = real.direct, real.tx_to_relay[0], real.relay_to_rx[:, 0]
        for r in range(2):
            tp = 3 + r
            # alpha_21(t) = h_12(t) / ((h_12(2) - mu_1^{R2}(2)) h_1R^{perp 3}(t))
            mu = u[1, 0] @ hR[1, 1]
            a21 = h[0, 1, tp] / ((h[0, 1, 1] - mu) * (hx[0, tp] @ v[1, 0, r]))
            assert alpha[1, 0, r] == pytest.approx(a21, rel=1e-12)
            # alpha_31(t) = h_13(t) / ((h_13(3) - mu_1^{R3}(3)) h_1R^{perp 2}(t))
            mu = u[2, 0] @ hR[2, 2]
            a31 = h[0, 2, tp] / ((h[0, 2, 2] - mu) * (hx[0, tp] @ v[2, 0, r]))
            assert alpha[2, 0, r] == pytest.approx(a31, rel=1e-12)

    def test_silent_transmitters_give_zero_scalars(self):
        pre = solve_partial_precoders(k_user(3, 6), joint_beamforming=False)
        assert not pre.alpha.any()


def test_receiver_one_matches_closed_form_columns():
    # receiver 1 of the 3-user scheme, streams d_21, d_23, d_22 and d_31
    real = k_user(3, 13)
    pre = solve_partial_precoders(real)
    eff = effective_channel_partial(real, pre, 1.0)
    h, hx, a, v = real.direct, real.relay_to_rx[:, 0], pre.alpha, pre.v
    G = eff.G[0]
    for r in range(2):
        tp = 3 + r
        perp3 = hx[0, tp] @ v[1, 0, r]
        perp2 = hx[0, tp] @ v[2, 0, r]
        assert G[tp, 3 * 1 + 0] == pytest.approx(a[1, 0, r] * perp3 * h[0, 0, 1], rel=1e-12)
        assert G[tp, 3 * 1 + 2] == pytest.approx(a[1, 0, r] * perp3 * h[0, 2, 1], rel=1e-12)
        mu = pre.u[1, 0] @ real.tx_to_relay[0, 1, 1]
        assert G[tp, 3 * 1 + 1] == pytest.approx(h[0, 1, tp] + a[1, 0, r] * perp3 * mu, rel=1e-12)
        assert G[tp, 3 * 2 + 0] == pytest.approx(a[2, 0, r] * perp2 * h[0, 0, 2], rel=1e-12)
    np.testing.assert_array_equal(G[:3, 3], [0, h[0, 0, 1], 0])


def test_three_user_block_ranks():
    real = k_user(3, 17)
    eff = effective_channel_partial(real, solve_partial_precoders(real), 1.0)
    G = eff.G[0]
    assert rank_eps(G[:, 3:6], 1e-6).rank == 1
    assert rank_eps(G[:, 6:9], 1e-6).rank == 1
    assert receiver_ranks(eff, 0) == (2, 3, 5)


@pytest.mark.parametrize("K", [3, 4, 5])
def test_alignment_property(K):
    for seed in range(20):
        real = k_user(K, seed)
        eff = effective_channel_partial(real, solve_partial_precoders(real), 1.0)
        for m in range(K):
            for g in range(K):
                if g != m:
                    block = eff.G[m][:, g * K:(g + 1) * K]
                    assert rank_eps(block, 1e-6).rank == 1
            assert receiver_ranks(eff, m) == (K - 1, K, 2 * K - 1)


def test_noise_covariance_includes_forwarded_noise():
    real = k_user(3, 4)
    pre = solve_partial_precoders(real)
    eff = effective_channel_partial(real, pre, 1.0)
    W = np.einsum("tir,tirp,tiq->trpq", pre.alpha, pre.v, pre.u)
    for m in range(3):
        a = np.array([[real.relay_to_rx[m, 0, 3 + r] @ W[t, r] for t in range(3)] for r in range(2)])
        expected = np.eye(2) + np.einsum("rtq,stq->rs", a, a.conj())
        np.testing.assert_allclose(eff.noise_cov[m][3:, 3:], expected, atol=1e-10)


def test_same_rank_criteria_as_general_scheme():
    for seed in range(10):
        real = k_user(4, seed)
        a = effective_channel_partial(real, solve_partial_precoders(real), 1.0)
        b = effective_channel_x(real, solve_x_precoders(real), 1.0)
        for m in range(4):
            assert receiver_ranks(a, m) == receiver_ranks(b, m) == (3, 4, 7)


def test_wrong_topology_rejected():
    real = generate_realization(NetworkTopology.x_channel(3, 3, 1, 3), 0)
    with pytest.raises(ValueError):
        solve_partial_precoders(real)
