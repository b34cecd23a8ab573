import dataclasses

import numpy as np
import pytest

from relay_ia.channel import NetworkTopology, generate_realization
from relay_ia.errors import DegenerateDenominator, InfeasibleRelayCount
from relay_ia.ic_alignment import (
    assemble_ic_system,
    effective_channel_ic,
    equation_pairs,
    required_relays_ic,
    solve_ic_precoders,
)
from relay_ia.linalg import rank_eps

from conftest import crandn, receiver_ranks


def ic(K, J, L, seed, **kw):
    return generate_realization(NetworkTopology.interference(K, J, L), seed, **kw)


@pytest.mark.parametrize("K, L, expected", [(3, 1, 3), (4, 3, 1), (3, 2, 1), (4, 1, 8), (5, 2, 4)])
def test_required_relays(K, L, expected):
    assert required_relays_ic(K, L) == expected


def test_equation_order():
    assert equation_pairs(3) == [(0, 2), (1, 2), (2, 1)]
    assert len(equation_pairs(5)) == 15


def loop_system(real):
    topo = real.topology
    K, J, L = topo.K, topo.J, topo.L
    h, hr, hx = real.direct, real.tx_to_relay, real.relay_to_rx
    rows, rhs = [], []
    for k in range(K):
        i = 1 if k == 0 else 0
        for l in range(K):
            if l in (k, i):
                continue
            rows.append([
                hx[k, j, 1, m] * (hr[j, i, 0, n] / h[k, i, 0] - hr[j, l, 0, n] / h[k, l, 0])
                for j in range(J) for m in range(L) for n in range(L)
            ])
            rhs.append(h[k, l, 1] / h[k, l, 0] - h[k, i, 1] / h[k, i, 0])
    return np.array(rows), np.array(rhs)


@pytest.mark.parametrize("K, J, L", [(3, 3, 1), (3, 1, 2), (4, 1, 3), (4, 2, 2)])
def test_assemble_matches_loops(K, J, L):
    real = ic(K, J, L, 31)
    H, b = assemble_ic_system(real)
    H_ref, b_ref = loop_system(real)
    np.testing.assert_allclose(H, H_ref, rtol=1e-12)
    np.testing.assert_allclose(b, b_ref, rtol=1e-12, atol=1e-14)


def test_constant_channel_rhs_is_zero():
    for seed in range(20):
        _, b = assemble_ic_system(ic(4, 8, 1, seed, time_varying=False))
        assert not b.any()


def test_generic_full_rank():
    for seed in range(100):
        H, _ = assemble_ic_system(ic(3, 3, 1, seed))
        assert H.shape == (3, 3) and rank_eps(H).rank == 3
    H, _ = assemble_ic_system(ic(3, 1, 2, 0))
    assert H.shape == (3, 4) and rank_eps(H).rank == 3


def test_degenerate_gain():
    real = ic(3, 3, 1, 0)
    direct = real.direct.copy()
    direct[0, 2, 0] = 0
    with pytest.raises(DegenerateDenominator):
        assemble_ic_system(real.replace(direct=direct))


class TestSolve:
    def test_square_exact(self):
        real = ic(3, 3, 1, 5)
        H, b = assemble_ic_system(real)
        pre = solve_ic_precoders(real)
        u = pre.U.reshape(-1)
        np.testing.assert_allclose(u, np.linalg.solve(H, b), atol=1e-10)
        assert np.linalg.norm(H @ u - b) <= 1e-10

    def test_constant_square_is_zero(self):
        assert not solve_ic_precoders(ic(3, 3, 1, 5, time_varying=False)).U.any()

    def test_no_joint_beamforming_square_is_zero(self):
        assert not solve_ic_precoders(ic(3, 3, 1, 5), joint_beamforming=False).U.any()

    def test_wide_residual(self):
        real = ic(4, 1, 3, 5)
        H, b = assemble_ic_system(real)
        assert H.shape == (8, 9)
        pre = solve_ic_precoders(real)
        assert np.linalg.norm(H @ pre.U.reshape(-1) - b) <= 1e-8 * (1 + np.linalg.norm(b))

    def test_null_space_mode(self):
        real = ic(3, 1, 2, 5, time_varying=False)
        pre = solve_ic_precoders(real, joint_beamforming=False, null_space_mode=True)
        H, _ = assemble_ic_system(real)
        assert np.linalg.norm(H @ pre.U.reshape(-1)) <= 1e-10
        assert np.linalg.norm(pre.U) == pytest.approx(1.0)

    def test_null_space_mode_needs_spare_variables(self):
        with pytest.raises(InfeasibleRelayCount):
            solve_ic_precoders(ic(3, 3, 1, 5), null_space_mode=True)

    def test_infeasible(self):
        with pytest.raises(InfeasibleRelayCount) as err:
            solve_ic_precoders(ic(3, 1, 1, 0))
        assert err.value.required == 3


class TestEffectiveChannel:
    def test_silent_relays(self):
        real = ic(3, 1, 2, 2)
        pre = solve_ic_precoders(real)
        eff = effective_channel_ic(real, dataclasses.replace(pre, U=np.zeros_like(pre.U)), 1.0)
        for k in range(3):
            np.testing.assert_array_equal(eff.G[k], real.direct[k].T)
            np.testing.assert_array_equal(eff.noise_cov[k], np.eye(2))

    def test_closed_form(self, rng):
        real = ic(4, 2, 2, 2)
        pre = solve_ic_precoders(real)
        eff = effective_channel_ic(real, pre, 9.0)
        h, hr, hx, U = real.direct, real.tx_to_relay, real.relay_to_rx, pre.U
        for k in range(4):
            for i in range(4):
                slot2 = h[k, i, 1] + sum(hx[k, j, 1] @ U[j] @ hr[j, i, 0] for j in range(2))
                np.testing.assert_allclose(eff.G[k][:, i], 3.0 * np.array([h[k, i, 0], slot2]), rtol=1e-12)
            fwd = sum(np.linalg.norm(U[j].T @ hx[k, j, 1]) ** 2 for j in range(2))
            np.testing.assert_allclose(eff.noise_cov[k], np.diag([1.0, 1.0 + fwd]), atol=1e-12)

    @pytest.mark.parametrize("K, J, L", [(3, 1, 2), (3, 3, 1), (4, 1, 3), (4, 8, 1), (5, 2, 3)])
    def test_alignment(self, K, J, L):
        for seed in range(20):
            real = ic(K, J, L, seed)
            eff = effective_channel_ic(real, solve_ic_precoders(real), 1.0)
            for k in range(K):
                assert receiver_ranks(eff, k) == (1, 1, 2)


def test_corollary4_regime_without_time_variation_or_joint_beamforming():
    for K, L in [(3, 2), (4, 3)]:
        for seed in range(20):
            real = ic(K, 1, L, seed, time_varying=False)
            pre = solve_ic_precoders(real, joint_beamforming=False, null_space_mode=True)
            eff = effective_channel_ic(real, pre, 1.0)
            for k in range(K):
                assert receiver_ranks(eff, k) == (1, 1, 2)


def test_corollary5_regime_collapses():
    for kw in (dict(time_varying=False), dict()):
        jb = bool(kw)  # constant channel with joint beamforming, or varying channel without
        real = ic(3, 3, 1, 1, **kw)
        pre = solve_ic_precoders(real, joint_beamforming=jb)
        assert not pre.U.any()
        eff = effective_channel_ic(real, pre, 1.0)
        for k in range(3):
            assert receiver_ranks(eff, k)[2] == 1
