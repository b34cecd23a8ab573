"""
Two-slot relay-aided alignment for the K-user interference channel.

Slot 0: transmitter ``k`` sends ``d_k``; receivers and relays listen.
Slot 1: relay ``j`` transmits ``U_j y_{R_j}(0)`` and, with joint
beamforming, every transmitter resends ``d_k``.

One set of relay matrices serves all receivers: the global system has a row
per ``(k, l)`` forcing interferer ``l`` at receiver ``k`` onto the
direction of a reference interferer ``i`` (``i = 1`` for ``k = 0``,
``i = 0`` otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .effective import EffectiveChannel, relay_forward_channel
from .errors import DegenerateDenominator, IllConditioned, InfeasibleRelayCount
from .linalg import DEFAULT_REL_THRESHOLD, least_norm_solve, null_space_basis

RESIDUAL_TOL = 1e-8
RATIO_TOL = 1e-12


def required_relays_ic(K: int, L: int) -> int:
    """Smallest J with ``J * L**2 >= K * (K - 2)``."""
    if K < 3 or L < 1:
        raise ValueError("need K >= 3, L >= 1")
    return -(-K * (K - 2) // (L * L))


def reference_interferer(k: int) -> int:
    return 1 if k == 0 else 0


def equation_pairs(K: int):
    """``(k, l)`` row order of the alignment system."""
    return [
        (k, l)
        for k in range(K)
        for l in range(K)
        if l != k and l != reference_interferer(k)
    ]


@dataclass(frozen=True)
class IcPrecoderSet:
    """Relay matrices ``U[j]`` (shape ``(J, L, L)``) shared by all receivers."""

    U: np.ndarray
    residual: float = 0.0
    joint_beamforming: bool = True
    null_space_mode: bool = False
    resamples_used: int = 0


def _check_ic(real: ChannelRealization):
    if real.topology.is_x:
        raise ValueError("interference-channel scheme needs an IC topology")


def assemble_ic_system(real: ChannelRealization, joint_beamforming: bool = True):
    """Global system ``H u = b`` of shape ``K(K-2) x J L^2``.

    Columns run over ``(j, m, n)`` with ``j`` outermost, matching
    ``u.reshape(J, L, L)``. With ``i`` the reference interferer of ``k``::

        H[(k,l), (j,m,n)] = h_{kR_j,m}(1) * (h_{R_j i,n}(0)/h_{ki}(0) - h_{R_j l,n}(0)/h_{kl}(0))
        b[(k,l)]          = h_{kl}(1)/h_{kl}(0) - h_{ki}(1)/h_{ki}(0)

    ``b`` is zero without joint beamforming.

    Raises
    ------
    DegenerateDenominator
        If a slot-0 direct gain used as a divisor is numerically zero.
    """
    _check_ic(real)
    topo = real.topology
    K = topo.K
    h0 = real.direct[:, :, 0]
    h1 = real.direct[:, :, 1]
    pairs = equation_pairs(K)
    H = np.empty((len(pairs), topo.J * topo.L * topo.L), dtype=complex)
    b = np.zeros(len(pairs), dtype=complex)
    for row, (k, l) in enumerate(pairs):
        i = reference_interferer(k)
        if abs(h0[k, i]) <= RATIO_TOL or abs(h0[k, l]) <= RATIO_TOL:
            raise DegenerateDenominator(f"direct gain at receiver {k} is numerically zero")
        diff = real.tx_to_relay[:, i, 0, :] / h0[k, i] - real.tx_to_relay[:, l, 0, :] / h0[k, l]
        H[row] = np.einsum("jm,jn->jmn", real.relay_to_rx[k, :, 1, :], diff).reshape(-1)
        if joint_beamforming:
            # common denominator: exactly zero when h1 == h0
            b[row] = (h1[k, l] * h0[k, i] - h1[k, i] * h0[k, l]) / (h0[k, l] * h0[k, i])
    return H, b


def solve_ic_precoders(
    real: ChannelRealization,
    joint_beamforming: bool = True,
    null_space_mode: bool = False,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> IcPrecoderSet:
    """Relay matrices aligning all interference into one dimension per receiver.

    By default the least-norm solution of the assembled system is used.
    ``null_space_mode`` instead takes a unit vector from the null space of
    ``H``, which needs ``J L^2 > K(K-2)`` but neither joint beamforming nor
    a time-varying channel.
    """
    _check_ic(real)
    topo = real.topology
    K, J, L = topo.K, topo.J, topo.L
    required = required_relays_ic(K, L)
    if J < required:
        raise InfeasibleRelayCount(required)
    H, b = assemble_ic_system(real, joint_beamforming)
    if null_space_mode:
        if J * L * L <= K * (K - 2):
            raise InfeasibleRelayCount(
                required + 1 if required * L * L == K * (K - 2) else required,
                "null-space mode needs J L^2 > K(K-2)",
            )
        basis = null_space_basis(H, rel_threshold)
        if basis.shape[1] != J * L * L - H.shape[0]:
            raise IllConditioned("alignment matrix is rank deficient")
        u = basis[:, 0]
        rhs = np.zeros_like(b)
    else:
        u = least_norm_solve(H, b, rel_threshold)
        rhs = b
    res = float(np.linalg.norm(H @ u - rhs))
    if res > RESIDUAL_TOL * (1 + np.linalg.norm(rhs)):
        raise IllConditioned(f"alignment residual {res:.3e}")
    return IcPrecoderSet(
        U=u.reshape(J, L, L),
        residual=res,
        joint_beamforming=joint_beamforming,
        null_space_mode=null_space_mode,
    )


def ic_stream_labels(K: int):
    return [(k, k) for k in range(K)]


def effective_channel_ic(
    real: ChannelRealization, pre: IcPrecoderSet, power: float = 1.0
) -> EffectiveChannel:
    """``2 x K`` channel per receiver; column ``i`` carries ``d_i``.

    The slot-1 noise variance is ``1 + sum_j ||U_j^T h_{kR_j}(1)||^2``.
    """
    _check_ic(real)
    K = real.topology.K
    schedule = np.ones((1, K)) if pre.joint_beamforming else np.zeros((1, K))
    U = pre.U[:, np.newaxis, np.newaxis]  # (J, 1 listen slot, 1 relay slot, L, L)
    return relay_forward_channel(real, U, schedule, power, ic_stream_labels(K))
