"""
Relay-aided alignment for the M x N X channel with J relays of L antennas.

Slot plan (zero based): in listen slot ``gamma = 0..N-1`` every transmitter
``m`` sends ``d[gamma, m]``, the stream meant for receiver ``gamma``. In
relay slot ``t' = N..M+N-2`` relay ``i`` transmits
``sum_gamma U[i, gamma, t'] y_{R_i}(gamma)`` and transmitter 0 resends
``sum_gamma d[gamma, 0]`` (joint beamforming).

For each pair ``(gamma, t')`` the precoders ``U[:, gamma, t']`` solve one
linear system with a row per ``(n != gamma, k != 0)``; it forces every
stream ``d[gamma, k]`` at receiver ``n`` onto the direction of
``d[gamma, 0]``, so the interference of each listen slot occupies a single
dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .effective import EffectiveChannel, relay_forward_channel
from .errors import IllConditioned, InfeasibleRelayCount
from .linalg import DEFAULT_REL_THRESHOLD, least_norm_solve

RESIDUAL_TOL = 1e-8


def required_relays_x(M: int, N: int, L: int) -> int:
    """Smallest J with ``J * L**2 >= (M - 1) * (N - 1)``."""
    if M < 2 or N < 2 or L < 1:
        raise ValueError("need M >= 2, N >= 2, L >= 1")
    return -(-(M - 1) * (N - 1) // (L * L))


@dataclass(frozen=True)
class XPrecoderSet:
    """Relay precoders for the X-channel scheme.

    ``U[i, gamma, r]`` is the ``L x L`` matrix relay ``i`` applies in relay
    slot ``N + r`` to what it heard in listen slot ``gamma``.
    ``residuals[gamma, r]`` is ``||H u - b||`` of the corresponding system.
    """

    U: np.ndarray
    residuals: np.ndarray
    joint_beamforming: bool = True
    resamples_used: int = 0


def _check_x(real: ChannelRealization):
    if not real.topology.is_x:
        raise ValueError("X-channel scheme needs an X-channel topology")


def assemble_x_system(
    real: ChannelRealization,
    gamma: int,
    t_prime: int,
    joint_beamforming: bool = True,
):
    """Alignment system ``H u = b`` for listen slot ``gamma`` and relay slot ``t_prime``.

    Rows run over ``(n, k)`` with ``n != gamma``, ``k != 0``, ``n``
    outermost. Columns run over ``(i, p, q)`` with ``i`` outermost, so
    ``u.reshape(J, L, L)[i]`` is ``U_i``. Entry::

        H[(n,k), (i,p,q)] = h_{nR_i,p}(t') * (h_{n0}(g) h_{R_i k,q}(g) - h_{nk}(g) h_{R_i 0,q}(g))
        b[(n,k)]          = h_{nk}(g) * h_{n0}(t')

    ``b`` is zero when transmitter 0 stays silent in the relay slots.
    """
    _check_x(real)
    topo = real.topology
    M, N = topo.M, topo.N
    if not 0 <= gamma < N:
        raise ValueError(f"listen slot {gamma} out of range 0..{N - 1}")
    if not N <= t_prime < N + M - 1:
        raise ValueError(f"relay slot {t_prime} out of range {N}..{N + M - 2}")

    h = real.direct[:, :, gamma]  # (n, k)
    hr = real.tx_to_relay[:, :, gamma, :]  # (i, k, q)
    # w[n, k, i, q] = h_{n0} h_{R_i k,q} - h_{nk} h_{R_i 0,q}
    w = (
        h[:, 0, None, None, None] * hr[None, :, :, :].transpose(0, 2, 1, 3)
        - h[:, :, None, None] * hr[None, None, :, 0, :]
    )
    rows = np.einsum("nip,nkiq->nkipq", real.relay_to_rx[:, :, t_prime, :], w)
    others = [n for n in range(N) if n != gamma]
    H = rows[others][:, 1:].reshape(len(others) * (M - 1), -1)
    if joint_beamforming:
        b = (h[others, 1:] * real.direct[others, 0, t_prime][:, None]).reshape(-1)
    else:
        b = np.zeros(H.shape[0], dtype=complex)
    return H, b


def solve_x_precoders(
    real: ChannelRealization,
    joint_beamforming: bool = True,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> XPrecoderSet:
    """Least-norm relay precoders for every ``(gamma, t')`` pair.

    Raises
    ------
    InfeasibleRelayCount
        If ``J * L**2 < (M - 1)(N - 1)``.
    IllConditioned
        If a system fails the row-rank test or its residual bound.
    """
    _check_x(real)
    topo = real.topology
    M, N, J, L = topo.M, topo.N, topo.J, topo.L
    required = required_relays_x(M, N, L)
    if J < required:
        raise InfeasibleRelayCount(required)

    U = np.zeros((J, N, M - 1, L, L), dtype=complex)
    residuals = np.zeros((N, M - 1))
    for gamma in range(N):
        for r in range(M - 1):
            H, b = assemble_x_system(real, gamma, N + r, joint_beamforming)
            u = least_norm_solve(H, b, rel_threshold)
            res = np.linalg.norm(H @ u - b)
            if res > RESIDUAL_TOL * (1 + np.linalg.norm(b)):
                raise IllConditioned(f"residual {res:.3e} at gamma={gamma}, t'={N + r}")
            residuals[gamma, r] = res
            U[:, gamma, r] = u.reshape(J, L, L)
    return XPrecoderSet(U=U, residuals=residuals, joint_beamforming=joint_beamforming)


def x_stream_labels(M: int, N: int):
    return [(gamma, k) for gamma in range(N) for k in range(M)]


def effective_channel_x(
    real: ChannelRealization, pre: XPrecoderSet, power: float = 1.0
) -> EffectiveChannel:
    """Stacked ``(M+N-1) x MN`` channel at every receiver.

    Column ``gamma * M + k`` carries ``d[gamma, k]``.
    """
    _check_x(real)
    topo = real.topology
    schedule = np.zeros((topo.N, topo.M))
    if pre.joint_beamforming:
        schedule[:, 0] = 1.0
    return relay_forward_channel(
        real, pre.U, schedule, power, x_stream_labels(topo.M, topo.N)
    )
