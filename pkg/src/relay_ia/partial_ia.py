"""
Partial interference alignment for the K-user X channel with one relay of
K - 1 antennas.

The relay works in three steps per listen slot ``t``:

1. ``u[t, i]`` re-weights the relay observation so that, apart from the
   receiver-``t`` stream ``d[t, t]``, it reproduces exactly the
   coefficients receiver ``i`` saw in slot ``t``;
2. ``v[t, i, r]`` sends that combination in a direction no receiver other
   than ``t`` and ``i`` can hear;
3. ``alpha[t, i, r]`` scales it so that ``d[t, t]``, resent by transmitter
   ``t`` in every relay slot, lands on the same direction at receiver ``i``
   as the other streams of slot ``t``.

Indices are zero based; relay slot ``r`` is absolute slot ``K + r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .effective import EffectiveChannel, relay_forward_channel
from .errors import DegenerateDenominator, IllConditioned
from .linalg import DEFAULT_REL_THRESHOLD, least_norm_solve, null_space_basis
from .x_alignment import x_stream_labels

DENOMINATOR_TOL = 1e-10


@dataclass(frozen=True)
class PartialIaPrecoderSet:
    """Transforms, beamformers and scalars of the partial-alignment relay.

    Attributes
    ----------
    u : numpy.ndarray
        ``(K, K, K-1)``; ``u[t, i]`` for ``i != t``, zero on the diagonal.
    v : numpy.ndarray
        ``(K, K, K-1, K-1)``; ``v[t, i, r]`` unit norm, symmetric in
        ``(t, i)``, zero on the diagonal.
    alpha : numpy.ndarray
        ``(K, K, K-1)``; ``alpha[t, i, r]``, zero on the diagonal.
    """

    u: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    joint_beamforming: bool = True
    resamples_used: int = 0

    def relay_matrices(self) -> np.ndarray:
        """Equivalent ``(1, K, K-1, L, L)`` precoders ``sum_i alpha v u^T``."""
        W = np.einsum("tir,tirp,tiq->trpq", self.alpha, self.v, self.u)
        return W[np.newaxis]


def _check_partial(real: ChannelRealization) -> int:
    topo = real.topology
    if not (topo.is_x and topo.M == topo.N and topo.J == 1 and topo.L == topo.M - 1):
        raise ValueError(
            "partial alignment needs the K-user X channel with one relay of K-1 antennas"
        )
    return topo.M


def solve_partial_transforms(
    real: ChannelRealization, rel_threshold: float = DEFAULT_REL_THRESHOLD
) -> np.ndarray:
    """Solve ``u[t, i]^T h_{Rk}(t) = h_{ik}(t)`` for all ``k != t``."""
    K = _check_partial(real)
    u = np.zeros((K, K, K - 1), dtype=complex)
    for t in range(K):
        others = [k for k in range(K) if k != t]
        A = real.tx_to_relay[0, others, t, :]  # rows h_{Rk}(t)^T
        for i in others:
            u[t, i] = least_norm_solve(A, real.direct[i, others, t], rel_threshold)
    return u


def _fix_phase(x: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(x)))
    out = x * (np.conj(x[j]) / abs(x[j]))
    out[j] = abs(x[j])
    return out


def solve_beamformers(
    real: ChannelRealization, rel_threshold: float = DEFAULT_REL_THRESHOLD
) -> np.ndarray:
    """Unit vectors ``v[t, i, r]`` with ``h_{lR}(K+r)^T v = 0`` for ``l`` not in ``{t, i}``.

    The sign/phase ambiguity is removed by making the largest-magnitude
    entry real and positive.
    """
    K = _check_partial(real)
    R = K - 1
    v = np.zeros((K, K, R, K - 1), dtype=complex)
    for r in range(R):
        t_prime = K + r
        for t in range(K):
            for i in range(t + 1, K):
                rest = [l for l in range(K) if l not in (t, i)]
                basis = null_space_basis(real.relay_to_rx[rest, 0, t_prime, :], rel_threshold)
                if basis.shape[1] != 1:
                    raise IllConditioned(
                        f"beamformer for pair ({t}, {i}) at slot {t_prime} is not unique"
                    )
                vec = _fix_phase(basis[:, 0])
                v[t, i, r] = vec
                v[i, t, r] = vec
    return v


def solve_alignment_scalars(
    real: ChannelRealization,
    u: np.ndarray,
    v: np.ndarray,
    joint_beamforming: bool = True,
) -> np.ndarray:
    """Scalars that put ``d[g, g]`` on the interference direction of slot ``g``.

    For receiver ``m``, listen slot ``g != m`` and relay slot ``t'``::

        alpha[g, m] = h_{mg}(t') / ((h_{mg}(g) - u[g, m]^T h_{Rg}(g)) * h_{mR}(t')^T v[g, m])

    Without joint beamforming transmitter ``g`` is silent in ``t'`` and the
    scalars vanish.
    """
    K = _check_partial(real)
    R = K - 1
    alpha = np.zeros((K, K, R), dtype=complex)
    for g in range(K):
        mu = u[g] @ real.tx_to_relay[0, g, g, :]  # mu[m] = u[g, m]^T h_{Rg}(g)
        for m in range(K):
            if m == g:
                continue
            leak = real.direct[m, g, g] - mu[m]
            for r in range(R):
                t_prime = K + r
                gain = real.relay_to_rx[m, 0, t_prime, :] @ v[g, m, r]
                den = leak * gain
                if abs(den) <= DENOMINATOR_TOL:
                    raise DegenerateDenominator(
                        f"alpha[{g}, {m}] at slot {t_prime}: |denominator| = {abs(den):.3e}"
                    )
                if joint_beamforming:
                    alpha[g, m, r] = real.direct[m, g, t_prime] / den
    return alpha


def solve_partial_precoders(
    real: ChannelRealization,
    joint_beamforming: bool = True,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> PartialIaPrecoderSet:
    u = solve_partial_transforms(real, rel_threshold)
    v = solve_beamformers(real, rel_threshold)
    alpha = solve_alignment_scalars(real, u, v, joint_beamforming)
    return PartialIaPrecoderSet(u=u, v=v, alpha=alpha, joint_beamforming=joint_beamforming)


def effective_channel_partial(
    real: ChannelRealization, pre: PartialIaPrecoderSet, power: float = 1.0
) -> EffectiveChannel:
    """Stacked ``(2K-1) x K^2`` channel; transmitter ``k`` resends ``d[k, k]``."""
    K = _check_partial(real)
    schedule = np.eye(K) if pre.joint_beamforming else np.zeros((K, K))
    return relay_forward_channel(
        real, pre.relay_matrices(), schedule, power, x_stream_labels(K, K)
    )
