"""
Effective (slots x streams) channels seen by each receiver.

Every scheme in this package follows the same two-phase pattern: in the
listen slots ``gamma = 0..G-1`` the transmitters send the streams
``d[gamma, k]`` while the relays listen, and in each relay slot the relays
forward linear combinations of what they heard while (optionally) some
transmitters resend some streams. :func:`relay_forward_channel` stacks the
resulting received samples into one matrix per receiver, together with the
covariance of receiver noise plus relay noise forwarded through the
precoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization


@dataclass(frozen=True)
class EffectiveChannel:
    """Per-receiver effective channel and noise covariance.

    Attributes
    ----------
    G : numpy.ndarray
        Shape ``(n_rx, total_slots, n_streams)``; ``G[n]`` maps the stream
        vector to the stacked received samples at receiver ``n``. Columns
        already include the ``sqrt(power)`` amplitude.
    noise_cov : numpy.ndarray
        Shape ``(n_rx, total_slots, total_slots)``, Hermitian positive
        definite.
    stream_labels : tuple of (int, int)
        ``(intended_receiver, transmitter)`` for every column.
    power : float
        Symbol power the columns are scaled for.
    """

    G: np.ndarray
    noise_cov: np.ndarray
    stream_labels: tuple
    power: float = 1.0
    _desired: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple((int(a), int(b)) for a, b in self.stream_labels)
        object.__setattr__(self, "stream_labels", labels)
        if self.G.shape[2] != len(labels):
            raise ValueError("one stream label per column is required")
        owners = np.array([a for a, _ in labels])
        desired = tuple(np.flatnonzero(owners == n) for n in range(self.G.shape[0]))
        object.__setattr__(self, "_desired", desired)

    @property
    def n_receivers(self) -> int:
        return self.G.shape[0]

    @property
    def total_slots(self) -> int:
        return self.G.shape[1]

    def desired_columns(self, n: int) -> np.ndarray:
        return self._desired[n]

    def interference_columns(self, n: int) -> np.ndarray:
        return np.setdiff1d(np.arange(self.G.shape[2]), self._desired[n])

    def at_power(self, power: float) -> "EffectiveChannel":
        """Same channel with columns rescaled for symbol power ``power``."""
        if power <= 0:
            raise ValueError("power must be positive")
        scale = np.sqrt(power / self.power)
        return EffectiveChannel(self.G * scale, self.noise_cov, self.stream_labels, power)


def relay_forward_channel(
    real: ChannelRealization,
    U: np.ndarray,
    schedule: np.ndarray,
    power: float,
    stream_labels,
) -> EffectiveChannel:
    """Stack listen and relay slots into per-receiver effective channels.

    Parameters
    ----------
    real : ChannelRealization
    U : numpy.ndarray
        Shape ``(J, G, R, L, L)``: relay ``i`` applies ``U[i, g, r]`` to the
        vector it heard in listen slot ``g`` and transmits the sum over
        ``g`` in relay slot ``r``.
    schedule : numpy.ndarray
        Shape ``(G, n_tx)``: in every relay slot transmitter ``k`` resends
        ``sum_g schedule[g, k] * d[g, k]``.
    power : float
        Symbol power ``P``; columns are scaled by ``sqrt(P)``.
    stream_labels : sequence of (int, int)
        Labels of the ``G * n_tx`` columns, column ``g * n_tx + k`` being
        stream ``d[g, k]``.
    """
    topo = real.topology
    n_listen = topo.listen_slots
    T = topo.total_slots
    J, G_, R, L, _ = U.shape
    if (J, G_, R, L) != (topo.J, n_listen, topo.relay_slots, topo.L):
        raise ValueError(f"precoder array has shape {U.shape}")
    n_rx, n_tx = topo.n_rx, topo.n_tx

    # A[n, i, r, g, q] = h_{n R_i}(t_r)^T U_{i g}(t_r)
    A = np.einsum("nirp,igrpq->nirgq", real.relay_to_rx[:, :, n_listen:, :], U)
    # relay[n, r, g, k] = sum_i A[n, i, r, g, :] . h_{R_i k}(g)
    relay = np.einsum("nirgq,ikgq->nrgk", A, real.tx_to_relay[:, :, :n_listen, :])

    G = np.zeros((n_rx, T, n_listen, n_tx), dtype=complex)
    for g in range(n_listen):
        G[:, g, g, :] = real.direct[:, :, g]
    direct_relay_slots = real.direct[:, :, n_listen:]  # (n, k, r)
    G[:, n_listen:, :, :] = relay + np.einsum(
        "nkr,gk->nrgk", direct_relay_slots, np.asarray(schedule, dtype=float)
    )
    G = G.reshape(n_rx, T, n_listen * n_tx) * np.sqrt(power)

    C = np.tile(np.eye(T, dtype=complex), (n_rx, 1, 1))
    C[:, n_listen:, n_listen:] += np.einsum("nirgq,nisgq->nrs", A, A.conj())
    return EffectiveChannel(G, C, tuple(stream_labels), float(power))
