"""
Network topologies and seeded, time-indexed channel realizations.

Array layout (all indices zero based)::

    direct[n, m, t]          receiver n  <- transmitter m, slot t
    tx_to_relay[j, m, t, :]  relay j     <- transmitter m, slot t   (length L)
    relay_to_rx[n, j, t, :]  receiver n  <- relay j, slot t         (length L)

Every coefficient is circularly-symmetric complex Gaussian with unit
variance. Draws come from a counter-based Philox stream keyed by
``(seed, trial, attempt)`` so that trials can be generated in any order,
or concurrently, and still reproduce bit for bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

X_CHANNEL = "x"
INTERFERENCE = "ic"

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class NetworkTopology:
    """Scenario descriptor for the relay-aided X or interference channel.

    Use :meth:`x_channel` or :meth:`interference` rather than the raw
    constructor.
    """

    kind: str
    J: int
    L: int
    M: Optional[int] = None
    N: Optional[int] = None
    K: Optional[int] = None

    def __post_init__(self):
        if self.kind == X_CHANNEL:
            if self.M is None or self.N is None or self.M < 2 or self.N < 2:
                raise ValueError("X channel needs M >= 2 and N >= 2")
            if self.K is not None:
                raise ValueError("K is not a parameter of the X channel")
        elif self.kind == INTERFERENCE:
            if self.K is None or self.K < 3:
                raise ValueError("interference channel needs K >= 3")
            if self.M is not None or self.N is not None:
                raise ValueError("M, N are not parameters of the interference channel")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.J < 1 or self.L < 1:
            raise ValueError("need at least one relay with at least one antenna")

    @classmethod
    def x_channel(cls, M: int, N: int, J: int, L: int) -> "NetworkTopology":
        return cls(kind=X_CHANNEL, M=M, N=N, J=J, L=L)

    @classmethod
    def interference(cls, K: int, J: int, L: int) -> "NetworkTopology":
        return cls(kind=INTERFERENCE, K=K, J=J, L=L)

    @property
    def is_x(self) -> bool:
        return self.kind == X_CHANNEL

    @property
    def n_tx(self) -> int:
        return self.M if self.is_x else self.K

    @property
    def n_rx(self) -> int:
        return self.N if self.is_x else self.K

    @property
    def listen_slots(self) -> int:
        return self.N if self.is_x else 1

    @property
    def relay_slots(self) -> int:
        return self.M - 1 if self.is_x else 1

    @property
    def total_slots(self) -> int:
        return self.listen_slots + self.relay_slots

    @property
    def stream_count(self) -> int:
        return self.M * self.N if self.is_x else self.K

    def describe(self) -> str:
        if self.is_x:
            return f"X(M={self.M}, N={self.N}, J={self.J}, L={self.L})"
        return f"IC(K={self.K}, J={self.J}, L={self.L})"


@dataclass(frozen=True)
class ChannelRealization:
    """All channel coefficients of one Monte Carlo draw.

    The arrays are made read-only on construction; build a modified copy
    with :meth:`replace`.
    """

    topology: NetworkTopology
    direct: np.ndarray
    tx_to_relay: np.ndarray
    relay_to_rx: np.ndarray
    seed: int = 0
    time_varying: bool = True
    trial: int = 0
    attempt: int = 0

    def __post_init__(self):
        topo = self.topology
        T = topo.total_slots
        expected = {
            "direct": (topo.n_rx, topo.n_tx, T),
            "tx_to_relay": (topo.J, topo.n_tx, T, topo.L),
            "relay_to_rx": (topo.n_rx, topo.J, T, topo.L),
        }
        for name, shape in expected.items():
            arr = np.array(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def replace(self, **changes) -> "ChannelRealization":
        return dataclasses.replace(self, **changes)

    def all_coefficients(self) -> np.ndarray:
        return np.concatenate(
            [self.direct.ravel(), self.tx_to_relay.ravel(), self.relay_to_rx.ravel()]
        )


def _rng(seed: int, trial: int, attempt: int) -> np.random.Generator:
    if seed < 0 or trial < 0 or attempt < 0:
        raise ValueError("seed, trial and attempt must be non-negative")
    ss = np.random.SeedSequence([seed & _SEED_MASK, trial, attempt])
    return np.random.Generator(np.random.Philox(ss))


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def generate_realization(
    topology: NetworkTopology,
    seed: int,
    time_varying: bool = True,
    trial: int = 0,
    attempt: int = 0,
) -> ChannelRealization:
    """Draw an i.i.d. CN(0, 1) realization for ``topology``.

    With ``time_varying=False`` the slot-0 draw is replicated over all
    slots, giving a constant channel.
    """
    rng = _rng(seed, trial, attempt)
    topo = topology
    T = topo.total_slots if time_varying else 1
    direct = _complex_gaussian(rng, (topo.n_rx, topo.n_tx, T))
    tx_to_relay = _complex_gaussian(rng, (topo.J, topo.n_tx, T, topo.L))
    relay_to_rx = _complex_gaussian(rng, (topo.n_rx, topo.J, T, topo.L))
    if not time_varying:
        reps = topo.total_slots
        direct = np.repeat(direct, reps, axis=2)
        tx_to_relay = np.repeat(tx_to_relay, reps, axis=2)
        relay_to_rx = np.repeat(relay_to_rx, reps, axis=2)
    return ChannelRealization(
        topology=topo,
        direct=direct,
        tx_to_relay=tx_to_relay,
        relay_to_rx=relay_to_rx,
        seed=seed,
        time_varying=time_varying,
        trial=trial,
        attempt=attempt,
    )


def condition_guard(real: ChannelRealization, threshold: float = 1e-12) -> bool:
    """False when any coefficient magnitude falls below ``threshold``.

    Only raw coincidences are screened here; rank problems in the
    assembled systems are reported by the solvers themselves.
    """
    return bool(np.all(np.abs(real.all_coefficients()) >= threshold))
