"""
Alignment verification, zero-forcing rates and DoF estimation.

The DoF of a scheme is estimated as the slope of the mean sum rate per
channel use against ``log2(P)`` over a high-SNR grid. Each trial runs the
full pipeline: draw a channel, solve the relay precoders, build the
effective channels, check the rank structure, then decode with a
zero-forcing receiver that projects out the (aligned) interference under
the exact forwarded-noise covariance.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, NetworkTopology, condition_guard, generate_realization
from .effective import EffectiveChannel
from .errors import (
    RESAMPLE_ERRORS,
    AlignmentNotVerified,
    IllConditioned,
    InfeasibleRelayCount,
    TooManySkipped,
)
from .ic_alignment import effective_channel_ic, required_relays_ic, solve_ic_precoders
from .linalg import rank_eps
from .partial_ia import effective_channel_partial, solve_partial_precoders
from .x_alignment import effective_channel_x, required_relays_x, solve_x_precoders

log = logging.getLogger(__name__)

VERIFY_REL_THRESHOLD = 1e-6
MAX_RESAMPLES = 8
MAX_SKIP_FRACTION = 0.01
THREADS_ENV = "IA_RELAY_THREADS"


class Scheme(str, enum.Enum):
    X_THEOREM1 = "x-theorem1"
    PARTIAL_IA = "partial-ia"
    IC_THEOREM3 = "ic-theorem3"


# ---------------------------------------------------------------------------
# Alignment verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReceiverAlignment:
    receiver: int
    interference_rank: int
    desired_rank: int
    total_rank: int
    # Singular values of the interference block relative to its largest one.
    smallest_retained: float
    largest_discarded: float
    passed: bool


@dataclass(frozen=True)
class AlignmentReport:
    receivers: tuple
    expected_interference_dim: int
    total_slots: int
    rel_threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.receivers) and all(r.passed for r in self.receivers)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "expected_interference_dim": self.expected_interference_dim,
            "total_slots": self.total_slots,
            "rel_threshold": self.rel_threshold,
            "receivers": [dataclasses.asdict(r) for r in self.receivers],
        }


def _margins(s: np.ndarray, rank: int):
    if s.size == 0 or s[0] == 0:
        return 0.0, 0.0
    rel = s / s[0]
    retained = float(rel[rank - 1]) if rank else 0.0
    discarded = float(rel[rank]) if rank < rel.size else 0.0
    return retained, discarded


def verify_alignment(
    eff: EffectiveChannel,
    expected_interference_dim: int,
    rel_threshold: float = VERIFY_REL_THRESHOLD,
) -> AlignmentReport:
    """Rank diagnostics of every receiver's effective channel.

    A receiver passes when the interference occupies exactly
    ``expected_interference_dim`` dimensions, the full matrix fills all
    slots, and desired and interference spans intersect trivially.
    """
    T = eff.total_slots
    rows = []
    for n in range(eff.n_receivers):
        G = eff.G[n]
        interference = rank_eps(G[:, eff.interference_columns(n)], rel_threshold)
        desired = rank_eps(G[:, eff.desired_columns(n)], rel_threshold)
        total = rank_eps(G, rel_threshold)
        retained, discarded = _margins(interference.singular_values, interference.rank)
        ok = (
            interference.rank == expected_interference_dim
            and total.rank == T
            and desired.rank + interference.rank == total.rank
        )
        rows.append(
            ReceiverAlignment(
                receiver=n,
                interference_rank=interference.rank,
                desired_rank=desired.rank,
                total_rank=total.rank,
                smallest_retained=retained,
                largest_discarded=discarded,
                passed=bool(ok),
            )
        )
    return AlignmentReport(tuple(rows), expected_interference_dim, T, rel_threshold)


# ---------------------------------------------------------------------------
# Zero-forcing receiver
# ---------------------------------------------------------------------------


def zf_rates(eff: EffectiveChannel, report: Optional[AlignmentReport]) -> np.ndarray:
    """Per-stream rates in bits per block of ``total_slots`` channel uses.

    Returns an ``(n_rx, streams_per_receiver)`` array. The receiver
    whitens with the Cholesky factor of its noise covariance, projects onto
    the orthogonal complement of the interference span and inverts the
    projected desired block; rate is ``log2(1 + SINR)`` per stream.

    Raises
    ------
    AlignmentNotVerified
        If ``report`` is missing or did not pass.
    """
    if report is None or not report.passed:
        raise AlignmentNotVerified("zero-forcing rates need a passing alignment report")
    rates = []
    for n in range(eff.n_receivers):
        chol = np.linalg.cholesky(eff.noise_cov[n])
        Gw = np.linalg.solve(chol, eff.G[n])
        r = report.receivers[n].interference_rank
        interference = Gw[:, eff.interference_columns(n)]
        if interference.shape[1]:
            Uq = np.linalg.svd(interference, full_matrices=True)[0]
        else:
            Uq = np.eye(eff.total_slots, dtype=complex)
        D = Uq[:, r:].conj().T @ Gw[:, eff.desired_columns(n)]
        gram_inv = np.linalg.inv(D.conj().T @ D)
        sinr = 1.0 / np.real(np.diag(gram_inv))
        rates.append(np.log2(1.0 + sinr))
    return np.array(rates)


# ---------------------------------------------------------------------------
# Reference values
# ---------------------------------------------------------------------------


def dof_reference(kind: str, **params) -> Fraction:
    """Exact DoF reference values.

    ``kind="x"`` with ``M, N``: ``MN / (M + N - 1)``.
    ``kind="ic"`` with ``K``: ``K / 2``.
    ``kind="delayed"`` with ``K``: ``K / (1 + 1/2 + ... + 1/K)``, the
    K-user X channel with a relay holding only delayed CSI.
    """
    if kind == "x":
        M, N = params["M"], params["N"]
        if M < 1 or N < 1:
            raise ValueError("M, N must be positive")
        return Fraction(M * N, M + N - 1)
    if kind == "ic":
        return Fraction(params["K"], 2)
    if kind == "delayed":
        K = params["K"]
        if K < 1:
            raise ValueError("K must be positive")
        return K / sum(Fraction(1, k) for k in range(1, K + 1))
    raise ValueError(f"unknown reference kind {kind!r}")


def scheme_reference(topology: NetworkTopology) -> Fraction:
    if topology.is_x:
        return dof_reference("x", M=topology.M, N=topology.N)
    return dof_reference("ic", K=topology.K)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def expected_interference_dim(topology: NetworkTopology, scheme: Scheme) -> int:
    return topology.N - 1 if scheme in (Scheme.X_THEOREM1, Scheme.PARTIAL_IA) else 1


def required_relays(topology: NetworkTopology, scheme: Scheme) -> int:
    if scheme == Scheme.IC_THEOREM3:
        return required_relays_ic(topology.K, topology.L)
    if scheme == Scheme.PARTIAL_IA:
        return 1
    return required_relays_x(topology.M, topology.N, topology.L)


def check_scheme(topology: NetworkTopology, scheme: Scheme):
    """Raise if ``scheme`` does not apply to ``topology``."""
    scheme = Scheme(scheme)
    if scheme == Scheme.IC_THEOREM3:
        if topology.is_x:
            raise ValueError("ic-theorem3 needs an interference-channel topology")
    elif not topology.is_x:
        raise ValueError(f"{scheme.value} needs an X-channel topology")
    if scheme == Scheme.PARTIAL_IA and not (
        topology.M == topology.N and topology.L == topology.M - 1
    ):
        raise ValueError("partial-ia needs M == N == K and relays with K-1 antennas")
    if scheme == Scheme.PARTIAL_IA and topology.J != 1:
        raise InfeasibleRelayCount(1, "partial-ia uses exactly one relay")
    required = required_relays(topology, scheme)
    if topology.J < required:
        raise InfeasibleRelayCount(required)


def solve_scheme(
    real: ChannelRealization,
    scheme: Scheme,
    joint_beamforming: bool = True,
    null_space_mode: bool = False,
    power: float = 1.0,
):
    """Precoders and effective channel of ``scheme`` on one realization."""
    scheme = Scheme(scheme)
    if scheme == Scheme.X_THEOREM1:
        pre = solve_x_precoders(real, joint_beamforming)
        return pre, effective_channel_x(real, pre, power)
    if scheme == Scheme.PARTIAL_IA:
        pre = solve_partial_precoders(real, joint_beamforming)
        return pre, effective_channel_partial(real, pre, power)
    pre = solve_ic_precoders(real, joint_beamforming, null_space_mode)
    return pre, effective_channel_ic(real, pre, power)


@dataclass(frozen=True)
class TrialResult:
    realization: ChannelRealization
    precoders: object
    effective: EffectiveChannel
    report: AlignmentReport
    resamples: int


def run_trial(
    topology: NetworkTopology,
    scheme: Scheme,
    seed: int,
    trial: int = 0,
    time_varying: bool = True,
    joint_beamforming: bool = True,
    null_space_mode: bool = False,
    max_resamples: int = MAX_RESAMPLES,
    rel_threshold: float = VERIFY_REL_THRESHOLD,
) -> TrialResult:
    """Generate, solve and verify one trial, resampling degenerate channels.

    Raises
    ------
    InfeasibleRelayCount
        Before any channel is drawn, if the relays are too few.
    IllConditioned, DegenerateDenominator
        When every one of the ``1 + max_resamples`` draws is degenerate.
    """
    scheme = Scheme(scheme)
    check_scheme(topology, scheme)
    last_error: Exception = IllConditioned("no attempt made")
    for attempt in range(max_resamples + 1):
        real = generate_realization(topology, seed, time_varying, trial=trial, attempt=attempt)
        if not condition_guard(real):
            last_error = IllConditioned("degenerate channel coefficient")
            continue
        try:
            pre, eff = solve_scheme(real, scheme, joint_beamforming, null_space_mode)
        except RESAMPLE_ERRORS as exc:
            last_error = exc
            continue
        pre = dataclasses.replace(pre, resamples_used=attempt)
        report = verify_alignment(eff, expected_interference_dim(topology, scheme), rel_threshold)
        return TrialResult(real, pre, eff, report, attempt)
    raise last_error


# ---------------------------------------------------------------------------
# DoF estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DofEstimate:
    """Sum-rate sweep and fitted high-SNR slope.

    ``sum_rates_bits`` are mean sum rates per channel use (bits per slot),
    so ``slope_per_log2P`` estimates the DoF directly.
    """

    snr_points_db: tuple
    sum_rates_bits: tuple
    slope_per_log2P: float
    fit_residual: float
    trials: int
    trials_used: int
    skipped: int
    resamples: int
    skip_reasons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


MAX_WORKERS = 32


def default_workers() -> int:
    """Worker threads for trial sweeps.

    ``IA_RELAY_THREADS`` sets the count (clamped to ``1..MAX_WORKERS``);
    otherwise the CPU count is used.
    """
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            return min(MAX_WORKERS, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return min(MAX_WORKERS, os.cpu_count() or 1)


def _trial_rates(args):
    topology, scheme, seed, trial, powers, options = args
    try:
        result = run_trial(topology, scheme, seed, trial, **options)
    except RESAMPLE_ERRORS:
        return "ill-conditioned", None, MAX_RESAMPLES
    if not result.report.passed:
        return "alignment", None, result.resamples
    eff = result.effective
    rates = [float(zf_rates(eff.at_power(p), result.report).sum()) for p in powers]
    return None, rates, result.resamples


def estimate_dof(
    topology: NetworkTopology,
    scheme: Scheme,
    snr_grid_db: Sequence[float],
    trials: int,
    base_seed: int,
    time_varying: bool = True,
    joint_beamforming: bool = True,
    null_space_mode: bool = False,
    workers: Optional[int] = None,
    max_skip_fraction: float = MAX_SKIP_FRACTION,
) -> DofEstimate:
    """Monte Carlo sum-rate sweep and least-squares DoF slope.

    Trials are independent and may run on several threads; results are
    aggregated in trial order so the output does not depend on ``workers``.

    Raises
    ------
    InfeasibleRelayCount
        If the topology has too few relays for the scheme.
    TooManySkipped
        If more than ``max_skip_fraction`` of the trials had to be dropped.
    """
    grid = [float(s) for s in snr_grid_db]
    if len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be strictly ascending with at least 3 points")
    if trials < 1:
        raise ValueError("need at least one trial")
    scheme = Scheme(scheme)
    check_scheme(topology, scheme)

    powers = [10.0 ** (s / 10.0) for s in grid]
    options = dict(
        time_varying=time_varying,
        joint_beamforming=joint_beamforming,
        null_space_mode=null_space_mode,
    )
    jobs = [(topology, scheme, base_seed, t, powers, options) for t in range(trials)]
    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_rates, jobs))
    else:
        outcomes = [_trial_rates(job) for job in jobs]

    reasons: dict = {}
    kept = []
    resamples = 0
    for reason, rates, used in outcomes:
        resamples += used
        if reason is None:
            kept.append(rates)
        else:
            reasons[reason] = reasons.get(reason, 0) + 1
    skipped = trials - len(kept)
    if skipped > max_skip_fraction * trials or not kept:
        raise TooManySkipped(skipped, trials, reasons)
    if skipped:
        log.warning("%d of %d trials skipped: %s", skipped, trials, reasons)

    mean_rates = np.mean(np.array(kept), axis=0) / topology.total_slots
    x = np.log2(powers)
    coeffs = np.polyfit(x, mean_rates, 1)
    fit_residual = float(np.sqrt(np.mean((np.polyval(coeffs, x) - mean_rates) ** 2)))
    return DofEstimate(
        snr_points_db=tuple(grid),
        sum_rates_bits=tuple(float(r) for r in mean_rates),
        slope_per_log2P=float(coeffs[0]),
        fit_residual=fit_residual,
        trials=trials,
        trials_used=len(kept),
        skipped=skipped,
        resamples=resamples,
        skip_reasons=reasons,
    )
