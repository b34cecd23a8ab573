"""Relay-aided interference alignment without transmitter CSI."""

from .channel import ChannelRealization, NetworkTopology, condition_guard, generate_realization
from .effective import EffectiveChannel
from .errors import (
    AlignmentNotVerified,
    DegenerateDenominator,
    IllConditioned,
    InfeasibleRelayCount,
    RelayIAError,
    TooManySkipped,
)
from .evaluation import (
    AlignmentReport,
    DofEstimate,
    Scheme,
    dof_reference,
    estimate_dof,
    run_trial,
    verify_alignment,
    zf_rates,
)
from .ic_alignment import (
    IcPrecoderSet,
    assemble_ic_system,
    effective_channel_ic,
    required_relays_ic,
    solve_ic_precoders,
)
from .linalg import RankResult, least_norm_solve, null_space_basis, rank_eps
from .partial_ia import (
    PartialIaPrecoderSet,
    effective_channel_partial,
    solve_alignment_scalars,
    solve_beamformers,
    solve_partial_precoders,
    solve_partial_transforms,
)
from .x_alignment import (
    XPrecoderSet,
    assemble_x_system,
    effective_channel_x,
    required_relays_x,
    solve_x_precoders,
)

__version__ = "0.1.0"
