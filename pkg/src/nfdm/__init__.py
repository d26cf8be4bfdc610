"""Nonlinear Fourier transform toolkit for fibre-optic multiplexing studies."""
from .channel import (
    ChannelConfig,
    backpropagate,
    nft_channel_filter,
    ssfm_propagate,
    user_band_filter,
)
from .exceptions import (
    ApplicabilityError,
    ConfigError,
    DivergenceError,
    DomainError,
    InvalidGridError,
    NFDMError,
    NumericFailureError,
    ResourceBudgetError,
    SingularUpdateError,
    StepSizeError,
    UndefinedMeasureError,
)
from .forward import (
    CoefficientPolynomials,
    ScatteringData,
    al_forward,
    al_nft,
    al_spectral_grid,
    check_applicability,
    clp_forward,
    clp_forward_ratio,
    evaluate_polynomials,
    parseval_energy,
)
from .grids import (
    SampledSignal,
    SpectralGrid,
    TimeGrid,
    bandwidth_99,
    centered_time_grid,
    duration_99,
    energy,
    fourier_transform,
    hilbert_transform,
    inverse_fourier_transform,
    make_spectral_grid,
    make_time_grid,
)
from .inverse import (
    ab_from_qhat,
    check_discrete_unimodularity,
    clp_inverse,
    dlp_inverse,
    inverse_nft,
    magnitude_a,
    peel_coefficients,
    phase_a,
)
from .modem import (
    PulseBank,
    SymbolMatrix,
    U_from_qhat,
    U_from_u,
    build_u,
    nfdm_pulse_bank,
    nfdm_receive,
    nfdm_transmit,
    qhat_from_U,
    u_from_U,
)
from .rate import (
    PolarBinning,
    RateResult,
    RingConstellation,
    TransitionHistogram,
    awgn_capacity,
    blahut_arimoto,
    estimate_transitions,
    geometric_radii,
    ring_constellation,
    time_bandwidth_factor,
)
from .estimators import BlahutArimoto, NFDMModem, NonlinearFourierTransform, SplitStepChannel, WDMModem
from .wdm import estimate_rotation, wdm_receive, wdm_transmit

__version__ = "0.1.0"
