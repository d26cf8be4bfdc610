"""scikit-learn style wrappers.

Batches of signals are 2-D complex arrays ``(n_signals, n_samples)`` on one
time mesh; batches of symbol frames are 3-D arrays ``(n_frames, N_u, N_s)``.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .channel import ChannelConfig, ssfm_propagate
from .forward import ScatteringData, al_forward, al_spectral_grid, clp_forward, evaluate_polynomials
from .grids import SampledSignal, make_spectral_grid, make_time_grid
from .inverse import clp_inverse, inverse_nft
from .modem import SymbolMatrix, nfdm_pulse_bank, nfdm_receive, nfdm_transmit
from .rate import blahut_arimoto
from .validation import check_complex_array, check_int, check_positive
from .wdm import wdm_bank_like, wdm_receive, wdm_transmit


class _GridMixin:
    def _make_grid(self, n):
        check_positive(self.time_window, "time_window")
        return make_time_grid(-self.time_window / 2, self.time_window / 2, n)


class NonlinearFourierTransform(_GridMixin, TransformerMixin, BaseEstimator):
    """Forward NFT as ``transform`` and inverse NFT as ``inverse_transform``.

    Parameters
    ----------
    time_window : float
        Width of the centred time window.
    method : {"al", "clp"}
        Forward discretisation. The lambda mesh is always the AL mesh of
        period ``pi/eps`` so that ``inverse_transform`` applies.
    inverse : {"dlp", "clp"}
        Inverse route. ``clp`` uses only the band ``|lambda| < 1/eps``.
    s : int
        +1 defocusing, -1 focusing (forward only).
    """

    def __init__(self, time_window=64.0, method="al", inverse="dlp", s=1):
        self.time_window = time_window
        self.method = method
        self.inverse = inverse
        self.s = s

    def fit(self, X, y=None):
        X = check_complex_array(X, ndim=2, name="X")
        if self.method not in ("al", "clp"):
            raise ValueError(f"method must be 'al' or 'clp', got {self.method!r}")
        if self.inverse not in ("dlp", "clp"):
            raise ValueError(f"inverse must be 'dlp' or 'clp', got {self.inverse!r}")
        self.grid_ = self._make_grid(X.shape[1])
        self.lambda_grid_ = al_spectral_grid(self.grid_)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_width(self, X):
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} samples per signal, got {X.shape[1]}")

    def transform(self, X):
        check_is_fitted(self, "grid_")
        X = check_complex_array(X, ndim=2, name="X")
        self._check_width(X)
        out = np.empty((X.shape[0], self.lambda_grid_.n_samples), dtype=complex)
        for i, row in enumerate(X):
            q = SampledSignal(self.grid_, row)
            if self.method == "al":
                sd = evaluate_polynomials(al_forward(q, self.grid_.n_samples, self.s), self.lambda_grid_)
            else:
                sd = clp_forward(q, self.lambda_grid_, self.s)
            out[i] = sd.qhat
        return out

    def inverse_transform(self, Xt):
        check_is_fitted(self, "grid_")
        Xt = check_complex_array(Xt, ndim=2, name="Xt")
        out = np.empty((Xt.shape[0], self.grid_.n_samples), dtype=complex)
        for i, row in enumerate(Xt):
            qh = SampledSignal(self.lambda_grid_, row)
            if self.inverse == "dlp":
                out[i] = inverse_nft(qh, self.grid_, self.s).samples
            else:
                out[i] = clp_inverse(self._clp_band(row), self.grid_).samples
        return out

    def _clp_band(self, row):
        # continuous peeling is only stable well inside the AL period (see clp_inverse)
        lam = self.lambda_grid_.points
        keep = np.flatnonzero(np.abs(lam) < 1.0 / self.grid_.step)
        step = self.lambda_grid_.step
        band = make_spectral_grid(lam[keep[0]], lam[keep[0]] + keep.size * step, keep.size)
        return ScatteringData(band, row[keep], s=self.s)


class SplitStepChannel(_GridMixin, TransformerMixin, BaseEstimator):
    """Noisy NLS channel as a transformer; ``random_state`` seeds the noise."""

    def __init__(self, time_window=64.0, distance=0.0, noise_psd=0.0, noise_bandwidth=None, z_steps=None,
                 s=1, random_state=None):
        self.time_window = time_window
        self.distance = distance
        self.noise_psd = noise_psd
        self.noise_bandwidth = noise_bandwidth
        self.z_steps = z_steps
        self.s = s
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_complex_array(X, ndim=2, name="X")
        self.grid_ = self._make_grid(X.shape[1])
        self.config_ = ChannelConfig(self.s, self.distance, self.noise_psd, self.noise_bandwidth, self.z_steps,
                                     self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_complex_array(X, ndim=2, name="X")
        rng = np.random.default_rng(self.random_state)
        return np.array([ssfm_propagate(SampledSignal(self.grid_, row), self.config_, rng=rng).samples for row in X])


class _ModemBase(_GridMixin, BaseEstimator):
    def __init__(self, n_users=3, n_symbols=4, user_spacing=1.25, rolloff=0.25, time_window=64.0,
                 n_samples=2048, distance=0.0):
        self.n_users = n_users
        self.n_symbols = n_symbols
        self.user_spacing = user_spacing
        self.rolloff = rolloff
        self.time_window = time_window
        self.n_samples = n_samples
        self.distance = distance

    def fit(self, X=None, y=None):
        check_int(self.n_users, "n_users")
        check_int(self.n_symbols, "n_symbols")
        check_int(self.n_samples, "n_samples", minimum=2)
        self.grid_ = self._make_grid(self.n_samples)
        self.nfdm_bank_ = nfdm_pulse_bank(self.grid_, self.user_spacing, self.rolloff, self.n_users, self.n_symbols)
        return self

    def _frames(self, S):
        S = check_complex_array(S, ndim=3, name="symbols")
        if S.shape[1:] != (self.n_users, self.n_symbols):
            raise ValueError(f"symbol frames must have shape (n, {self.n_users}, {self.n_symbols})")
        return S

    def _signals(self, Q):
        Q = check_complex_array(Q, ndim=2, name="signals")
        if Q.shape[1] != self.n_samples:
            raise ValueError(f"signals must have {self.n_samples} samples")
        return Q


class NFDMModem(_ModemBase):
    """``transform``: symbol frames -> time signals; ``predict``: received signals -> symbol frames."""

    def transform(self, S):
        check_is_fitted(self, "nfdm_bank_")
        S = self._frames(S)
        return np.array([nfdm_transmit(SymbolMatrix(s), self.nfdm_bank_, self.grid_).samples for s in S])

    def predict(self, Q):
        check_is_fitted(self, "nfdm_bank_")
        Q = self._signals(Q)
        return np.array(
            [nfdm_receive(SampledSignal(self.grid_, q), self.nfdm_bank_, self.distance).symbols
             for q in Q]
        )


class WDMModem(_ModemBase):
    """WDM counterpart of :class:`NFDMModem` (band filter and back-propagation per user)."""

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.bank_ = wdm_bank_like(self.nfdm_bank_, self.grid_)
        return self

    def transform(self, S):
        check_is_fitted(self, "bank_")
        S = self._frames(S)
        return np.array([wdm_transmit(SymbolMatrix(s), self.bank_).samples for s in S])

    def predict(self, Q):
        check_is_fitted(self, "bank_")
        Q = self._signals(Q)
        return np.array([wdm_receive(SampledSignal(self.grid_, q), self.bank_, self.distance).symbols for q in Q])


class BlahutArimoto(BaseEstimator):
    """Capacity of a discrete channel; ``fit(W, costs)`` sets ``capacity_``."""

    def __init__(self, power_constraint=None, tol=1e-9, max_iter=20000):
        self.power_constraint = power_constraint
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, W, costs=None):
        res = blahut_arimoto(W, self.power_constraint, costs, tol=self.tol, max_iter=self.max_iter)
        self.capacity_ = res.rate
        self.input_distribution_ = res.input_distribution
        self.multiplier_ = res.multiplier
        self.n_iter_ = res.iterations
        self.result_ = res
        return self
