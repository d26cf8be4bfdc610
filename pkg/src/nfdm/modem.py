"""Multi-user NFDM transceiver.

Users are placed in disjoint bands of the continuous nonlinear spectrum.
Symbols are first shaped into an auxiliary signal ``u(tau)`` in generalised
time ``tau``,

    u(tau) = sqrt(2) sum_k sum_l s_l^k phi_l^k(tau),

whose spectrum ``U(lambda) = F(u)(lambda / 2 pi) / sqrt(2)`` is mapped into
the unit disk,

    qhat = sqrt(1 - exp(-|U|^2)) exp(j arg U),

and inverted to the time domain with discrete layer peeling. With this scaling
the symbol energy, the energy of ``u`` and the energy of ``q`` all coincide.

Grids: for a time mesh with ``N`` cells of width ``eps`` the generalised time
mesh has ``N`` cells of width ``2 eps`` (it spans twice the time window), and
its DFT partner, read in ``lambda = 2 pi l``, is exactly the Ablowitz-Ladik
lambda mesh of period ``pi / eps`` used by the inverse transform.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, nft_channel_filter
from .exceptions import DomainError, InvalidGridError
from .forward import al_nft, al_spectral_grid
from .grids import (
    SampledSignal,
    fourier_transform,
    frequency_grid,
    inverse_fourier_transform,
    make_spectral_grid,
    make_time_grid,
)
from .inverse import ab_from_qhat, dlp_inverse

PEAK_MARGIN = 1e-12


class PeakPowerWarning(UserWarning):
    """Spectral amplitude driven to the edge of the unit disk."""


class BandwidthWarning(UserWarning):
    """Simulation band too narrow compared with the signal band."""


def user_range(n_users):
    """``(k1, k2)`` with ``k1 = -floor(N/2)`` and ``k2 = ceil(N/2) - 1``."""
    return -(n_users // 2), (n_users + 1) // 2 - 1


@dataclass(frozen=True)
class SymbolMatrix:
    """``N_u x N_s`` complex symbols; row ``i`` is user ``k1 + i``, column ``j`` symbol ``l1 + j``."""

    symbols: np.ndarray

    def __post_init__(self):
        sym = np.array(self.symbols, dtype=complex)
        if sym.ndim != 2 or sym.size == 0:
            raise ValueError("symbols must be a non-empty 2-D array (users x symbols)")
        if not np.all(np.isfinite(sym)):
            raise ValueError("symbols must be finite")
        sym.setflags(write=False)
        object.__setattr__(self, "symbols", sym)

    @property
    def n_users(self):
        return self.symbols.shape[0]

    @property
    def n_symbols(self):
        return self.symbols.shape[1]

    @property
    def k1(self):
        return user_range(self.n_users)[0]

    @property
    def k2(self):
        return user_range(self.n_users)[1]

    @property
    def l1(self):
        return user_range(self.n_symbols)[0]

    @property
    def l2(self):
        return user_range(self.n_symbols)[1]

    def user(self, k):
        if not self.k1 <= k <= self.k2:
            raise IndexError(f"user {k} outside [{self.k1}, {self.k2}]")
        return self.symbols[k - self.k1]

    def symbol(self, k, l):
        if not self.l1 <= l <= self.l2:
            raise IndexError(f"symbol {l} outside [{self.l1}, {self.l2}]")
        return self.user(k)[l - self.l1]

    def energy(self):
        return float(np.sum(np.abs(self.symbols) ** 2))

    def relative_error(self, reference):
        ref = reference.symbols if isinstance(reference, SymbolMatrix) else np.asarray(reference)
        norm = np.linalg.norm(ref)
        if norm == 0:
            return float(np.linalg.norm(self.symbols))
        return float(np.linalg.norm(self.symbols - ref) / norm)

    @classmethod
    def zeros(cls, n_users, n_symbols):
        return cls(np.zeros((n_users, n_symbols), dtype=complex))

    @classmethod
    def random(cls, n_users, n_symbols, rng=None, scale=1.0):
        """Circular Gaussian symbols with ``E|s|^2 = scale^2``."""
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((n_users, n_symbols)) + 1j * rng.standard_normal((n_users, n_symbols))
        return cls(scale * z / np.sqrt(2))


def rrc_spectrum(f, symbol_period, rolloff):
    """Root-raised-cosine amplitude spectrum, ``sum_m |G(f - m/T)|^2 = T``."""
    f = np.abs(np.asarray(f, dtype=float))
    T, r = symbol_period, rolloff
    f1 = (1 - r) / (2 * T)
    f2 = (1 + r) / (2 * T)
    G = np.zeros_like(f)
    G[f <= f1] = np.sqrt(T)
    if r > 0:
        mid = (f > f1) & (f <= f2)
        G[mid] = np.sqrt(T) * np.cos(np.pi * T / (2 * r) * (f[mid] - f1))
    return G


class PulseBank:
    """Root-raised-cosine pulses ``g_l^k(tau) = g(tau - l T0) exp(2j pi k W0 tau)``.

    Pulses have unit energy, so the NFDM basis functions are ``phi = g/sqrt(2)``.
    They are built in the frequency domain on the periodic mesh of ``grid``
    and are therefore exactly band-limited and exactly orthogonal (no
    truncation is needed). This requires the user spacing ``W0`` and the
    symbol rate ``1/T0`` to be multiples of the mesh frequency step.

    Parameters
    ----------
    grid : TimeGrid
        Mesh of the shaped signal (generalised time for NFDM, time for WDM).
    W0 : float
        User spacing in ordinary frequency (reciprocal units of ``grid``).
    rolloff : float
        RRC roll-off ``r`` in [0, 1].
    n_users, n_symbols : int
    symbol_period : float, optional
        Defaults to ``(1 + r) / W0`` so that each user's spectrum fits in its
        band of width ``W0``.
    guard : int
        Empty symbol slots required on each side of the frame.
    """

    def __init__(self, grid, W0, rolloff, n_users, n_symbols, symbol_period=None, guard=8):
        if not W0 > 0:
            raise ValueError("user spacing W0 must be positive")
        if not 0 <= rolloff <= 1:
            raise ValueError("roll-off must lie in [0, 1]")
        if n_users < 1 or n_symbols < 1:
            raise ValueError("need at least one user and one symbol")
        self.grid = grid
        self.W0 = float(W0)
        self.rolloff = float(rolloff)
        self.n_users = int(n_users)
        self.n_symbols = int(n_symbols)
        self.symbol_period = (1 + rolloff) / W0 if symbol_period is None else float(symbol_period)
        self.guard = int(guard)
        self._check_grid()
        self.pulses = self._build()

    # ------------------------------------------------------------------
    def _check_grid(self):
        fg = frequency_grid(self.grid)
        df = fg.step
        for name, val in (("W0", self.W0), ("1/T0", 1.0 / self.symbol_period)):
            ratio = val / df
            if abs(ratio - round(ratio)) > 1e-6 * max(ratio, 1):
                raise InvalidGridError(
                    f"{name} = {val:.6g} is not a multiple of the mesh frequency step {df:.6g}"
                )
        need = (self.n_symbols + 2 * self.guard) * self.symbol_period
        if self.grid.span < need * (1 - 1e-12):
            raise InvalidGridError(
                f"window {self.grid.span:.6g} too short for {self.n_symbols} symbols plus "
                f"{self.guard} guard slots per side (need {need:.6g})"
            )
        k1, k2 = user_range(self.n_users)
        edge = max(abs(k1), abs(k2)) * self.W0 + (1 + self.rolloff) / (2 * self.symbol_period)
        if edge > 1.0 / (2 * self.grid.step):
            raise InvalidGridError(
                f"user bands reach {edge:.6g}, beyond the mesh Nyquist frequency {1 / (2 * self.grid.step):.6g}"
            )

    def _build(self):
        fg = frequency_grid(self.grid)
        f = fg.points
        k1, k2 = user_range(self.n_users)
        l1, _ = user_range(self.n_symbols)
        out = np.empty((self.n_users, self.n_symbols, self.grid.n_samples), dtype=complex)
        for i in range(self.n_users):
            k = k1 + i
            fc = k * self.W0
            base = rrc_spectrum(f - fc, self.symbol_period, self.rolloff)
            for j in range(self.n_symbols):
                shift = (l1 + j) * self.symbol_period
                spec = base * np.exp(-2j * np.pi * (f - fc) * shift)
                out[i, j] = inverse_fourier_transform(SampledSignal(fg, spec), self.grid).samples
        return out

    # ------------------------------------------------------------------
    @property
    def k_range(self):
        return user_range(self.n_users)

    @property
    def bandwidth(self):
        """Total multiplex band ``W = N_u W0``."""
        return self.n_users * self.W0

    def band(self, k):
        """Band ``[k W0 - W0/2, k W0 + W0/2]`` of user ``k``."""
        return k * self.W0 - self.W0 / 2, k * self.W0 + self.W0 / 2

    def pulse(self, k, l):
        k1, _ = self.k_range
        l1, _ = user_range(self.n_symbols)
        return SampledSignal(self.grid, self.pulses[k - k1, l - l1])

    def gram(self):
        """Gram matrix of all pulses (identity up to rounding)."""
        P = self.pulses.reshape(-1, self.grid.n_samples)
        return (P.conj() @ P.T) * self.grid.step

    def _check_symbols(self, symbols):
        if not isinstance(symbols, SymbolMatrix):
            symbols = SymbolMatrix(symbols)
        if symbols.symbols.shape != (self.n_users, self.n_symbols):
            raise ValueError(
                f"symbol matrix {symbols.symbols.shape} does not match pulse bank "
                f"({self.n_users}, {self.n_symbols})"
            )
        return symbols

    def synthesize(self, symbols):
        """``sum s_l^k g_l^k`` on the bank's mesh."""
        symbols = self._check_symbols(symbols)
        x = np.tensordot(symbols.symbols, self.pulses, axes=([0, 1], [0, 1]))
        return SampledSignal(self.grid, x)

    def project(self, signal):
        """Matched-filter outputs ``<signal, g_l^k>``."""
        if signal.grid != self.grid:
            raise InvalidGridError("signal and pulse bank live on different meshes")
        s = np.tensordot(self.pulses.conj(), signal.samples, axes=([2], [0])) * self.grid.step
        return SymbolMatrix(s)

    def scaled(self, grid, factor):
        """Same bank on ``grid`` with time stretched by ``factor`` (frequencies divided)."""
        return PulseBank(
            grid, self.W0 / factor, self.rolloff, self.n_users, self.n_symbols,
            self.symbol_period * factor, self.guard,
        )


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------


def tau_grid_for(time_grid):
    """Generalised-time mesh: same cell count, twice the cell width."""
    return make_time_grid(2 * time_grid.t_start, 2 * time_grid.t_end, time_grid.n_samples)


def lambda_grid_for(time_grid):
    return al_spectral_grid(time_grid)


def _l_grid(lam_grid):
    c = 2 * np.pi
    return make_spectral_grid(lam_grid.l_start / c, lam_grid.l_end / c, lam_grid.n_samples)


def nfdm_pulse_bank(time_grid, W0, rolloff, n_users, n_symbols, symbol_period=None, guard=8):
    """Pulse bank on the generalised-time mesh paired with ``time_grid``.

    Warns when the nonlinear simulation band ``pi/eps`` is below four times the
    multiplex band ``2 pi N_u W0``.
    """
    bank = PulseBank(tau_grid_for(time_grid), W0, rolloff, n_users, n_symbols, symbol_period, guard)
    L = np.pi / time_grid.step
    W = 2 * np.pi * bank.bandwidth
    if L < 4 * W:
        warnings.warn(
            f"simulation band {L:.4g} is below 4x the signal band {W:.4g}; refine the time mesh",
            BandwidthWarning,
            stacklevel=2,
        )
    return bank


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------


def build_u(symbols, pulses):
    """``u(tau) = sqrt(2) sum s_l^k phi_l^k(tau)`` with ``phi = g / sqrt(2)``."""
    return pulses.synthesize(symbols)


def U_from_u(u, lam_grid=None):
    """``U(lambda) = F(u)(lambda / 2pi) / sqrt(2)`` on the lambda mesh paired with ``u``.

    Note that with ``dl = dlambda / 2pi``, ``energy(u) = 2 * sum |U|^2 dl``.
    """
    if lam_grid is None:
        g = u.grid
        lam_grid = al_spectral_grid(make_time_grid(g.t_start / 2, g.t_end / 2, g.n_samples))
    spec = fourier_transform(u, _l_grid(lam_grid))
    return SampledSignal(lam_grid, spec.samples / np.sqrt(2))


def u_from_U(U, tau_grid=None):
    """Inverse of :func:`U_from_u`."""
    lg = _l_grid(U.grid)
    if tau_grid is None:
        n = lg.n_samples
        dt = 1.0 / (n * lg.step)
        tau_grid = make_time_grid(-(n // 2) * dt, -(n // 2) * dt + n * dt, n)
    u = inverse_fourier_transform(SampledSignal(lg, U.samples * np.sqrt(2)), tau_grid)
    return u


def _values(x):
    if isinstance(x, SampledSignal):
        return x.samples, x.grid
    return np.asarray(x, dtype=complex), None


def _wrap(vals, grid):
    return vals if grid is None else SampledSignal(grid, vals)


def qhat_from_U(U):
    """Disk map ``qhat = sqrt(1 - exp(-|U|^2)) exp(j arg U)``; always ``|qhat| < 1``."""
    v, g = _values(U)
    mag = np.abs(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mag > 0, v / np.where(mag > 0, mag, 1), 0)
    return _wrap(np.sqrt(-np.expm1(-(mag**2))) * unit, g)


def U_from_qhat(qhat):
    """Inverse disk map ``U = sqrt(-log(1 - |qhat|^2)) exp(j arg qhat)``."""
    v, g = _values(qhat)
    mag = np.abs(v)
    if np.any(mag >= 1):
        k = int(np.argmax(mag >= 1))
        raise DomainError(f"|qhat| = {mag[k]:.6g} >= 1 at index {k}", index=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mag > 0, v / np.where(mag > 0, mag, 1), 0)
    return _wrap(np.sqrt(-np.log1p(-(mag**2))) * unit, g)


def disk_margin(qhat):
    v, _ = _values(qhat)
    return float(1.0 - np.max(np.abs(v))) if v.size else 1.0


# --------------------------------------------------------------------------
# transceiver
# --------------------------------------------------------------------------


def nfdm_transmit(symbols, pulses, time_grid, s=1, diagnostics=False):
    """Symbols -> ``u`` -> ``U`` -> ``qhat`` -> ``q(t, 0)`` by discrete layer peeling.

    ``pulses`` must live on ``tau_grid_for(time_grid)``. Only the defocusing
    regime is supported. Raises :class:`DomainError` (with a
    :class:`PeakPowerWarning`) when ``1 - max|qhat| < 1e-12``.
    """
    if pulses.grid != tau_grid_for(time_grid):
        raise InvalidGridError("pulse bank must be built on tau_grid_for(time_grid)")
    lam_grid = lambda_grid_for(time_grid)
    u = build_u(symbols, pulses)
    U = U_from_u(u, lam_grid)
    qh = qhat_from_U(U)
    margin = disk_margin(qh)
    if margin < PEAK_MARGIN:
        msg = (
            f"spectral amplitude within {margin:.3g} of the unit circle "
            f"(max|U| = {np.max(np.abs(U.samples)):.3g}); peak-to-average ratio too high"
        )
        warnings.warn(msg, PeakPowerWarning, stacklevel=2)
        raise DomainError(msg)
    sd = ab_from_qhat(qh, s, periodic=True)
    out = dlp_inverse(sd, time_grid, diagnostics=diagnostics)
    if diagnostics:
        q, diag = out
        diag.update(u=u, U=U, qhat=qh, disk_margin=margin)
        return q, diag
    return out


def _distance(cfg):
    if cfg is None:
        return 0.0
    if isinstance(cfg, ChannelConfig):
        return cfg.distance
    return float(cfg)


def project_U(U, pulses):
    """Basis projection ``s = (1/pi) int U conj(Phi) dlambda`` in the lambda domain."""
    lam_grid = U.grid
    P = pulses.pulses.reshape(-1, pulses.grid.n_samples)
    lg = _l_grid(lam_grid)
    Phi = np.array([fourier_transform(SampledSignal(pulses.grid, p), lg).samples for p in P]) / np.sqrt(2)
    s = (Phi.conj() @ U.samples) * lam_grid.step / np.pi
    return SymbolMatrix(s.reshape(pulses.n_users, pulses.n_symbols))


def nfdm_receive(qL, pulses, cfg=None, method="lambda"):
    """Received signal -> symbols.

    Forward NFT (Ablowitz-Ladik on the lambda mesh of ``qL``), channel
    inversion ``H*``, inverse disk map, and projection onto the pulse basis.
    ``cfg`` is a :class:`ChannelConfig` or a distance (``None`` means 0).
    ``method`` selects the lambda-domain projection or the tau-domain matched
    filter; the two agree to rounding.
    """
    d = _distance(cfg)
    sd = al_nft(qL)
    if d:
        sd = nft_channel_filter(sd, -d)
    U = U_from_qhat(sd.spectrum())
    if method == "lambda":
        return project_U(U, pulses)
    if method == "tau":
        return pulses.project(u_from_U(U, pulses.grid))
    raise ValueError(f"unknown projection method {method!r}; use 'lambda' or 'tau'")


def nfdm_loopback(symbols, pulses, time_grid, cfg=None, rng=None):
    """Transmit, propagate through ``cfg`` (if given) and receive."""
    from .channel import ssfm_propagate

    if cfg is not None and not isinstance(cfg, ChannelConfig):
        cfg = ChannelConfig(distance=float(cfg))
    q0 = nfdm_transmit(symbols, pulses, time_grid)
    qL = q0
    if cfg is not None and (cfg.distance > 0 or cfg.noise_psd > 0):
        qL = ssfm_propagate(q0, cfg, rng=rng)
    return nfdm_receive(qL, pulses, cfg), q0, qL


def symbols_for_power(pulses, power, rng=None):
    """Random Gaussian symbols for average power ``power`` in physical time.

    A symbol slot lasts ``T0/2`` in time ``t = tau/2``, so the mean symbol
    energy is ``power * T0 / 2``.
    """
    scale = math.sqrt(power * pulses.symbol_period / 2)
    return SymbolMatrix.random(pulses.n_users, pulses.n_symbols, rng, scale=scale)
