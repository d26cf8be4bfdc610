"""Linear-multiplexing (WDM) baseline mirroring the NFDM chain.

Transmitter: ``q(t) = sum_k sum_l s_l^k g(t - l T) exp(2j pi k B0 t)`` with the
same unit-energy RRC pulses as the NFDM modem. Receiver for user ``k``: ideal
band filter (add-drop multiplexer), noise-free back-propagation of the filtered
signal, matched filter, and optional constant phase de-rotation.
"""
import numpy as np

from .channel import ChannelConfig, backpropagate, ssfm_propagate, step_count, user_band_filter
from .grids import SampledSignal
from .modem import PulseBank, SymbolMatrix, tau_grid_for


def wdm_pulse_bank(time_grid, B0, rolloff, n_users, n_symbols, symbol_period=None, guard=8):
    return PulseBank(time_grid, B0, rolloff, n_users, n_symbols, symbol_period, guard)


def wdm_bank_like(nfdm_bank, time_grid):
    """WDM bank matching an NFDM bank in bandwidth and symbol count.

    Generalised time ``tau`` corresponds to ``2t`` at low power, so the time
    domain bank has twice the user spacing and half the symbol period.
    """
    if nfdm_bank.grid != tau_grid_for(time_grid):
        raise ValueError("the NFDM bank must live on tau_grid_for(time_grid)")
    return nfdm_bank.scaled(time_grid, 0.5)


def wdm_transmit(symbols, pulses):
    """Sum of modulated pulses on the bank's time mesh."""
    return pulses.synthesize(symbols)


def _cfg(cfg):
    if cfg is None:
        return ChannelConfig()
    if isinstance(cfg, ChannelConfig):
        return cfg
    return ChannelConfig(distance=float(cfg))


def wdm_receive(qL, pulses, cfg=None, users=None, rotation=0.0):
    """Filter -> back-propagate -> matched filter for each requested user.

    Parameters
    ----------
    qL : SampledSignal
        Received field on the bank's time mesh.
    pulses : PulseBank
    cfg : ChannelConfig or float, optional
        Channel (or distance) to back-propagate over.
    users : int or sequence of int, optional
        Users to detect; defaults to all. Rows of other users are zero.
    rotation : float or array
        Phase (rad) removed from the detected symbols, e.g. from
        :func:`estimate_rotation`. Per-user arrays are accepted.
    """
    cfg = _cfg(cfg)
    k1, k2 = pulses.k_range
    if users is None:
        users = range(k1, k2 + 1)
    elif np.isscalar(users):
        users = [int(users)]
    out = np.zeros((pulses.n_users, pulses.n_symbols), dtype=complex)
    rot = np.broadcast_to(np.asarray(rotation, dtype=float), (pulses.n_users,))
    for k in users:
        if not k1 <= k <= k2:
            raise IndexError(f"user {k} outside [{k1}, {k2}]")
        lo, hi = pulses.band(k)
        y = user_band_filter(qL, (lo + hi) / 2, hi - lo)
        if cfg.distance > 0:
            n_steps = cfg.z_steps if cfg.z_steps is not None else step_count(y, cfg)
            y = backpropagate(y, cfg, n_steps=n_steps)
        sym = pulses.project(y).symbols[k - k1]
        out[k - k1] = sym * np.exp(-1j * rot[k - k1])
    return SymbolMatrix(out)


def estimate_rotation(sent, received):
    """Mean rotation ``arg sum(received * conj(sent))``."""
    s = sent.symbols if isinstance(sent, SymbolMatrix) else np.asarray(sent)
    r = received.symbols if isinstance(received, SymbolMatrix) else np.asarray(received)
    return float(np.angle(np.sum(r * np.conj(s))))


def wdm_loopback(symbols, pulses, cfg=None, rng=None, users=None):
    cfg = _cfg(cfg)
    q0 = wdm_transmit(symbols, pulses)
    qL = q0
    if cfg.distance > 0 or cfg.noise_psd > 0:
        qL = ssfm_propagate(q0, cfg, rng=rng)
    return wdm_receive(qL, pulses, cfg, users=users), q0, qL
