"""Stochastic nonlinear Schroedinger channel in normalised units.

The field obeys

    j dq/dz = d^2 q/dt^2 - 2 s |q|^2 q + n(t, z),

with ``n`` white circular Gaussian noise of power spectral density
``noise_psd`` restricted to a band of width ``noise_bandwidth``. Propagation
uses the symmetric (Strang) split-step Fourier method on the periodic time
window of the input signal.
"""
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import InvalidGridError, StepSizeError
from .forward import ScatteringData, _check_sign
from .grids import SampledSignal, energy, frequency_grid

# nonlinear phase per step targeted by the adaptive step policy (rad)
TARGET_STEP_PHASE = 1e-3
# a prescribed step count whose nonlinear phase per step exceeds this is refused
MAX_STEP_PHASE = 0.5
# at most this many steps per unit distance in the adaptive policy
STEPS_PER_DISTANCE = 2000
EDGE_FRACTION = 1.0 / 32


class EdgeLeakageWarning(UserWarning):
    """Signal energy reaches the edges of the periodic time window."""


@dataclass(frozen=True)
class ChannelConfig:
    """Normalised channel parameters.

    ``z_steps=None`` selects the adaptive policy (see :func:`step_count`).
    ``noise_bandwidth=None`` lets the noise fill the whole simulation band.
    """

    s: int = 1
    distance: float = 0.0
    noise_psd: float = 0.0
    noise_bandwidth: Optional[float] = None
    z_steps: Optional[int] = None
    rng_seed: Optional[int] = None
    leakage_tol: float = 1e-8

    def __post_init__(self):
        _check_sign(self.s)
        if not np.isfinite(self.distance) or self.distance < 0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")
        if not np.isfinite(self.noise_psd) or self.noise_psd < 0:
            raise ValueError(f"noise_psd must be >= 0, got {self.noise_psd}")
        if self.noise_bandwidth is not None and not self.noise_bandwidth > 0:
            raise ValueError("noise_bandwidth must be positive")
        if self.z_steps is not None and (int(self.z_steps) != self.z_steps or self.z_steps < 1):
            raise ValueError(f"z_steps must be an integer >= 1, got {self.z_steps}")

    def noise_free(self):
        return replace(self, noise_psd=0.0)


def step_count(q0, cfg):
    """Number of uniform z steps used for ``q0`` under ``cfg``.

    Adaptive policy: ``dz = min(distance/2000, 1e-3 / (2 max|q|^2))``, i.e. the
    nonlinear phase rotation per step stays below 1e-3 rad. A prescribed
    ``z_steps`` is honoured unless the per-step phase exceeds 0.5 rad, in which
    case :class:`StepSizeError` carries the adaptive suggestion.
    """
    if cfg.distance == 0:
        return 0
    with np.errstate(over="ignore"):
        peak = float(np.max(np.abs(q0.samples) ** 2)) if len(q0) else 0.0
    if not math.isfinite(peak):
        raise FloatingPointError("peak power overflows; the signal cannot be propagated")
    total_phase = 2.0 * peak * cfg.distance
    adaptive = max(
        math.ceil(cfg.distance * STEPS_PER_DISTANCE - 1e-9),
        math.ceil(total_phase / TARGET_STEP_PHASE - 1e-9),
        1,
    )
    if cfg.z_steps is None:
        return adaptive
    per_step = total_phase / cfg.z_steps
    if per_step > MAX_STEP_PHASE:
        raise StepSizeError(
            f"nonlinear phase per step {per_step:.3g} rad exceeds {MAX_STEP_PHASE} rad; "
            f"use at least {adaptive} steps",
            suggested_steps=adaptive,
        )
    return int(cfg.z_steps)


def _edge_fraction(samples):
    n = samples.size
    m = max(int(n * EDGE_FRACTION), 1)
    p = np.abs(samples) ** 2
    tot = p.sum()
    if tot == 0:
        return 0.0
    return float((p[:m].sum() + p[-m:].sum()) / tot)


def _omega(grid):
    """Angular frequencies in FFT order."""
    return 2 * np.pi * np.fft.fftfreq(grid.n_samples, d=grid.step)


def _split_step(q, grid, s, distance, n_steps, noise=None):
    """Strang splitting; ``noise(k)`` returns the increment added after step k."""
    if n_steps == 0:
        return q.copy()
    h = distance / n_steps
    w2 = _omega(grid) ** 2
    half = np.exp(0.5j * w2 * h)
    q = np.fft.fft(q)
    q *= half
    for k in range(n_steps):
        q = np.fft.ifft(q)
        q *= np.exp(2j * s * h * np.abs(q) ** 2)
        if noise is not None:
            q = np.fft.fft(q)
            q *= half
            q = np.fft.ifft(q) + noise(k)
            q = np.fft.fft(q)
            if k < n_steps - 1:
                q *= half
        else:
            q = np.fft.fft(q)
            q *= half if k == n_steps - 1 else half * half
    return np.fft.ifft(q)


def _noise_source(grid, cfg, h, rng):
    """Band-limited circular Gaussian increments with variance psd*B*h per sample."""
    n = grid.n_samples
    f = np.fft.fftfreq(n, d=grid.step)
    if cfg.noise_bandwidth is None:
        mask = np.ones(n, dtype=bool)
    else:
        mask = np.abs(f) <= cfg.noise_bandwidth / 2
    full_var = cfg.noise_psd * h / grid.step

    def draw(_k):
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w *= np.sqrt(full_var / 2)
        if mask.all():
            return w
        W = np.fft.fft(w)
        W[~mask] = 0.0
        return np.fft.ifft(W)

    return draw


def ssfm_propagate(q0, cfg, rng=None):
    """Propagate ``q0`` over ``cfg.distance``.

    ``rng`` overrides the generator built from ``cfg.rng_seed``. Emits
    :class:`EdgeLeakageWarning` when the output reaches the window edges.
    """
    if not isinstance(q0, SampledSignal):
        raise TypeError("q0 must be a SampledSignal")
    n_steps = step_count(q0, cfg)
    noise = None
    if cfg.noise_psd > 0 and n_steps > 0:
        if rng is None:
            rng = np.random.default_rng(cfg.rng_seed)
        noise = _noise_source(q0.grid, cfg, cfg.distance / n_steps, rng)
    out = _split_step(np.array(q0.samples), q0.grid, cfg.s, cfg.distance, n_steps, noise)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("split-step propagation produced non-finite samples")
    # noise fills the whole window, so leakage is only judged on noise-free runs
    leak = _edge_fraction(out) if noise is None else 0.0
    if n_steps and leak > cfg.leakage_tol * n_steps:
        warnings.warn(
            f"{leak:.3g} of the output energy lies at the window edges; widen the time window",
            EdgeLeakageWarning,
            stacklevel=2,
        )
    return SampledSignal(q0.grid, out)


def backpropagate(qL, cfg, n_steps=None):
    """Noise-free split-step over the negated distance.

    With the same step count as the forward run this is the exact inverse of
    noise-free :func:`ssfm_propagate`. The step count defaults to the adaptive
    policy evaluated on ``qL`` (``|q|`` is only approximately conserved, so
    pass ``n_steps`` explicitly for a bit-exact inverse).
    """
    if n_steps is None:
        n_steps = step_count(qL, cfg)
    out = _split_step(np.array(qL.samples), qL.grid, cfg.s, -cfg.distance, int(n_steps))
    return SampledSignal(qL.grid, out)


def nft_channel_filter(scattering, distance, s=1):
    """Apply the NLS evolution in the nonlinear Fourier domain.

    For ``j q_z = q_tt - 2s|q|^2 q`` the spectral amplitude evolves as
    ``qhat(lambda, z) = exp(-4j lambda^2 z) qhat(lambda, 0)`` for either sign
    ``s``. A negative ``distance`` applies the conjugate filter.
    """
    _check_sign(s)
    lam = scattering.grid.points
    H = np.exp(-4j * lam**2 * distance)
    a = scattering.a
    b = None if scattering.b is None else scattering.b * H
    return ScatteringData(scattering.grid, scattering.qhat * H, a, b, scattering.s)


def channel_filter_response(lam, distance):
    """``H(lambda) = exp(-4j lambda^2 distance)``."""
    return np.exp(-4j * np.asarray(lam) ** 2 * distance)


def user_band_filter(signal, center, width):
    """Ideal band-pass selecting ``|f - center| <= width/2`` (ordinary frequency)."""
    if not width > 0:
        raise ValueError("band width must be positive")
    fg = frequency_grid(signal.grid)
    lo, hi = center - width / 2, center + width / 2
    tol = 1e-9 * fg.step
    f_lo = fg.l_start - fg.step / 2
    f_hi = fg.l_start + (fg.n_samples - 0.5) * fg.step
    if lo < f_lo - tol or hi > f_hi + tol:
        raise InvalidGridError(
            f"band [{lo:.6g}, {hi:.6g}] lies outside the simulation band [{f_lo:.6g}, {f_hi:.6g}]"
        )
    f = np.fft.fftfreq(signal.grid.n_samples, d=signal.grid.step)
    keep = (f >= lo - tol) & (f <= hi + tol)
    spec = np.fft.fft(signal.samples)
    spec[~keep] = 0.0
    return SampledSignal(signal.grid, np.fft.ifft(spec))


def propagation_energy_drift(q0, cfg):
    """Relative change of energy after noise-free propagation."""
    e0 = energy(q0)
    e1 = energy(ssfm_propagate(q0, cfg.noise_free()))
    return abs(e1 - e0) / e0 if e0 > 0 else abs(e1)
