"""Uniform meshes, sampled signals, Fourier/Hilbert transforms and energy measures.

Conventions
-----------
Time samples sit at ``t[k] = t_start + k * step`` and each sample stands for the
cell ``[t[k] - step/2, t[k] + step/2]``. The Fourier transform is the unitary
ordinary-frequency transform

    Q(f) = integral q(t) exp(-2j pi f t) dt,

evaluated with the DFT on a centred frequency mesh, so energy is preserved
exactly between a signal and its spectrum.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import InvalidGridError, UndefinedMeasureError


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_samples: int

    def __post_init__(self):
        _check_span(self.t_start, self.t_end, self.n_samples)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def span(self):
        return self.t_end - self.t_start

    @property
    def step(self):
        return self.span / self.n_samples

    @property
    def points(self):
        return self.t_start + self.step * np.arange(self.n_samples)


@dataclass(frozen=True)
class SpectralGrid:
    l_start: float
    l_end: float
    n_samples: int

    def __post_init__(self):
        _check_span(self.l_start, self.l_end, self.n_samples)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def span(self):
        return self.l_end - self.l_start

    @property
    def step(self):
        return self.span / self.n_samples

    @property
    def points(self):
        return self.l_start + self.step * np.arange(self.n_samples)


Grid = Union[TimeGrid, SpectralGrid]


def _check_span(start, end, n):
    if isinstance(n, bool) or not float(n).is_integer() or n < 1:
        raise InvalidGridError(f"n_samples must be a positive integer, got {n!r}")
    if not (np.isfinite(start) and np.isfinite(end)) or end <= start:
        raise InvalidGridError(f"grid end ({end}) must exceed start ({start})")


def make_time_grid(t_start, t_end, n_samples):
    return TimeGrid(float(t_start), float(t_end), n_samples)


def make_spectral_grid(l_start, l_end, n_samples):
    return SpectralGrid(float(l_start), float(l_end), n_samples)


def centered_time_grid(span, n_samples):
    """Grid of ``n_samples`` cells on ``[-span/2, span/2)``."""
    return make_time_grid(-span / 2, span / 2, n_samples)


class SampledSignal:
    """Complex samples on a uniform grid. Samples are stored read-only."""

    __slots__ = ("grid", "samples")

    def __init__(self, grid, samples):
        samples = np.array(samples, dtype=complex).reshape(-1)
        if samples.size != grid.n_samples:
            raise InvalidGridError(
                f"{samples.size} samples do not fit a grid of {grid.n_samples}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", samples)

    def __setattr__(self, name, value):
        raise AttributeError("SampledSignal is immutable")

    @property
    def points(self):
        return self.grid.points

    @property
    def step(self):
        return self.grid.step

    def __len__(self):
        return self.grid.n_samples

    def __mul__(self, c):
        return SampledSignal(self.grid, self.samples * c)

    __rmul__ = __mul__

    def __add__(self, other):
        if other.grid != self.grid:
            raise InvalidGridError("cannot add signals on different grids")
        return SampledSignal(self.grid, self.samples + other.samples)

    def __sub__(self, other):
        return self + (-1.0) * other

    def with_samples(self, samples):
        return SampledSignal(self.grid, samples)

    def __repr__(self):
        return f"SampledSignal({self.grid!r}, energy={energy(self):.6g})"


def frequency_grid(grid):
    """Centred frequency mesh paired with ``grid`` by the DFT."""
    n = grid.n_samples
    df = 1.0 / (n * grid.step)
    f_start = -(n // 2) * df
    return make_spectral_grid(f_start, f_start + n * df, n)


def time_grid_for(spectral, t_start=None):
    """Time mesh paired with a spectral mesh (inverse of :func:`frequency_grid`)."""
    n = spectral.n_samples
    dt = 1.0 / (n * spectral.step)
    if t_start is None:
        t_start = -(n // 2) * dt
    return make_time_grid(t_start, t_start + n * dt, n)


def fourier_transform(signal, spectral=None):
    """Unitary Fourier transform of a uniformly sampled signal.

    ``spectral`` may be given to choose the frequency offset; its step must be
    the DFT step ``1/(N*step)``.
    """
    grid = signal.grid
    n = grid.n_samples
    if spectral is None:
        spectral = frequency_grid(grid)
    _check_dft_pair(grid, spectral)
    k = np.arange(n)
    f0, t0, dt, df = spectral.l_start, grid.t_start, grid.step, spectral.step
    pre = signal.samples * np.exp(-2j * np.pi * f0 * k * dt)
    spec = np.fft.fft(pre) * dt
    spec *= np.exp(-2j * np.pi * (f0 * t0 + k * df * t0))
    return SampledSignal(spectral, spec)


def inverse_fourier_transform(spectrum, grid=None):
    spectral = spectrum.grid
    n = spectral.n_samples
    if grid is None:
        grid = time_grid_for(spectral)
    _check_dft_pair(grid, spectral)
    m = np.arange(n)
    f0, t0, dt, df = spectral.l_start, grid.t_start, grid.step, spectral.step
    pre = spectrum.samples * np.exp(2j * np.pi * (f0 * t0 + m * df * t0))
    q = np.fft.ifft(pre) * (n * df)
    q *= np.exp(2j * np.pi * f0 * m * dt)
    return SampledSignal(grid, q)


def _check_dft_pair(grid, spectral):
    if grid.n_samples != spectral.n_samples:
        raise InvalidGridError("time and frequency meshes differ in size")
    if not np.isclose(grid.step * spectral.step * grid.n_samples, 1.0, rtol=1e-9):
        raise InvalidGridError("frequency step must equal 1/(N * time step)")


def hilbert_transform(values, pad=4, periodic=False):
    """Discrete Hilbert transform of real samples on a uniform mesh.

    Uses the standard kernel ``(1/(pi x)) * f``, i.e. multiplication by
    ``-1j * sign(omega)`` in the Fourier domain, so that ``H(cos) = sin``.

    With ``periodic=False`` the samples are zero-padded to ``pad`` times their
    length, which approximates the transform on the real line for data that
    decays towards the mesh ends. ``periodic=True`` treats the samples as one
    period of a periodic function and applies the circular transform exactly.
    """
    values = np.asarray(values)
    if np.iscomplexobj(values):
        if np.any(values.imag != 0):
            raise TypeError("hilbert_transform expects real-valued samples")
        values = values.real
    values = values.astype(float)
    n = values.size
    size = n if periodic else max(int(pad), 1) * n
    spec = np.fft.fft(values, size)
    mult = -1j * np.sign(np.fft.fftfreq(size))
    if size % 2 == 0:
        mult[size // 2] = 0.0
    return np.fft.ifft(spec * mult).real[:n]


def energy(signal):
    """Rectangle-rule integral of ``|samples|^2``."""
    return float(np.sum(np.abs(signal.samples) ** 2) * signal.step)


def _interval_99(signal, fraction=0.99):
    dens = np.abs(signal.samples) ** 2 * signal.step
    total = dens.sum()
    if not total > 0:
        raise UndefinedMeasureError("99%-energy interval undefined for zero energy")
    cum = np.concatenate(([0.0], np.cumsum(dens)))
    edges = signal.points[0] - signal.step / 2 + signal.step * np.arange(cum.size)
    tail = (1.0 - fraction) / 2 * total

    # lower edge: rightmost crossing, upper edge: leftmost (shortest interval on ties)
    i = np.searchsorted(cum, tail, side="right")
    i = min(max(i, 1), cum.size - 1)
    lo = edges[i - 1] + (tail - cum[i - 1]) / (cum[i] - cum[i - 1]) * signal.step
    upper = total - tail
    j = np.searchsorted(cum, upper, side="left")
    j = min(max(j, 1), cum.size - 1)
    hi = edges[j - 1] + (upper - cum[j - 1]) / (cum[j] - cum[j - 1]) * signal.step
    return lo, hi


def duration_99(signal):
    """Length of the interval left after trimming 0.5% of the energy from each end."""
    lo, hi = _interval_99(signal)
    return float(hi - lo)


def bandwidth_99(signal):
    """``duration_99`` of the Fourier spectrum (in the spectral mesh units)."""
    return duration_99(fourier_transform(signal))
