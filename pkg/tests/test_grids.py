import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfinv

from nfdm.exceptions import InvalidGridError, UndefinedMeasureError
from nfdm.grids import (
    SampledSignal,
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


def test_time_grid_example_mesh():
    g = make_time_grid(-32, 32, 2048)
    assert g.step == 0.03125
    assert g.points[0] == -32
    assert g.points[-1] == 32 - 0.03125


def test_single_cell_grid():
    g = make_time_grid(0, 1, 1)
    assert g.step == 1.0
    np.testing.assert_array_equal(g.points, [0.0])


def test_fine_grid_step():
    g = make_time_grid(-32, 32, 16384)
    assert g.step == pytest.approx(64 / 16384, rel=1e-15)


@pytest.mark.parametrize("args", [(0, 0, 4), (1, 0, 4), (0, 1, 0), (0, 1, 2.5), (0, np.inf, 4)])
def test_invalid_grids(args):
    with pytest.raises(InvalidGridError):
        make_time_grid(*args)
    with pytest.raises(InvalidGridError):
        make_spectral_grid(*args)


def test_signal_checks_and_immutability():
    g = make_time_grid(0, 1, 4)
    with pytest.raises(InvalidGridError):
        SampledSignal(g, np.zeros(3))
    with pytest.raises(ValueError):
        SampledSignal(g, [0, np.nan, 0, 0])
    s = SampledSignal(g, np.ones(4))
    with pytest.raises(ValueError):
        s.samples[0] = 2
    with pytest.raises(AttributeError):
        s.grid = g


def gaussian(n=2048, span=64.0, width=1.0, shift=0.0):
    g = centered_time_grid(span, n)
    t = g.points
    return SampledSignal(g, np.exp(-((t - shift) ** 2) / (2 * width**2)) * np.exp(0.3j * t))


def test_fourier_zero():
    g = centered_time_grid(8, 64)
    z = fourier_transform(SampledSignal(g, np.zeros(64)))
    assert np.all(z.samples == 0)


def test_fourier_round_trip_and_plancherel():
    q = gaussian()
    Q = fourier_transform(q)
    back = inverse_fourier_transform(Q, q.grid)
    assert np.max(np.abs(back.samples - q.samples)) < 1e-12
    assert abs(energy(Q) - energy(q)) / energy(q) < 1e-12


def test_fourier_convention_matches_closed_form():
    # exp(-pi t^2) is its own transform under the unitary ordinary-frequency convention
    g = centered_time_grid(16, 512)
    q = SampledSignal(g, np.exp(-np.pi * g.points**2))
    Q = fourier_transform(q)
    np.testing.assert_allclose(Q.samples, np.exp(-np.pi * Q.grid.points**2), atol=1e-12)


def test_fourier_shift_gives_linear_phase():
    g = centered_time_grid(32, 512)
    q = SampledSignal(g, np.exp(-np.pi * (g.points - 2.0) ** 2))
    Q = fourier_transform(q)
    f = Q.grid.points
    np.testing.assert_allclose(Q.samples, np.exp(-np.pi * f**2) * np.exp(-2j * np.pi * f * 2.0), atol=1e-12)


def test_energy_examples():
    g = make_time_grid(-2, 2, 400)
    rect = SampledSignal(g, np.r_[np.zeros(100), np.ones(200), np.zeros(100)])
    assert energy(rect) == pytest.approx(2.0, rel=1e-12)
    h = centered_time_grid(40, 4096)
    gq = SampledSignal(h, np.exp(-h.points**2))
    assert abs(energy(gq) - np.sqrt(np.pi / 2)) / np.sqrt(np.pi / 2) < 1e-6
    assert energy(SampledSignal(h, np.zeros(4096))) == 0


@settings(max_examples=30, deadline=None)
@given(
    re=st.floats(-10, 10, allow_nan=False),
    im=st.floats(-10, 10, allow_nan=False),
)
def test_energy_scales_quadratically(re, im):
    c = complex(re, im)
    q = gaussian(n=256, span=16)
    assert energy(c * q) == pytest.approx(abs(c) ** 2 * energy(q), rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(
    re=st.floats(-10, 10, allow_nan=False).filter(lambda x: abs(x) > 1e-3),
    im=st.floats(-10, 10, allow_nan=False),
)
def test_duration_and_bandwidth_scale_invariant(re, im):
    c = complex(re, im)
    q = gaussian(n=512, span=32)
    assert duration_99(c * q) == pytest.approx(duration_99(q), rel=1e-9)
    assert bandwidth_99(c * q) == pytest.approx(bandwidth_99(q), rel=1e-9)


def test_duration_rectangle():
    g = make_time_grid(-4, 4, 800)
    rect = SampledSignal(g, np.r_[np.zeros(250), np.ones(300), np.zeros(250)])
    # 300 cells of width 0.01 carry the energy
    assert duration_99(rect) == pytest.approx(0.99 * 3.0, rel=1e-9)


def test_duration_gaussian_erf_threshold():
    g = centered_time_grid(40, 8192)
    q = SampledSignal(g, np.exp(-g.points**2))
    # |q|^2 = exp(-2 t^2): half-width x with erf(sqrt(2) x) = 0.99
    expected = 2 * erfinv(0.99) / np.sqrt(2)
    assert duration_99(q) == pytest.approx(expected, rel=1e-4)


def test_measures_of_zero_signal():
    g = centered_time_grid(4, 16)
    with pytest.raises(UndefinedMeasureError):
        duration_99(SampledSignal(g, np.zeros(16)))
    with pytest.raises(UndefinedMeasureError):
        bandwidth_99(SampledSignal(g, np.zeros(16)))


def test_hilbert_zero_and_real_only():
    assert np.all(hilbert_transform(np.zeros(32)) == 0)
    with pytest.raises(TypeError):
        hilbert_transform(np.ones(8) * 1j)


def test_hilbert_periodic_cos_to_sin():
    x = 2 * np.pi * np.arange(256) / 256
    np.testing.assert_allclose(hilbert_transform(np.cos(3 * x), periodic=True), np.sin(3 * x), atol=1e-12)


def test_hilbert_lorentzian_against_closed_form():
    # standard kernel: H[1/(1+x^2)] = x/(1+x^2)
    g = centered_time_grid(2**14, 2**20)
    x = g.points
    f = 1 / (1 + x**2)
    h = hilbert_transform(f, pad=4)
    ref = x / (1 + x**2)
    core = np.abs(x) < 200
    err = np.linalg.norm(h[core] - ref[core]) / np.linalg.norm(ref[core])
    assert err < 1e-3


def test_hilbert_involution_on_bandlimited_pulse():
    g = centered_time_grid(200, 4096)
    x = g.points
    # band-pass pulse: no spectral content near zero frequency
    f = np.exp(-(x**2) / 50) * np.cos(3 * x)
    hh = hilbert_transform(hilbert_transform(f))
    assert np.linalg.norm(hh + f) / np.linalg.norm(f) < 1e-3
