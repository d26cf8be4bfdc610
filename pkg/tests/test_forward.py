import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from nfdm.exceptions import ApplicabilityError, DomainError, NumericFailureError
from nfdm.forward import (
    CoefficientPolynomials,
    PeriodicityWarning,
    _sinc_cos,
    al_forward,
    al_nft,
    al_spectral_grid,
    cell_matrix,
    check_applicability,
    clp_forward,
    clp_forward_ratio,
    evaluate_polynomials,
    parseval_energy,
)
from nfdm.grids import (
    SampledSignal,
    centered_time_grid,
    energy,
    fourier_transform,
    make_spectral_grid,
    make_time_grid,
)
from nfdm.inverse import check_discrete_unimodularity, coefficients_from_scattering


def smooth_pulse(amp=0.5, n=2048, span=64.0):
    g = centered_time_grid(span, n)
    t = g.points
    return SampledSignal(g, amp * np.exp(-(t**2) / 4) * np.exp(0.4j * t))


def zs_oracle(qfun, t0, t1, lam, s):
    """a, b by high-accuracy integration of v' = [[-j lam, q], [s q*, j lam]] v."""

    def rhs(t, y):
        v = y[:2] + 1j * y[2:]
        qt = qfun(t)
        dv = np.array([-1j * lam * v[0] + qt * v[1], s * np.conj(qt) * v[0] + 1j * lam * v[1]])
        return np.r_[dv.real, dv.imag]

    v0 = np.exp(-1j * lam * t0) * np.array([1.0, 0.0])
    sol = solve_ivp(rhs, (t0, t1), np.r_[v0.real, v0.imag], rtol=1e-12, atol=1e-14, method="DOP853")
    v = sol.y[:2, -1] + 1j * sol.y[2:, -1]
    return np.exp(1j * lam * t1) * v[0], np.exp(-1j * lam * t1) * v[1]


# --------------------------------------------------------------------------
# cell propagator
# --------------------------------------------------------------------------


@pytest.mark.parametrize("s", [1, -1])
@pytest.mark.parametrize("lam", [-3.0, -0.2, 0.0, 0.4, 0.8, 2.5])
def test_cell_matrix_matches_matrix_exponential(s, lam):
    qk, tk, eps = 0.8 * np.exp(0.7j), 0.3, 0.25
    x, xbar, y, ybar = cell_matrix(lam, qk, tk, eps, s)
    K = np.array([[-1j * lam, qk], [s * np.conj(qk), 1j * lam]])
    E = expm(K * eps)
    # map (a, b) at the left edge to (a, b) at the right edge
    left, right = tk - eps / 2, tk + eps / 2
    D = lambda t: np.diag([np.exp(1j * lam * t), np.exp(-1j * lam * t)])  # noqa: E731
    ref = D(right) @ E @ np.linalg.inv(D(left))
    np.testing.assert_allclose([[x, ybar], [y, xbar]], ref, atol=1e-14)
    assert abs(x * xbar - y * ybar - 1) < 1e-14


def test_cell_matrix_conjugate_symmetry():
    qk, tk, eps = 0.5 - 0.2j, -1.1, 0.1
    for s in (1, -1):
        lam = np.linspace(-4, 4, 17)
        _, _, y, ybar = cell_matrix(lam, qk, tk, eps, s)
        np.testing.assert_allclose(ybar, s * np.conj(y), atol=1e-15)


def test_delta_branch_is_inert():
    eps = 0.3
    for delta in (0.7, 2.1j, 1.3 + 0.4j, 1e-7):
        c1, s1 = _sinc_cos(delta, eps)
        c2, s2 = _sinc_cos(-delta, eps)
        assert c1 == pytest.approx(c2, abs=1e-15)
        assert s1 == pytest.approx(s2, abs=1e-15)


def test_delta_zero_limit():
    # lambda^2 = |q|^2 in the defocusing case gives delta = 0 exactly
    qk, eps = 0.6, 0.2
    x, xbar, y, ybar = cell_matrix(0.6, qk, 0.0, eps, 1)
    assert np.all(np.isfinite([x, xbar, y, ybar]))
    K = np.array([[-0.6j, qk], [qk, 0.6j]])
    E = expm(K * eps)
    D = lambda t: np.diag([np.exp(0.6j * t), np.exp(-0.6j * t)])  # noqa: E731
    ref = D(eps / 2) @ E @ np.linalg.inv(D(-eps / 2))
    np.testing.assert_allclose([[x, ybar], [y, xbar]], ref, atol=1e-14)


# --------------------------------------------------------------------------
# continuous layer peeling
# --------------------------------------------------------------------------


def test_vacuum():
    g = centered_time_grid(8, 64)
    lg = make_spectral_grid(-4, 4, 33)
    sd = clp_forward(SampledSignal(g, np.zeros(64)), lg)
    assert np.all(sd.a == 1) and np.all(sd.b == 0)
    r = clp_forward_ratio(SampledSignal(g, np.zeros(64)), lg)
    assert np.all(r.samples == 0)


@pytest.mark.parametrize("s", [1, -1])
def test_rectangle_against_matrix_exponential(s):
    amp, T, n = 0.8 * np.exp(0.3j), 2.0, 64
    eps = T / n
    g = make_time_grid(eps / 2, T + eps / 2, n)  # cells tile [0, T]
    lg = make_spectral_grid(-5, 5, 41)
    sd = clp_forward(SampledSignal(g, amp * np.ones(n)), lg, s)
    for lam, a, b in zip(lg.points, sd.a, sd.b):
        K = np.array([[-1j * lam, amp], [s * np.conj(amp), 1j * lam]])
        v = expm(K * T) @ np.array([1.0, 0.0])
        assert abs(a - np.exp(1j * lam * T) * v[0]) < 1e-6 * abs(a)
        assert abs(b - np.exp(-1j * lam * T) * v[1]) < 1e-6 * max(abs(b), 1e-12)


def test_small_gaussian_is_linear_spectrum():
    g = centered_time_grid(64, 2048)
    t = g.points
    q = SampledSignal(g, 1e-3 * np.exp(-(t**2) / 2) * np.exp(0.5j * t))
    lg = make_spectral_grid(-3, 3, 121)
    sd = clp_forward(q, lg, 1)
    # first order: b(lambda) = s * integral q*(t) exp(-2j lambda t) dt
    lin = np.array([np.sum(np.conj(q.samples) * np.exp(-2j * lam * t)) * g.step for lam in lg.points])
    assert np.linalg.norm(sd.qhat - lin) / np.linalg.norm(lin) < 1e-2
    assert np.max(np.abs(sd.a - 1)) < 1e-5


def test_ratio_matches_b_over_a():
    q = smooth_pulse(0.5)
    assert np.max(np.abs(q.grid.step * q.samples)) < 0.1
    lg = make_spectral_grid(-6, 6, 241)
    ref = clp_forward(q, lg).qhat
    got = clp_forward_ratio(q, lg).samples
    assert np.max(np.abs(got - ref)) < 1e-8


def test_ratio_survives_overflow():
    n, T, amp = 1600, 80.0, 10.0
    g = make_time_grid(0, T, n)
    q = SampledSignal(g, amp * np.ones(n))
    assert check_applicability(q).P > 25
    lg = make_spectral_grid(-2, 2, 9)
    with pytest.raises(NumericFailureError), np.errstate(all="ignore"):
        clp_forward(q, lg, 1)
    r = clp_forward_ratio(q, lg, 1)
    assert np.all(np.isfinite(r.samples))
    # |qhat| = 1 - O(exp(-2P)) rounds to one here
    assert np.all(np.abs(r.samples) <= 1 + 1e-12)


def test_causality_of_partial_spectrum():
    q = smooth_pulse(0.7, n=256, span=16)
    lg = make_spectral_grid(-4, 4, 65)
    k = 100
    ref = clp_forward_ratio(q, lg, n_cells=k).samples
    rng = np.random.default_rng(3)
    tail = q.samples.copy()
    tail[k:] = rng.normal(size=256 - k) + 1j * rng.normal(size=256 - k)
    got = clp_forward_ratio(SampledSignal(q.grid, tail), lg, n_cells=k).samples
    np.testing.assert_array_equal(got, ref)


@pytest.mark.parametrize("s", [1, -1])
def test_unimodularity_and_disk(s):
    q = smooth_pulse(1.0)
    lg = make_spectral_grid(-8, 8, 321)
    sd = clp_forward(q, lg, s)
    assert sd.unimodularity_residual().max() < 1e-6
    if s == 1:
        assert np.max(np.abs(sd.qhat)) < 1


def test_a_tail_asymptotics():
    q = smooth_pulse(0.5, n=4096)
    E = energy(q)
    lg = make_spectral_grid(30, 40, 3)
    sd = clp_forward(q, lg, 1)
    # a = 1 + E/(2 j lambda) + O(lambda^-2)
    dev = np.abs(sd.a - 1) * lg.points
    np.testing.assert_allclose(dev, E / 2, rtol=0.05)


def test_mesh_refinement_reduces_error():
    qfun = lambda t: 0.8 * np.exp(-(t**2) / 2) * np.exp(0.3j * t)  # noqa: E731
    lams = [-1.0, 0.3, 1.5]
    ref = [zs_oracle(qfun, -12, 12, lam, 1) for lam in lams]
    errs = []
    for n in (128, 256, 512):
        g = centered_time_grid(24, n)
        q = SampledSignal(g, qfun(g.points))
        got = [clp_forward(q, make_spectral_grid(lam, lam + 1, 1), 1) for lam in lams]
        errs.append(max(abs(gd.b[0] - rb) for gd, (_, rb) in zip(got, ref)))
    assert errs[0] > errs[1] > errs[2]
    # midpoint sampling converges at second order
    assert errs[1] / errs[2] > 3.5


# --------------------------------------------------------------------------
# Ablowitz-Ladik
# --------------------------------------------------------------------------


def _al_from_Q(Q, s, M=None):
    g = make_time_grid(0, len(Q), len(Q))  # eps = 1 so samples are Q
    return al_forward(SampledSignal(g, np.asarray(Q)), M, s)


def test_al_one_cell_focusing():
    Q0 = 0.3 + 0.2j
    p = _al_from_Q([Q0], -1, M=4)
    c0 = 1 / np.sqrt(1 + abs(Q0) ** 2)
    np.testing.assert_allclose(p.A, [c0, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(p.B, [-c0 * np.conj(Q0), 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("s", [1, -1])
def test_al_two_cells(s):
    Q0, Q1 = 0.3 + 0.2j, -0.1 + 0.4j
    p = _al_from_Q([Q0, Q1], s, M=4)
    c = 1 / np.sqrt((1 - s * abs(Q0) ** 2) * (1 - s * abs(Q1) ** 2))
    np.testing.assert_allclose(p.A, c * np.array([1, s * np.conj(Q0) * Q1, 0, 0]), atol=1e-15)
    np.testing.assert_allclose(p.B, c * s * np.array([np.conj(Q1), np.conj(Q0), 0, 0]), atol=1e-15)


def test_al_three_cells_focusing_hand_iteration():
    # one more hand step from the two-cell result (s = -1)
    Q0, Q1, Q2 = 0.3 + 0.2j, -0.1 + 0.4j, 0.25 - 0.15j
    s = -1
    p = _al_from_Q([Q0, Q1, Q2], s, M=4)
    c = np.prod([1 / np.sqrt(1 + abs(x) ** 2) for x in (Q0, Q1, Q2)])
    A = c * np.array([1, -np.conj(Q0) * Q1 - np.conj(Q1) * Q2, -np.conj(Q0) * Q2, 0])
    B = c * np.array(
        [-np.conj(Q2), -np.conj(Q1) + np.conj(Q0) * Q1 * np.conj(Q2), -np.conj(Q0), 0]
    )
    np.testing.assert_allclose(p.A, A, atol=1e-15)
    np.testing.assert_allclose(p.B, B, atol=1e-15)


def test_al_vacuum_and_applicability():
    p = _al_from_Q([0, 0, 0], 1, M=8)
    np.testing.assert_array_equal(p.A, np.eye(8)[0])
    assert np.all(p.B == 0)
    with pytest.raises(ApplicabilityError):
        _al_from_Q([0.2, 1.0], 1)
    with pytest.raises(ValueError):
        _al_from_Q([0.1] * 8, 1, M=4)


def test_al_default_length():
    p = _al_from_Q([0.1] * 5, 1)
    assert p.size == 16


def test_evaluate_trivial_polynomial():
    lg = make_spectral_grid(-1, 1, 16)
    p = CoefficientPolynomials(np.eye(8)[0].astype(complex), np.zeros(8, complex), 1, 0.1, 0.0, 1)
    sd = evaluate_polynomials(p, lg)
    np.testing.assert_allclose(sd.a, 1)
    np.testing.assert_allclose(sd.b, 0)


def test_evaluate_then_refit():
    q = smooth_pulse(0.8, n=256, span=16)
    p = al_forward(q, 256)
    sd = evaluate_polynomials(p, al_spectral_grid(q.grid))
    back = coefficients_from_scattering(sd, q.grid)
    np.testing.assert_allclose(back.A, p.A, atol=1e-10)
    np.testing.assert_allclose(back.B, p.B, atol=1e-10)


def test_evaluate_warns_beyond_one_period():
    q = smooth_pulse(0.5, n=64, span=16)
    p = al_forward(q)
    period = np.pi / q.grid.step
    with pytest.warns(PeriodicityWarning):
        evaluate_polynomials(p, make_spectral_grid(-period, period, 64))


def test_al_periodicity():
    q = smooth_pulse(0.5, n=128, span=16)
    p = al_forward(q)
    period = np.pi / q.grid.step
    g1 = make_spectral_grid(-1.0, 1.0, 9)
    g2 = make_spectral_grid(-1.0 + period, 1.0 + period, 9)
    np.testing.assert_allclose(evaluate_polynomials(p, g2).a, evaluate_polynomials(p, g1).a, atol=1e-10)


def test_al_agrees_with_clp():
    q = smooth_pulse(0.5)
    assert np.max(np.abs(q.grid.step * q.samples)) < 0.05
    lg = al_spectral_grid(q.grid)
    al = al_nft(q, lg)
    cl = clp_forward(q, lg)
    assert np.linalg.norm(al.qhat - cl.qhat) / np.linalg.norm(cl.qhat) < 1e-3


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.complex_numbers(max_magnitude=0.7, allow_nan=False, allow_infinity=False), min_size=1, max_size=24),
    st.sampled_from([1, -1]),
)
def test_discrete_unimodularity_of_al_output(Q, s):
    p = _al_from_Q(Q, s)
    assert check_discrete_unimodularity(p) < 1e-10


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def test_parseval_examples():
    lg = make_spectral_grid(-4, 4, 400)
    sd = clp_forward(SampledSignal(centered_time_grid(4, 8), np.zeros(8)), lg)
    assert parseval_energy(sd) == 0
    q = smooth_pulse(1.0)
    cl = clp_forward(q, al_spectral_grid(q.grid))
    assert abs(parseval_energy(cl) - energy(q)) / energy(q) < 1e-3


def test_parseval_constant_band():
    from nfdm.forward import ScatteringData

    r, ell = 0.6, 3.0
    lg = make_spectral_grid(-5, 5, 1000)
    qh = np.where(np.abs(lg.points + 0.0015) < ell / 2, r, 0.0)
    sd = ScatteringData(lg, qh, s=1)
    band = np.count_nonzero(qh) * lg.step
    assert band == pytest.approx(ell)
    assert parseval_energy(sd) == pytest.approx(-(ell / np.pi) * np.log(1 - r**2), rel=1e-12)
    with pytest.raises(DomainError):
        parseval_energy(ScatteringData(lg, np.full(1000, 1.0), s=1))


def test_applicability_examples():
    rep = check_applicability(np.zeros(10), eps=0.1)
    assert rep.P == 0 and rep.ok and rep.q_small
    rep = check_applicability(np.full(100, 0.1), eps=1.0)
    assert rep.P == pytest.approx(-50 * np.log(0.99), rel=1e-12)
    assert rep.P == pytest.approx(0.5025, abs=1e-4)
    rep = check_applicability(np.array([0.2, 1.0]), eps=1.0)
    assert not rep.q_below_one and not rep.ok
    with pytest.raises(ValueError):
        check_applicability(np.ones(3))


def test_spectrum_is_a_signal():
    q = smooth_pulse(0.3, n=128, span=16)
    sd = al_nft(q)
    assert sd.spectrum().samples.shape == (128,)
    assert fourier_transform(q).samples.shape == (128,)
