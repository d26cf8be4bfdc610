"""Inverse nonlinear Fourier transform in the defocusing regime.

Pipeline: spectral amplitude -> ``|a|`` from unimodularity -> phase of ``a``
by a Hilbert transform of ``log|a|`` -> ``b = qhat * a`` -> signal by layer
peeling (discrete, Ablowitz-Ladik based, or continuous).
"""
import numpy as np

from .exceptions import (
    ApplicabilityError,
    DivergenceError,
    DomainError,
    InvalidGridError,
    SingularUpdateError,
)
from .forward import (
    CoefficientPolynomials,
    ScatteringData,
    _check_sign,
    al_normalization,
    cell_matrix,
    check_applicability,
    P_MAX_DEFAULT,
)
from .grids import SampledSignal, hilbert_transform

# Sign relating the phase of a to H(log|a|), fixed by the calibration test
# against the forward transform (tests/test_inverse.py::test_hilbert_sign_calibration).
HILBERT_SIGN = 1


def _qhat_array(qhat):
    if isinstance(qhat, ScatteringData):
        return qhat.qhat, qhat.grid
    if isinstance(qhat, SampledSignal):
        return qhat.samples, qhat.grid
    return np.asarray(qhat, dtype=complex), None


def magnitude_a(qhat, s=1):
    """``|a| = (1 - s|qhat|^2)^(-1/2)``."""
    s = _check_sign(s)
    qh, _ = _qhat_array(qhat)
    mag2 = np.abs(qh) ** 2
    if s == 1 and np.any(mag2 >= 1):
        k = int(np.argmax(mag2 >= 1))
        raise DomainError(f"|qhat| = {np.sqrt(mag2[k]):.6g} >= 1 at lambda index {k}", index=k)
    return 1.0 / np.sqrt(1.0 - s * mag2)


def phase_a(mag, periodic=False, pad=4):
    """Phase of ``a`` from its modulus (Kramers-Kronig pair of ``log|a|``).

    ``periodic=True`` is exact for spectra that are periodic in lambda, such
    as those of the Ablowitz-Ladik scheme sampled over one period.
    """
    mag = np.asarray(mag, dtype=float)
    if np.any(mag < 1 - 1e-12):
        k = int(np.argmax(mag < 1 - 1e-12))
        raise DomainError(f"|a| = {mag[k]:.6g} < 1 at index {k}; log|a| must be >= 0", index=k)
    return HILBERT_SIGN * hilbert_transform(np.log(mag), pad=pad, periodic=periodic)


def ab_from_qhat(qhat, s=1, grid=None, periodic=False, pad=4):
    """Scattering coefficients from the spectral amplitude alone."""
    s = _check_sign(s)
    if s != 1:
        raise DomainError("phase retrieval from |a| requires the defocusing regime (s=+1)")
    qh, g = _qhat_array(qhat)
    grid = g if grid is None else grid
    if grid is None:
        raise ValueError("a spectral grid is required for raw arrays")
    mag = magnitude_a(qh, s)
    a = mag * np.exp(1j * phase_a(mag, periodic=periodic, pad=pad))
    return ScatteringData(grid, qh, a, qh * a, s)


# --------------------------------------------------------------------------
# discrete layer peeling
# --------------------------------------------------------------------------


def coefficients_from_scattering(scattering, time_grid):
    """Fourier coefficients ``A_m``, ``B_m`` of the AL state at the last cell.

    The lambda mesh must cover exactly one period ``pi/eps`` of the AL scheme.
    """
    grid = scattering.grid
    eps = time_grid.step
    period = np.pi / eps
    if not np.isclose(grid.span, period, rtol=1e-9):
        raise InvalidGridError(
            f"lambda mesh span {grid.span:.6g} must equal the AL period pi/eps = {period:.6g}"
        )
    M = grid.n_samples
    N = time_grid.n_samples
    if M < N:
        raise InvalidGridError(f"need M >= N coefficients, got M={M}, N={N}")
    if scattering.a is None:
        raise ValueError("scattering data must carry a and b; use ab_from_qhat first")
    lam = grid.points
    t_last = time_grid.t_start + (N - 1) * eps
    A_lam = scattering.a
    B_lam = np.exp(2j * lam * t_last) * scattering.b
    m = np.arange(M)
    phase = np.exp(-2j * eps * m * grid.l_start)
    A = phase * np.fft.fft(A_lam) / M
    B = phase * np.fft.fft(B_lam) / M
    return CoefficientPolynomials(A, B, scattering.s, eps, time_grid.t_start, N, 1.0)


def q_recovery_primary(A, B, s=1):
    """Last applied sample ``Q`` from the constant coefficients: ``Q* = s B_0/A_0``."""
    if A[0] == 0:
        raise SingularUpdateError("A_0 vanished during layer peeling")
    return s * np.conj(B[0] / A[0])


def q_recovery_alternate(poly, degree=None):
    """Last applied sample from the highest-order coefficients ``A_d / B_d``.

    ``degree`` defaults to ``n_cells - 1``. Falls back to the primary formula
    when ``B_d`` vanishes (e.g. when the first sample is zero) and for a
    single remaining cell, where ``A_0/B_0 = 1/(s Q*)`` carries no new
    information.
    """
    d = poly.n_cells - 1 if degree is None else int(degree)
    A, B = poly.A, poly.B
    if d == 0:
        return q_recovery_primary(A, B, poly.s)
    scale = max(np.max(np.abs(A)), np.max(np.abs(B)), 1e-300)
    if abs(B[d]) <= 1e-13 * scale:
        return q_recovery_primary(A, B, poly.s)
    return A[d] / B[d]


def peel_coefficients(poly, recovery="primary", cross_check=False):
    """Strip cells from an AL state, last cell first.

    Returns the recovered samples ``Q`` (time order) and a diagnostics dict.
    """
    s = poly.s
    A = np.array(poly.A, dtype=complex)
    B = np.array(poly.B, dtype=complex)
    n = poly.n_cells
    Q = np.zeros(n, dtype=complex)
    max_dev = 0.0
    for k in range(n - 1, -1, -1):
        if abs(A[0]) < 1e-300 or not np.isfinite(A[0]):
            raise SingularUpdateError(f"A_0 vanished at cell {k}", cell=k)
        f = A[0]
        A /= f
        B /= f
        if recovery == "alternate" or cross_check:
            state = CoefficientPolynomials(A, B, s, poly.eps, poly.t_start, k + 1)
            q_alt = q_recovery_alternate(state, degree=k)
        q_pri = s * np.conj(B[0])
        if cross_check:
            max_dev = max(max_dev, abs(q_alt - q_pri))
        Qk = q_alt if recovery == "alternate" else q_pri
        if abs(Qk) >= 1:
            raise ApplicabilityError(f"|Q[{k}]| = {abs(Qk):.4g} >= 1 during peeling")
        c = 1.0 / np.sqrt(1.0 - s * abs(Qk) ** 2)
        A_new = c * (A - Qk * B)
        R = c * (B - s * np.conj(Qk) * A)
        B = np.empty_like(R)
        B[:-1] = R[1:]
        B[-1] = 0.0
        A = A_new
        Q[k] = Qk
    residual = float(max(np.max(np.abs(A[1:])) if A.size > 1 else 0.0, np.max(np.abs(B))))
    return Q, {"max_recovery_deviation": max_dev, "leftover": residual}


def _renormalize(A, B):
    f = 1.0 / A[0]
    return A * f, B * f


def dlp_inverse(scattering, time_grid, recovery="primary", P_max=P_MAX_DEFAULT, diagnostics=False):
    """Signal on ``time_grid`` from scattering data by discrete layer peeling.

    ``scattering`` must hold ``a`` and ``b`` on a lambda mesh spanning one AL
    period ``pi/eps`` with at least ``N`` points (see :func:`al_spectral_grid`).
    """
    poly = coefficients_from_scattering(scattering, time_grid)
    A, B = _renormalize(poly.A, poly.B)
    poly = CoefficientPolynomials(A, B, poly.s, poly.eps, poly.t_start, poly.n_cells, 1.0)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ApplicabilityError("coefficient overflow")
    Q, diag = peel_coefficients(poly, recovery=recovery, cross_check=diagnostics)
    q = SampledSignal(time_grid, Q / poly.eps)
    report = check_applicability(q, P_max=P_max)
    if not report.ok:
        raise ApplicabilityError(
            f"recovered signal violates DLP conditions (P={report.P:.3g}, max|Q|={report.max_abs_Q:.3g})"
        )
    if diagnostics:
        diag["applicability"] = report
        return q, diag
    return q


def inverse_nft(qhat, time_grid, s=1, recovery="primary"):
    """Spectral amplitude on the AL mesh -> time-domain signal (DLP route)."""
    sd = ab_from_qhat(qhat, s, periodic=True)
    return dlp_inverse(sd, time_grid, recovery=recovery)


def check_discrete_unimodularity(poly):
    """``max |A * flip(A*) - s B * flip(B*) - delta|`` over all lags.

    Applies to polynomials carrying the AL normalisation (``A[0] == scale``);
    states normalised to ``A[0] == 1`` are rescaled by ``scale`` first.
    """
    A = np.asarray(poly.A, dtype=complex)
    B = np.asarray(poly.B, dtype=complex)
    if poly.normalized:
        A = A * poly.scale
        B = B * poly.scale
    corr = np.convolve(A, np.conj(A[::-1])) - poly.s * np.convolve(B, np.conj(B[::-1]))
    corr[A.size - 1] -= 1.0
    return float(np.max(np.abs(corr)))


# --------------------------------------------------------------------------
# continuous layer peeling
# --------------------------------------------------------------------------


def clp_inverse(scattering, time_grid, max_amplitude=None, energy_bound=10.0, energy_tol=1e-2):
    """Signal by inverse continuous layer peeling.

    Each sample is read off the partial spectrum with the jump-averaged
    reconstruction integral, then its cell is peeled off.

    Raises :class:`DivergenceError` when a sample exceeds ``max_amplitude``
    (default ``1/eps``), when the running energy exceeds ``energy_bound``
    times the Parseval energy of the input spectrum, or when the final
    energy misses the Parseval energy by more than ``energy_tol``
    (relative). The last check catches the high-amplitude regime, where the
    recursion stays bounded but loses energy.

    Notes
    -----
    The lambda mesh should span clearly less than the AL period ``pi/eps``.
    On a truncated band ``[-L/2, L/2]`` the edge reconstruction sees a
    one-cell error with gain ``2 Si(L eps) / pi``, which exceeds one and
    makes the peeling unstable once ``L`` nears ``pi/eps``. ``L = 2/eps``
    works well.
    """
    s = scattering.s
    grid = scattering.grid
    lam = grid.points.astype(complex)
    mu = grid.step
    eps = time_grid.step
    t = time_grid.points
    if max_amplitude is None:
        max_amplitude = 1.0 / eps
    mag2 = np.abs(scattering.qhat) ** 2
    if s == 1 and np.any(mag2 >= 1):
        raise DomainError("|qhat| >= 1", index=int(np.argmax(mag2 >= 1)))
    e_ref = float(-(s / np.pi) * np.sum(np.log1p(-s * mag2)) * mu)
    qh = np.array(scattering.qhat, dtype=complex)
    n = time_grid.n_samples
    out = np.zeros(n, dtype=complex)
    running = 0.0
    for k in range(n - 1, -1, -1):
        edge = t[k] + eps / 2
        qk = np.conj((2 * s / np.pi) * np.sum(qh * np.exp(2j * lam * edge)) * mu)
        running += abs(qk) ** 2 * eps
        if not np.isfinite(qk) or abs(qk) > max_amplitude or running > energy_bound * max(e_ref, 1e-300):
            raise DivergenceError(
                f"continuous layer peeling diverged at cell {k} (|q|={abs(qk):.3g})",
                cell=k,
                amplitude=abs(qk),
            )
        out[k] = qk
        if qk == 0:
            continue
        x, xbar, y, ybar = cell_matrix(lam, qk, t[k], eps, s)
        den = xbar - ybar * qh
        if np.any(np.abs(den) < 1e-14):
            raise SingularUpdateError(f"singular inverse ratio update at cell {k}", cell=k)
        qh = (x * qh - y) / den
    if e_ref > 0 and abs(running - e_ref) > energy_tol * e_ref:
        raise DivergenceError(
            f"continuous layer peeling lost energy: {running:.4g} recovered vs {e_ref:.4g} expected",
            cell=0,
            amplitude=float(np.max(np.abs(out))),
        )
    return SampledSignal(time_grid, out)
