"""Forward nonlinear Fourier transform (Zakharov-Shabat scattering).

The signal enters the eigenproblem ``L v = lambda v`` with

    L = j [[d/dt, -q], [s q*, -d/dt]],   s = +1 defocusing, -1 focusing,

and the scattering coefficients are ``a = lim e^{j lambda t} v1``,
``b = lim e^{-j lambda t} v2`` for the solution that starts as ``(1, 0)
e^{-j lambda t}`` at the left end. The spectral amplitude is ``qhat = b / a``.

Two discretisations are provided:

* continuous layer peeling (CLP): per-cell exact propagators of a piecewise
  constant signal, evaluated independently for every lambda;
* the Ablowitz-Ladik (AL) scheme, whose transfer matrices are polynomials in
  ``z = exp(-2j lambda eps)`` so that the state is a pair of coefficient
  vectors.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ApplicabilityError,
    DomainError,
    InvalidGridError,
    NumericFailureError,
    SingularUpdateError,
)
from .grids import SampledSignal, SpectralGrid, make_spectral_grid

P_MAX_DEFAULT = 25.0
SMALL_Q = 0.1


class PeriodicityWarning(UserWarning):
    pass


def _check_sign(s):
    if s not in (1, -1):
        raise ValueError(f"sign s must be +1 or -1, got {s!r}")
    return int(s)


@dataclass(frozen=True)
class ScatteringData:
    """Nonlinear Fourier coefficients on a lambda mesh.

    ``a`` and ``b`` may be ``None`` when only the spectral amplitude is known.
    """

    grid: SpectralGrid
    qhat: np.ndarray
    a: np.ndarray = None
    b: np.ndarray = None
    s: int = 1

    def __post_init__(self):
        _check_sign(self.s)
        for name in ("qhat", "a", "b"):
            val = getattr(self, name)
            if val is None:
                continue
            val = np.array(val, dtype=complex).reshape(-1)
            if val.size != self.grid.n_samples:
                raise InvalidGridError(f"{name} does not match the lambda mesh")
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def from_ab(cls, grid, a, b, s=1):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        return cls(grid, b / a, a, b, s)

    @property
    def points(self):
        return self.grid.points

    def unimodularity_residual(self):
        if self.a is None:
            raise ValueError("a and b are not available")
        return np.abs(np.abs(self.a) ** 2 - self.s * np.abs(self.b) ** 2 - 1.0)

    def spectrum(self):
        return SampledSignal(self.grid, self.qhat)


# --------------------------------------------------------------------------
# continuous layer peeling
# --------------------------------------------------------------------------


def _sinc_cos(delta, eps):
    """``cos(delta*eps)`` and ``sin(delta*eps)/delta`` with the delta -> 0 limit."""
    x = delta * eps
    small = np.abs(x) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(small, eps * (1 - x**2 / 6), np.sin(x) / np.where(small, 1, delta))
    return np.cos(x), sinc


def cell_matrix(lam, qk, tk, eps, s=1):
    """Entries ``(x, xbar, y, ybar)`` of the exact propagator over one cell.

    The cell is ``[tk - eps/2, tk + eps/2]`` with constant value ``qk``; the
    matrix acts on ``(a, b)`` and has unit determinant.
    """
    lam = np.asarray(lam, dtype=complex)
    delta = np.sqrt(lam**2 - s * abs(qk) ** 2 + 0j)
    c, sn = _sinc_cos(delta, eps)
    ph = np.exp(1j * lam * eps)
    x = ph * (c - 1j * lam * sn)
    xbar = (c + 1j * lam * sn) / ph
    rot = np.exp(-2j * lam * tk)
    y = s * np.conj(qk) * sn * rot
    ybar = qk * sn / rot
    return x, xbar, y, ybar


def _samples_and_grid(q):
    if not isinstance(q, SampledSignal):
        raise TypeError("expected a SampledSignal on a TimeGrid")
    return q.samples, q.grid


def clp_forward(q, grid, s=1, n_cells=None):
    """Scattering coefficients by ordered products of exact cell propagators.

    ``n_cells`` restricts the product to the first cells, which gives the
    causal partial data ``(a[k], b[k])`` used by layer peeling.
    """
    s = _check_sign(s)
    samples, tgrid = _samples_and_grid(q)
    lam = grid.points.astype(complex)
    eps = tgrid.step
    t = tgrid.points
    a = np.ones_like(lam)
    b = np.zeros_like(lam)
    n = samples.size if n_cells is None else int(n_cells)
    for k in range(n):
        if samples[k] == 0:
            # free propagation: the pair (a, b) is unchanged in these variables
            continue
        x, xbar, y, ybar = cell_matrix(lam, samples[k], t[k], eps, s)
        a, b = x * a + ybar * b, y * a + xbar * b
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericFailureError("scattering coefficients overflowed; use clp_forward_ratio")
    return ScatteringData.from_ab(grid, a, b, s)


def ratio_step(qh, lam, qk, tk, eps, s=1, cell=None):
    """Advance the spectral amplitude across one cell (Mobius update)."""
    x, xbar, y, ybar = cell_matrix(lam, qk, tk, eps, s)
    den = x + ybar * qh
    if np.any(np.abs(den) < 1e-14 * np.maximum(np.abs(x), 1.0)):
        raise SingularUpdateError(f"singular ratio update at cell {cell}", cell=cell)
    return (y + xbar * qh) / den


def clp_forward_ratio(q, grid, s=1, n_cells=None):
    """Spectral amplitude propagated directly, without forming ``a`` and ``b``.

    Stays finite for high-energy signals whose ``a``, ``b`` overflow.
    """
    s = _check_sign(s)
    samples, tgrid = _samples_and_grid(q)
    lam = grid.points.astype(complex)
    eps = tgrid.step
    t = tgrid.points
    qh = np.zeros_like(lam)
    n = samples.size if n_cells is None else int(n_cells)
    for k in range(n):
        if samples[k] == 0:
            continue
        qh = ratio_step(qh, lam, samples[k], t[k], eps, s, cell=k)
    if not np.all(np.isfinite(qh)):
        raise NumericFailureError("non-finite spectral amplitude")
    return SampledSignal(grid, qh)


# --------------------------------------------------------------------------
# Ablowitz-Ladik polynomials
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientPolynomials:
    """Coefficients of ``A(z) = sum A_m z^-m`` and ``B(z) = sum B_m z^-m``.

    ``A`` and ``B`` carry the product of the AL normalisations ``c_k`` (stored
    in ``scale``), so ``A[0] == scale`` unless ``normalized`` is set, in which
    case ``A[0] == 1``. ``t_start`` and ``eps`` locate the
    samples in time; ``n_cells`` is the number of cells already applied.
    """

    A: np.ndarray
    B: np.ndarray
    s: int
    eps: float
    t_start: float
    n_cells: int
    scale: float = 1.0
    normalized: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def size(self):
        return self.A.size

    @property
    def k0(self):
        return self.t_start / self.eps

    @property
    def t_last(self):
        """Time of the last applied sample (reference point of ``b``)."""
        return self.t_start + (self.n_cells - 1) * self.eps

    def as_normalized(self):
        """Copy scaled so that ``A[0] == 1``."""
        f = 1.0 / self.A[0]
        return CoefficientPolynomials(
            self.A * f, self.B * f, self.s, self.eps, self.t_start, self.n_cells,
            self.scale, normalized=True,
        )


def next_pow2(n):
    return 1 << max(int(n) - 1, 0).bit_length()


def al_normalization(Q, s=1):
    """``c_k = 1/sqrt(1 - s|Q_k|^2)``; raises if any ``|Q_k| >= 1``."""
    Q = np.asarray(Q, dtype=complex)
    mag = np.abs(Q)
    if np.any(mag >= 1):
        k = int(np.argmax(mag >= 1))
        raise ApplicabilityError(f"|Q[{k}]| = {mag[k]:.4g} >= 1; refine the time mesh")
    return 1.0 / np.sqrt(1.0 - s * mag**2)


def al_forward(q, M=None, s=1):
    """Forward discrete layer peeling with the Ablowitz-Ladik scheme.

    ``M`` defaults to the next power of two >= 2N.
    """
    s = _check_sign(s)
    samples, tgrid = _samples_and_grid(q)
    n = samples.size
    if M is None:
        M = next_pow2(2 * n)
    if M < n:
        raise ValueError(f"polynomial length M={M} must be >= number of cells {n}")
    eps = tgrid.step
    Q = eps * samples
    c = al_normalization(Q, s)
    A = np.zeros(M, dtype=complex)
    B = np.zeros(M, dtype=complex)
    A[0] = 1.0
    for k in range(n):
        zB = np.empty_like(B)
        zB[0] = 0.0
        zB[1:] = B[:-1]
        A, B = c[k] * (A + Q[k] * zB), c[k] * (s * np.conj(Q[k]) * A + zB)
    return CoefficientPolynomials(A, B, s, eps, tgrid.t_start, n, float(np.prod(c)))


def _poly_eval(coeffs, grid, eps):
    """``sum_m coeffs[m] exp(2j eps m lambda)`` on the mesh."""
    lam = grid.points
    K = np.pi / (eps * grid.step)  # points per period of the polynomial
    Ki = int(round(K))
    n = coeffs.size
    if abs(K - Ki) < 1e-9 * K and Ki >= n:
        m = np.arange(n)
        spec = np.fft.ifft(coeffs * np.exp(2j * eps * m * lam[0]), Ki) * Ki
        idx = np.arange(grid.n_samples) % Ki
        return spec[idx]
    w = np.exp(2j * eps * lam)
    out = np.zeros(lam.size, dtype=complex)
    for cm in coeffs[::-1]:
        out = out * w + cm
    return out


def evaluate_polynomials(poly, grid):
    """Scattering data of an AL state on a lambda mesh.

    ``a = A(z)`` and ``b = exp(-2j lambda t_last) B(z)``; both are periodic in
    lambda with period ``pi/eps``.
    """
    period = np.pi / poly.eps
    if grid.span > period * (1 + 1e-9):
        warnings.warn(
            f"lambda mesh span {grid.span:.4g} exceeds the AL period {period:.4g}",
            PeriodicityWarning,
            stacklevel=2,
        )
    a = _poly_eval(poly.A, grid, poly.eps)
    b = np.exp(-2j * grid.points * poly.t_last) * _poly_eval(poly.B, grid, poly.eps)
    return ScatteringData.from_ab(grid, a, b, poly.s)


def al_spectral_grid(time_grid, M=None):
    """Centred lambda mesh covering one AL period ``pi/eps`` with ``M`` points."""
    M = time_grid.n_samples if M is None else int(M)
    L = np.pi / time_grid.step
    start = -(M // 2) * (L / M)
    return make_spectral_grid(start, start + L, M)


def al_nft(q, grid=None, s=1):
    """Spectral data of ``q`` by the AL scheme evaluated on ``grid``."""
    if grid is None:
        grid = al_spectral_grid(q.grid)
    return evaluate_polynomials(al_forward(q, max(q.grid.n_samples, 1), s), grid)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def parseval_energy(scattering):
    """Signal energy from the continuous spectrum via the NFT Parseval identity."""
    s = scattering.s
    mag2 = np.abs(scattering.qhat) ** 2
    if s == 1 and np.any(mag2 >= 1):
        k = int(np.argmax(mag2 >= 1))
        raise DomainError(f"|qhat| >= 1 at lambda index {k}", index=k)
    return float(-(s / np.pi) * np.sum(np.log1p(-s * mag2)) * scattering.grid.step)


@dataclass(frozen=True)
class ApplicabilityReport:
    P: float
    max_abs_Q: float
    P_max: float
    p_below_max: bool
    q_below_one: bool
    q_small: bool

    @property
    def ok(self):
        return self.p_below_max and self.q_below_one


def check_applicability(q, eps=None, P_max=P_MAX_DEFAULT):
    """Growth exponent ``P = -1/2 sum log(1 - |Q_k|^2)`` and the DLP conditions."""
    if isinstance(q, SampledSignal):
        eps = q.step if eps is None else eps
        q = q.samples
    if eps is None:
        raise ValueError("eps is required for raw sample arrays")
    Q = eps * np.abs(np.asarray(q))
    qmax = float(Q.max()) if Q.size else 0.0
    if qmax >= 1:
        P = float("inf")
    else:
        P = float(-0.5 * np.sum(np.log1p(-(Q**2))))
    return ApplicabilityReport(P, qmax, P_max, P < P_max, qmax < 1, qmax < SMALL_Q)
