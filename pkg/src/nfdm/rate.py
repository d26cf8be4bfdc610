"""Constellations, transition histograms and achievable-rate estimation.

Rates are in bits per two real dimensions (one complex symbol). The channel
``s_0^0 -> shat_0^0`` is treated as memoryless; its transition law is
estimated from Monte-Carlo pairs on a polar output quantiser and the rate is
the power-constrained capacity of the resulting discrete channel.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UndefinedMeasureError
from .grids import bandwidth_99, duration_99, energy


# --------------------------------------------------------------------------
# constellations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RingConstellation:
    """``N_r`` uniformly spaced rings on ``[a, b]`` with ``N_phi`` phases each.

    Point ``i * N_phi + m`` is ``r_i exp(2j pi m / N_phi)``.
    """

    n_rings: int
    n_phases: int
    a: float
    b: float

    def __post_init__(self):
        if int(self.n_rings) != self.n_rings or self.n_rings < 1:
            raise ValueError("n_rings must be an integer >= 1")
        if int(self.n_phases) != self.n_phases or self.n_phases < 1:
            raise ValueError("n_phases must be an integer >= 1")
        if not 0 <= self.a <= self.b:
            raise ValueError(f"need 0 <= a <= b, got a={self.a}, b={self.b}")

    @property
    def delta_r(self):
        return (self.b - self.a) / (self.n_rings - 1) if self.n_rings > 1 else 0.0

    @property
    def radii(self):
        if self.n_rings == 1:
            return np.array([float(self.a)])
        return np.linspace(self.a, self.b, self.n_rings)

    @property
    def phases(self):
        return 2 * np.pi * np.arange(self.n_phases) / self.n_phases

    @property
    def points(self):
        return (self.radii[:, None] * np.exp(1j * self.phases)[None, :]).reshape(-1)

    def __len__(self):
        return self.n_rings * self.n_phases

    @property
    def mean_energy(self):
        """``E|x|^2`` under the uniform input distribution."""
        return float(np.mean(self.radii**2))

    def scaled(self, factor):
        return RingConstellation(self.n_rings, self.n_phases, self.a * factor, self.b * factor)

    def for_energy(self, energy_per_symbol):
        """Copy scaled so that the uniform mean energy equals ``energy_per_symbol``."""
        e = self.mean_energy
        if e == 0:
            raise ValueError("cannot rescale a constellation of zero energy")
        return self.scaled(math.sqrt(energy_per_symbol / e))

    def index(self, ring, phase):
        return int(ring) * self.n_phases + int(phase)


def ring_constellation(n_rings, n_phases, a, b):
    return RingConstellation(int(n_rings), int(n_phases), float(a), float(b))


def geometric_radii(delta_r, n):
    """``r_n = sqrt(1 - exp(-c (n-1)^2))``, ``c = delta_r^2 / 2``, for ``n = 1..N``.

    These are spectral-amplitude radii whose energies ``-log(1 - r^2)`` are
    uniformly spaced in ``(n-1)^2``.
    """
    if not delta_r > 0:
        raise ValueError("delta_r must be positive")
    c = 0.5 * delta_r**2
    k = np.arange(int(n), dtype=float)
    return np.sqrt(-np.expm1(-c * k**2))


# --------------------------------------------------------------------------
# histograms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarBinning:
    """Uniform polar quantiser.

    Radial bins split ``[0, r_max]`` (values beyond fall in the last bin);
    phase bins are centred on the angles ``2 pi m / n_phase``.
    """

    n_radial: int
    n_phase: int
    r_max: float

    def __post_init__(self):
        if self.n_radial < 1 or self.n_phase < 1:
            raise ValueError("bin counts must be >= 1")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")

    @classmethod
    def from_support(cls, received, n_rings, n_phases, extra_radial=8):
        """``n_rings + extra_radial`` radial and ``n_phases`` phase bins over the observed radii."""
        r = np.abs(np.asarray(received))
        r_max = float(r.max()) * (1 + 1e-9) if r.size and r.max() > 0 else 1.0
        return cls(int(n_rings) + extra_radial, int(n_phases), r_max)

    @property
    def n_bins(self):
        return self.n_radial * self.n_phase

    def radial_index(self, y):
        r = np.abs(y)
        return np.minimum((r / self.r_max * self.n_radial).astype(int), self.n_radial - 1)

    def phase_index(self, y):
        w = 2 * np.pi / self.n_phase
        th = np.mod(np.angle(y) + w / 2, 2 * np.pi)
        return np.minimum((th / w).astype(int), self.n_phase - 1)

    def index(self, y):
        y = np.asarray(y)
        return self.radial_index(y), self.phase_index(y)


@dataclass
class TransitionHistogram:
    """Counts ``counts[x, radial_bin, phase_bin]`` of outputs per input symbol."""

    counts: np.ndarray
    binning: PolarBinning
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 3:
            raise ValueError("counts must have shape (inputs, radial bins, phase bins)")
        if self.counts.shape[1:] != (self.binning.n_radial, self.binning.n_phase):
            raise ValueError("counts do not match the binning")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def n_inputs(self):
        return self.counts.shape[0]

    @property
    def trials(self):
        """Number of samples per input."""
        return self.counts.reshape(self.n_inputs, -1).sum(axis=1)

    def matrix(self):
        """Row-stochastic transition matrix (inputs x flattened bins)."""
        flat = self.counts.reshape(self.n_inputs, -1).astype(float)
        tot = flat.sum(axis=1, keepdims=True)
        if np.any(tot == 0):
            missing = np.flatnonzero(tot[:, 0] == 0).tolist()
            raise ValueError(f"inputs without samples: {missing}")
        return flat / tot

    # -- delimited text ---------------------------------------------------
    def to_csv(self, path):
        """Write ``input_index,radial_bin,phase_bin,count`` rows (non-zero counts only)."""
        b = self.binning
        with open(path, "w", newline="") as fh:
            fh.write(f"# n_inputs={self.n_inputs} n_radial={b.n_radial} n_phase={b.n_phase} r_max={b.r_max!r}\n")
            w = csv.writer(fh)
            w.writerow(["input_index", "radial_bin", "phase_bin", "count"])
            for x, i, j in zip(*np.nonzero(self.counts)):
                w.writerow([int(x), int(i), int(j), int(self.counts[x, i, j])])

    @classmethod
    def from_csv(cls, path, binning=None, n_inputs=None):
        header = {}
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    for tok in line[1:].split():
                        key, _, val = tok.partition("=")
                        header[key] = val
                    continue
                rows.append(line)
        reader = csv.DictReader(rows)
        need = {"input_index", "radial_bin", "phase_bin", "count"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"histogram file must have columns {sorted(need)}")
        data = [(int(r["input_index"]), int(r["radial_bin"]), int(r["phase_bin"]), int(r["count"])) for r in reader]
        if binning is None:
            if not {"n_radial", "n_phase", "r_max"} <= header.keys():
                raise ValueError("binning not given and not recorded in the file header")
            binning = PolarBinning(int(header["n_radial"]), int(header["n_phase"]), float(header["r_max"]))
        if n_inputs is None:
            n_inputs = int(header["n_inputs"]) if "n_inputs" in header else 1 + max((d[0] for d in data), default=-1)
        counts = np.zeros((n_inputs, binning.n_radial, binning.n_phase), dtype=np.int64)
        for x, i, j, c in data:
            counts[x, i, j] += c
        return cls(counts, binning)


def estimate_transitions(sent_index, received, n_inputs, binning):
    """Histogram of received values per input index.

    Raises ``ValueError`` listing the inputs that received no samples.
    """
    sent_index = np.asarray(sent_index, dtype=int).reshape(-1)
    received = np.asarray(received).reshape(-1)
    if sent_index.size != received.size:
        raise ValueError("sent and received sequences differ in length")
    if np.any((sent_index < 0) | (sent_index >= n_inputs)):
        raise ValueError("input index out of range")
    counts = np.zeros((n_inputs, binning.n_radial, binning.n_phase), dtype=np.int64)
    ri, pi = binning.index(received)
    np.add.at(counts, (sent_index, ri, pi), 1)
    missing = np.flatnonzero(counts.reshape(n_inputs, -1).sum(axis=1) == 0)
    if missing.size:
        raise ValueError(f"no samples for input symbols {missing.tolist()}")
    return TransitionHistogram(counts, binning)


def expand_phase_symmetric(ring_hist, n_phases):
    """Extend per-ring histograms to all ``N_r * N_phi`` points by rotation.

    ``ring_hist`` holds one input per ring (the phase-0 point). For a channel
    that commutes with constant phase rotations, the histogram of point
    ``(i, m)`` is the ring histogram rolled by ``m * n_phase / N_phi`` phase bins.
    """
    nb = ring_hist.binning.n_phase
    if nb % n_phases:
        raise ValueError("number of phase bins must be a multiple of the constellation phases")
    step = nb // n_phases
    c = ring_hist.counts
    out = np.empty((c.shape[0] * n_phases,) + c.shape[1:], dtype=np.int64)
    for i in range(c.shape[0]):
        for m in range(n_phases):
            out[i * n_phases + m] = np.roll(c[i], m * step, axis=1)
    return TransitionHistogram(out, ring_hist.binning, dict(ring_hist.meta))


# --------------------------------------------------------------------------
# capacity
# --------------------------------------------------------------------------


@dataclass
class RateResult:
    rate: float
    input_distribution: np.ndarray
    power: float
    multiplier: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    gap: float = 0.0


def _as_matrix(W):
    if isinstance(W, TransitionHistogram):
        return W.matrix()
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("transition matrix must be 2-D")
    if np.any(W < 0) or not np.allclose(W.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("transition matrix must be row-stochastic (non-negative rows summing to 1)")
    return W


def _divergences(W, p):
    """``D(W_x || pW)`` in nats for every input ``x``."""
    q = p @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(W > 0, W / q[None, :], 1.0)
        return np.sum(np.where(W > 0, W * np.log(ratio), 0.0), axis=1)


def mutual_information(p, W):
    """``I(X;Y)`` in bits for input law ``p`` and channel ``W``."""
    W = _as_matrix(W)
    p = np.asarray(p, dtype=float)
    return float(p @ _divergences(W, p) / math.log(2))


def _tilt_multiplier(p, e, cost, P, beta0):
    """Smallest ``beta >= 0`` with ``E[cost] <= P`` under ``p exp(e - beta cost)``."""

    def mean_cost(beta):
        x = e - beta * cost
        w = p * np.exp(x - np.max(x[p > 0]))
        return float(w @ cost / w.sum())

    if mean_cost(0.0) <= P:
        return 0.0
    scale = max(np.ptp(cost), 1e-300)
    hi = max(beta0, 1.0 / scale)
    lo = 0.0
    while mean_cost(hi) > P:
        lo, hi = hi, 2 * hi
        if hi > 1e15 / scale:
            return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_cost(mid) > P:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


def _blahut(W, cost, P, p0, tol, max_iter):
    """Blahut iterations for ``max I(p)`` subject to ``E_p[cost] <= P``.

    Each update ``p <- p exp(D - beta c) / Z`` picks the multiplier ``beta``
    that keeps the new law feasible (``P = None`` means no constraint). The run
    stops when the duality gap ``max_x (D_x - beta c_x) + beta P - I(p)`` is
    below ``tol`` bits; the gap bounds the distance to capacity, so a slowly
    creeping objective cannot end the run early.
    """
    p = p0.copy()
    hist = []
    beta = 0.0
    gap = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        d = _divergences(W, p)
        rate = float(p @ d)
        hist.append(rate / math.log(2))
        if P is not None:
            beta = _tilt_multiplier(p, d, cost, P, beta)
        e = d - beta * cost
        upper = float(np.max(e)) + (beta * P if P is not None else 0.0)
        gap = (upper - rate) / math.log(2)
        if gap < tol:
            converged = True
            break
        w = p * np.exp(e - np.max(e))
        p = w / w.sum()
    return p, it, converged, hist, beta, gap


def blahut_arimoto(transitions, power_constraint=None, costs=None, tol=1e-9, max_iter=20000, p0=None):
    """Capacity of a discrete memoryless channel under ``E[cost] <= P``.

    Parameters
    ----------
    transitions : array (inputs x outputs) or TransitionHistogram
        Row-stochastic transition law.
    power_constraint : float, optional
        Bound on the mean cost; ``None`` gives the unconstrained capacity.
    costs : array, optional
        Per-input cost, usually ``|x|^2``. Required with a power constraint.
    tol : float
        Duality-gap target in bits.

    The Lagrange multiplier of the power constraint is re-solved at every
    iteration so that each iterate is feasible. ``RateResult.converged`` is
    False when ``max_iter`` ran out first; the rate is then a lower bound and
    the remaining gap is stored in ``RateResult.gap``.
    """
    W = _as_matrix(transitions)
    K = W.shape[0]
    start = np.full(K, 1.0 / K) if p0 is None else np.asarray(p0, float) / np.sum(p0)
    if power_constraint is None:
        costs = np.zeros(K) if costs is None else np.asarray(costs, float)
        P = None
    else:
        if costs is None:
            raise ValueError("costs are required with a power constraint")
        costs = np.asarray(costs, dtype=float)
        if costs.shape != (K,):
            raise ValueError("one cost per input is required")
        P = float(power_constraint)
        if P < costs.min() - 1e-12:
            raise ValueError(f"power constraint {P} below the smallest input cost {costs.min()}")
        if start @ costs > P:
            # feasible start: tilt the uniform law onto the constraint
            beta = _tilt_multiplier(start, np.zeros(K), costs, P, 0.0)
            w = start * np.exp(-beta * (costs - costs.min()))
            start = w / w.sum()
    p, it, conv, hist, beta, gap = _blahut(W, costs, P, start, tol, max_iter)
    return RateResult(mutual_information(p, W), p, float(p @ costs), beta, it, conv, hist, gap)


def binary_entropy(p):
    if p in (0, 1):
        return 0.0
    return float(-p * math.log2(p) - (1 - p) * math.log2(1 - p))


def awgn_capacity(power, noise_psd, bandwidth, distance):
    """``log2(1 + P / (sigma0^2 B L))`` in bits/2D."""
    for name, v in (("power", power), ("noise_psd", noise_psd), ("bandwidth", bandwidth), ("distance", distance)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    noise = noise_psd * bandwidth * distance
    if noise == 0:
        if power == 0:
            return 0.0
        raise ZeroDivisionError("noise power is zero")
    return float(math.log2(1 + power / noise))


def conditional_entropy(sent, received):
    """Gaussian estimate of ``h(Shat | S)`` in bits per complex dimension.

    The error cloud of each distinct sent value is centred on its mean; the
    pooled variance ``sigma^2`` gives ``log2(pi e sigma^2)``.
    """
    sent = np.asarray(sent).reshape(-1)
    received = np.asarray(received).reshape(-1)
    if sent.size != received.size or sent.size < 2:
        raise ValueError("need matching sent/received sequences with at least two samples")
    keys, inv = np.unique(np.round(sent, 12), return_inverse=True)
    resid = np.empty(received.size, dtype=complex)
    dof = 0
    for g in range(keys.size):
        sel = inv == g
        resid[sel] = received[sel] - received[sel].mean()
        dof += sel.sum() - 1
    if dof < 1:
        raise ValueError("need at least two samples for one input value")
    var = float(np.sum(np.abs(resid) ** 2) / dof)
    if var <= 0:
        return float("-inf")
    return float(math.log2(math.pi * math.e * var))


def time_bandwidth_factor(signals_0, signals_L, n_users, n_symbols):
    """``alpha = (1/(N_u N_s)) mean_k T_k(0) * max_k max(W_k(0), W_k(L))``.

    ``T`` and ``W`` are the 99%-energy duration and bandwidth.
    """
    signals_0 = list(signals_0)
    signals_L = list(signals_L)
    if not signals_0:
        raise ValueError("no signals given")
    for s in signals_0 + signals_L:
        if energy(s) == 0:
            raise UndefinedMeasureError("zero-energy signal has no duration or bandwidth")
    T = float(np.mean([duration_99(s) for s in signals_0]))
    W = max(bandwidth_99(s) for s in signals_0 + signals_L)
    return T * W / (n_users * n_symbols)
