"""Monte-Carlo rate experiments: configuration, sweeps, persistence, plot data.

A trial sends one frame of ``N_u x N_s`` symbols through transmitter, noisy
channel and receiver and records the centre symbol ``s_0^0`` and its estimate.
The centre symbol cycles through the rings of the constellation at phase 0;
all other symbols are uniform on the constellation. Because the channel
commutes with constant phase rotations (and the interferers are rotation
symmetric), the transition law of the other points on each ring follows by
rotating the phase bins.

Every trial draws from its own generator ``default_rng([seed, power, trial])``,
so results do not depend on the order in which trials run.
"""
import csv
import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .channel import ChannelConfig, ssfm_propagate, step_count
from .exceptions import ConfigError, NumericFailureError, ResourceBudgetError
from .grids import bandwidth_99, centered_time_grid, duration_99, energy
from .modem import SymbolMatrix, nfdm_pulse_bank, nfdm_receive, nfdm_transmit
from .rate import (
    PolarBinning,
    RingConstellation,
    blahut_arimoto,
    conditional_entropy,
    estimate_transitions,
    expand_phase_symmetric,
)
from .units import Normalization, dbm_to_watts
from .wdm import estimate_rotation, wdm_bank_like, wdm_receive, wdm_transmit

SCHEMES = ("nfdm", "wdm")
PLOT_KINDS = ("rate", "clouds", "entropy")

# rough per-operation costs (seconds) used by the resource estimate
_COST_FFT = 3e-9  # per N log2 N per split step
_COST_PEEL = 2e-8  # per N^2 for one layer-peeling inverse


@dataclass
class ExperimentConfig:
    scheme: str = "nfdm"
    n_users: int = 3
    n_symbols: int = 1
    n_rings: int = 4
    n_phases: int = 8
    ring_inner: float = 0.7
    ring_outer: float = 1.6
    user_spacing: float = 1.25
    rolloff: float = 0.25
    powers: list = field(default_factory=lambda: [0.05, 0.2, 0.8])
    power_unit: str = "normalized"
    distance: float = 0.15
    noise_psd: float = 1e-4
    noise_bandwidth: float = None
    z_steps: int = None
    trials: int = 200
    seed: int = 1
    n_samples: int = 2048
    n_lambda: int = None
    time_window: float = 64.0
    workers: int = 1
    budget_seconds: float = 7200.0
    # fibre normalisation, only used with power_unit = "dBm"
    dispersion_ps_nm_km: float = -17.0
    gamma_per_w_km: float = 1.27
    wavelength_nm: float = 1550.0
    time_scale_ps: float = 117.0

    _SECTIONS = {
        "constellation": {"rings": "n_rings", "phases": "n_phases", "a": "ring_inner", "b": "ring_outer"},
        "pulse": {"spacing": "user_spacing", "rolloff": "rolloff"},
        "channel": {
            "distance": "distance",
            "noise_psd": "noise_psd",
            "noise_bandwidth": "noise_bandwidth",
            "z_steps": "z_steps",
        },
        "grid": {"samples": "n_samples", "lambda_samples": "n_lambda", "window": "time_window"},
        "fiber": {
            "dispersion": "dispersion_ps_nm_km",
            "gamma": "gamma_per_w_km",
            "wavelength": "wavelength_nm",
            "time_scale": "time_scale_ps",
        },
    }

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------
    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("n_users", "n_symbols", "n_rings", "n_phases", "trials", "n_samples", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            setattr(self, name, int(v))
        if self.n_lambda is not None and int(self.n_lambda) != self.n_samples:
            raise ConfigError("lambda_samples must equal samples (the lambda mesh is the DFT partner of tau)")
        for name in ("user_spacing", "time_window", "budget_seconds", "ring_outer", "wavelength_nm",
                     "gamma_per_w_km", "time_scale_ps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not 0 <= self.ring_inner <= self.ring_outer:
            raise ConfigError("constellation needs 0 <= a <= b")
        if not 0 <= self.rolloff <= 1:
            raise ConfigError("rolloff must lie in [0, 1]")
        if self.distance < 0 or self.noise_psd < 0:
            raise ConfigError("distance and noise_psd must be non-negative")
        if self.noise_bandwidth is not None and not self.noise_bandwidth > 0:
            raise ConfigError("noise_bandwidth must be positive")
        if self.z_steps is not None and (int(self.z_steps) != self.z_steps or self.z_steps < 1):
            raise ConfigError("z_steps must be a positive integer")
        if self.power_unit not in ("normalized", "dBm"):
            raise ConfigError("power_unit must be 'normalized' or 'dBm'")
        if not isinstance(self.powers, (list, tuple)) or len(self.powers) == 0:
            raise ConfigError("powers must be a non-empty list")
        self.powers = [float(p) for p in self.powers]
        if self.power_unit == "normalized" and any(not p > 0 for p in self.powers):
            raise ConfigError("normalized powers must be positive")
        if self.dispersion_ps_nm_km == 0:
            raise ConfigError("dispersion must be non-zero")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        flat = {}
        known = {f.name for f in fields(cls)}
        for key, val in data.items():
            if key in cls._SECTIONS:
                if not isinstance(val, dict):
                    raise ConfigError(f"section {key!r} must be a mapping")
                for sub, v in val.items():
                    if sub not in cls._SECTIONS[key]:
                        raise ConfigError(f"unknown key {key}.{sub}")
                    flat[cls._SECTIONS[key][sub]] = v
            elif key in known:
                flat[key] = val
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        try:
            return cls(**flat)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("configuration file must contain a mapping")
        return cls.from_dict(data)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        out = {}
        used = set()
        for sec, mapping in self._SECTIONS.items():
            out[sec] = {sub: d[name] for sub, name in mapping.items()}
            used.update(mapping.values())
        for k, v in d.items():
            if k not in used:
                out[k] = v
        return out

    def to_yaml(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    # derived ---------------------------------------------------------------
    def normalization(self):
        return Normalization.from_fiber(
            self.dispersion_ps_nm_km, self.gamma_per_w_km, self.wavelength_nm, self.time_scale_ps * 1e-12
        )

    def normalized_powers(self):
        if self.power_unit == "normalized":
            return list(self.powers)
        norm = self.normalization()
        return [norm.power(dbm_to_watts(p)) for p in self.powers]

    def time_grid(self):
        return centered_time_grid(self.time_window, self.n_samples)


@dataclass
class ExperimentResult:
    config: dict
    powers: list
    rates: list
    entropies: list
    alphas: list
    failures: list
    rotations: list
    sent: list
    received: list
    histograms: list
    noise_bandwidth: float
    total_powers: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def fingerprint(self):
        """Hash of all numerical outputs (runtime metadata excluded)."""
        h = hashlib.sha256()
        for arr in (self.powers, self.rates, self.entropies, self.alphas, self.failures, self.rotations,
                    self.total_powers):
            h.update(np.asarray(arr, dtype=float).tobytes())
        for arr in self.sent + self.received:
            h.update(np.asarray(arr, dtype=complex).tobytes())
        for hist in self.histograms:
            if hist is not None:
                h.update(hist.counts.tobytes())
        h.update(np.float64(self.noise_bandwidth).tobytes())
        return h.hexdigest()

    @classmethod
    def empty(cls, config=None):
        return cls(config or {}, [], [], [], [], [], [], [], [], [], float("nan"))


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------


class _Setup:
    """Meshes, pulse banks and constellations shared by all trials."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.grid = cfg.time_grid()
        try:
            self.nfdm_bank = nfdm_pulse_bank(self.grid, cfg.user_spacing, cfg.rolloff, cfg.n_users, cfg.n_symbols)
        except ValueError as exc:
            raise ConfigError(f"pulse bank: {exc}") from exc
        self.wdm_bank = wdm_bank_like(self.nfdm_bank, self.grid)
        self.base = RingConstellation(cfg.n_rings, cfg.n_phases, cfg.ring_inner, cfg.ring_outer)
        self.powers = cfg.normalized_powers()
        # symbol energy = power x symbol period in time (tau = 2t)
        self.symbol_time = self.nfdm_bank.symbol_period / 2

    def constellation(self, power):
        return self.base.for_energy(power * self.symbol_time)

    def frame(self, power, trial, rng):
        const = self.constellation(power)
        pts = const.points
        idx = rng.integers(0, pts.size, size=(self.cfg.n_users, self.cfg.n_symbols))
        sym = pts[idx]
        ring = trial % const.n_rings
        k1 = -(self.cfg.n_users // 2)
        l1 = -(self.cfg.n_symbols // 2)
        sym[-k1, -l1] = const.radii[ring]
        return SymbolMatrix(sym), ring

    def transmit(self, symbols):
        if self.cfg.scheme == "nfdm":
            return nfdm_transmit(symbols, self.nfdm_bank, self.grid)
        return wdm_transmit(symbols, self.wdm_bank)

    def receive(self, qL, chan):
        c = self.cfg
        k0 = c.n_users // 2
        l0 = c.n_symbols // 2
        if c.scheme == "nfdm":
            return nfdm_receive(qL, self.nfdm_bank, chan).symbols[k0, l0]
        return wdm_receive(qL, self.wdm_bank, chan, users=0).symbols[k0, l0]

    def channel(self, noise_bandwidth, noise=True):
        c = self.cfg
        return ChannelConfig(
            s=1,
            distance=c.distance,
            noise_psd=c.noise_psd if noise else 0.0,
            noise_bandwidth=noise_bandwidth,
            z_steps=c.z_steps,
        )


def _run_trial(setup, p_idx, trial, noise_bandwidth):
    cfg = setup.cfg
    power = setup.powers[p_idx]
    rng = np.random.default_rng([cfg.seed, p_idx, trial])
    symbols, ring = setup.frame(power, trial, rng)
    sent = setup.constellation(power).radii[ring]
    try:
        q0 = setup.transmit(symbols)
        chan = setup.channel(noise_bandwidth)
        qL = ssfm_propagate(q0, chan, rng=rng) if (chan.distance > 0 or chan.noise_psd > 0) else q0
        received = setup.receive(qL, chan)
    except (ValueError, NumericFailureError) as exc:
        return ring, sent, None, type(exc).__name__
    return ring, sent, complex(received), None


def _trial_chunk(args):
    setup, p_idx, trials, nb = args
    return [_run_trial(setup, p_idx, t, nb) for t in trials]


def noise_bandwidth_for(setup):
    """Noise band: max 99% bandwidth at input and output of the highest-power frame."""
    cfg = setup.cfg
    if cfg.noise_bandwidth is not None:
        return float(cfg.noise_bandwidth)
    p_idx = int(np.argmax(setup.powers))
    rng = np.random.default_rng([cfg.seed, p_idx, 2**31])
    symbols, _ = setup.frame(setup.powers[p_idx], 0, rng)
    q0 = setup.transmit(symbols)
    qL = ssfm_propagate(q0, setup.channel(None, noise=False)) if cfg.distance > 0 else q0
    return float(max(bandwidth_99(q0), bandwidth_99(qL)))


def estimate_runtime(cfg):
    """Rough wall-clock estimate (seconds) of :func:`run_experiment`."""
    n = cfg.n_samples
    steps = max(cfg.distance * 2000, 1) if cfg.z_steps is None else cfg.z_steps
    peak = 10 * max(cfg.normalized_powers()) * cfg.n_users
    steps = max(steps, 2 * peak * cfg.distance / 1e-3)
    per_trial = _COST_FFT * steps * n * math.log2(n) * 3
    if cfg.scheme == "nfdm":
        per_trial += _COST_PEEL * n * n
    per_trial += _COST_FFT * n * math.log2(n) * 10
    return per_trial * cfg.trials * len(cfg.powers)


def run_experiment(cfg, progress=None):
    """Run the power sweep described by ``cfg``.

    Refuses with :class:`ResourceBudgetError` when the runtime estimate exceeds
    ``cfg.budget_seconds``. Failed trials (applicability, domain or numeric
    errors) are counted per power and excluded from the statistics.
    """
    est = estimate_runtime(cfg)
    if est > cfg.budget_seconds:
        raise ResourceBudgetError(
            f"estimated runtime {est:.0f} s exceeds the budget of {cfg.budget_seconds:.0f} s", estimate=est
        )
    t_start = time.time()
    setup = _Setup(cfg)
    nb = noise_bandwidth_for(setup)
    res = ExperimentResult.empty(cfg.to_dict())
    res.noise_bandwidth = nb
    for p_idx, power in enumerate(setup.powers):
        trials = list(range(cfg.trials))
        if cfg.workers > 1:
            chunks = [trials[i::cfg.workers] for i in range(cfg.workers)]
            with ProcessPoolExecutor(cfg.workers) as ex:
                parts = list(ex.map(_trial_chunk, [(setup, p_idx, c, nb) for c in chunks]))
            # restore trial order
            order = [t for c in chunks for t in c]
            flat = [r for part in parts for r in part]
            out = [r for _, r in sorted(zip(order, flat), key=lambda x: x[0])]
        else:
            out = _trial_chunk((setup, p_idx, trials, nb))
        rings = np.array([r[0] for r in out if r[2] is not None], dtype=int)
        sent = np.array([r[1] for r in out if r[2] is not None], dtype=complex)
        recv = np.array([r[2] for r in out if r[2] is not None], dtype=complex)
        failures = sum(1 for r in out if r[2] is None)
        rot = 0.0
        if cfg.scheme == "wdm" and recv.size:
            rot = estimate_rotation(sent, recv)
            recv = recv * np.exp(-1j * rot)
        res.powers.append(power)
        res.failures.append(failures)
        res.rotations.append(rot)
        res.sent.append(sent)
        res.received.append(recv)
        rate, ent, hist = _rate_from_samples(setup, power, rings, sent, recv)
        res.rates.append(rate)
        res.entropies.append(ent)
        res.histograms.append(hist)
        alpha, p_total = _alpha(setup, p_idx, nb)
        res.alphas.append(alpha)
        res.total_powers.append(p_total)
        if progress is not None:
            progress(p_idx, power, rate)
    res.runtime = {
        "seconds": time.time() - t_start,
        "estimate_seconds": est,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return res


def _rate_from_samples(setup, power, rings, sent, recv):
    cfg = setup.cfg
    if recv.size < 2 or np.unique(rings).size < cfg.n_rings:
        return float("nan"), float("nan"), None
    binning = PolarBinning.from_support(recv, cfg.n_rings, cfg.n_phases)
    ring_hist = estimate_transitions(rings, recv, cfg.n_rings, binning)
    hist = expand_phase_symmetric(ring_hist, cfg.n_phases)
    const = setup.constellation(power)
    costs = np.abs(const.points) ** 2
    res = blahut_arimoto(hist, power_constraint=const.mean_energy, costs=costs)
    return res.rate, conditional_entropy(sent, recv), hist


def _alpha(setup, p_idx, nb):
    """Time-bandwidth factor and total power E/T99 of a noise-free frame at this power."""
    cfg = setup.cfg
    rng = np.random.default_rng([cfg.seed, p_idx, 2**31 + 1])
    symbols, _ = setup.frame(setup.powers[p_idx], 0, rng)
    try:
        q0 = setup.transmit(symbols)
        qL = ssfm_propagate(q0, setup.channel(nb, noise=False)) if cfg.distance > 0 else q0
    except (ValueError, NumericFailureError):
        return float("nan"), float("nan")
    T = duration_99(q0)
    W = max(bandwidth_99(q0), bandwidth_99(qL))
    return T * W / (cfg.n_users * cfg.n_symbols), energy(q0) / T


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def save_result(result, out_dir):
    """Write a run directory: manifest (with resolved config), rates, histograms, clouds."""
    os.makedirs(out_dir, exist_ok=True)
    files = emit_plot_data(result, "all", out_dir)
    for i, hist in enumerate(result.histograms):
        if hist is not None:
            path = os.path.join(out_dir, f"histogram_p{i}.csv")
            hist.to_csv(path)
            files.append(path)
    manifest = {
        "config": result.config,
        "powers": result.powers,
        "rates": result.rates,
        "entropies": result.entropies,
        "alphas": result.alphas,
        "total_powers": result.total_powers,
        "failures": result.failures,
        "rotations": result.rotations,
        "noise_bandwidth": result.noise_bandwidth,
        "fingerprint": result.fingerprint(),
        "runtime": result.runtime,
        "files": [os.path.basename(f) for f in files],
        "label": "desk-scale reproduction",
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def load_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def result_from_manifest(out_dir):
    """Rebuild a result (without histograms and clouds) from a run directory."""
    m = load_manifest(out_dir)
    res = ExperimentResult.empty(m["config"])
    res.powers, res.rates, res.entropies = m["powers"], m["rates"], m["entropies"]
    res.alphas, res.failures, res.rotations = m["alphas"], m["failures"], m["rotations"]
    res.noise_bandwidth = m["noise_bandwidth"]
    res.total_powers = m.get("total_powers", [])
    res.runtime = m.get("runtime", {})
    for i in range(len(res.powers)):
        path = os.path.join(out_dir, f"clouds_p{i}.csv")
        s, r = [], []
        if os.path.exists(path):
            with open(path, newline="") as fh:
                for row in csv.DictReader(fh):
                    s.append(complex(float(row["sent_re"]), float(row["sent_im"])))
                    r.append(complex(float(row["recv_re"]), float(row["recv_im"])))
        res.sent.append(np.array(s, dtype=complex))
        res.received.append(np.array(r, dtype=complex))
        res.histograms.append(None)
    return res


def emit_plot_data(result, kind, out_dir):
    """Delimited-text plot series; returns the written paths.

    ``kind`` is ``rate`` (one row per power), ``entropy`` (one row per power),
    ``clouds`` (one file per power, one row per successful trial) or ``all``.
    """
    kinds = PLOT_KINDS if kind == "all" else (kind,)
    for k in kinds:
        if k not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {k!r}; choose from {PLOT_KINDS + ('all',)}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for k in kinds:
        if k == "rate":
            path = os.path.join(out_dir, "rate.csv")
            _write_rows(path, ["power", "total_power", "rate_bits_2d", "failures"],
                        zip(result.powers, _totals(result), result.rates, result.failures))
            written.append(path)
        elif k == "entropy":
            path = os.path.join(out_dir, "entropy.csv")
            _write_rows(path, ["power", "total_power", "conditional_entropy_bits"],
                        zip(result.powers, _totals(result), result.entropies))
            written.append(path)
        else:
            if not result.powers:
                path = os.path.join(out_dir, "clouds.csv")
                _write_rows(path, ["sent_re", "sent_im", "recv_re", "recv_im"], [])
                written.append(path)
            for i, (s, r) in enumerate(zip(result.sent, result.received)):
                path = os.path.join(out_dir, f"clouds_p{i}.csv")
                rows = ((a.real, a.imag, b.real, b.imag) for a, b in zip(s, r))
                _write_rows(path, ["sent_re", "sent_im", "recv_re", "recv_im"], rows)
                written.append(path)
    return written


def _totals(result):
    t = list(result.total_powers)
    return t + [float("nan")] * (len(result.powers) - len(t))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
