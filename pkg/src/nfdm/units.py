"""Physical <-> normalised units.

The lossless fibre equation

    dA/dZ = -j (beta2/2) d^2A/dT^2 + j gamma |A|^2 A + N(T, Z)

becomes ``j q_z = q_tt - 2 s |q|^2 q + n`` with ``T = T0 t``, ``Z = Z0 z``,
``A = sqrt(P0) q`` and

    Z0 = 2 T0^2 / |beta2|,   P0 = 2 / (gamma Z0),   s = sign(beta2).

``beta2 = -D lambda^2 / (2 pi c)``; normal dispersion (``D < 0``) gives the
defocusing case ``s = +1``. A white noise of PSD ``N_ase`` (W/Hz per metre)
maps to ``sigma0^2 = N_ase Z0 / (P0 T0)``.

All values inside :class:`Normalization` are SI (seconds, metres, watts).
"""
import math
from dataclasses import asdict, dataclass

from .channel import ChannelConfig

C_LIGHT = 299792458.0


@dataclass(frozen=True)
class Normalization:
    """Scale triple ``(length_scale Z0 [m], power_scale P0 [W], time_scale T0 [s])`` and sign."""

    length_scale: float
    power_scale: float
    time_scale: float
    s: int = 1

    def __post_init__(self):
        for name in ("length_scale", "power_scale", "time_scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.s not in (1, -1):
            raise ValueError("s must be +1 or -1")

    @classmethod
    def identity(cls, s=1):
        return cls(1.0, 1.0, 1.0, s)

    @classmethod
    def from_fiber(cls, dispersion_ps_nm_km, gamma_per_w_km, wavelength_nm, time_scale_s):
        """Triple from the dispersion parameter, nonlinearity and a chosen time scale."""
        if gamma_per_w_km <= 0 or wavelength_nm <= 0 or time_scale_s <= 0:
            raise ValueError("gamma, wavelength and time scale must be positive")
        if dispersion_ps_nm_km == 0:
            raise ValueError("dispersion must be non-zero")
        beta2 = beta2_from_dispersion(dispersion_ps_nm_km, wavelength_nm)
        z0 = 2 * time_scale_s**2 / abs(beta2)
        gamma = gamma_per_w_km / 1e3
        p0 = 2 / (gamma * z0)
        return cls(z0, p0, time_scale_s, 1 if beta2 > 0 else -1)

    # conversions ---------------------------------------------------------
    def distance(self, metres):
        return metres / self.length_scale

    def distance_phys(self, z):
        return z * self.length_scale

    def power(self, watts):
        return watts / self.power_scale

    def power_phys(self, p):
        return p * self.power_scale

    def time(self, seconds):
        return seconds / self.time_scale

    def time_phys(self, t):
        return t * self.time_scale

    def frequency(self, hertz):
        return hertz * self.time_scale

    def frequency_phys(self, f):
        return f / self.time_scale

    def noise_psd(self, n_ase):
        """``N_ase`` in W/(Hz m) -> normalised ``sigma0^2``."""
        return n_ase * self.length_scale / (self.power_scale * self.time_scale)

    def noise_psd_phys(self, sigma2):
        return sigma2 * self.power_scale * self.time_scale / self.length_scale

    def as_dict(self):
        return asdict(self)


def beta2_from_dispersion(dispersion_ps_nm_km, wavelength_nm):
    """``beta2 = -D lambda^2 / (2 pi c)`` in s^2/m."""
    D = dispersion_ps_nm_km * 1e-12 / (1e-9 * 1e3)  # s/m^2
    lam = wavelength_nm * 1e-9
    return -D * lam**2 / (2 * math.pi * C_LIGHT)


def dbm_to_watts(dbm):
    return 1e-3 * 10 ** (dbm / 10)


def watts_to_dbm(w):
    if w <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10 * math.log10(w / 1e-3)


@dataclass(frozen=True)
class PhysicalParams:
    """Link parameters in engineering units."""

    distance_km: float
    power_dbm: float
    bandwidth_ghz: float
    noise_psd: float = 0.0  # W/(Hz km)
    noise_bandwidth_ghz: float = None
    z_steps: int = None
    rng_seed: int = None


def convert_units(params, norm):
    """Physical link parameters -> (ChannelConfig, metadata).

    The metadata records the triple and the normalised power and bandwidth so
    that :func:`to_physical` can invert the mapping.
    """
    if not isinstance(norm, Normalization):
        raise TypeError("norm must be a Normalization")
    if params.distance_km < 0 or params.bandwidth_ghz <= 0 or params.noise_psd < 0:
        raise ValueError("distance, bandwidth and noise PSD must be non-negative (bandwidth positive)")
    nb = None
    if params.noise_bandwidth_ghz is not None:
        nb = norm.frequency(params.noise_bandwidth_ghz * 1e9)
    cfg = ChannelConfig(
        s=norm.s,
        distance=norm.distance(params.distance_km * 1e3),
        noise_psd=norm.noise_psd(params.noise_psd / 1e3),
        noise_bandwidth=nb,
        z_steps=params.z_steps,
        rng_seed=params.rng_seed,
    )
    meta = {
        "normalization": norm.as_dict(),
        "power": norm.power(dbm_to_watts(params.power_dbm)),
        "bandwidth": norm.frequency(params.bandwidth_ghz * 1e9),
    }
    return cfg, meta


def to_physical(cfg, meta):
    """Inverse of :func:`convert_units`."""
    norm = Normalization(**meta["normalization"])
    nb = None if cfg.noise_bandwidth is None else norm.frequency_phys(cfg.noise_bandwidth) / 1e9
    return PhysicalParams(
        distance_km=norm.distance_phys(cfg.distance) / 1e3,
        power_dbm=watts_to_dbm(norm.power_phys(meta["power"])),
        bandwidth_ghz=norm.frequency_phys(meta["bandwidth"]) / 1e9,
        noise_psd=norm.noise_psd_phys(cfg.noise_psd) * 1e3,
        noise_bandwidth_ghz=nb,
        z_steps=cfg.z_steps,
        rng_seed=cfg.rng_seed,
    )
