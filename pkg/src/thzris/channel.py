"""Per-hop channel parameters and the link budget.

Everything here is deterministic: turbulence and pointing-error
parameters derived from geometry, path gain with molecular absorption,
receiver noise, and the SDNR with transceiver distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants

from .specfun import erf

SPEED_OF_LIGHT = constants.c
BOLTZMANN = constants.k

# below this Rytov variance the gamma-gamma parameters overflow; the hop is
# treated as turbulence-free with h_t = omega
EPS_TURB = 1e-6
# validity range of simplified_absorption, Hz
SIMPLIFIED_BAND = (275e9, 400e9)


class DegenerateTurbulence(ValueError):
    """Rytov variance too small for a gamma-gamma description."""


class AbsorptionRangeError(ValueError):
    """Frequency outside a tabulated absorption model."""


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class HopSpec:
    """One hop of the cascade.

    ``amp_gain_factor`` is the amplitude gain applied on top of free-space
    loss: sqrt(G_s) on the first hop, the previous RIS reflection
    coefficient on middle hops and sqrt(G_d) on the last one.
    """

    d: float
    b: float = 0.0
    w_d: float = 1.0
    sigma_jitter: float = 0.0
    amp_gain_factor: float = 1.0
    has_misalignment: bool = False
    omega: float = 1.0

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"hop length must be positive, got d={self.d}")
        if self.b < 0:
            raise ValueError(f"aperture radius must be non-negative, got b={self.b}")
        if not self.w_d > 0:
            raise ValueError(f"beam waist must be positive, got w_d={self.w_d}")
        if self.has_misalignment and not self.sigma_jitter > 0:
            raise ValueError("a misaligned hop needs sigma_jitter > 0")
        if not self.amp_gain_factor > 0:
            raise ValueError("amp_gain_factor must be positive")
        if not self.omega > 0:
            raise ValueError("omega must be positive")


@dataclass(frozen=True)
class TurbulenceParams:
    """Gamma-gamma parameters of one hop.

    ``alpha = beta = inf`` marks a turbulence-free hop whose coefficient
    is the constant ``omega``.
    """

    alpha: float
    beta: float
    omega: float = 1.0
    sigma_R2: float = math.nan
    D: float = math.nan

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.omega > 0):
            raise ValueError("alpha, beta and omega must be positive")

    @property
    def deterministic(self) -> bool:
        return math.isinf(self.alpha) or math.isinf(self.beta)


@dataclass(frozen=True)
class PointingParams:
    A_o: float
    xi: float
    w_eq: float = math.nan
    v: float = math.nan

    def __post_init__(self):
        if not 0.0 < self.A_o <= 1.0:
            raise ValueError(f"A_o must lie in (0, 1], got {self.A_o}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")


@dataclass(frozen=True)
class Impairments:
    kappa_t: float = 0.0
    kappa_r: float = 0.0

    def __post_init__(self):
        if self.kappa_t < 0 or self.kappa_r < 0:
            raise ValueError("error-vector magnitudes must be non-negative")

    @property
    def kappa2(self) -> float:
        """kappa_t^2 + kappa_r^2; the only combination the SDNR depends on."""
        return self.kappa_t ** 2 + self.kappa_r ** 2


@dataclass(frozen=True)
class AbsorptionModel:
    """Molecular absorption coefficient source.

    mode ``"constant"`` returns ``kappa``; ``"table"`` interpolates
    linearly in ``table`` (pairs of frequency in Hz and kappa in 1/m);
    ``"simplified"`` uses the built-in 275-400 GHz approximation.
    """

    mode: str = "constant"
    kappa: float = 0.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.mode not in ("constant", "table", "simplified"):
            raise ValueError(f"unknown absorption mode {self.mode!r}")
        if self.mode == "constant" and self.kappa < 0:
            raise ValueError("absorption coefficient must be non-negative")
        if self.mode == "table":
            if len(self.table) < 2:
                raise ValueError("absorption table needs at least two rows")
            freqs = [row[0] for row in self.table]
            if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
                raise ValueError("absorption table frequencies must increase strictly")
            if any(row[1] < 0 for row in self.table):
                raise ValueError("absorption table values must be non-negative")


@dataclass(frozen=True)
class Environment:
    f: float = 300e9
    temperature: float = 273.0
    pressure: float = 101325.0
    relative_humidity: float = 0.5
    Cn2: float = 0.0
    absorption: AbsorptionModel = field(default_factory=AbsorptionModel)

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError("carrier frequency must be positive")
        if not (self.temperature > 0 and self.pressure > 0):
            raise ValueError("temperature and pressure must be positive")
        if not 0.0 <= self.relative_humidity <= 1.0:
            raise ValueError("relative humidity must lie in [0, 1]")
        if self.Cn2 < 0:
            raise ValueError("Cn2 must be non-negative")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f


@dataclass(frozen=True)
class Stage:
    """Receiver stage; a passive loss has negative gain and NF equal to the loss."""

    gain_db: float
    nf_db: float

    def __post_init__(self):
        if self.nf_db < 0:
            raise ValueError("noise figure must be >= 0 dB")


DEFAULT_RECEIVER_CHAIN = (
    Stage(35.0, 1.0),   # LNA
    Stage(-5.0, 6.0),   # mixer
    Stage(-3.0, 3.0),   # miscellaneous losses
)


@dataclass(frozen=True)
class LinkBudget:
    P_s: float = 1.0
    bandwidth: float = 50e9
    G_s: float = 1e5
    G_d: float = 1e5
    R: tuple[float, ...] = ()
    receiver_chain: tuple[Stage, ...] = DEFAULT_RECEIVER_CHAIN

    def __post_init__(self):
        if not (self.P_s > 0 and self.bandwidth > 0):
            raise ValueError("transmit power and bandwidth must be positive")
        if not (self.G_s > 0 and self.G_d > 0) or any(r <= 0 for r in self.R):
            raise ValueError("all gains must be positive")

    def amp_gain_factors(self, n_hops: int) -> list[float]:
        """Amplitude gain of each hop: sqrt(G_s), R_1 .. R_{N-2}, sqrt(G_d)."""
        if n_hops == 1:
            return [math.sqrt(self.G_s * self.G_d)]
        middle = [self.R[i - 1] if i - 1 < len(self.R) else 1.0 for i in range(1, n_hops - 1)]
        return [math.sqrt(self.G_s), *middle, math.sqrt(self.G_d)]


# ---------------------------------------------------------------------------
# turbulence and pointing
# ---------------------------------------------------------------------------


def rytov_variance(Cn2: float, f: float, d: float) -> float:
    """Rytov variance ``1.23 Cn2 k^(7/6) d^(11/6)`` of a plane wave."""
    k = 2.0 * math.pi * f / SPEED_OF_LIGHT
    return 1.23 * Cn2 * k ** (7.0 / 6.0) * d ** (11.0 / 6.0)


def aperture_param(b: float, f: float, d: float) -> float:
    """Aperture-averaging parameter ``sqrt(pi b^2 / (2 lambda d))``."""
    lam = SPEED_OF_LIGHT / f
    return math.sqrt(math.pi * b * b / (2.0 * lam * d))


def gg_params(sigma_R2: float, D: float) -> tuple[float, float]:
    """Gamma-gamma ``(alpha, beta)`` with aperture averaging.

    Raises DegenerateTurbulence when ``sigma_R2 <= EPS_TURB``; the caller
    should then treat the hop as turbulence-free.
    """
    if not sigma_R2 > EPS_TURB:
        raise DegenerateTurbulence(f"sigma_R2={sigma_R2} is below {EPS_TURB}")
    s125 = sigma_R2 ** 1.2
    D2 = D * D
    x_alpha = 0.49 * sigma_R2 / (1.0 + 0.65 * D2 + 1.11 * s125) ** (7.0 / 6.0)
    x_beta = (0.51 * sigma_R2 * (1.0 + 0.69 * s125) ** (-5.0 / 6.0)
              / (1.0 + 0.9 * D2 + 0.62 * D2 * s125))
    return 1.0 / math.expm1(x_alpha), 1.0 / math.expm1(x_beta)


def turbulence_params(hop: HopSpec, env: Environment) -> TurbulenceParams:
    sr2 = rytov_variance(env.Cn2, env.f, hop.d)
    D = aperture_param(hop.b, env.f, hop.d)
    try:
        alpha, beta = gg_params(sr2, D)
    except DegenerateTurbulence:
        alpha = beta = math.inf
    return TurbulenceParams(alpha, beta, hop.omega, sr2, D)


def _log_weq2(b: float, w_d: float) -> float:
    v = math.sqrt(math.pi) * b / (math.sqrt(2.0) * w_d)
    return 2.0 * math.log(w_d) + 0.5 * math.log(math.pi) + math.log(erf(v)) + v * v - math.log(2.0 * v)


def equivalent_beam_radius(b: float, w_d: float) -> float:
    """``w_eq`` from ``w_eq^2 = w_d^2 sqrt(pi) erf(v) / (2 v exp(-v^2))``.

    Evaluated in log space; inf once the aperture is so much wider than
    the beam that the value overflows.
    """
    log_w2 = _log_weq2(b, w_d)
    return math.exp(0.5 * log_w2) if log_w2 < 1400.0 else math.inf


def pointing_params(b: float, w_d: float, sigma_jitter: float) -> PointingParams:
    if not (b > 0 and w_d > 0 and sigma_jitter > 0):
        raise ValueError("pointing parameters need b, w_d and sigma_jitter > 0")
    v = math.sqrt(math.pi) * b / (math.sqrt(2.0) * w_d)
    A_o = erf(v) ** 2
    log_xi = _log_weq2(b, w_d) - math.log(4.0 * sigma_jitter ** 2)
    # xi = inf means the jitter never moves the beam off the aperture
    xi = math.exp(log_xi) if log_xi < 700.0 else math.inf
    return PointingParams(A_o=A_o, xi=xi, w_eq=equivalent_beam_radius(b, w_d), v=v)


# ---------------------------------------------------------------------------
# absorption, path gain, noise
# ---------------------------------------------------------------------------


def water_vapour_mixing_ratio(temperature: float, pressure: float,
                              relative_humidity: float) -> float:
    """Volume mixing ratio of water vapour from the Buck saturation formula."""
    p_hpa = pressure / 100.0
    p_sat = 6.1121 * (1.0007 + 3.46e-6 * p_hpa) * math.exp(
        17.502 * (temperature - 273.15) / (temperature - 32.18))
    return relative_humidity * p_sat / p_hpa


def simplified_absorption(f: float, temperature: float, pressure: float,
                          relative_humidity: float) -> float:
    """Absorption coefficient (1/m) from two water lines plus a polynomial floor.

    Valid between 275 and 400 GHz; covers the 325 GHz and 380 GHz water
    vapour lines.
    """
    mu = water_vapour_mixing_ratio(temperature, pressure, relative_humidity)
    nu = f / (100.0 * SPEED_OF_LIGHT)  # wavenumber in 1/cm
    A = 0.2205 * mu * (0.1303 * mu + 0.0294)
    B = (0.4093 * mu + 0.0925) ** 2
    C = 2.014 * mu * (0.1702 * mu + 0.0303)
    D = (0.537 * mu + 0.0956) ** 2
    y1 = A / (B + (nu - 10.835) ** 2)
    y2 = C / (D + (nu - 12.664) ** 2)
    g = 5.54e-37 * f ** 3 - 3.94e-25 * f ** 2 + 9.06e-14 * f - 6.36e-3
    return max(y1 + y2 + g, 0.0)


def absorption_coeff(env: Environment) -> float:
    model = env.absorption
    if model.mode == "constant":
        return model.kappa
    if model.mode == "table":
        freqs = np.array([row[0] for row in model.table])
        vals = np.array([row[1] for row in model.table])
        if not freqs[0] <= env.f <= freqs[-1]:
            raise AbsorptionRangeError(
                f"f={env.f:g} Hz outside absorption table [{freqs[0]:g}, {freqs[-1]:g}]")
        return float(np.interp(env.f, freqs, vals))
    if not SIMPLIFIED_BAND[0] <= env.f <= SIMPLIFIED_BAND[1]:
        raise AbsorptionRangeError(
            f"f={env.f:g} Hz outside the simplified model band {SIMPLIFIED_BAND[0]:g}-{SIMPLIFIED_BAND[1]:g} Hz")
    return simplified_absorption(env.f, env.temperature, env.pressure, env.relative_humidity)


def free_space_gain(f: float, d: float) -> float:
    """Amplitude free-space factor ``c / (4 pi f d)``."""
    return SPEED_OF_LIGHT / (4.0 * math.pi * f * d)


def absorption_gain(kappa: float, d: float) -> float:
    return math.exp(-0.5 * kappa * d)


def path_gain(hop: HopSpec, env: Environment, kappa: float | None = None) -> float:
    """Deterministic amplitude gain of one hop.

    ``kappa`` overrides the environment's absorption model when given.
    """
    if kappa is None:
        kappa = absorption_coeff(env)
    return free_space_gain(env.f, hop.d) * hop.amp_gain_factor * absorption_gain(kappa, hop.d)


def noise_factor(chain: Sequence[Stage]) -> float:
    """Friis cascade of noise factors, stages in signal order."""
    total = 1.0
    gain = 1.0
    for i, stage in enumerate(chain):
        F = db_to_lin(stage.nf_db)
        total = F if i == 0 else total + (F - 1.0) / gain
        gain *= db_to_lin(stage.gain_db)
    return total


def noise_power(lb: LinkBudget, env: Environment) -> float:
    """Receiver noise power ``k_B T B F`` in watts."""
    return BOLTZMANN * env.temperature * lb.bandwidth * noise_factor(lb.receiver_chain)


# ---------------------------------------------------------------------------
# SNR bookkeeping
# ---------------------------------------------------------------------------


def sdnr(A, P_s: float, N_o: float, imp: Impairments):
    """Signal-to-distortion-plus-noise ratio for channel amplitude ``A``.

    Works elementwise on arrays.
    """
    sig = np.square(A) * P_s
    return sig / (sig * imp.kappa2 + N_o)


def transmission_snr(P_s: float, N_o: float, gains: Sequence[float]) -> float:
    """``P_s * prod(g) / N_o``, the reporting SNR used on sweep axes."""
    log_g = sum(math.log(g) for g in gains)
    return math.exp(math.log(P_s) + log_g - math.log(N_o))


def se_ceiling(imp: Impairments) -> float:
    """Largest spectral efficiency (bit/s/Hz) the impaired transceivers allow."""
    k2 = imp.kappa2
    if k2 == 0.0:
        return math.inf
    return math.log2(1.0 + 1.0 / k2)


def threshold_from_se(p: float) -> float:
    """SNR threshold for a target spectral efficiency ``p`` in bit/s/Hz."""
    return 2.0 ** p - 1.0
