"""Closed-form statistics of the cascaded channel and the outage probability.

The end-to-end amplitude is ``A = C * Y1 * Y2`` with ``C = prod(g_i)``,
``Y1`` the product of pointing-error and turbulence factors of the first
``L`` hops and ``Y2`` the turbulence factors of the remaining hops.  Every
density and CDF below is a single Meijer G-function whose parameter lists
collect the alpha, beta and xi of all contributing hops.

Turbulence-free hops (Rytov variance below ``EPS_TURB``) contribute a
constant ``omega`` and are folded into the scale instead of the G-function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .channel import (
    Environment,
    HopSpec,
    Impairments,
    LinkBudget,
    PointingParams,
    TurbulenceParams,
    noise_power,
    path_gain,
    pointing_params,
    turbulence_params,
    absorption_coeff,
)
from .specfun import MeijerGSpec, meijer_g

CLOSED_FORM = "closed-form"
MONTE_CARLO = "monte-carlo"

# How the deterministic path gain enters the SDNR.  The value is the power
# of prod(g_i) that multiplies the fading product Z in the effective
# amplitude: "first-principles" uses A = prod(g) Z as written in the signal
# model, "power-gain" treats prod(g) as a power gain so that the received
# SNR is gamma_s * Z**2 with gamma_s = P_s prod(g) / N_o, and "literal"
# composes the printed closed form with that gamma_s literally.
CONVENTIONS = {"first-principles": 1.0, "power-gain": 0.5, "literal": 1.5}
DEFAULT_CONVENTION = "power-gain"


@dataclass(frozen=True)
class ChainSpec:
    """Statistical description of an N-hop cascade.

    ``turbulence`` has one entry per hop; ``pointing`` one entry for each
    of the first ``L`` hops.  ``gains`` are the deterministic amplitude
    path gains ``g_i``.
    """

    turbulence: tuple[TurbulenceParams, ...]
    pointing: tuple[PointingParams, ...] = ()
    gains: tuple[float, ...] = ()
    imp: Impairments = field(default_factory=Impairments)
    P_s: float = 1.0
    N_o: float = 1.0
    gamma_th: float = 3.0
    hops: tuple[HopSpec, ...] = ()
    convention: str = DEFAULT_CONVENTION

    def __post_init__(self):
        object.__setattr__(self, "turbulence", tuple(self.turbulence))
        object.__setattr__(self, "pointing", tuple(self.pointing))
        gains = tuple(self.gains) if self.gains else (1.0,) * len(self.turbulence)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "hops", tuple(self.hops))
        if self.N < 1:
            raise ValueError("a chain needs at least one hop")
        if self.L > self.N:
            raise ValueError(f"L={self.L} misaligned hops exceed N={self.N}")
        if len(self.gains) != self.N:
            raise ValueError("need one path gain per hop")
        if any(not g > 0 for g in self.gains):
            raise ValueError("path gains must be positive")
        if self.hops and len(self.hops) != self.N:
            raise ValueError("need one HopSpec per hop")
        if not (self.P_s > 0 and self.N_o > 0):
            raise ValueError("P_s and N_o must be positive")
        if not self.gamma_th > 0:
            raise ValueError("gamma_th must be positive")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")

    @property
    def N(self) -> int:
        return len(self.turbulence)

    @property
    def L(self) -> int:
        return len(self.pointing)

    @property
    def log_gain(self) -> float:
        """log of prod(g_i); the product itself underflows for long chains."""
        return math.fsum(math.log(g) for g in self.gains)

    @property
    def log_effective_gain(self) -> float:
        """log of the factor turning Z into the amplitude seen by the SDNR."""
        return CONVENTIONS[self.convention] * self.log_gain

    def replace(self, **changes) -> "ChainSpec":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class OutageResult:
    p_out: float
    method: str
    err: float = 0.0
    # True when the impairment ceiling forced p_out = 1 without evaluating the CDF
    saturated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_out <= 1.0:
            raise ValueError(f"outage probability {self.p_out} outside [0, 1]")


def build_chain(hops: Sequence[HopSpec], env: Environment, lb: LinkBudget,
                imp: Impairments | None = None, gamma_th: float = 3.0,
                convention: str = DEFAULT_CONVENTION) -> ChainSpec:
    """Derive the statistical chain from geometry and the link budget.

    Hops flagged ``has_misalignment`` must come first.
    """
    hops = tuple(hops)
    flags = [h.has_misalignment for h in hops]
    L = sum(flags)
    if any(flags[L:]) or not all(flags[:L]):
        raise ValueError("misaligned hops must be the first L hops")
    kappa = absorption_coeff(env)
    return ChainSpec(
        turbulence=tuple(turbulence_params(h, env) for h in hops),
        pointing=tuple(pointing_params(h.b, h.w_d, h.sigma_jitter) for h in hops[:L]),
        gains=tuple(path_gain(h, env, kappa) for h in hops),
        imp=imp or Impairments(),
        P_s=lb.P_s,
        N_o=noise_power(lb, env),
        gamma_th=gamma_th,
        hops=hops,
        convention=convention,
    )


# ---------------------------------------------------------------------------
# G-function parameter assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Product:
    """Random product ``prod(h_p) * prod(h_t)`` in Meijer-G form.

    density(x) = exp(log_pref) / x * G^{m,0}_{p,m}(x * exp(log_scale) | top; bottom)
    """

    top: tuple[float, ...]
    bottom: tuple[float, ...]
    log_pref: float
    log_scale: float
    # pointing-only products need a separate route (see _pointing_only_cdf)
    xi: tuple[float, ...]
    log_A: float


def _product(turb: Sequence[TurbulenceParams], point: Sequence[PointingParams]) -> _Product:
    alphas, betas = [], []
    log_pref = 0.0
    log_scale = 0.0
    for tp in turb:
        if tp.deterministic:
            log_scale -= math.log(tp.omega)
            continue
        alphas.append(tp.alpha)
        betas.append(tp.beta)
        log_pref -= math.lgamma(tp.alpha) + math.lgamma(tp.beta)
        log_scale += math.log(tp.alpha) + math.log(tp.beta) - math.log(tp.omega)
    # an infinite xi leaves only the constant A_o, which log_A already carries
    xis = [pp.xi for pp in point if math.isfinite(pp.xi)]
    log_A = math.fsum(math.log(pp.A_o) for pp in point)
    log_pref += math.fsum(math.log(x) for x in xis)
    log_scale -= log_A
    return _Product(
        top=tuple(x + 1.0 for x in xis),
        bottom=tuple(alphas + betas + xis),
        log_pref=log_pref,
        log_scale=log_scale,
        xi=tuple(xis),
        log_A=log_A,
    )


def _density(prod: _Product, x: float) -> float:
    if not x > 0:
        raise ValueError("densities are evaluated at x > 0")
    if not prod.bottom:
        raise ValueError("product is deterministic; it has no density")
    if len(prod.bottom) == len(prod.top):
        # only pointing factors: density of a product of power-law variables
        return _pointing_only_pdf(prod, x)
    spec = MeijerGSpec(len(prod.bottom), 0, prod.top, prod.bottom)
    log_x = math.log(x)
    return meijer_g(spec, math.exp(log_x + prod.log_scale), log_prefactor=prod.log_pref - log_x)


def _cdf(prod: _Product, x: float) -> tuple[float, float]:
    """CDF value and its numeric error estimate."""
    if x <= 0:
        return 0.0, 0.0
    if math.isinf(x):
        return 1.0, 0.0
    if not prod.bottom:
        # deterministic product equal to exp(-log_scale)
        return (1.0 if math.log(x) + prod.log_scale >= 0.0 else 0.0), 0.0
    if len(prod.bottom) == len(prod.top):
        return _pointing_only_cdf(prod, x), 0.0
    m = len(prod.bottom)
    spec = MeijerGSpec(m, 1, (1.0,) + prod.top, prod.bottom + (0.0,))
    val, err = meijer_g(spec, math.exp(math.log(x) + prod.log_scale),
                        log_prefactor=prod.log_pref, full_output=True)
    return min(max(val, 0.0), 1.0), err


def _hypoexp_sf(rates: Sequence[float], t: float) -> float:
    """P(sum of independent Exp(rate_i) > t), equal rates allowed."""
    if t <= 0:
        return 1.0
    k = len(rates)
    T = np.zeros((k, k))
    for i, r in enumerate(rates):
        T[i, i] = -r
        if i + 1 < k:
            T[i, i + 1] = r
    return float(np.clip(expm(T * t)[0].sum(), 0.0, 1.0))


def _pointing_only_cdf(prod: _Product, x: float) -> float:
    # -log(h_p,i / A_o,i) ~ Exp(xi_i), so the product CDF is a hypoexponential tail
    t = -(math.log(x) + prod.log_scale)
    return _hypoexp_sf(prod.xi, t)


def _pointing_only_pdf(prod: _Product, x: float) -> float:
    t = -(math.log(x) + prod.log_scale)
    if t < 0:
        return 0.0
    rates = prod.xi
    k = len(rates)
    T = np.zeros((k, k))
    for i, r in enumerate(rates):
        T[i, i] = -r
        if i + 1 < k:
            T[i, i + 1] = r
    # phase-type density of the sum at t, mapped through x = exp(-t - log_scale)
    dens_t = float(expm(T * t)[0, -1] * rates[-1])
    return dens_t / x


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def pdf_y1(chain: ChainSpec, x: float) -> float:
    """Density of the product of the first L pointing and turbulence factors."""
    if chain.L == 0:
        raise ValueError("Y1 is undefined for L = 0")
    return _density(_product(chain.turbulence[:chain.L], chain.pointing), x)


def pdf_y2(chain: ChainSpec, x: float) -> float:
    """Density of the product of the turbulence factors of hops L+1..N."""
    if chain.L == chain.N:
        raise ValueError("Y2 is an empty product for L = N")
    return _density(_product(chain.turbulence[chain.L:], ()), x)


def pdf_cascade(chain: ChainSpec, x: float) -> float:
    """Density of ``Z = Y1 * Y2`` (the fading part of A, without path gain)."""
    return _density(_product(chain.turbulence, chain.pointing), x)


def cdf_cascade(chain: ChainSpec, x: float, *, full_output: bool = False):
    """CDF of the end-to-end amplitude ``A`` at ``x``."""
    if x < 0:
        raise ValueError("the amplitude CDF is evaluated at x >= 0")
    if x == 0:
        return (0.0, 0.0) if full_output else 0.0
    z = math.exp(math.log(x) - chain.log_gain) if math.isfinite(x) else math.inf
    val, err = _cdf(_product(chain.turbulence, chain.pointing), z)
    return (val, err) if full_output else val


def cdf_z(chain: ChainSpec, z: float) -> float:
    """CDF of the fading product ``Z`` alone."""
    return _cdf(_product(chain.turbulence, chain.pointing), z)[0]


def amplitude_threshold(chain: ChainSpec) -> float:
    """Smallest amplitude with SDNR above ``gamma_th``; inf at the ceiling."""
    slack = 1.0 - chain.gamma_th * chain.imp.kappa2
    if slack <= 0.0:
        return math.inf
    return math.sqrt(chain.gamma_th * chain.N_o / (chain.P_s * slack))


def outage_probability(chain: ChainSpec, *, convention: str | None = None) -> OutageResult:
    """Probability that the SDNR does not exceed ``gamma_th``.

    The CDF of ``Z`` is evaluated at ``A_thr / prod(g_i)**e`` where ``A_thr``
    is the amplitude threshold of the SDNR and ``e`` is set by the gain
    convention (``chain.convention`` unless overridden here).

    Returns exactly 1 with ``saturated=True`` when
    ``gamma_th * (kappa_t**2 + kappa_r**2) > 1``.
    """
    if convention is not None and convention != chain.convention:
        chain = chain.replace(convention=convention)
    if chain.gamma_th * chain.imp.kappa2 > 1.0:
        return OutageResult(1.0, CLOSED_FORM, 0.0, saturated=True)
    a_thr = amplitude_threshold(chain)
    if math.isinf(a_thr):
        return OutageResult(1.0, CLOSED_FORM, 0.0)
    log_z = math.log(a_thr) - chain.log_effective_gain
    if log_z > 700.0:
        # threshold far beyond any realizable fading value
        return OutageResult(1.0, CLOSED_FORM, 0.0)
    val, err = _cdf(_product(chain.turbulence, chain.pointing), math.exp(log_z))
    return OutageResult(val, CLOSED_FORM, err)
