"""Special functions: log-gamma, erf, Bessel K and a Meijer G evaluator.

The Meijer G-function is evaluated by direct numerical quadrature of its
Mellin-Barnes integral along a vertical line ``Re(s) = c``.  Working on a
straight contour (instead of summing residues) keeps the evaluation valid
when several bottom parameters coincide, which happens whenever two hops
share the same turbulence parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "SpecialFunctionError",
    "MeijerGContourError",
    "ToleranceNotMet",
    "MeijerGSpec",
    "ln_gamma",
    "erf",
    "erfc",
    "bessel_k",
    "meijer_g",
]

_LOG_PI = math.log(math.pi)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_EPS = np.finfo(float).eps

# B_2k / (2k (2k-1)), k = 1..10
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
)
_STIRLING_MIN = 7.0


class SpecialFunctionError(ValueError):
    """Argument outside the domain of a special function."""


class MeijerGContourError(SpecialFunctionError):
    """No vertical contour separates the two pole families."""


class ToleranceNotMet(ArithmeticError):
    """Quadrature ran out of panels before reaching the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether to use them anyway.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


# ---------------------------------------------------------------------------
# log-gamma
# ---------------------------------------------------------------------------


def _stirling(z: np.ndarray) -> np.ndarray:
    zinv = 1.0 / z
    zinv2 = zinv * zinv
    acc = np.full_like(z, _STIRLING[-1])
    for coef in _STIRLING[-2::-1]:
        acc = acc * zinv2 + coef
    return (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + acc * zinv


def _sinpi(z: np.ndarray) -> np.ndarray:
    # reduce Re(z) mod 2 exactly before multiplying by pi
    x = np.fmod(z.real, 2.0)
    y = z.imag
    out = np.empty_like(z)
    # assign parts separately so a signed zero imaginary part survives
    out.real = np.sin(np.pi * x) * np.cosh(np.pi * y)
    out.imag = np.cos(np.pi * x) * np.sinh(np.pi * y)
    return out


def _log_sinpi(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    big_up = z.imag > 60.0
    big_dn = z.imag < -60.0
    mid = ~(big_up | big_dn)
    out[mid] = np.log(_sinpi(z[mid]))
    # sin(pi z) ~ exp(-i pi z) / (2i) for large positive Im z, and mirrored
    out[big_up] = -1j * np.pi * z[big_up] + math.log(0.5) + 0.5j * np.pi
    out[big_dn] = 1j * np.pi * z[big_dn] + math.log(0.5) - 0.5j * np.pi
    far = ~mid
    # principal log: wrap the phase back into (-pi, pi]
    out[far] = out[far].real + 1j * (np.pi - np.mod(np.pi - out[far].imag, 2.0 * np.pi))
    return out


def _ln_gamma_right(z: np.ndarray) -> np.ndarray:
    """Principal log-gamma for Re(z) >= 0 (poles excluded by the caller)."""
    out = np.empty_like(z)
    direct = (z.real >= _STIRLING_MIN) | (np.abs(z.imag) >= _STIRLING_MIN)
    out[direct] = _stirling(z[direct])
    small = ~direct
    if np.any(small):
        # shift up with principal logs; every z + k stays in the right half-plane
        zs = z[small].copy()
        shift = np.zeros_like(zs)
        n = np.ceil(_STIRLING_MIN - zs.real).astype(int)
        for k in range(int(n.max())):
            active = n > k
            shift[active] += np.log(zs[active] + k)
        zs = zs + n
        out[small] = _stirling(zs) - shift
    return out


def _ln_gamma_array(z: np.ndarray) -> np.ndarray:
    """Vectorised principal-branch log-gamma; poles map to +inf."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    pole = (z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.floor(z.real))
    out[pole] = np.inf
    right = (z.real >= 0.0) & ~pole
    out[right] = _ln_gamma_right(z[right])
    left = ~(right | pole)
    if np.any(left):
        zl = z[left]
        # reflection with branch correction (Hare, 1997)
        corr = np.copysign(2.0 * np.pi, zl.imag) * np.floor(0.5 * zl.real + 0.25)
        out[left] = (_LOG_PI + 1j * corr) - _log_sinpi(zl) - _ln_gamma_right(1.0 - zl)
    return out


def ln_gamma(z):
    """Principal branch of log Gamma(z).

    Accepts a scalar or array of complex (or real) values and returns
    complex output of the same shape.  Relative accuracy is about 1e-14
    away from the zeros of ``log Gamma`` at z = 1 and z = 2, where the error
    is absolute instead.

    Raises
    ------
    SpecialFunctionError
        If any ``z`` is a non-positive integer.
    """
    arr = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(arr).ravel()
    if np.any(~np.isfinite(flat)):
        raise SpecialFunctionError("ln_gamma needs finite arguments")
    res = _ln_gamma_array(flat)
    if np.any(np.isinf(res.real)):
        raise SpecialFunctionError(f"ln_gamma has a pole at {flat[np.isinf(res.real)][0]}")
    if arr.ndim == 0:
        return complex(res[0])
    return res.reshape(arr.shape)


# ---------------------------------------------------------------------------
# error function
# ---------------------------------------------------------------------------

_ERF_SERIES_MAX = 2.5
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _erf_series(x: float) -> float:
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum 2^n x^(2n+1) / (1*3*...*(2n+1)); all terms positive
    x2 = x * x
    term = x
    total = x
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return _TWO_OVER_SQRT_PI * math.exp(-x2) * total


def _erfc_cf(x: float) -> float:
    # Lentz evaluation of erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    for k in range(1, 500):
        a = 0.5 * k
        d = x + a * d
        d = tiny if d == 0.0 else d
        c = x + a / c
        c = tiny if c == 0.0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / (math.sqrt(math.pi) * f)


def erf(x: float) -> float:
    """Error function.

    Uses a positive-term power series for ``|x| < 2.5`` and a continued
    fraction for the complement above that.
    """
    x = float(x)
    if math.isnan(x):
        return math.nan
    ax = abs(x)
    if ax < _ERF_SERIES_MAX:
        val = _erf_series(ax)
    elif ax > 6.0:
        val = 1.0
    else:
        val = 1.0 - _erfc_cf(ax)
    return math.copysign(val, x)


def erfc(x: float) -> float:
    """Complementary error function, accurate in the right tail."""
    x = float(x)
    if x < _ERF_SERIES_MAX:
        return 1.0 - erf(x)
    if x > 27.0:
        return 0.0
    return _erfc_cf(x)


# ---------------------------------------------------------------------------
# modified Bessel function of the second kind
# ---------------------------------------------------------------------------

# Taylor coefficients of 1/Gamma(z) about 0: c1 z + c2 z^2 + ...
_RGAMMA = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
)
_BESSEL_SERIES_MAX = 2.0


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """Return gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    # 1/Gamma(1+z) = sum_k c_k z^(k-1); split into even and odd powers
    even = 0.0
    odd = 0.0
    for k in range(len(_RGAMMA), 0, -1):
        c = _RGAMMA[k - 1]
        if k % 2 == 0:
            even = even * mu * mu + c
        else:
            odd = odd * mu * mu + c
    gam1 = -even
    gam2 = odd
    return gam1, gam2, gam2 + mu * even, gam2 - mu * even


def _bessel_k_pair(nu: float, x: float) -> tuple[float, float]:
    """K_nu(x) and K_{nu+1}(x) for nu >= 0 by Temme's method."""
    nl = int(nu + 0.5)
    mu = nu - nl
    mu2 = mu * mu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    if x < _BESSEL_SERIES_MAX:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, 500):
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d / i
            p /= i - mu
            q /= i + mu
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if abs(delta) < abs(total) * _EPS:
                break
        kmu = total
        k1 = total1 * xi2
    else:
        # Steed's continued fraction CF2
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - mu2
        q = c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, 2000):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < _EPS:
                break
        h = a1 * h
        kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
        k1 = kmu * (mu + x + 0.5 - h) * xi
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * xi2 * k1 + kmu
    return kmu, k1


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind ``K_nu(x)`` for real order.

    Temme's series is used for ``x < 2`` and Steed's continued fraction
    otherwise; integer steps in the order are taken by forward recurrence.
    Underflows to 0.0 for very large ``x``.
    """
    nu = abs(float(nu))
    x = float(x)
    if not x > 0.0:
        raise SpecialFunctionError(f"bessel_k needs x > 0, got {x}")
    if x > 745.0 + nu:
        # exp(-x) underflows before the order matters
        return 0.0
    return _bessel_k_pair(nu, x)[0]


# ---------------------------------------------------------------------------
# Meijer G
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeijerGSpec:
    """Index structure and parameters of ``G^{m,n}_{p,q}(z | a; b)``."""

    m: int
    n: int
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if not 0 <= self.m <= self.q:
            raise SpecialFunctionError(f"need 0 <= m <= q, got m={self.m}, q={self.q}")
        if not 0 <= self.n <= self.p:
            raise SpecialFunctionError(f"need 0 <= n <= p, got n={self.n}, p={self.p}")

    @property
    def p(self) -> int:
        return len(self.a)

    @property
    def q(self) -> int:
        return len(self.b)

    @property
    def delta(self) -> float:
        """Exponential decay rate of the integrand along the contour, in units of pi."""
        return self.m + self.n - 0.5 * (self.p + self.q)


class _Integrand:
    def __init__(self, spec: MeijerGSpec, log_z: float):
        a = np.asarray(spec.a)
        b = np.asarray(spec.b)
        m, n = spec.m, spec.n
        # log I(s) = sum num lnG(sign*s + off) - sum den lnG(sign*s + off) + s log z
        self.num_off = np.concatenate([b[:m], 1.0 - a[:n]])
        self.num_sign = np.concatenate([-np.ones(m), np.ones(n)])
        self.den_off = np.concatenate([1.0 - b[m:], a[n:]])
        self.den_sign = np.concatenate([np.ones(spec.q - m), -np.ones(spec.p - n)])
        self.log_z = log_z
        # G(u + k s) / G(u + 1 + k s) = 1 / (u + k s).  Collapsing such pairs
        # avoids cancelling two huge log-gammas when u is large.
        num_keep = list(range(self.num_off.size))
        den_keep = list(range(self.den_off.size))
        rat_off, rat_sign = [], []
        for i in range(self.num_off.size):
            for j in den_keep:
                if (self.den_sign[j] == self.num_sign[i]
                        and self.den_off[j] - self.num_off[i] == 1.0):
                    rat_off.append(self.num_off[i])
                    rat_sign.append(self.num_sign[i])
                    num_keep.remove(i)
                    den_keep.remove(j)
                    break
        self.num_off, self.num_sign = self.num_off[num_keep], self.num_sign[num_keep]
        self.den_off, self.den_sign = self.den_off[den_keep], self.den_sign[den_keep]
        self.rat_off = np.array(rat_off, dtype=float)
        self.rat_sign = np.array(rat_sign, dtype=float)

    def log_value(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        out = s * self.log_z
        if self.num_off.size:
            args = self.num_off[:, None] + self.num_sign[:, None] * s[None, :]
            out = out + _ln_gamma_array(args).sum(axis=0)
        if self.den_off.size:
            args = self.den_off[:, None] + self.den_sign[:, None] * s[None, :]
            lg = _ln_gamma_array(args)
            # a pole in a denominator gamma makes the integrand vanish
            lg[np.isinf(lg.real)] = np.inf
            out = out - lg.sum(axis=0)
        if self.rat_off.size:
            args = self.rat_off[:, None] + self.rat_sign[:, None] * s[None, :]
            with np.errstate(divide="ignore"):
                out = out - np.log(args).sum(axis=0)
        return out

    def log_abs_real(self, c: float) -> float:
        """log|I(c)| on the real axis; a vanishing denominator counts as +inf."""
        total = c * self.log_z
        try:
            for off, sign in zip(self.num_off, self.num_sign):
                total += math.lgamma(off + sign * c)
            for off, sign in zip(self.den_off, self.den_sign):
                total -= math.lgamma(off + sign * c)
            for off, sign in zip(self.rat_off, self.rat_sign):
                total -= math.log(abs(off + sign * c))
        except ValueError:
            return math.inf
        return total


def _contour_abscissa(spec: MeijerGSpec, integrand: _Integrand) -> float:
    m, n = spec.m, spec.n
    hi = min(spec.b[:m]) if m else math.inf
    lo = max(v - 1.0 for v in spec.a[:n]) if n else -math.inf
    for bj in spec.b[:m]:
        for ak in spec.a[:n]:
            shift = ak - bj
            if shift >= 1.0 and shift == math.floor(shift):
                raise MeijerGContourError(
                    f"pole collision: a={ak} and b={bj} differ by a positive integer")
    if not lo < hi:
        raise MeijerGContourError(
            f"pole families interleave: left poles reach {lo}, right poles start at {hi}")
    if math.isfinite(lo) and math.isfinite(hi):
        margin = 0.02 * min(hi - lo, 1.0)
        lower, upper = lo + margin, hi - margin
    elif math.isfinite(hi):
        # saddle sits roughly where (b - c)^(m - p) ~ z; p counts the denominator Gammas
        upper = hi - 0.02
        lower = upper - 20.0 - 4.0 * math.exp(min(max(integrand.log_z, 0.0) / (m - spec.p), 300.0))
    elif math.isfinite(lo):
        lower = lo + 0.02
        upper = lower + 20.0 + 4.0 * math.exp(min(max(-integrand.log_z, 0.0) / (n - spec.q), 300.0))
    else:
        return 0.0
    # minimum along the real axis is the saddle: the integrand is least oscillatory there
    res = minimize_scalar(integrand.log_abs_real, bounds=(lower, upper),
                          method="bounded", options={"xatol": 1e-6 * (upper - lower)})
    return float(res.x)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _panel_rule(a: np.ndarray, b: np.ndarray, f):
    """Gauss-Legendre estimate of each panel's integral of Re f and |f|."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    vals = f(t).reshape(a.size, _GL_NODES.size)
    q = (vals.real * _GL_WEIGHTS).sum(axis=1) * half
    qabs = (np.abs(vals) * _GL_WEIGHTS).sum(axis=1) * half
    return q, qabs


def _truncation_point(logmag, log_peak_guess: float, threshold: float) -> tuple[float, float]:
    """March along t until the integrand has decayed for good."""
    step = 0.5
    t0 = 0.0
    peak = log_peak_guess
    while True:
        t = t0 + step * np.arange(1, 257)
        lm = logmag(t)
        peak = max(peak, float(np.max(lm)))
        below = (lm < peak + threshold) & (np.diff(lm, prepend=lm[0] + 1.0) < 0.0)
        if np.any(below):
            return float(t[np.argmax(below)]), peak
        t0 = float(t[-1])
        if t0 > 1e6:
            raise ToleranceNotMet("Mellin-Barnes integrand does not decay", math.nan, math.inf)


def _scaled(x: float, log_scale: float) -> float:
    if x == 0.0:
        return 0.0
    return math.copysign(math.exp(math.log(abs(x)) + log_scale), x)


def meijer_g(spec: MeijerGSpec, z: float, *, log_prefactor: float = 0.0,
             rtol: float = 1e-8, max_panels: int = 20000, full_output: bool = False):
    """Evaluate ``exp(log_prefactor) * G^{m,n}_{p,q}(z | a; b)`` for real ``z > 0``.

    The prefactor lets callers fold large normalising constants (products
    of Gamma functions) into the log-space integrand instead of
    multiplying an overflowed value afterwards.

    Parameters
    ----------
    spec : MeijerGSpec
        Parameters; the integrand must decay along the contour, which
        requires ``m + n > (p + q) / 2``.
    z : float
        Positive argument.
    log_prefactor : float
        Natural log of a constant multiplying the result.
    rtol : float
        Relative accuracy target of the quadrature.
    max_panels : int
        Hard budget on the number of quadrature panels.
    full_output : bool
        Also return the absolute error estimate.

    Returns
    -------
    float or (float, float)
        The value, and its error estimate if ``full_output``.

    Raises
    ------
    MeijerGContourError
        If the left and right pole families cannot be separated by a line.
    ToleranceNotMet
        If the panel budget is exhausted; carries the best estimate.
    """
    z = float(z)
    if not (z > 0.0 and math.isfinite(z)):
        raise SpecialFunctionError(f"meijer_g needs finite z > 0, got {z}")
    if spec.delta <= 0.0:
        raise SpecialFunctionError(
            f"Mellin-Barnes integral does not converge on a line for (m,n,p,q)="
            f"({spec.m},{spec.n},{spec.p},{spec.q})")
    integrand = _Integrand(spec, math.log(z))
    c = _contour_abscissa(spec, integrand)

    def log_f(t):
        return integrand.log_value(c + 1j * np.asarray(t, dtype=float))

    log_peak = float(log_f(np.array([0.0]))[0].real)
    t_max, log_peak = _truncation_point(lambda t: log_f(t).real, log_peak, math.log(1e-16))
    # scale so the peak is O(1); restore at the end in log space
    shift = log_peak

    def f(t):
        return np.exp(log_f(t) - shift)

    # panels no wider than one oscillation of z^{it}
    width0 = min(1.0, 2.0 * math.pi / (abs(math.log(z)) + 1.0), t_max)
    n0 = max(4, int(math.ceil(t_max / width0)))
    edges = np.linspace(0.0, t_max, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    coarse, coarse_abs = _panel_rule(lo, hi, f)

    done_q = 0.0
    done_err = 0.0
    done_abs = 0.0
    n_panels = lo.size
    while True:
        mid = 0.5 * (lo + hi)
        left, left_abs = _panel_rule(lo, mid, f)
        right, right_abs = _panel_rule(mid, hi, f)
        fine = left + right
        fine_abs = left_abs + right_abs
        err = np.abs(fine - coarse)
        total_q = done_q + fine.sum()
        total_abs = done_abs + fine_abs.sum()
        total_err = done_err + err.sum()
        floor = 64.0 * _EPS * total_abs
        target = max(rtol * abs(total_q), floor)
        if total_err <= target:
            break
        # accept panels that are already well inside their share of the budget
        share = target * (hi - lo) / t_max
        keep = err <= 0.5 * share
        done_q += fine[keep].sum()
        done_abs += fine_abs[keep].sum()
        done_err += err[keep].sum()
        split = ~keep
        n_panels += 2 * int(split.sum())
        if n_panels > max_panels or done_err > target:
            # best estimate with the work done so far
            log_scale = shift + log_prefactor - _LOG_PI
            raise ToleranceNotMet(
                f"Meijer G quadrature did not reach rtol={rtol} within {max_panels} panels",
                estimate=_scaled(total_q, log_scale), error=_scaled(total_err, log_scale))
        lo = np.concatenate([lo[split], mid[split]])
        hi = np.concatenate([mid[split], hi[split]])
        coarse = np.concatenate([left[split], right[split]])

    # tail beyond t_max is below 1e-16 of the peak and decays exponentially
    tail = math.exp(float(log_f(np.array([t_max]))[0].real) - shift) / (math.pi * spec.delta)
    log_scale = shift + log_prefactor - _LOG_PI
    value = _scaled(total_q, log_scale)
    error = _scaled(total_err + floor + tail, log_scale)
    if full_output:
        return value, error
    return value
