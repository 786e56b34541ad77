"""Special functions used as closed-form references for the stable family.

Everything here is evaluated from first principles (series, continued
fractions, a completely monotone integral representation) so that the rest
of the library can be checked against an implementation that does not share
code with the numerical Laplace-inversion machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import rgamma as _rgamma

from .errors import DomainError, NumericError, ParameterError

_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class SeriesAccuracy:
    """Accuracy knobs for the series evaluators.

    ``switch_radius`` is the largest |argument| handled by the plain power
    series before the evaluator hands off to the integral representation or
    the asymptotic expansion.
    """

    abs_tol: float = 1e-14
    max_terms: int = 2000
    switch_radius: float = 5.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ParameterError("abs_tol must be positive")
        if self.max_terms < 50:
            raise ParameterError("max_terms must be at least 50")


DEFAULT_ACCURACY = SeriesAccuracy()

# Cancellation budget for alternating series in double precision: the largest
# tolerated ratio (max term) / (result scale).
_CANCEL_BUDGET_LOG = math.log(1e5)


def _ml_series_peak_log(alpha: float, y: float) -> float:
    """Log of the largest term of sum_n y^n / Gamma(alpha*n+1)."""
    if y <= 1.0:
        return 0.0
    # Peak where digamma(alpha*n+1) ~ log(y)/alpha.
    z = math.exp(math.log(y) / alpha)
    n_star = max((z - 1.0) / alpha, 1.0)
    return n_star * math.log(y) - math.lgamma(alpha * n_star + 1.0)


def _ml_series(alpha: float, y: np.ndarray, acc: SeriesAccuracy) -> np.ndarray:
    """Power series for E_alpha(-y) with compensated (Kahan) summation."""
    total = np.ones_like(y)
    comp = np.zeros_like(y)
    term = np.ones_like(y)
    n_arr = np.arange(1, acc.max_terms + 1)
    # Ratio of Gamma(alpha(n-1)+1)/Gamma(alpha n + 1), formed in logs.
    lg = np.concatenate(([0.0], np.vectorize(math.lgamma)(alpha * n_arr + 1.0)))
    ratios = np.exp(lg[:-1] - lg[1:])
    for n in range(1, acc.max_terms + 1):
        term = term * (-y) * ratios[n - 1]
        yc = term - comp
        t = total + yc
        comp = (t - total) - yc
        total = t
        if np.all(np.abs(term) < acc.abs_tol):
            break
    return total


def _ml_spectral(alpha: float, y: np.ndarray) -> np.ndarray:
    """Completely monotone representation of E_alpha(-y), 0 < alpha < 1.

    E_alpha(-t^alpha) = int_0^inf exp(-r*t) * w_alpha(r) dr with the weight
    w_alpha(r) = (1/pi) sin(pi*alpha) r^(alpha-1)
                 / (r^(2 alpha) + 2 r^alpha cos(pi alpha) + 1),
    so here t = y^(1/alpha). Evaluated by trapezoid on a log grid (the
    transformed integrand is smooth and decays at both ends).
    """
    y = np.asarray(y, dtype=float) ** (1.0 / alpha)
    y_min = max(float(np.min(y)), 1e-12)
    s_hi = math.log(46.0 / y_min)
    # Small-r mass below r_lo scales like r_lo^alpha.
    s_lo = math.log(1e-14) / alpha
    # the weight sharpens into a near-delta at r = 1 as alpha approaches 1
    ds_max = min(0.045, max((1.0 - alpha) / 4.0, 1e-4))
    n_nodes = max(600, int((s_hi - s_lo) / ds_max) + 1)
    s = np.linspace(s_lo, s_hi, n_nodes)
    r = np.exp(s)
    ra = r**alpha
    c, sn = math.cos(math.pi * alpha), math.sin(math.pi * alpha)
    weight = (sn / math.pi) * ra / (ra * ra + 2.0 * ra * c + 1.0)  # r * w(r)
    ds = s[1] - s[0]
    out = np.empty_like(y)
    # Chunk over arguments to bound the temporary (nodes x chunk) matrix.
    flat = y.ravel()
    res = np.empty_like(flat)
    chunk = max(1, int(4e6 // n_nodes))
    for i in range(0, flat.size, chunk):
        block = flat[i : i + chunk]
        kern = np.exp(-r[:, None] * block[None, :])
        res[i : i + chunk] = ds * (weight[:, None] * kern).sum(axis=0)
    out[...] = res.reshape(y.shape)
    return out


def _ml_asymptotic(alpha: float, y: np.ndarray, order: int = 8) -> np.ndarray:
    """Large-argument expansion E_alpha(-y) ~ sum_m (-1)^(m+1) y^-m / Gamma(1-m*alpha)."""
    out = np.zeros_like(y)
    inv = 1.0 / y
    power = inv.copy()
    for m in range(1, order + 1):
        out += (-1.0) ** (m + 1) * power * float(_rgamma(1.0 - m * alpha))
        power = power * inv
    return out


def mittag_leffler(alpha: float, x, acc: SeriesAccuracy | None = None):
    """One-parameter Mittag-Leffler function E_alpha(x) for x <= 0, 0 < alpha <= 1.

    Accepts scalars or arrays. Uses the power series near zero, the
    completely monotone integral representation in the intermediate range,
    and the algebraic tail expansion for large |x|. The result lies in
    (0, 1] and is strictly decreasing in |x|.
    """
    acc = acc or DEFAULT_ACCURACY
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr > 0):
        raise DomainError("mittag_leffler supports nonpositive arguments only")
    if alpha == 1.0:
        out = np.exp(arr)
        return float(out[0]) if scalar else out

    y = -arr
    out = np.empty_like(y)
    # Series radius limited by alternating-series cancellation.
    r_series = acc.switch_radius
    while r_series > 1e-3 and _ml_series_peak_log(alpha, r_series) > _CANCEL_BUDGET_LOG:
        r_series *= 0.5
    # the algebraic tail expansion sets in later as alpha approaches 1
    # (its coefficients 1/Gamma(1 - m*alpha) blow up near the poles)
    y_asym = max(30.0, 30.0 / (1.0 - alpha))

    m_series = y <= r_series
    m_asym = y >= y_asym
    m_mid = ~(m_series | m_asym)
    if np.any(m_series):
        out[m_series] = _ml_series(alpha, y[m_series], acc)
    if np.any(m_mid):
        out[m_mid] = _ml_spectral(alpha, y[m_mid])
    if np.any(m_asym):
        out[m_asym] = _ml_asymptotic(alpha, y[m_asym])
    np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if scalar else out


def _mwright_series_float(alpha: float, z: float, acc: SeriesAccuracy):
    """Float series for M_alpha(z); returns (value, max_abs_term)."""
    total = 0.0
    comp = 0.0
    term_base = 1.0  # (-z)^n / n!
    max_abs = 0.0
    prev_abs = math.inf
    for n in range(acc.max_terms):
        coeff = float(_rgamma(-alpha * n + 1.0 - alpha))
        term = term_base * coeff
        max_abs = max(max_abs, abs(term))
        yc = term - comp
        t = total + yc
        comp = (t - total) - yc
        total = t
        term_base = term_base * (-z) / (n + 1)
        # alternating terms can be exactly zero (poles of gamma), so insist
        # on two consecutive small terms before declaring convergence
        if (abs(term_base) < acc.abs_tol and abs(term) < acc.abs_tol
                and prev_abs < acc.abs_tol and n > 10):
            return total, max_abs
        prev_abs = abs(term)
    if abs(term_base) > 1.0:
        raise NumericError(
            "m_wright series failed to decay",
            {"alpha": alpha, "z": z, "last_term": term_base},
        )
    return total, max_abs


def _mwright_peak_log10(alpha: float, z: float) -> float:
    """log10 of the largest series term of M_alpha(z), scanned in logs."""
    from scipy.special import gammaln

    n_hi = 256
    while True:
        n = np.arange(n_hi)
        x = 1.0 - alpha * (n + 1)  # gamma argument
        # ln|Gamma(x)| via reflection for x < 0
        neg = x < 0.5
        lg = np.empty_like(x)
        lg[~neg] = gammaln(x[~neg])
        xs = x[neg]
        lg[neg] = math.log(math.pi) - np.log(np.abs(np.sin(math.pi * xs)) + 1e-320) \
            - gammaln(1.0 - xs)
        with np.errstate(divide="ignore"):
            log_term = n * math.log(max(z, 1e-300)) - gammaln(n + 1.0) - lg
        peak = float(np.max(log_term))
        if log_term[-1] < peak - 80.0 or n_hi > 300000:
            return peak / math.log(10.0)
        n_hi *= 2


def _mwright_value_log10_estimate(alpha: float, z: float) -> float:
    """Saddle-point order-of-magnitude estimate of log10 M_alpha(z)."""
    if z <= 1.0:
        return 0.0
    expo = (1.0 - alpha) * alpha ** (alpha / (1.0 - alpha)) * z ** (1.0 / (1.0 - alpha))
    return -expo / math.log(10.0)


# reciprocal-gamma coefficients of the M-Wright series, keyed by
# (alpha, dps bucket); evaluating them dominates the multiprecision cost
# and they are shared across all arguments z
_MWRIGHT_COEFF_CACHE: dict = {}


def _mwright_mp_coeff(alpha: float, dps: int, n: int):
    key = (alpha, dps)
    coeffs = _MWRIGHT_COEFF_CACHE.setdefault(key, [])
    if n >= len(coeffs):
        with mpmath.workdps(dps):
            # the gamma argument must be formed at working precision: a
            # double-rounded argument near the poles poisons the huge
            # cancelling terms
            am = mpmath.mpf(alpha)
            for m in range(len(coeffs), n + 1):
                coeffs.append(mpmath.rgamma(1 - am * (m + 1)))
    return coeffs[n]


def _mwright_series_mp(alpha: float, z: float, dps: int) -> float:
    """Multiprecision series for M_alpha(z), retrying until the working
    precision exceeds the observed cancellation."""
    dps = 50 * (dps // 50 + 1)  # bucket so coefficient caching pays off
    while True:
        with mpmath.workdps(dps):
            total = mpmath.mpf(0)
            term_base = mpmath.mpf(1)
            zm = mpmath.mpf(z)
            max_term = mpmath.mpf(0)
            prev = mpmath.inf
            cutoff = mpmath.mpf(10) ** (-dps - 5)
            for n in range(200000):
                term = term_base * _mwright_mp_coeff(alpha, dps, n)
                total += term
                max_term = max(max_term, abs(term))
                term_base = term_base * (-zm) / (n + 1)
                if (n > 10 and abs(term) < max_term * cutoff
                        and prev < max_term * cutoff
                        and abs(term_base) < max_term * cutoff):
                    break
                prev = abs(term)
            lost = float(mpmath.log10(max_term / abs(total))) if total != 0 else dps
        if lost + 15 <= dps:
            return float(total)
        if dps > 100000:
            raise NumericError("m_wright cancellation beyond precision budget",
                               {"alpha": alpha, "z": z, "lost_digits": lost})
        dps = int(max(2 * dps, lost + 25))


def m_wright(alpha: float, z, acc: SeriesAccuracy | None = None):
    """M-Wright density profile M_alpha(z), z >= 0, 0 < alpha < 1.

    This is the self-similar profile of the inverse stable subordinator's
    marginal density. Nonnegative with unit integral over [0, inf).
    """
    acc = acc or DEFAULT_ACCURACY
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0):
        raise DomainError("m_wright is defined for nonnegative arguments")
    out = np.empty_like(arr)
    for i, zi in enumerate(arr):
        val, max_abs = _mwright_series_float(alpha, float(zi), acc)
        # Escalate to multiprecision when cancellation ate the result.
        if (not math.isfinite(val) or not math.isfinite(max_abs)
                or max_abs > 1e6 * max(abs(val), 1e-300)):
            zf = float(zi)
            est = _mwright_value_log10_estimate(alpha, zf)
            if est < -330.0:
                # below double-precision range; the saddle-point estimate
                # has huge margin against the cutoff
                val = 0.0
            else:
                dps0 = int(_mwright_peak_log10(alpha, zf) - min(est, 0.0)) + 30
                val = _mwright_series_mp(alpha, zf, max(dps0, 30))
        out[i] = 0.0 if (val < 0 and val > -10 * acc.abs_tol) else val
    return float(out[0]) if scalar else out


def _upper_gamma_cf(nu: float, z: float, max_iter: int = 500, tol: float = 1e-15) -> float:
    """Continued fraction for Gamma(nu, z), reliable for z > nu + 1 (Lentz)."""
    tiny = 1e-300
    b = z + 1.0 - nu
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - nu)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    else:
        raise NumericError("incomplete gamma continued fraction did not converge",
                           {"nu": nu, "z": z})
    return math.exp(-z + nu * math.log(z)) * h


def _lower_gamma_series(nu: float, z: float, max_iter: int = 500, tol: float = 1e-16) -> float:
    """Series for the lower incomplete gamma, nu > 0, z <= nu + 1."""
    term = 1.0 / nu
    total = term
    for n in range(1, max_iter + 1):
        term *= z / (nu + n)
        total += term
        if abs(term) < tol * abs(total):
            break
    return total * math.exp(-z + nu * math.log(z))


def _exp1_series(z: float) -> float:
    """E_1(z) by its logarithmic series (small z)."""
    total = -_EULER_GAMMA - math.log(z)
    term = 1.0
    for n in range(1, 200):
        term *= -z / n
        total -= term / n
        if abs(term / n) < 1e-17:
            break
    return total


def upper_incomplete_gamma(nu: float, z: float) -> float:
    """Upper incomplete gamma Gamma(nu, z) = int_z^inf e^(-t) t^(nu-1) dt, z > 0.

    nu may be any real number; nonpositive nu is reached by the downward
    recurrence Gamma(nu, z) = (Gamma(nu+1, z) - z^nu e^(-z)) / nu.
    """
    if not z > 0:
        raise DomainError("upper_incomplete_gamma requires z > 0")
    if z > nu + 1.0:
        return _upper_gamma_cf(nu, z)
    if nu > 0:
        return math.gamma(nu) - _lower_gamma_series(nu, z)
    # nu <= 0 and z <= nu + 1 <= 1: lift nu into (0, 1] (or hit exactly 0).
    k = int(math.ceil(-nu)) if nu < 0 else 0
    base_nu = nu + k
    if base_nu == 0.0:
        value = _exp1_series(z)
    else:
        value = math.gamma(base_nu) - _lower_gamma_series(base_nu, z)
    # Walk back down: Gamma(s-1, z) = (Gamma(s, z) - z^(s-1) e^(-z)) / (s - 1).
    s = base_nu
    for _ in range(k):
        s -= 1.0
        value = (value - math.exp(-z + s * math.log(z))) / s
    return value
