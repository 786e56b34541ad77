"""Catalog of subordinator families.

Each family is described by its Laplace exponent phi(lam), the Laplace
transform K(lam) of the tail kernel, the tail kernel k(t) itself (the tail
mass of the Levy measure above t), the Levy density where closed-form, and
the running normalization N(T) = int_0^T k(s) ds.

Families: stable, gamma, truncated_stable, two_index_stable,
tempered_stable, distributed_order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammainc as reg_lower_gamma  # regularized P(s, x)
from scipy.special import exp1

from .errors import DomainError, ParameterError

FAMILIES = (
    "stable",
    "gamma",
    "truncated_stable",
    "two_index_stable",
    "tempered_stable",
    "distributed_order",
)

# shared 64-point Gauss-Legendre rule on [0, 1] for the distributed-order
# mixtures and the singular kernel quadratures
_GL_X, _GL_W = leggauss(64)
_GL01_X = 0.5 * (_GL_X + 1.0)
_GL01_W = 0.5 * _GL_W


def _require_in(name: str, value: float, lo: float, hi: float):
    if not (lo < value < hi):
        raise ParameterError(f"{name} must lie in ({lo}, {hi}), got {value}")


def _require_pos(name: str, value: float):
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")


class SubordinatorModel:
    """A subordinator family with fixed parameters.

    Parameters by family:
      stable:            alpha in (0, 1)
      gamma:             a > 0, b > 0
      truncated_stable:  alpha in (0, 1), delta > 0
      two_index_stable:  alpha, beta in (0, 1)
      tempered_stable:   alpha in (0, 1), gamma > 0
      distributed_order: weight on [0, 1] (callable, default uniform)
    """

    def __init__(self, family: str, **params):
        family = family.lower()
        if family not in FAMILIES:
            raise ParameterError(f"unknown family {family!r}; choose from {FAMILIES}")
        self.family = family
        self.weight = None
        if family == "stable":
            self.alpha = float(params.pop("alpha"))
            _require_in("alpha", self.alpha, 0.0, 1.0)
        elif family == "gamma":
            self.a = float(params.pop("a"))
            self.b = float(params.pop("b"))
            _require_pos("a", self.a)
            _require_pos("b", self.b)
        elif family == "truncated_stable":
            self.alpha = float(params.pop("alpha"))
            self.delta = float(params.pop("delta"))
            _require_in("alpha", self.alpha, 0.0, 1.0)
            _require_pos("delta", self.delta)
        elif family == "two_index_stable":
            self.alpha = float(params.pop("alpha"))
            self.beta = float(params.pop("beta"))
            _require_in("alpha", self.alpha, 0.0, 1.0)
            _require_in("beta", self.beta, 0.0, 1.0)
        elif family == "tempered_stable":
            self.alpha = float(params.pop("alpha"))
            self.gamma = float(params.pop("gamma"))
            _require_in("alpha", self.alpha, 0.0, 1.0)
            _require_pos("gamma", self.gamma)
        elif family == "distributed_order":
            self.weight = params.pop("weight", None)
            if self.weight is not None and not callable(self.weight):
                raise ParameterError("weight must be a callable density on [0, 1]")
        if params:
            raise ParameterError(
                f"unexpected parameters for {family}: {sorted(params)}"
            )

    # -- metadata ---------------------------------------------------------

    def analytic_parts(self) -> dict:
        """Which evaluations use closed forms (True) vs quadrature (False)."""
        closed = {"phi": True, "laplace_K": True, "kernel_k": True,
                  "normalization_N": True, "levy_density": True}
        if self.family == "distributed_order":
            uniform = self.weight is None
            # K and phi have a closed form only for the uniform weight;
            # k, N and the Levy density always go through quadrature
            closed.update({"phi": uniform, "laplace_K": uniform,
                           "kernel_k": False, "normalization_N": False,
                           "levy_density": False})
        return closed

    def to_spec(self) -> dict:
        d = {"family": self.family}
        for name in ("alpha", "beta", "a", "b", "delta", "gamma"):
            if hasattr(self, name):
                d[name] = getattr(self, name)
        if self.family == "distributed_order" and self.weight is not None:
            d["weight"] = "custom"
        return d

    @classmethod
    def from_spec(cls, spec: dict) -> "SubordinatorModel":
        spec = dict(spec)
        family = spec.pop("family", None)
        if family is None:
            raise ParameterError("model spec needs a 'family' key")
        spec.pop("weight", None)
        return cls(family, **spec)

    def __repr__(self):
        kv = ", ".join(f"{k}={v}" for k, v in self.to_spec().items() if k != "family")
        return f"SubordinatorModel({self.family}{', ' + kv if kv else ''})"


# -- helpers ---------------------------------------------------------------


def _as_array(x, name: str, minimum: float, strict: bool):
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        return arr.astype(complex), np.asarray(x).ndim == 0
    arr = arr.astype(float)
    bad = (arr <= minimum) if strict else (arr < minimum)
    if np.any(bad):
        op = ">" if strict else ">="
        raise DomainError(f"{name} must be {op} {minimum}")
    return arr, np.asarray(x).ndim == 0


def _maybe_scalar(arr, scalar: bool):
    return arr.item() if scalar else arr


def _uniform_do_K(lam):
    """K(lam) = (lam - 1)/(lam log lam) for the uniform order mixture,
    continued through the removable singularity at lam = 1."""
    lam = np.asarray(lam)
    out = np.empty(lam.shape, dtype=lam.dtype)
    w = lam - 1.0
    near = np.abs(w) < 1e-5
    safe = np.where(near, 2.0, lam)
    out[...] = (safe - 1.0) / (safe * np.log(safe))
    if np.any(near):
        # (lam-1)/log(lam) = 1/(1 - w/2 + w^2/3 - w^3/4 + ...)
        ww = w[near]
        out[near] = 1.0 / ((1.0 - ww / 2.0 + ww * ww / 3.0 - ww**3 / 4.0)
                           * (1.0 + ww))
    return out


def _do_weight_nodes(model: SubordinatorModel):
    """Quadrature nodes alpha_i and weights w_i*mu(alpha_i) on [0, 1]."""
    nodes = _GL01_X
    w = _GL01_W.copy()
    if model.weight is not None:
        w = w * np.asarray([float(model.weight(float(x))) for x in nodes])
    return nodes, w


def _truncated_K(model: SubordinatorModel, lam):
    """K(lam) for the truncated stable family.

    Real positive lam goes through the incomplete gamma closed form;
    complex lam (Talbot contours) through a panelled Gauss-Legendre
    quadrature of int_0^delta exp(-lam t) k(t) dt with the t = delta
    u^(1/(1-alpha)) substitution that removes the singularity.
    """
    al, dl = model.alpha, model.delta
    g1a = math.gamma(1.0 - al)
    lam = np.asarray(lam)
    if not np.iscomplexobj(lam):
        z = lam * dl
        lower = reg_lower_gamma(1.0 - al, z) * g1a  # unregularized lower gamma
        term1 = lower * lam ** (al - 1.0)
        term2 = dl ** (-al) * (-np.expm1(-z)) / lam
        return (term1 - term2) / g1a
    out = np.empty(lam.shape, dtype=complex)
    flat = lam.ravel()
    res = out.ravel()
    p = 1.0 / (1.0 - al)
    for i, lm in enumerate(flat):
        panels = min(max(4, int(abs(lm) * dl / 10.0) + 1), 4000)
        edges = np.linspace(0.0, 1.0, panels + 1)
        u = edges[:-1, None] + np.diff(edges)[:, None] * _GL01_X[None, :]
        wq = np.diff(edges)[:, None] * _GL01_W[None, :]
        t = dl * u**p
        # int_0^delta e^{-lam t} t^{-al} dt = delta^{1-al} p int_0^1 e^{-lam t(u)} du
        part1 = dl ** (1.0 - al) * p * np.sum(wq * np.exp(-lm * t))
        part2 = dl ** (-al) * (1.0 - np.exp(-lm * dl)) / lm
        res[i] = (part1 - part2) / g1a
    return out


# -- public operations ------------------------------------------------------


def laplace_K(model: SubordinatorModel, lam):
    """K(lam): the Laplace transform of the tail kernel k."""
    arr, scalar = _as_array(lam, "lam", 0.0, strict=True)
    fam = model.family
    if fam == "stable":
        out = arr ** (model.alpha - 1.0)
    elif fam == "gamma":
        out = model.a * np.log1p(arr / model.b) / arr
    elif fam == "two_index_stable":
        out = arr ** (model.alpha - 1.0) + arr ** (model.beta - 1.0)
    elif fam == "tempered_stable":
        out = (arr + model.gamma) ** (model.alpha - 1.0)
    elif fam == "truncated_stable":
        out = _truncated_K(model, arr)
    else:  # distributed_order
        if model.weight is None:
            out = _uniform_do_K(arr)
        else:
            nodes, w = _do_weight_nodes(model)
            out = np.tensordot(
                np.asarray(arr)[..., None] ** (nodes - 1.0), w, axes=([-1], [0])
            )
    return _maybe_scalar(np.asarray(out), scalar)


def phi(model: SubordinatorModel, lam):
    """Laplace exponent phi(lam) = lam * K(lam), with phi(0) = 0."""
    arr, scalar = _as_array(lam, "lam", 0.0, strict=False)
    if np.iscomplexobj(arr):
        return _maybe_scalar(arr * laplace_K(model, arr), scalar)
    out = np.zeros_like(arr)
    pos = arr > 0
    if np.any(pos):
        out[pos] = arr[pos] * np.asarray(laplace_K(model, arr[pos]))
    return _maybe_scalar(out, scalar)


def kernel_k(model: SubordinatorModel, t):
    """Tail kernel k(t): the Levy measure of (t, infinity)."""
    arr, scalar = _as_array(t, "t", 0.0, strict=True)
    fam = model.family
    if fam == "stable":
        out = arr ** (-model.alpha) / math.gamma(1.0 - model.alpha)
    elif fam == "gamma":
        out = model.a * exp1(model.b * arr)
    elif fam == "two_index_stable":
        out = (arr ** (-model.alpha) / math.gamma(1.0 - model.alpha)
               + arr ** (-model.beta) / math.gamma(1.0 - model.beta))
    elif fam == "tempered_stable":
        out = (arr ** (-model.alpha) * np.exp(-model.gamma * arr)
               / math.gamma(1.0 - model.alpha))
    elif fam == "truncated_stable":
        al, dl = model.alpha, model.delta
        out = np.where(
            arr <= dl,
            (np.minimum(arr, dl) ** (-al) - dl ** (-al)) / math.gamma(1.0 - al),
            0.0,
        )
    else:  # distributed_order
        nodes, w = _do_weight_nodes(model)
        rg = 1.0 / np.array([math.gamma(1.0 - a) for a in nodes])
        out = np.tensordot(
            np.asarray(arr)[..., None] ** (-nodes) * rg, w, axes=([-1], [0])
        )
    return _maybe_scalar(np.asarray(out), scalar)


def levy_density(model: SubordinatorModel, t):
    """Density of the Levy measure, -k'(t)."""
    arr, scalar = _as_array(t, "t", 0.0, strict=True)
    fam = model.family
    if fam == "stable":
        al = model.alpha
        out = al * arr ** (-1.0 - al) / math.gamma(1.0 - al)
    elif fam == "gamma":
        out = model.a * np.exp(-model.b * arr) / arr
    elif fam == "two_index_stable":
        al, be = model.alpha, model.beta
        out = (al * arr ** (-1.0 - al) / math.gamma(1.0 - al)
               + be * arr ** (-1.0 - be) / math.gamma(1.0 - be))
    elif fam == "tempered_stable":
        al, ga = model.alpha, model.gamma
        out = (np.exp(-ga * arr) * arr ** (-1.0 - al) * (al + ga * arr)
               / math.gamma(1.0 - al))
    elif fam == "truncated_stable":
        al, dl = model.alpha, model.delta
        out = np.where(
            arr <= dl, al * arr ** (-1.0 - al) / math.gamma(1.0 - al), 0.0
        )
    else:  # distributed_order
        nodes, w = _do_weight_nodes(model)
        coef = nodes / np.array([math.gamma(1.0 - a) for a in nodes])
        out = np.tensordot(
            np.asarray(arr)[..., None] ** (-1.0 - nodes) * coef, w, axes=([-1], [0])
        )
    return _maybe_scalar(np.asarray(out), scalar)


def normalization_N(model: SubordinatorModel, T):
    """N(T) = int_0^T k(s) ds, the Green-measure normalization."""
    arr, scalar = _as_array(T, "T", 0.0, strict=False)
    fam = model.family
    if fam == "stable":
        al = model.alpha
        out = arr ** (1.0 - al) / math.gamma(2.0 - al)
    elif fam == "gamma":
        a, b = model.a, model.b
        z = b * arr
        out = np.zeros_like(arr)
        pos = arr > 0
        # int_0^T Gamma(0, b s) ds = T Gamma(0, bT) + (1 - e^{-bT})/b
        out[pos] = a * (arr[pos] * exp1(z[pos]) + (-np.expm1(-z[pos])) / b)
    elif fam == "two_index_stable":
        al, be = model.alpha, model.beta
        out = (arr ** (1.0 - al) / math.gamma(2.0 - al)
               + arr ** (1.0 - be) / math.gamma(2.0 - be))
    elif fam == "tempered_stable":
        al, ga = model.alpha, model.gamma
        # int_0^T s^{-al} e^{-ga s} ds / Gamma(1-al) = ga^{al-1} P(1-al, ga T)
        out = ga ** (al - 1.0) * reg_lower_gamma(1.0 - al, ga * arr)
    elif fam == "truncated_stable":
        al, dl = model.alpha, model.delta
        g1a = math.gamma(1.0 - al)
        s = np.minimum(arr, dl)
        out = (s ** (1.0 - al) / (1.0 - al) - dl ** (-al) * s) / g1a
    else:  # distributed_order
        nodes, w = _do_weight_nodes(model)
        rg2 = 1.0 / np.array([math.gamma(2.0 - a) for a in nodes])
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = np.tensordot(
            np.asarray(arr[pos])[..., None] ** (1.0 - nodes) * rg2,
            w, axes=([-1], [0]),
        )
    return _maybe_scalar(np.asarray(out), scalar)


# -- multiprecision variants (for the high-precision inversion paths) -------


def laplace_K_mp(model: SubordinatorModel, lam):
    """K(lam) in mpmath arithmetic; lam may be mpf or mpc."""
    fam = model.family
    if fam == "stable":
        return lam ** (model.alpha - 1)
    if fam == "gamma":
        return model.a * mpmath.log(1 + lam / model.b) / lam
    if fam == "two_index_stable":
        return lam ** (model.alpha - 1) + lam ** (model.beta - 1)
    if fam == "tempered_stable":
        return (lam + model.gamma) ** (model.alpha - 1)
    if fam == "truncated_stable":
        al, dl = model.alpha, model.delta
        z = lam * dl
        lower = mpmath.gammainc(1 - al, 0, z)
        return (lower * lam ** (al - 1)
                - dl ** (-al) * (1 - mpmath.e**(-z)) / lam) / mpmath.gamma(1 - al)
    # distributed_order
    if model.weight is not None:
        raise ParameterError(
            "multiprecision evaluation supports only the uniform order weight"
        )
    if abs(lam - 1) < mpmath.mpf(10) ** (-mpmath.mp.dps // 2):
        w = lam - 1
        return 1 / ((1 - w / 2 + w * w / 3 - w**3 / 4) * (1 + w))
    return (lam - 1) / (lam * mpmath.log(lam))


def phi_mp(model: SubordinatorModel, lam):
    """phi(lam) = lam * K(lam) in mpmath arithmetic."""
    if lam == 0:
        return mpmath.mpf(0)
    return lam * laplace_K_mp(model, lam)


# -- admissibility -----------------------------------------------------------


@dataclass(frozen=True)
class ProbeConfig:
    """Grids for the admissibility probes."""

    h_low: float = 1e-8
    h_high: float = 1e8
    h_factor: float = 1e3
    a1_lambdas: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    a1_s0: float = 1.0
    a2_times: tuple = (1e2, 1e3, 1e4, 1e5, 1e6)
    a2_epsilons: tuple = (0.1, 0.01)
    a2_bound: float = 0.1

    def __post_init__(self):
        if not (self.h_low <= 1e-8 and self.h_high >= 1e8):
            raise ParameterError("probe grid must span at least [1e-8, 1e8]")


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the numerical admissibility probes.

    h_ok: the four scaling checks on K and phi at the ends of the lambda
    grid. a1_estimate: lower envelope of N(s0/lam)/K(lam) along a
    decreasing lambda sequence. a2_max_deviation: worst |N(t(1+eps))/N(t)
    - 1| over the probe pairs.
    """

    h_ok: tuple
    a1_estimate: float
    a2_max_deviation: float
    verdict: bool
    details: dict


def check_admissibility(
    model: SubordinatorModel, probe: ProbeConfig | None = None
) -> AdmissibilityReport:
    probe = probe or ProbeConfig()
    K1 = float(laplace_K(model, 1.0))
    K_low = float(laplace_K(model, probe.h_low))
    K_high = float(laplace_K(model, probe.h_high))
    p1 = float(phi(model, 1.0))
    p_low = float(phi(model, probe.h_low))
    p_high = float(phi(model, probe.h_high))
    h_ok = (
        K_low > probe.h_factor * K1,
        K_high < K1 / probe.h_factor,
        p_low < p1 / probe.h_factor,
        p_high > probe.h_factor * p1,
    )
    # (A1): liminf over lam -> 0 of N(s0/lam)/K(lam); take the worst of the
    # deepest half of the lambda sequence as the liminf estimate
    seq = [
        float(normalization_N(model, probe.a1_s0 / lm))
        / float(laplace_K(model, lm))
        for lm in probe.a1_lambdas
    ]
    a1_estimate = min(seq[len(seq) // 2:])
    # (A2): N(t) must vary slowly under small relative time changes
    devs = []
    for t in probe.a2_times:
        base = float(normalization_N(model, t))
        for eps in probe.a2_epsilons:
            devs.append(abs(float(normalization_N(model, t * (1.0 + eps))) / base - 1.0))
    a2_max_deviation = max(devs)
    verdict = all(h_ok) and a1_estimate > 0 and a2_max_deviation < probe.a2_bound
    return AdmissibilityReport(
        h_ok=h_ok,
        a1_estimate=a1_estimate,
        a2_max_deviation=a2_max_deviation,
        verdict=verdict,
        details={
            "K(1)": K1, "K(low)": K_low, "K(high)": K_high,
            "phi(1)": p1, "phi(low)": p_low, "phi(high)": p_high,
            "a1_sequence": seq, "a2_deviations": devs,
            "a2_bound": probe.a2_bound,
        },
    )
