"""Monte Carlo samplers for subordinator paths and their first-passage
inverse.

Every family in the catalog gets an increment sampler; validation goes
through the Laplace functional E[exp(-lam S(t))] = exp(-t Phi(lam)) rather
than raw moments, which may not exist.  Streams are counter-based: the
trajectory with index i always draws from a Philox stream keyed by
(master seed, i), so serial and parallel runs produce identical output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .catalog import SubordinatorModel
from .errors import DomainError, HorizonError, NumericError, ParameterError

# small-jump cutoff for the truncated family, as a fraction of the jump cap
TRUNCATED_SMALL_JUMP_FRACTION = 1e-4

# rejection, restart and block-size knobs
_REJECTION_CAP = 200
_BLOCK = 64
_MAX_STEPS_PER_STAGE = 10_000_000


def stream_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream for trajectory `index` under a master seed."""
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# -- data types ---------------------------------------------------------------


@dataclass
class PathGrid:
    """A subordinator trajectory tabulated on an increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    model: SubordinatorModel
    seed: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ParameterError("times and values must have the same shape")
        if self.times[0] != 0.0 or self.values[0] != 0.0:
            raise ParameterError("paths start at (0, 0)")
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("times must be strictly increasing")
        # monotone paths are a hard invariant, not a statistical one
        assert not np.any(np.diff(self.values) < 0), "path must be nondecreasing"

    def inverse_at(self, levels) -> np.ndarray:
        """First index-time where the path reaches each level (grid inverse)."""
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        idx = np.searchsorted(self.values, levels, side="left")
        if np.any(idx >= len(self.times)):
            raise DomainError("path does not reach the requested level")
        return self.times[idx]


@dataclass
class InverseSample:
    """One realization of the first-passage inverse at a fixed time."""

    t: float
    e_value: float
    bracket: tuple


# -- increment samplers -------------------------------------------------------


def _stable_log_draws(rng, alpha: float, n: int) -> np.ndarray:
    """log of standard positive stable draws, exponent lam**alpha (Kanter)."""
    u = rng.uniform(low=np.finfo(float).tiny, high=1.0, size=n)
    w = rng.exponential(size=n)
    log_a = (
        alpha * np.log(np.sin(alpha * np.pi * u))
        + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * np.pi * u))
        - np.log(np.sin(np.pi * u))
    ) / (1.0 - alpha)
    return (log_a - np.log(w)) * ((1.0 - alpha) / alpha)


def _stable_increments(rng, alpha: float, dt: float, n: int) -> np.ndarray:
    """Increments with Laplace exponent dt * lam**alpha."""
    log_scale = math.log(dt) / alpha
    logs = _stable_log_draws(rng, alpha, n) + log_scale
    # exponentiate in log space; values beyond the double range collapse to
    # 0 or inf, which is harmless for the Laplace functional
    with np.errstate(over="ignore"):
        return np.exp(logs)


def _tempered_classical(rng, alpha: float, gamma: float, dt: float, n: int):
    """Increments with exponent dt*((lam+gamma)**alpha - gamma**alpha), via
    stable proposals thinned by exp(-gamma x)."""
    # keep the acceptance rate exp(-dt*gamma**alpha) above exp(-0.5) by
    # splitting the increment
    m = max(1, math.ceil(dt * gamma**alpha / 0.5))
    sub_dt = dt / m
    need = n * m
    out = np.empty(need)
    filled = 0
    for attempt in range(_REJECTION_CAP):
        todo = need - filled
        x = _stable_increments(rng, alpha, sub_dt, todo)
        keep = rng.uniform(size=todo) < np.exp(-gamma * x)
        got = x[keep]
        out[filled : filled + got.size] = got
        filled += got.size
        if filled == need:
            break
    else:
        raise NumericError(
            "tempered-stable rejection sampler stalled",
            {"acceptance_rate": filled / max(1, (attempt + 1) * need)},
        )
    return out.reshape(n, m).sum(axis=1)


def _tempered_increments(rng, alpha: float, gamma: float, dt: float, n: int):
    # exponent lam*(lam+gamma)**(alpha-1) splits into the classical tempered
    # part (lam+gamma)**alpha - gamma**alpha plus a compound Poisson part of
    # rate gamma**alpha whose jumps are Gamma(1-alpha, rate gamma)
    body = _tempered_classical(rng, alpha, gamma, dt, n)
    counts = rng.poisson(dt * gamma**alpha, size=n)
    jumps = rng.gamma(shape=counts * (1.0 - alpha), scale=1.0 / gamma)
    return body + jumps


def _truncated_increments(rng, alpha: float, delta: float, dt: float, n: int,
                          eps: float | None = None):
    # compound Poisson above the small-jump cutoff, mean compensation below
    if eps is None:
        eps = delta * TRUNCATED_SMALL_JUMP_FRACTION
    if not 0 < eps < delta:
        raise ParameterError("small-jump cutoff must lie in (0, delta)")
    g = math.gamma(1.0 - alpha)
    rate = (eps**-alpha - delta**-alpha) / g
    counts = rng.poisson(rate * dt, size=n)
    total = int(counts.sum())
    u = rng.uniform(size=total)
    x = (eps**-alpha - u * (eps**-alpha - delta**-alpha)) ** (-1.0 / alpha)
    idx = np.repeat(np.arange(n), counts)
    sums = np.bincount(idx, weights=x, minlength=n)
    drift = dt * alpha * eps ** (1.0 - alpha) / ((1.0 - alpha) * g)
    return sums + drift


def truncated_small_jump_bias(model: SubordinatorModel, dt: float,
                              eps: float | None = None) -> float:
    """Per-increment mean of the discarded small jumps (the compensation
    added back as drift); bounds the pathwise bias of the scheme."""
    alpha, delta = model.alpha, model.delta
    if eps is None:
        eps = delta * TRUNCATED_SMALL_JUMP_FRACTION
    return dt * alpha * eps ** (1.0 - alpha) / ((1.0 - alpha) * math.gamma(1.0 - alpha))


_DO_NODES, _DO_WEIGHTS = roots_legendre(64)
_DO_NODES = 0.5 * (_DO_NODES + 1.0)
_DO_WEIGHTS = 0.5 * _DO_WEIGHTS


def _distributed_order_increments(rng, dt: float, n: int) -> np.ndarray:
    # mixture of stable subordinators across the order variable; the
    # Gauss-Legendre discretization of the exponent integral is accurate to
    # machine precision at moderate lam
    out = np.zeros(n)
    with np.errstate(over="ignore"):
        for al, w in zip(_DO_NODES, _DO_WEIGHTS):
            log_scale = math.log(w * dt) / al
            out += np.exp(_stable_log_draws(rng, al, n) + log_scale)
    return out


def sample_increments(model: SubordinatorModel, dt: float, n: int, seed: int,
                      rng=None) -> np.ndarray:
    """n i.i.d. draws with the law of S(dt) for the given model."""
    if not dt > 0:
        raise DomainError("sample_increments requires dt > 0")
    if n < 1:
        raise ParameterError("need at least one draw")
    if rng is None:
        rng = stream_rng(seed)
    fam = model.family
    if fam == "stable":
        return _stable_increments(rng, model.alpha, dt, n)
    if fam == "gamma":
        return rng.gamma(shape=model.a * dt, scale=1.0 / model.b, size=n)
    if fam == "two_index_stable":
        return _stable_increments(rng, model.alpha, dt, n) + _stable_increments(
            rng, model.beta, dt, n
        )
    if fam == "tempered_stable":
        return _tempered_increments(rng, model.alpha, model.gamma, dt, n)
    if fam == "truncated_stable":
        return _truncated_increments(rng, model.alpha, model.delta, dt, n)
    if fam == "distributed_order":
        return _distributed_order_increments(rng, dt, n)
    raise ParameterError(f"no sampler for family {fam!r}")


def sample_path(model: SubordinatorModel, dt: float, n_steps: int, seed: int) -> PathGrid:
    """Trajectory of S on the uniform grid 0, dt, ..., n_steps*dt."""
    inc = sample_increments(model, dt, n_steps, seed)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    times = np.arange(n_steps + 1) * dt
    return PathGrid(times=times, values=values, model=model, seed=seed)


# -- first passage ------------------------------------------------------------


def inverse_passage(model: SubordinatorModel, t: float, resolution: float,
                    seed: int, rng=None) -> InverseSample:
    """One draw of the first-passage time of S across the level t.

    The path is simulated directly at step size `resolution`, in blocks
    whose size grows adaptively, until it passes the level; the crossing
    step gives an exact bracket and the midpoint is returned, so the bias
    is at most resolution/2.  (Coarse-grid schemes that regenerate the
    crossing step at finer resolution are not used: unconditional
    regeneration biases the value upward because the coarse bracket peeks
    at the crossing increment, interpolation biases it downward, and exact
    conditioning by rejection does not terminate when the crossing is
    pinned to a single large jump.)
    """
    if t < 0:
        raise DomainError("inverse_passage needs t >= 0")
    if not resolution > 0:
        raise DomainError("resolution must be positive")
    if t == 0.0:
        return InverseSample(t=0.0, e_value=0.0, bracket=(0, 0))
    if rng is None:
        rng = stream_rng(seed)
    dt = resolution
    level = t
    steps = 0
    block = _BLOCK
    while steps <= _MAX_STEPS_PER_STAGE:
        inc = sample_increments(model, dt, block, seed, rng=rng)
        s = np.cumsum(inc)
        hit = np.nonzero(s >= level)[0]
        if hit.size:
            j = int(hit[0])
            bracket = (steps + j, steps + j + 1)
            return InverseSample(t=t, e_value=(steps + j + 0.5) * dt, bracket=bracket)
        level -= float(s[-1])
        steps += block
        block = min(2 * block, 65536)
    raise HorizonError("path failed to cross the level; sampler is suspect")


# -- Laplace functional -------------------------------------------------------


def laplace_functional_mc(model: SubordinatorModel, lam: float, t: float, n: int,
                          seed: int, resolution: float = 1e-3,
                          threads: int = 1) -> tuple:
    """(mean, stderr) of exp(-lam E(t)) over n independent trajectories.

    Trajectory i draws from the stream keyed (seed, i); results are reduced
    in index order, so the output is bit-identical for any thread count.
    """
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    if n < 1000:
        raise ParameterError("need n >= 1000 for a meaningful standard error")
    if lam == 0.0:
        return 1.0, 0.0
    vals = np.empty(n)

    def run(i):
        rng = stream_rng(seed, i)
        e = inverse_passage(model, t, resolution, seed, rng=rng).e_value
        vals[i] = math.exp(-lam * e)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, range(n)))
    else:
        for i in range(n):
            run(i)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n))
    return mean, stderr
