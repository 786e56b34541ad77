"""Dynamics of the time-changed process Y(t) = X(E(t)).

Three routes to the same objects keep each other honest: subordination
quadrature against the inverse-subordinator density, direct stepping of the
kernel-convolution evolution equation, and Monte Carlo over time-changed
trajectories.  Renormalized time averages divide by N(T), the integral of
the memory kernel, which is what makes the diverging raw time integrals
converge to the Green pairing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .catalog import SubordinatorModel, laplace_K, normalization_N
from .errors import DomainError, NormalizationError, ParameterError
from .jump import Field, JumpKernel, _lattice_index, _require_same_grid
from .laplace import DensityEvaluator
from .samplers import sample_increments, stream_rng


# -- subordination ---------------------------------------------------------------


def _tau_scale(model: SubordinatorModel, t: float) -> float:
    """Typical magnitude of E(t), from the Tauberian estimate t / K(1/t)."""
    return t / float(laplace_K(model, 1.0 / t))


def subordination_grid(ev: DensityEvaluator, t: float, n_nodes: int = 400):
    """Geometric tau grid with trapezoid weights for int u(tau) G_t(tau) dtau.

    The grid spans from far below the typical scale of E(t) to where the
    density has shed all but ~1e-8 of its mass; the weight sum is checked
    against the exact normalization of G_t.
    """
    scale = _tau_scale(ev.model, t)
    lo = 1e-4 * scale
    hi = 8.0 * scale
    for _ in range(12):
        taus = np.concatenate([[0.0], np.geomspace(lo, hi, n_nodes)])
        g = np.array([ev.evaluate(t, float(x)) for x in taus])
        # tail mass estimate from the last trapezoid panel
        tail = g[-1] * (taus[-1] - taus[-2]) * 10.0
        if tail < 1e-8:
            break
        hi *= 2.0
    weights = np.zeros_like(taus)
    dt_panels = np.diff(taus)
    weights[:-1] += 0.5 * dt_panels
    weights[1:] += 0.5 * dt_panels
    weights = weights * g
    total = float(weights.sum())
    if abs(total - 1.0) > 1e-3:
        raise NormalizationError(
            "subordination weights do not integrate the density to 1",
            {"t": t, "weight_sum": total},
        )
    return taus, weights / total


def subordinate(u_eval, ev: DensityEvaluator, t: float, n_nodes: int = 400):
    """v(t) = int_0^inf u(tau) G_t(tau) dtau for field- or scalar-valued u."""
    if not t > 0:
        raise DomainError("subordinate needs t > 0")
    taus, weights = subordination_grid(ev, t, n_nodes)
    acc = None
    grid = None
    for tau, w in zip(taus, weights):
        u = u_eval(float(tau))
        if isinstance(u, Field):
            grid = u.grid
            u = u.values
        acc = w * u if acc is None else acc + w * u
    if grid is not None:
        return Field(grid=grid, values=acc, time=t)
    return float(acc)


# -- generalized fractional derivative ---------------------------------------------


def kernel_panel_weights(model: SubordinatorModel, h: float, m: int) -> np.ndarray:
    """K_j = int_{j h}^{(j+1) h} k(s) ds for j = 0..m-1, exact via N."""
    edges = normalization_N(model, np.arange(m + 1) * h)
    return np.diff(edges)


def gfd_apply(model: SubordinatorModel, samples, j: int, h: float) -> float:
    """Kernel-convolution derivative of sampled u at t_j = j h.

    Product-integration form (1/h) sum_i (u_{i+1} - u_i) K_{j-1-i}: the
    kernel is integrated exactly across each panel, the samples by their
    increments, so constants are annihilated exactly.
    """
    samples = np.asarray(samples, dtype=float)
    if j < 1:
        raise DomainError("the derivative needs at least one step of history")
    if j >= samples.size:
        raise DomainError("index beyond the sampled grid")
    if not h > 0:
        raise DomainError("grid step must be positive")
    K = kernel_panel_weights(model, h, j)
    du = np.diff(samples[: j + 1])
    return float(np.dot(du, K[::-1])) / h


# -- fractional Kolmogorov evolution ------------------------------------------------


def _fke_modes(model: SubordinatorModel, mu_nodes: np.ndarray, t_grid: np.ndarray):
    """Scalar solutions w_j(mu) of the implicit product-integration scheme
    for D^(k) w = mu w, w(0) = 1, on the uniform grid t_grid."""
    h = float(t_grid[1] - t_grid[0])
    J = t_grid.size - 1
    K = kernel_panel_weights(model, h, J)
    m = mu_nodes.size
    w = np.empty((J + 1, m))
    w[0] = 1.0
    dw = np.empty((J, m))
    denom = K[0] / h - mu_nodes
    for j in range(1, J + 1):
        if j > 1:
            hist = K[1:j][::-1] @ dw[: j - 1]
        else:
            hist = 0.0
        rhs = (K[0] / h) * w[j - 1] - hist / h
        w[j] = rhs / denom
        dw[j - 1] = w[j] - w[j - 1]
    return w


def solve_FKE(model: SubordinatorModel, a: JumpKernel, f: Field, t_grid,
              n_modes: int = 600, keep=None) -> list:
    """March D^(k) v = Lv from v(0) = f; returns Fields at the kept times.

    The spectral multiplier of L is mu = a_hat - 1, so the update is
    diagonal in Fourier space and depends on the frequency only through mu;
    the scheme is solved on a compressed mu grid and interpolated back.
    """
    _require_same_grid(a, f)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2 or t_grid[0] != 0.0:
        raise ParameterError("t_grid must start at 0 with at least one step")
    steps = np.diff(t_grid)
    if not np.allclose(steps, steps[0], rtol=1e-12, atol=0):
        raise ParameterError("t_grid must be uniform")
    mu_field = a.spectrum().real - 1.0
    mu_nodes = np.linspace(float(mu_field.min()), 0.0, n_modes)
    w = _fke_modes(model, mu_nodes, t_grid)
    f_hat = np.fft.fftn(f.values)
    if keep is None:
        keep_idx = range(t_grid.size)
    else:
        keep_idx = [int(np.argmin(np.abs(t_grid - t))) for t in np.atleast_1d(keep)]
    out = []
    for j in keep_idx:
        mult = CubicSpline(mu_nodes, w[j])(mu_field)
        v = np.fft.ifftn(mult * f_hat).real
        out.append(Field(grid=f.grid, values=v, time=float(t_grid[j])))
    return out


# -- time averages -----------------------------------------------------------------


def cesaro_mean(values, s_grid, t: float | None = None) -> float:
    """(1/t) int_0^t v(s) ds by trapezoid on the sampled grid."""
    values = np.asarray(values, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    if t is None:
        t = float(s_grid[-1])
    if s_grid[0] > 0.0 or s_grid[-1] < t:
        raise DomainError("sample grid must cover [0, t]")
    mask = s_grid <= t
    return float(trapezoid(values[mask], s_grid[mask])) / t


def _talbot_array(F, t: float, M: int) -> np.ndarray:
    """Fixed Talbot inversion for a transform returning an array of values."""
    r = 2.0 * M / (5.0 * t)
    total = 0.5 * math.exp(r * t) * np.real(F(complex(r, 0.0)))
    for k in range(1, M):
        th = k * math.pi / M
        cot = math.cos(th) / math.sin(th)
        s = r * th * complex(cot, 1.0)
        sigma = th + (th * cot - 1.0) * cot
        total = total + (np.exp(t * s) * F(s) * complex(1.0, sigma)).real
    return total * (r / M)


def _mode_time_integral(model: SubordinatorModel, mu_nodes: np.ndarray, T: float,
                        n_head: int = 48, n_tail: int = 160) -> np.ndarray:
    """g(mu) = int_0^T w(s, mu) ds where w(s, mu) = E[exp(mu E(s))].

    w has the s-Laplace transform K(lam)/(lam K(lam) - mu); it is recovered
    by Talbot inversion, vectorized over mu, and integrated over a split
    linear/geometric s grid.
    """

    def w_of_s(s):
        def F(lam):
            K = complex(laplace_K(model, lam))
            return K / (lam * K - mu_nodes)

        return _talbot_array(F, s, 32)

    xs, ws = roots_legendre(n_head)
    head_s = 0.5 * (xs + 1.0) * min(1.0, T)
    head_w = 0.5 * ws * min(1.0, T)
    total = np.zeros_like(mu_nodes)
    for s, wt in zip(head_s, head_w):
        total += wt * w_of_s(float(s))
    if T > 1.0:
        # geometric panels in s over [1, T]
        edges = np.geomspace(1.0, T, n_tail + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid_s = 0.5 * (xs + 1.0) * (hi - lo) + lo
            mid_w = 0.5 * ws * (hi - lo)
            for s, wt in zip(mid_s, mid_w):
                total += wt * w_of_s(float(s))
    return total


def fke_time_average(model: SubordinatorModel, a: JumpKernel, f: Field, x,
                     T: float, n_modes: int = 600) -> float:
    """(1/N(T)) int_0^T v(s, x) ds via the double-transform mode integrals."""
    _require_same_grid(a, f)
    idx = _lattice_index(a.grid, np.asarray(x, dtype=float).reshape(a.grid.dimension))
    mu_field = a.spectrum().real - 1.0
    mu_nodes = np.linspace(float(mu_field.min()), 0.0, n_modes)
    g = _mode_time_integral(model, mu_nodes, T)
    mult = CubicSpline(mu_nodes, g)(mu_field)
    f_hat = np.fft.fftn(f.values)
    integral = float(np.fft.ifftn(mult * f_hat).real[idx])
    return integral / float(normalization_N(model, T))


# -- Monte Carlo renormalized average -----------------------------------------------


@dataclass
class RenormalizedAverage:
    T: float
    N_T: float
    value: float
    raw_integral: float
    stderr: float = 0.0

    def __post_init__(self):
        if not self.N_T > 0:
            raise ParameterError("normalization must be positive")
        assert self.value == self.raw_integral / self.N_T


def _flat_durations(model: SubordinatorModel, rng, gaps: np.ndarray) -> np.ndarray:
    """Physical durations of flat periods: one subordinator increment per
    operational gap; vectorized where the family has a scaling shortcut."""
    fam = model.family
    n = gaps.size
    if fam == "stable":
        base = sample_increments(model, 1.0, n, 0, rng=rng)
        return base * gaps ** (1.0 / model.alpha)
    if fam == "gamma":
        return rng.gamma(shape=model.a * gaps, scale=1.0 / model.b)
    if fam == "two_index_stable":
        m1 = SubordinatorModel("stable", alpha=model.alpha)
        m2 = SubordinatorModel("stable", alpha=model.beta)
        p = sample_increments(m1, 1.0, n, 0, rng=rng)
        q = sample_increments(m2, 1.0, n, 0, rng=rng)
        return p * gaps ** (1.0 / model.alpha) + q * gaps ** (1.0 / model.beta)
    return np.array(
        [float(sample_increments(model, float(g), 1, 0, rng=rng)[0]) for g in gaps]
    )


def _trajectory_integral(model: SubordinatorModel, a: JumpKernel, f_vals: np.ndarray,
                         idx0: np.ndarray, T: float, rng) -> float:
    """int_0^T f(Y(s)) ds for one trajectory, by exact flat-period sums.

    Between jumps of the driving walk the time-changed process is constant,
    so the integral is a finite sum of flat-period durations times f at the
    current lattice state; there is no time-discretization error.
    """
    cdf = getattr(a, "_sampling_cdf", None)
    if cdf is None:
        p = (a.values * a.grid.cell_volume).ravel()
        cdf = np.cumsum(p / p.sum())
        a._sampling_cdf = cdf
    n = a.grid.n
    d = a.grid.dimension
    pos = idx0.copy()
    s = 0.0
    acc = 0.0
    block = 64
    while True:
        gaps = rng.exponential(size=block)
        durs = _flat_durations(model, rng, gaps)
        flat = np.searchsorted(cdf, rng.uniform(size=block), side="right")
        flat = np.minimum(flat, cdf.size - 1)
        offsets = np.stack(np.unravel_index(flat, (n,) * d), axis=-1)
        for k in range(block):
            s_next = s + float(durs[k])
            acc += f_vals[tuple(pos)] * (min(s_next, T) - s)
            if s_next >= T:
                return acc
            s = s_next
            pos = (pos + offsets[k]) % n


def renormalized_green(model: SubordinatorModel, a: JumpKernel, f: Field, x,
                       T: float, n_traj: int, seed: int,
                       threads: int = 1) -> RenormalizedAverage:
    """Monte Carlo (1/N(T)) int_0^T f(Y(s)) ds over time-changed trajectories.

    Jumps are drawn from the lattice law of a, so states stay on the
    periodic lattice and f lookups are exact; trajectory i uses the stream
    keyed (seed, i) and the reduction is in index order.
    """
    _require_same_grid(a, f)
    if a.grid.dimension < 3:
        raise DomainError("the renormalized average needs a transient walk (d >= 3)")
    N_T = float(normalization_N(model, T))
    if not N_T > 10.0:
        raise DomainError("horizon too short: need N(T) > 10")
    idx0 = np.array(
        _lattice_index(a.grid, np.asarray(x, dtype=float).reshape(a.grid.dimension))
    )
    raws = np.empty(n_traj)

    def run(i):
        rng = stream_rng(seed, i)
        raws[i] = _trajectory_integral(model, a, f.values, idx0, T, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, range(n_traj)))
    else:
        for i in range(n_traj):
            run(i)
    raw = float(np.mean(raws))
    stderr = float(np.std(raws, ddof=1) / math.sqrt(n_traj)) / N_T
    return RenormalizedAverage(
        T=T, N_T=N_T, value=raw / N_T, raw_integral=raw, stderr=stderr
    )


def verify_fke_average(model: SubordinatorModel, a: JumpKernel, f: Field, x,
                       T_list, target: float) -> list:
    """Table of (T, renormalized time average, target, relative gap)."""
    rows = []
    for T in T_list:
        val = fke_time_average(model, a, f, x, float(T))
        gap = abs(val - target) / max(abs(target), 1e-300)
        rows.append({"T": float(T), "value": val, "target": target, "gap": gap})
    return rows
