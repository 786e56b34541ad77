"""Compound Poisson jump process on a periodic lattice.

The process has unit jump rate and jump law a(y)dy; its generator is
Lf = a*f - f and the semigroup is exact in Fourier space,
u_hat(t) = exp(t(a_hat - 1)) f_hat.  The Green measure is the atom at the
start point plus the summed convolution powers of a, computed spectrally.
All convolutions are circular; the lattice extent must be chosen so that
wrap-around mass is negligible at the horizons of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import DivergenceError, DomainError, GridMismatchError, ParameterError
from .samplers import stream_rng


# -- lattice ------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeGrid:
    """Uniform periodic lattice, n points per axis, spacing h, d axes.

    Coordinates are FFT-ordered: index 0 is the origin and the upper half
    of each axis wraps to negative positions.
    """

    dimension: int = 3
    n: int = 64
    h: float = 0.5

    def __post_init__(self):
        if self.dimension < 1:
            raise ParameterError("dimension must be at least 1")
        if self.n < 4 or self.n % 2 != 0:
            raise ParameterError("need an even number of points, at least 4")
        if not self.h > 0:
            raise ParameterError("spacing must be positive")

    @property
    def extent(self) -> float:
        return self.n * self.h

    @property
    def cell_volume(self) -> float:
        return self.h**self.dimension

    def axis_coords(self) -> np.ndarray:
        i = np.arange(self.n)
        return self.h * (((i + self.n // 2) % self.n) - self.n // 2)

    def squared_radius(self) -> np.ndarray:
        """|x|^2 at every lattice point, FFT-ordered, shape (n,)*d."""
        c2 = self.axis_coords() ** 2
        out = np.zeros((self.n,) * self.dimension)
        for ax in range(self.dimension):
            shape = [1] * self.dimension
            shape[ax] = self.n
            out = out + c2.reshape(shape)
        return out

    def origin_index(self) -> tuple:
        return (0,) * self.dimension


# -- jump kernel and fields ----------------------------------------------------


@dataclass
class JumpKernel:
    """Jump law a on the lattice; h^d * sum(values) = 1 after normalization."""

    grid: LatticeGrid
    values: np.ndarray
    analytic: str | None = None
    width: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,) * self.grid.dimension:
            raise GridMismatchError("kernel values do not match the grid shape")
        if np.any(v < 0):
            raise ParameterError("jump kernel must be nonnegative")
        total = v.sum() * self.grid.cell_volume
        if not total > 0:
            raise ParameterError("jump kernel must have positive mass")
        v = v / total
        # a(-x) = a(x) exactly on the periodic lattice
        for ax in range(self.grid.dimension):
            flipped = np.roll(np.flip(v, axis=ax), 1, axis=ax)
            if not np.allclose(v, flipped, rtol=0, atol=1e-12 * v.max()):
                raise ParameterError("jump kernel must be symmetric")
        self.values = v
        self.second_moment = float(
            (self.grid.squared_radius() * v).sum() * self.grid.cell_volume
        )

    @classmethod
    def gaussian(cls, dimension: int = 3, n: int = 64, h: float = 0.5,
                 width: float = 1.0) -> "JumpKernel":
        grid = LatticeGrid(dimension=dimension, n=n, h=h)
        v = np.exp(-grid.squared_radius() / (2.0 * width**2))
        return cls(grid=grid, values=v, analytic="gaussian", width=width)

    def spectrum(self) -> np.ndarray:
        """a_hat on the discrete frequency grid; a_hat at zero frequency is 1."""
        return np.fft.fftn(self.values) * self.grid.cell_volume


@dataclass
class Field:
    """Real-valued lattice function with a time stamp."""

    grid: LatticeGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,) * self.grid.dimension:
            raise GridMismatchError("field values do not match the grid shape")
        if not np.all(np.isfinite(v)):
            raise ParameterError("field values must be finite")
        self.values = v

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)


def _require_same_grid(a: JumpKernel, f: Field):
    if a.grid != f.grid:
        raise GridMismatchError("kernel and field live on different grids")


# -- generator and semigroup ---------------------------------------------------


def generator_apply(a: JumpKernel, f: Field) -> Field:
    """Lf = a*f - f by circular convolution in Fourier space."""
    _require_same_grid(a, f)
    conv = np.fft.ifftn(a.spectrum() * np.fft.fftn(f.values)).real
    return Field(grid=f.grid, values=conv - f.values, time=f.time)


def solve_KE(a: JumpKernel, f: Field, t: float) -> Field:
    """u(t,.) with u_hat(t) = exp(t(a_hat-1)) f_hat; exact on the lattice."""
    _require_same_grid(a, f)
    if t < 0:
        raise DomainError("solve_KE needs t >= 0")
    if t == 0.0:
        return Field(grid=f.grid, values=f.values.copy(), time=0.0)
    mult = np.exp(t * (a.spectrum() - 1.0))
    u = np.fft.ifftn(mult * np.fft.fftn(f.values)).real
    return Field(grid=f.grid, values=u, time=t)


# -- trajectories ---------------------------------------------------------------


@dataclass
class CPPTrajectory:
    """Piecewise-constant path: jump epochs and the states between them."""

    jump_times: np.ndarray
    positions: np.ndarray  # shape (jumps + 1, d); positions[0] is the start
    T: float

    def position_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.T):
            raise DomainError("time outside the simulated horizon")
        idx = np.searchsorted(self.jump_times, t, side="right")
        return self.positions[idx]


def simulate_cpp(a: JumpKernel, x0, T: float, seed: int, rng=None,
                 jump_sampler: str = "auto") -> CPPTrajectory:
    """Unit-rate compound Poisson trajectory on [0, T] started at x0.

    Gaussian kernels use their analytic sampler; any kernel can be sampled
    from the lattice by inverse CDF (jump_sampler="grid"), which matches
    solve_KE exactly in law.
    """
    if not T > 0:
        raise DomainError("horizon must be positive")
    if rng is None:
        rng = stream_rng(seed)
    d = a.grid.dimension
    x0 = np.asarray(x0, dtype=float).reshape(d)
    k = int(rng.poisson(T))
    times = np.sort(rng.uniform(0.0, T, size=k))
    if jump_sampler == "auto":
        jump_sampler = "analytic" if a.analytic == "gaussian" else "grid"
    if jump_sampler == "analytic":
        if a.analytic != "gaussian":
            raise ParameterError("no analytic sampler for this kernel")
        jumps = rng.normal(scale=a.width, size=(k, d))
    elif jump_sampler == "grid":
        cum = getattr(a, "_sampling_cdf", None)
        if cum is None:
            p = (a.values * a.grid.cell_volume).ravel()
            cum = np.cumsum(p / p.sum())
            a._sampling_cdf = cum
        flat = np.searchsorted(cum, rng.uniform(size=k), side="right")
        flat = np.minimum(flat, cum.size - 1)
        coords = a.grid.axis_coords()
        jumps = np.stack(
            [coords[i] for i in np.unravel_index(flat, a.values.shape)], axis=-1
        ).reshape(k, d)
    else:
        raise ParameterError("jump_sampler must be 'auto', 'analytic' or 'grid'")
    positions = np.vstack([x0, x0 + np.cumsum(jumps, axis=0)]) if k else x0[None, :]
    return CPPTrajectory(jump_times=times, positions=positions, T=T)


# -- Green measure ---------------------------------------------------------------


@dataclass
class GreenEstimate:
    atom_mass: float
    density: Field
    truncation_order: int
    tail_bound: float
    # local-CLT estimate of the pairing mass beyond the truncation order
    # (an estimate, not a bound; add it to the pairing for a converged value)
    tail_estimate: float = 0.0


def green_measure(a: JumpKernel, f: Field, x, N_max: int = 200) -> tuple:
    """Green measure of the walk at x, paired with f.

    Returns (estimate, value) with value = f(x) + h^d sum density*f, where
    density = sum of the first N_max convolution powers of a centered at x.
    The neglected tail is bounded through the local CLT decay
    sup a^{*n} <= C n^{-d/2}, with C estimated from the n = N_max term.
    """
    _require_same_grid(a, f)
    d = a.grid.dimension
    if d < 3:
        raise DivergenceError(
            "the Green series of a recurrent walk (d < 3) is not summable"
        )
    if N_max < 1:
        raise ParameterError("need at least one series term")
    x = np.asarray(x, dtype=float).reshape(d)
    idx = _lattice_index(a.grid, x)
    spec = a.spectrum()
    # geometric sum a_hat (1 - a_hat^N) / (1 - a_hat), exact N at a_hat = 1
    one_minus = 1.0 - spec
    small = np.abs(one_minus) < 1e-13
    safe = np.where(small, 1.0, one_minus)
    series = spec * (1.0 - spec**N_max) / safe
    series = np.where(small, float(N_max), series)
    density_vals = np.fft.ifftn(series).real / a.grid.cell_volume
    # local CLT constant from the last computed term
    f_hat = np.fft.fftn(f.values)
    last_hat = spec**N_max
    last = np.fft.ifftn(last_hat).real / a.grid.cell_volume
    c_clt = float(last.max()) * N_max ** (d / 2.0)
    abs_f_mass = float(np.abs(f.values).sum() * a.grid.cell_volume)
    zeta_tail = float(zeta(d / 2.0, N_max + 1))
    tail = c_clt * zeta_tail * abs_f_mass
    # pairing-specific estimate: the n-th term at x decays like n^(-d/2),
    # with the constant read off the last computed term
    v_last = float(np.fft.ifftn(last_hat * f_hat).real[idx])
    tail_est = v_last * N_max ** (d / 2.0) * zeta_tail
    pairing_field = np.fft.ifftn(series * f_hat).real
    value = float(f.values[idx]) + float(pairing_field[idx])
    est = GreenEstimate(
        atom_mass=1.0,
        density=Field(grid=a.grid, values=density_vals),
        truncation_order=N_max,
        tail_bound=tail,
        tail_estimate=tail_est,
    )
    return est, value


def time_quadrature_pairing(a: JumpKernel, f: Field, x, T_big: float = 50.0) -> float:
    """Independent oracle for the Green pairing: int_0^T u(t,x) dt computed
    spectrally in closed form, plus the local-CLT power-law tail fitted at T."""
    _require_same_grid(a, f)
    d = a.grid.dimension
    if d < 3:
        raise DivergenceError("time integral diverges for a recurrent walk (d < 3)")
    x = np.asarray(x, dtype=float).reshape(d)
    idx = _lattice_index(a.grid, x)
    spec = a.spectrum()
    expo = spec - 1.0
    small = np.abs(expo) < 1e-13
    safe = np.where(small, 1.0, expo)
    integral = (np.exp(T_big * expo) - 1.0) / safe
    integral = np.where(small, T_big, integral)
    f_hat = np.fft.fftn(f.values)
    head = float(np.fft.ifftn(integral * f_hat).real[idx])
    # u(t,x) ~ c t^(-d/2) for large t, so the tail integral is
    # u(T,x) * T / (d/2 - 1)
    u_T = float(np.fft.ifftn(np.exp(T_big * expo) * f_hat).real[idx])
    tail = u_T * T_big / (d / 2.0 - 1.0)
    return head + tail


def _lattice_index(grid: LatticeGrid, x: np.ndarray) -> tuple:
    coords = grid.axis_coords()
    idx = []
    for xi in x:
        j = int(np.argmin(np.abs(coords - xi)))
        if abs(coords[j] - xi) > 1e-9 * max(1.0, abs(xi)):
            raise DomainError("point is not on the lattice")
        idx.append(j)
    return tuple(idx)
