import math

import numpy as np
import pytest

from fracgreen.catalog import SubordinatorModel, normalization_N
from fracgreen.errors import DomainError, NormalizationError, ParameterError
from fracgreen.fractional import (
    RenormalizedAverage,
    cesaro_mean,
    fke_time_average,
    gfd_apply,
    renormalized_green,
    solve_FKE,
    subordinate,
    subordination_grid,
    verify_fke_average,
)
from fracgreen.jump import Field, JumpKernel, green_measure, solve_KE
from fracgreen.laplace import ClosedForm, DensityEvaluator
from fracgreen.samplers import inverse_passage, stream_rng
from fracgreen.specfun import mittag_leffler

STABLE_HALF = SubordinatorModel("stable", alpha=0.5)


@pytest.fixture(scope="module")
def ev_half():
    return DensityEvaluator(STABLE_HALF, method=ClosedForm())


class TestSubordinate:
    def test_constant_passes_through(self, ev_half):
        for t in (0.3, 1.0, 4.0):
            assert subordinate(lambda tau: 3.0, ev_half, t) == pytest.approx(
                3.0, rel=1e-12
            )

    def test_mittag_leffler_value(self, ev_half):
        # int exp(-tau) G_t(tau) dtau = E_{1/2}(-sqrt(t))
        for t in (0.5, 1.0, 2.0):
            got = subordinate(lambda tau: math.exp(-tau), ev_half, t)
            want = mittag_leffler(0.5, -math.sqrt(t))
            assert got == pytest.approx(want, rel=1e-6)

    def test_gamma_family_constant(self):
        ev = DensityEvaluator(SubordinatorModel("gamma", a=1.0, b=1.0))
        assert subordinate(lambda tau: 2.0, ev, 1.0) == pytest.approx(2.0, rel=1e-9)

    def test_weights_sum_to_one(self, ev_half):
        taus, weights = subordination_grid(ev_half, 1.0)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert taus[0] == 0.0
        assert np.all(np.diff(taus) > 0)

    def test_sparse_grid_fails_normalization(self, ev_half):
        with pytest.raises(NormalizationError):
            subordination_grid(ev_half, 1.0, n_nodes=4)

    def test_rejects_nonpositive_time(self, ev_half):
        with pytest.raises(DomainError):
            subordinate(lambda tau: 1.0, ev_half, 0.0)

    def test_field_mass_preserved(self, ev_half):
        a = JumpKernel.gaussian(3, 16, 1.0, 1.0)
        f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
        v = subordinate(lambda tau: solve_KE(a, f, tau), ev_half, 1.0)
        assert isinstance(v, Field)
        assert v.mass() == pytest.approx(f.mass(), rel=1e-6)


class TestGfd:
    def test_annihilates_constants(self):
        h = 0.01
        u = np.full(101, 7.3)
        for j in (1, 10, 100):
            assert abs(gfd_apply(STABLE_HALF, u, j, h)) <= 1e-10

    def test_linear_function_is_exact(self):
        # derivative of u(t) = t is N(t); at t = 1 that is 1/Gamma(3/2)
        h = 1.0 / 512
        u = np.arange(513) * h
        got = gfd_apply(STABLE_HALF, u, 512, h)
        assert got == pytest.approx(1.0 / math.gamma(1.5), abs=1e-12)

    def test_mittag_leffler_eigenfunction(self):
        # u(t) = E_a(-t^a) satisfies D u = -u; first-order convergence
        errs = []
        for steps in (256, 512):
            h = 1.0 / steps
            tg = np.arange(steps + 1) * h
            u = np.array([mittag_leffler(0.5, -math.sqrt(t)) for t in tg])
            got = gfd_apply(STABLE_HALF, u, steps, h)
            errs.append(abs(got + u[-1]))
        assert errs[0] < 5e-2
        assert errs[1] < 0.7 * errs[0]

    def test_rejects_zero_index(self):
        with pytest.raises(DomainError):
            gfd_apply(STABLE_HALF, np.ones(10), 0, 0.1)

    def test_rejects_index_off_grid(self):
        with pytest.raises(DomainError):
            gfd_apply(STABLE_HALF, np.ones(10), 10, 0.1)

    def test_rejects_bad_step(self):
        with pytest.raises(DomainError):
            gfd_apply(STABLE_HALF, np.ones(10), 3, 0.0)


@pytest.fixture(scope="module")
def setup64():
    a = JumpKernel.gaussian(3, 64, 0.5, 1.0)
    f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
    return a, f


class TestSolveFKE:
    def test_matches_subordination(self, setup64, ev_half):
        a, f = setup64
        t_grid = np.linspace(0.0, 2.0, 513)
        sols = solve_FKE(STABLE_HALF, a, f, t_grid, keep=[0.5, 1.0, 2.0])
        for fld in sols:
            ref = subordinate(lambda tau: solve_KE(a, f, tau), ev_half, fld.time)
            assert np.max(np.abs(fld.values - ref.values)) <= 1e-3

    def test_mass_conserved(self, setup64):
        a, f = setup64
        sols = solve_FKE(STABLE_HALF, a, f, np.linspace(0.0, 1.0, 65), keep=[0.5, 1.0])
        for fld in sols:
            assert fld.mass() == pytest.approx(f.mass(), rel=1e-8)

    def test_initial_condition(self, setup64):
        a, f = setup64
        sols = solve_FKE(STABLE_HALF, a, f, np.linspace(0.0, 1.0, 17), keep=[0.0])
        assert np.max(np.abs(sols[0].values - f.values)) <= 1e-10

    def test_rejects_nonuniform_grid(self, setup64):
        a, f = setup64
        with pytest.raises(ParameterError):
            solve_FKE(STABLE_HALF, a, f, np.array([0.0, 0.1, 0.3]))

    def test_rejects_grid_not_from_zero(self, setup64):
        a, f = setup64
        with pytest.raises(ParameterError):
            solve_FKE(STABLE_HALF, a, f, np.array([0.5, 1.0, 1.5]))


class TestCesaro:
    def test_linear_oracle(self):
        s = np.linspace(0.0, 2.0, 201)
        assert cesaro_mean(s, s, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_grid_must_cover(self):
        with pytest.raises(DomainError):
            cesaro_mean(np.ones(5), np.linspace(0.0, 1.0, 5), 2.0)


class TestRenormalizedAverage:
    def test_value_is_exact_ratio(self):
        ra = RenormalizedAverage(T=10.0, N_T=3.0, value=7.0 / 3.0, raw_integral=7.0)
        assert ra.value * ra.N_T == ra.raw_integral

    def test_rejects_bad_normalization(self):
        with pytest.raises(ParameterError):
            RenormalizedAverage(T=10.0, N_T=0.0, value=1.0, raw_integral=0.0)


@pytest.fixture(scope="module")
def setup():
    a = JumpKernel.gaussian(3, 32, 1.0, 2.0)
    f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
    return a, f


class TestRenormalizedGreen:
    def test_needs_transient_dimension(self):
        a = JumpKernel.gaussian(2, 16, 1.0, 1.0)
        f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
        with pytest.raises(DomainError):
            renormalized_green(STABLE_HALF, a, f, np.zeros(2), 1e3, 100, 1)

    def test_needs_long_horizon(self, setup):
        a, f = setup
        with pytest.raises(DomainError):
            renormalized_green(STABLE_HALF, a, f, np.zeros(3), 1.0, 100, 1)

    def test_matches_deterministic_route(self, setup):
        # both compute (1/N(T)) E int_0^T f(Y(s)) ds on the same lattice
        a, f = setup
        T = 1e3
        det = fke_time_average(STABLE_HALF, a, f, np.zeros(3), T)
        ra = renormalized_green(STABLE_HALF, a, f, np.zeros(3), T, 4000, seed=7)
        assert abs(ra.value - det) <= 4.0 * ra.stderr

    def test_bookkeeping_is_consistent(self, setup):
        a, f = setup
        ra = renormalized_green(STABLE_HALF, a, f, np.zeros(3), 200.0, 500, seed=3)
        assert ra.value * ra.N_T == ra.raw_integral
        assert ra.N_T == pytest.approx(float(normalization_N(STABLE_HALF, 200.0)))
        assert ra.stderr > 0

    def test_deterministic_across_threads(self, setup):
        a, f = setup
        one = renormalized_green(STABLE_HALF, a, f, np.zeros(3), 200.0, 400, seed=5)
        two = renormalized_green(
            STABLE_HALF, a, f, np.zeros(3), 200.0, 400, seed=5, threads=4
        )
        assert one.value == two.value
        assert one.stderr == two.stderr

    def test_seed_changes_answer(self, setup):
        a, f = setup
        one = renormalized_green(STABLE_HALF, a, f, np.zeros(3), 200.0, 400, seed=5)
        two = renormalized_green(STABLE_HALF, a, f, np.zeros(3), 200.0, 400, seed=6)
        assert one.value != two.value


class TestVerifyTable:
    def test_gaps_shrink(self):
        a = JumpKernel.gaussian(3, 32, 1.0, 2.0)
        f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
        est, val = green_measure(a, f, np.zeros(3))
        target = val + est.tail_estimate
        rows = verify_fke_average(
            STABLE_HALF, a, f, np.zeros(3), [1e2, 1e3], target
        )
        assert len(rows) == 2
        assert rows[1]["gap"] < rows[0]["gap"]
        assert rows[0]["target"] == target


class TestMarginalLaw:
    def test_simulated_marginal_matches_subordinated_density(self, ev_half):
        # Fubini check: the law of Y(t) = X(E(t)) binned over lattice cells
        # against the subordinated marginal density, cellwise within 4 sigma.
        a = JumpKernel.gaussian(3, 16, 1.0, 1.0)
        grid = a.grid
        t = 1.0
        n_sim = 20000
        delta = np.zeros((grid.n,) * grid.dimension)
        delta[0, 0, 0] = 1.0 / grid.cell_volume
        f0 = Field(grid=grid, values=delta)
        v = subordinate(lambda tau: solve_KE(a, f0, tau), ev_half, t)

        rng = stream_rng(99)
        p = (a.values * grid.cell_volume).ravel()
        cdf = np.cumsum(p / p.sum())
        counts = np.zeros((grid.n,) * grid.dimension)
        for i in range(n_sim):
            e = inverse_passage(STABLE_HALF, t, 1e-2, 0, rng=rng).e_value
            k = rng.poisson(e)
            pos = np.zeros(3, dtype=int)
            if k > 0:
                flat = np.searchsorted(cdf, rng.uniform(size=k), side="right")
                flat = np.minimum(flat, cdf.size - 1)
                offs = np.stack(np.unravel_index(flat, (grid.n,) * grid.dimension), axis=-1)
                pos = offs.sum(axis=0) % grid.n
            counts[tuple(pos)] += 1

        probs = v.values * grid.cell_volume
        heavy = probs * n_sim >= 10.0
        expected = probs[heavy] * n_sim
        sigma = np.sqrt(expected * (1.0 - probs[heavy]))
        z = (counts[heavy] - expected) / sigma
        assert np.max(np.abs(z)) < 4.0
