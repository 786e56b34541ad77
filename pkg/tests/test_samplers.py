import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracgreen.catalog import SubordinatorModel, phi
from fracgreen.errors import DomainError, ParameterError
from fracgreen.laplace import DensityEvaluator
from fracgreen.samplers import (
    InverseSample,
    PathGrid,
    inverse_passage,
    laplace_functional_mc,
    sample_increments,
    sample_path,
    stream_rng,
    truncated_small_jump_bias,
)

ALL_MODELS = [
    SubordinatorModel("stable", alpha=0.5),
    SubordinatorModel("gamma", a=1.0, b=1.0),
    SubordinatorModel("two_index_stable", alpha=0.25, beta=0.75),
    SubordinatorModel("tempered_stable", alpha=0.5, gamma=1.0),
    SubordinatorModel("truncated_stable", alpha=0.5, delta=1.0),
    SubordinatorModel("distributed_order"),
]


# -- increment laws -----------------------------------------------------------


def test_gamma_increment_mean():
    m = SubordinatorModel("gamma", a=1.0, b=1.0)
    n = 100000
    x = sample_increments(m, 1.0, n, seed=3)
    sigma = 1.0 / math.sqrt(n)
    assert abs(x.mean() - 1.0) < 3 * sigma


def test_stable_laplace_functional_of_increments():
    m = SubordinatorModel("stable", alpha=0.5)
    n = 100000
    x = sample_increments(m, 1.0, n, seed=5)
    v = np.exp(-x)
    se = v.std(ddof=1) / math.sqrt(n)
    assert abs(v.mean() - math.exp(-1.0)) < 3 * se


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.family)
def test_increment_laplace_functional_matches_exponent(model):
    # E[exp(-lam S(dt))] = exp(-dt Phi(lam)), the law-defining identity
    n = 100000
    for lam in (0.5, 2.0):
        for dt in (0.3, 1.0):
            x = sample_increments(model, dt, n, seed=42)
            with np.errstate(over="ignore", invalid="ignore"):
                v = np.exp(-lam * x)
            target = math.exp(-dt * float(phi(model, lam)))
            se = v.std(ddof=1) / math.sqrt(n)
            assert abs(v.mean() - target) < 4 * se


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.family)
def test_small_dt_increments_are_small(model):
    x = sample_increments(model, 1e-6, 4001, seed=8)
    assert np.median(x) < 1e-3


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.family)
def test_increments_nonnegative(model):
    x = sample_increments(model, 0.7, 20000, seed=11)
    assert np.all(x >= 0)


def test_increment_independence_probe():
    m = SubordinatorModel("stable", alpha=0.5)
    n = 50000
    # correlation of bounded functionals of consecutive increments
    x = sample_increments(m, 1.0, 2 * n, seed=13)
    u, w = np.exp(-x[0::2]), np.exp(-x[1::2])
    rho = np.corrcoef(u, w)[0, 1]
    assert abs(rho) < 4 / math.sqrt(n)


def test_sample_increments_rejects_bad_args():
    m = SubordinatorModel("stable", alpha=0.5)
    with pytest.raises(DomainError):
        sample_increments(m, 0.0, 10, seed=1)
    with pytest.raises(ParameterError):
        sample_increments(m, 1.0, 0, seed=1)


def test_truncated_small_jump_bias_is_tiny():
    m = SubordinatorModel("truncated_stable", alpha=0.5, delta=1.0)
    assert 0 < truncated_small_jump_bias(m, dt=1.0) < 1e-2


# -- paths --------------------------------------------------------------------


def test_sample_path_monotone_and_anchored():
    for model in ALL_MODELS:
        p = sample_path(model, dt=0.1, n_steps=200, seed=17)
        assert p.values[0] == 0.0
        assert p.times[0] == 0.0
        assert np.all(np.diff(p.values) >= 0)


def test_path_grid_rejects_decreasing_values():
    m = SubordinatorModel("stable", alpha=0.5)
    with pytest.raises(AssertionError):
        PathGrid(
            times=np.array([0.0, 1.0, 2.0]),
            values=np.array([0.0, 2.0, 1.0]),
            model=m,
            seed=0,
        )


def test_path_inverse_is_nondecreasing():
    # flat periods of the inverse: E evaluated on a t-grid never decreases
    m = SubordinatorModel("stable", alpha=0.5)
    p = sample_path(m, dt=0.01, n_steps=5000, seed=23)
    levels = np.linspace(0.0, float(p.values[-1]) * 0.9, 200)
    e = p.inverse_at(levels)
    assert np.all(np.diff(e) >= 0)


# -- first passage ------------------------------------------------------------


def test_inverse_passage_at_zero():
    m = SubordinatorModel("stable", alpha=0.5)
    s = inverse_passage(m, 0.0, 1e-3, seed=1)
    assert s.e_value == 0.0


def test_inverse_passage_bracket_witnesses_crossing():
    m = SubordinatorModel("gamma", a=1.0, b=1.0)
    s = inverse_passage(m, 2.0, 1e-3, seed=9)
    lo, hi = s.bracket
    assert hi == lo + 1
    assert s.e_value > 0


def test_inverse_passage_mean_stable():
    # E[E(1)] = 1/Gamma(1.5) for the 0.5-stable subordinator
    m = SubordinatorModel("stable", alpha=0.5)
    n = 20000
    es = np.array(
        [inverse_passage(m, 1.0, 1e-3, 7, rng=stream_rng(7, i)).e_value for i in range(n)]
    )
    target = 1.0 / math.gamma(1.5)
    se = es.std(ddof=1) / math.sqrt(n)
    assert abs(es.mean() - target) < 3 * se


def test_inverse_passage_mittag_leffler_law():
    m = SubordinatorModel("stable", alpha=0.5)
    n = 20000
    es = np.array(
        [inverse_passage(m, 1.0, 1e-3, 7, rng=stream_rng(7, i)).e_value for i in range(n)]
    )
    v = np.exp(-es)
    se = v.std(ddof=1) / math.sqrt(n)
    assert abs(v.mean() - 0.427584) < 3 * se


def test_inverse_passage_rejects_bad_args():
    m = SubordinatorModel("stable", alpha=0.5)
    with pytest.raises(DomainError):
        inverse_passage(m, -1.0, 1e-3, seed=1)
    with pytest.raises(DomainError):
        inverse_passage(m, 1.0, 0.0, seed=1)


# -- Laplace functional monte carlo -------------------------------------------


def test_laplace_functional_lam_zero():
    m = SubordinatorModel("stable", alpha=0.5)
    assert laplace_functional_mc(m, 0.0, 1.0, 1000, seed=1) == (1.0, 0.0)


def test_laplace_functional_requires_enough_samples():
    m = SubordinatorModel("stable", alpha=0.5)
    with pytest.raises(ParameterError):
        laplace_functional_mc(m, 1.0, 1.0, 10, seed=1)


def test_laplace_functional_stable_oracle():
    m = SubordinatorModel("stable", alpha=0.5)
    mean, se = laplace_functional_mc(m, 1.0, 1.0, 20000, seed=11)
    assert abs(mean - 0.427584) < 3 * se


def test_laplace_functional_gamma_matches_quadrature():
    m = SubordinatorModel("gamma", a=1.0, b=1.0)
    mean, se = laplace_functional_mc(m, 1.0, 2.0, 20000, seed=19)
    ev = DensityEvaluator(m)
    ref, err = quad(lambda tau: math.exp(-tau) * ev.evaluate(2.0, tau), 0.0, 40.0,
                    limit=200)
    assert err < 1e-6
    assert abs(mean - ref) < 3 * se


def test_determinism_across_threads():
    m = SubordinatorModel("gamma", a=1.0, b=1.0)
    a = laplace_functional_mc(m, 1.0, 1.0, 1000, seed=4, threads=1)
    b = laplace_functional_mc(m, 1.0, 1.0, 1000, seed=4, threads=4)
    assert a == b


def test_determinism_same_seed_bit_identical():
    m = SubordinatorModel("tempered_stable", alpha=0.5, gamma=1.0)
    x = sample_increments(m, 0.5, 1000, seed=77)
    y = sample_increments(m, 0.5, 1000, seed=77)
    assert np.array_equal(x, y)
    z = sample_increments(m, 0.5, 1000, seed=78)
    assert not np.array_equal(x, z)
