"""Named verification checks tying the numeric routes against each other.

Each check pits independent routes to the same quantity (closed forms,
transform inversion, quadrature, spectral stepping, Monte Carlo) and
reports a pass flag, scalar details for the JSON report, and trace rows
for CSV emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import SubordinatorModel, normalization_N
from .fractional import fke_time_average, renormalized_green, solve_FKE, subordinate
from .jump import Field, JumpKernel, green_measure, solve_KE, time_quadrature_pairing
from .laplace import (
    ClosedForm,
    DensityEvaluator,
    GaverStehfest,
    Talbot,
    double_laplace_residual,
    integrate_density,
)
from .samplers import laplace_functional_mc
from .specfun import mittag_leffler

STABLE_HALF = SubordinatorModel("stable", alpha=0.5)

# deviations this small count as converged plateaus rather than sequences
# whose monotonicity is meaningful: exact identities sit at rounding level,
# transform inversion bottoms out near 1e-4 relative
EXACTNESS_FLOOR = 1e-9
NOISE_FLOOR = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}"


def _bump_setup(n: int, h: float, width: float):
    a = JumpKernel.gaussian(3, n, h, width)
    f = Field(grid=a.grid, values=np.exp(-a.grid.squared_radius() / 2.0))
    return a, f


def check_density_oracle(tol: float = 1e-5) -> CheckResult:
    """Inverted stable(1/2) density against exp(-tau^2/4t)/sqrt(pi t)."""
    rows = []
    worst = 0.0
    for label, method in (("stehfest", GaverStehfest()), ("talbot", Talbot())):
        ev = DensityEvaluator(STABLE_HALF, method=method)
        for t in (0.1, 1.0, 10.0):
            for tau in (0.0, 0.5, 1.0, 2.0, 5.0):
                ref = math.exp(-tau * tau / (4.0 * t)) / math.sqrt(math.pi * t)
                got = ev.evaluate(t, tau)
                rel = abs(got - ref) / ref
                worst = max(worst, rel)
                rows.append(
                    {"method": label, "t": t, "tau": tau, "value": got,
                     "reference": ref, "rel_error": rel}
                )
    return CheckResult(
        "density_oracle", worst <= tol,
        {"worst_rel_error": worst, "tolerance": tol}, rows,
    )


def check_mittag_leffler_law(seed: int, n_traj: int = 100000, threads: int = 1,
                             resolution: float = 1e-3) -> CheckResult:
    """Monte Carlo E[exp(-E(1))] against E_{1/2}(-1)."""
    target = mittag_leffler(0.5, -1.0)
    mean, stderr = laplace_functional_mc(
        STABLE_HALF, 1.0, 1.0, n_traj, seed, resolution=resolution, threads=threads
    )
    z = (mean - target) / stderr
    rows = [{"n_traj": n_traj, "mean": mean, "stderr": stderr,
             "target": target, "z": z}]
    return CheckResult(
        "mittag_leffler_law", abs(z) <= 3.0,
        {"mean": mean, "stderr": stderr, "target": target, "z": z}, rows,
    )


def _default_ratio_models():
    return [
        STABLE_HALF,
        SubordinatorModel("gamma", a=1.0, b=1.0),
        SubordinatorModel("two_index_stable", alpha=0.25, beta=0.75),
    ]


def check_theorem1_ratio(models=None, taus=(0.0, 1.0, 5.0),
                         T_list=(1e2, 1e3, 1e4),
                         threshold: float = 0.05) -> CheckResult:
    """Running integral of the passage-time density over N(T).

    The deviation must fall below the threshold at the largest horizon and
    decrease over the horizon list; sequences already sitting at the exact
    or numeric floor count as converged.
    """
    rows = []
    passed = True
    details = {}
    for model in models or _default_ratio_models():
        ev = DensityEvaluator(model)
        for tau in taus:
            devs = []
            for T in T_list:
                val = integrate_density(ev, tau, T, route="transform")
                dev = abs(val / float(normalization_N(model, T)) - 1.0)
                devs.append(dev)
                rows.append({"model": repr(model), "tau": tau, "T": T,
                             "integral": val, "deviation": dev})
            final_ok = devs[-1] < threshold
            decreasing = all(b < a for a, b in zip(devs, devs[1:]))
            floored = max(devs) <= NOISE_FLOOR
            ok = final_ok and (decreasing or floored)
            details[f"{model.family}_tau{tau:g}"] = {
                "deviations": devs, "final_ok": final_ok,
                "decreasing": decreasing, "at_floor": floored,
            }
            passed = passed and ok
    return CheckResult("theorem1_ratio", passed,
                       {"threshold": threshold, "cases": details}, rows)


def check_divergence(T: float = 1e3, n: int = 64, h: float = 1.0,
                     width: float = 4.0, lo: float = 1.35,
                     hi: float = 1.48) -> CheckResult:
    """Unnormalized running time integral doubles like 2^{1-alpha}."""
    a, f = _bump_setup(n, h, width)
    x = np.zeros(3)
    raw = {}
    for horizon in (T, 2.0 * T):
        raw[horizon] = fke_time_average(STABLE_HALF, a, f, x, horizon) * float(
            normalization_N(STABLE_HALF, horizon)
        )
    ratio = raw[2.0 * T] / raw[T]
    rows = [{"T": T, "raw_T": raw[T], "raw_2T": raw[2.0 * T], "ratio": ratio}]
    return CheckResult(
        "divergence", lo <= ratio <= hi,
        {"ratio": ratio, "band": [lo, hi], "analytic": math.sqrt(2.0)}, rows,
    )


def check_green_pairing(tol: float = 0.01, n: int = 128, h: float = 0.5,
                        width: float = 1.0, T_big: float = 50.0) -> CheckResult:
    """Neumann-series pairing plus analytic tail vs time quadrature."""
    a, f = _bump_setup(n, h, width)
    x = np.zeros(3)
    est, val = green_measure(a, f, x)
    series = val + est.tail_estimate
    tq = time_quadrature_pairing(a, f, x, T_big=T_big)
    rel = abs(series - tq) / abs(tq)
    rows = [{"series": val, "tail_estimate": est.tail_estimate,
             "series_plus_tail": series, "time_quadrature": tq,
             "rel_gap": rel}]
    return CheckResult("green_pairing", rel <= tol,
                       {"rel_gap": rel, "tolerance": tol}, rows)


def check_renormalized_average(seed: int, n_traj: int = 10000, threads: int = 1,
                               T_list=(1e2, 1e3, 1e4), n: int = 96,
                               h: float = 1.0, width: float = 4.0,
                               tol: float = 0.05) -> CheckResult:
    """Monte Carlo and deterministic renormalized averages vs the pairing.

    Both routes must land on the Green pairing at the largest horizon; the
    deterministic gaps must decrease along the horizon list.  The Monte
    Carlo route is judged by its own statistical error: per-trajectory time
    averages keep an order-one dispersion at every horizon, so its sampled
    gap cannot decrease monotonically at fixed trajectory count.
    """
    a, f = _bump_setup(n, h, width)
    x = np.zeros(3)
    est, val = green_measure(a, f, x)
    target = val + est.tail_estimate
    rows = []
    det_gaps = []
    mc_ok = True
    mc_final_gap = None
    for T in T_list:
        det = fke_time_average(STABLE_HALF, a, f, x, float(T))
        ra = renormalized_green(STABLE_HALF, a, f, x, float(T), n_traj, seed,
                                threads=threads)
        det_gap = abs(det - target) / target
        mc_gap = abs(ra.value - target) / target
        det_gaps.append(det_gap)
        if T == T_list[-1]:
            # the landing requirement applies at the largest horizon; at
            # shorter horizons both routes still carry the transient bias
            mc_ok = mc_gap <= max(3.0 * ra.stderr / target, tol)
        mc_final_gap = mc_gap
        rows.append({"T": T, "deterministic": det, "mc_value": ra.value,
                     "mc_stderr": ra.stderr, "target": target,
                     "det_gap": det_gap, "mc_gap": mc_gap})
    det_ok = det_gaps[-1] <= tol and all(
        b < a for a, b in zip(det_gaps, det_gaps[1:])
    )
    return CheckResult(
        "renormalized_average", det_ok and mc_ok,
        {"target": target, "det_gaps": det_gaps, "mc_final_gap": mc_final_gap,
         "tolerance": tol}, rows,
    )


def check_cesaro_slope(alphas=(0.3, 0.5, 0.7), tol: float = 0.05,
                       n: int = 64, h: float = 1.0, width: float = 4.0,
                       t_lo: float = 1e2, t_hi: float = 1e4,
                       n_points: int = 7) -> CheckResult:
    """Log-log decay rate of the Cesaro mean of the time-changed solution."""
    a, f = _bump_setup(n, h, width)
    x = np.zeros(3)
    rows = []
    passed = True
    slopes = {}
    ts = np.geomspace(t_lo, t_hi, n_points)
    for alpha in alphas:
        model = SubordinatorModel("stable", alpha=alpha)
        M = np.array([
            fke_time_average(model, a, f, x, float(t))
            * float(normalization_N(model, t)) / float(t)
            for t in ts
        ])
        slope = float(np.polyfit(np.log(ts), np.log(M), 1)[0])
        ok = abs(slope + alpha) <= tol
        passed = passed and ok
        slopes[f"alpha{alpha:g}"] = slope
        for t, m in zip(ts, M):
            rows.append({"alpha": alpha, "t": float(t), "cesaro_mean": float(m),
                         "slope": slope})
    return CheckResult("cesaro_slope", passed,
                       {"slopes": slopes, "tolerance": tol}, rows)


def check_fke_cross_route(tol: float = 1e-3, n: int = 64, h: float = 0.5,
                          width: float = 1.0, times=(0.5, 1.0, 2.0),
                          steps: int = 512) -> CheckResult:
    """Kernel-evolution stepping vs subordination quadrature, sup norm."""
    a, f = _bump_setup(n, h, width)
    ev = DensityEvaluator(STABLE_HALF, method=ClosedForm())
    t_grid = np.linspace(0.0, max(times), steps + 1)
    sols = solve_FKE(STABLE_HALF, a, f, t_grid, keep=list(times))
    rows = []
    worst = 0.0
    for fld in sols:
        ref = subordinate(lambda tau: solve_KE(a, f, tau), ev, fld.time)
        gap = float(np.max(np.abs(fld.values - ref.values)))
        worst = max(worst, gap)
        rows.append({"t": fld.time, "sup_gap": gap, "mass": fld.mass()})
    return CheckResult("fke_cross_route", worst <= tol,
                       {"worst_sup_gap": worst, "tolerance": tol}, rows)


def _analytic_transform_models():
    return [
        STABLE_HALF,
        SubordinatorModel("gamma", a=1.0, b=1.0),
        SubordinatorModel("two_index_stable", alpha=0.25, beta=0.75),
        SubordinatorModel("tempered_stable", alpha=0.5, gamma=1.0),
        SubordinatorModel("distributed_order"),
    ]


def check_double_laplace(tol: float = 1e-10, points=(0.5, 1.0, 2.0)) -> CheckResult:
    """Quadrature of the tau-transform against its closed form."""
    rows = []
    worst = 0.0
    for model in _analytic_transform_models():
        ev = DensityEvaluator(model)
        for lam in points:
            for p in points:
                _, res = double_laplace_residual(ev, lam, p)
                worst = max(worst, res)
                rows.append({"model": repr(model), "lam": lam, "p": p,
                             "residual": res})
    return CheckResult("double_laplace", worst <= tol,
                       {"worst_residual": worst, "tolerance": tol}, rows)


CHECKS = {
    "density_oracle": check_density_oracle,
    "mittag_leffler_law": check_mittag_leffler_law,
    "theorem1_ratio": check_theorem1_ratio,
    "divergence": check_divergence,
    "green_pairing": check_green_pairing,
    "renormalized_average": check_renormalized_average,
    "cesaro_slope": check_cesaro_slope,
    "fke_cross_route": check_fke_cross_route,
    "double_laplace": check_double_laplace,
}

_SEEDED = {"mittag_leffler_law", "renormalized_average"}


def run_verification(names, seed: int, threads: int = 1,
                     overrides: dict | None = None) -> list:
    """Run the named checks in a fixed order with per-check options."""
    overrides = overrides or {}
    results = []
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check: {name}")
        kwargs = dict(overrides.get(name, {}))
        if name in _SEEDED:
            kwargs.setdefault("seed", seed)
            kwargs.setdefault("threads", threads)
        results.append(CHECKS[name](**kwargs))
    return results
