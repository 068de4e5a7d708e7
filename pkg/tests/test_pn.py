from dataclasses import replace

import numpy as np
import pytest
import sympy as sp

from stacklab import DegenerateGainError, Game, PnGameSpec, Role, build_pn_costs, stationarity_residual
from stacklab.gaussian import Layout
from stacklab.growth import fit_growth, fit_inverse_rate
from stacklab.major import maj_sweep
from stacklab.pn import (
    PnSolution,
    pn_coefficients,
    pn_divergence_report,
    pn_gain,
    pn_gain_generic,
    pn_gain_per_follower_limit,
    pn_leader_optimal,
    pn_leader_optimal_generic,
    pn_limits,
    pn_profile,
    pn_residuals,
    pn_solve,
)

from conftest import MAJ_REF, PN_REF, random_pn_specs


def _team_objective(a0, a, b, r0, q0, n):
    """Leader cost with u0 = a0*y0 + a*ybar and every follower b*y_i, by hand."""
    return r0 * ((a0 + a) ** 2 + a0**2 + a**2 / n) + q0 * ((a0 + a + b + 1) ** 2 + a0**2 + (a + b) ** 2 / n)


def test_closed_form_minimizes_team_cost_symbolically():
    a0, a, b = sp.symbols("a0 a b", real=True)
    r0, q0, n = sp.symbols("r0 q0 n", positive=True)
    J = _team_objective(a0, a, b, r0, q0, n)
    sol = sp.solve([sp.diff(J, v) for v in (a0, a, b)], [a0, a, b], dict=True)[0]
    s = r0 + q0
    alpha0 = -q0 / (s * (n + 2))
    beta = -(n * (1 + alpha0) * s / (n + 1) - n * q0 / (n + 2)) / r0
    alpha = -(q0 / s) * (beta + n / (n + 2))
    for got, want in ((sol[a0], alpha0), (sol[a], alpha), (sol[b], beta)):
        assert sp.simplify(got - want) == 0


def test_reference_instance_exact_values(pn_ref):
    sol = pn_leader_optimal(pn_ref)
    assert (sol.alpha0, sol.alpha, sol.beta) == pytest.approx((-1 / 12, 1 / 18, -2 / 3), abs=1e-15)
    assert pn_gain(pn_ref, sol) == pytest.approx(-7.0, abs=1e-12)


def test_alternative_alpha0_form_is_not_stationary(pn_ref):
    # alpha0 = -q0 / (2 (r + q0)) together with its companion beta and alpha
    a0 = -pn_ref.q0 / (2 * (pn_ref.r + pn_ref.q0))
    n = pn_ref.n
    b = -(n * (1 + a0) * (pn_ref.r0 + pn_ref.q0) / (n + 1) - n * pn_ref.q0 / (n + 2)) / pn_ref.r0
    a = -(pn_ref.q0 / pn_ref.r0) * (b + n / (n + 2))
    bad = PnSolution(a0, a, b, n)
    res = pn_residuals(pn_ref, bad)
    assert max(res.values()) > 1e-3
    assert max(pn_residuals(pn_ref, pn_leader_optimal(pn_ref)).values()) < 1e-12


def test_zero_tracking_weight_limit():
    for n in (1, 3, 40):
        assert pn_coefficients(2.0, 0.0, n) == pytest.approx((0.0, 0.0, -n / (n + 1)), abs=1e-15)


@pytest.mark.parametrize("spec", random_pn_specs(10, seed=1, n=4))
def test_closed_forms_match_generic(spec):
    a, b = pn_leader_optimal(spec), pn_leader_optimal_generic(spec)
    assert (a.alpha0, a.alpha, a.beta) == pytest.approx((b.alpha0, b.alpha, b.beta), abs=1e-10)
    assert pn_gain(spec, a) == pytest.approx(pn_gain_generic(spec, a), rel=1e-10, abs=1e-10)


def _explicit_with_deviation(cost, prof, n, i, b):
    """Follower ``i`` plays ``b*y_i``; everyone else follows ``prof``."""
    from stacklab import Action, Channel, IncentivePolicy

    dim = 2 + n
    e = np.eye(dim)
    y0 = e[0] + e[1]
    ys = [e[0] + e[2 + j] for j in range(n)]
    ybar = sum(ys) / n
    beta = prof[Role.FOLLOWER][Channel.OWN_OBS]
    us = [(b if j == i else beta) * ys[j] for j in range(n)]
    ubar = sum(us) / n
    lead = prof[Role.LEADER]
    u0 = lead.base[Channel.LEADER_OBS] * y0 + lead.base[Channel.POP_MEAN_OBS] * ybar
    u0 = u0 + lead.gain * (ubar - lead.reference[Channel.POP_MEAN_OBS] * ybar)
    vals = {Action.LEADER: u0, Action.OWN: us[i], Action.POP_MEAN: ubar, Action.OMEGA0: e[0]}
    return sum(w * float(np.sum(sum(c * vals[a] for a, c in combo.items()) ** 2)) for w, combo in cost.terms)


@pytest.mark.parametrize("spec", random_pn_specs(5, seed=2, n=3))
def test_gain_makes_every_follower_stationary(spec):
    sol = pn_solve(spec)
    for i in (0, spec.n - 1):
        _, follower = build_pn_costs(spec)
        J = lambda b: _explicit_with_deviation(follower, pn_profile(sol), spec.n, i, b)
        assert abs(J(sol.beta + 1) - J(sol.beta - 1)) / 2 < 1e-9
        off = replace(sol, gain=sol.gain + 1.0)
        J = lambda b: _explicit_with_deviation(follower, pn_profile(off), spec.n, i, b)
        assert abs(J(sol.beta + 1) - J(sol.beta - 1)) / 2 > 1e-6


def test_all_residuals_vanish_on_random_specs():
    for n in (1, 2, 7, 100):
        for spec in random_pn_specs(10, seed=n, n=n):
            assert max(pn_residuals(spec, pn_solve(spec)).values()) <= 1e-10


def test_energy_is_gain_squared(pn_ref):
    sol = pn_solve(pn_ref)
    assert sol.energy == sol.gain**2


def test_degenerate_gain():
    spec = PnGameSpec(2, 1, 2, 1, n=2)
    # choose beta so the tracking coefficient vanishes
    a0, a = -0.1, 0.2
    b = -(0.5 * (1 + a0) + 3 / 4 * a) / (7 / 4)
    with pytest.raises(DegenerateGainError):
        pn_gain(spec, PnSolution(a0, a, b, 2))


def test_limits():
    spec = PnGameSpec(**PN_REF)
    lim = pn_limits(spec)
    assert lim == pytest.approx({"alpha0_inf": 0.0, "beta_inf": -1.0, "alpha_inf": 0.0})
    assert "gain" not in " ".join(lim)
    big = pn_leader_optimal(spec.with_n(10**6))
    assert (big.alpha0, big.beta, big.alpha) == pytest.approx(
        (lim["alpha0_inf"], lim["beta_inf"], lim["alpha_inf"]), abs=1e-5)


def test_limit_rate_is_one_over_n():
    spec = PnGameSpec(**PN_REF)
    grid = [10, 100, 1000]
    errs = [abs(pn_leader_optimal(spec.with_n(n)).beta + 1) for n in grid]
    rate = fit_inverse_rate(grid, errs)
    assert rate.slope == pytest.approx(-1.0, abs=0.05)
    for n in (2000, 5000, 10000):
        # err * N still creeps up toward its limit on the coarse grid; allow 5%
        assert abs(pn_leader_optimal(spec.with_n(n)).beta + 1) <= 1.05 * rate.bound(n)


def test_gain_per_follower_limit_rederived():
    spec = PnGameSpec(**PN_REF)
    # lim Q_N / N = -(r beta_inf / (q den_inf) + 1), den_inf = (1 + alpha0_inf)/2 + alpha_inf/2 + 3 beta_inf/2
    assert pn_gain_per_follower_limit(spec) == pytest.approx(-(1 + spec.r / spec.q))
    q = pn_solve(spec.with_n(10**6)).gain
    assert q / 10**6 == pytest.approx(pn_gain_per_follower_limit(spec), rel=1e-5)


def test_divergence_report():
    spec = PnGameSpec(**PN_REF)
    rep = pn_divergence_report(spec, [10, 100, 1000, 10000])
    assert rep.fit.slope == pytest.approx(1.0, abs=0.02)
    assert rep.verdict == "divergent"
    assert [r.n for r in rep.rows] == [10, 100, 1000, 10000]
    assert rep.energy_at_horizon > 1e5
    with pytest.raises(ValueError):
        pn_divergence_report(spec, [10, 100])
    with pytest.raises(ValueError):
        pn_divergence_report(spec, [10, 100, 50])


def test_bounded_contrast_uses_same_fit():
    from stacklab import MajGameSpec

    grid = [10, 100, 1000, 10000]
    gains = [s.gain for s in maj_sweep(MajGameSpec(**MAJ_REF), grid)]
    assert fit_growth(grid, gains).verdict == "bounded"


def test_monotone_divergence():
    spec = PnGameSpec(**PN_REF)
    grid = [2**k for k in range(12)]
    g = [abs(pn_solve(spec.with_n(n)).gain) for n in grid]
    n0 = next(grid[k] for k in range(len(grid)) if all(g[j + 1] > g[j] for j in range(k, len(grid) - 1)))
    assert n0 <= 2
