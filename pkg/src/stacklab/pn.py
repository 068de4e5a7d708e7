"""The game with one leader and N followers who are all directly incentivized.

Leader-optimal (team) coefficients come in closed form; the incentive gain
that makes them a Nash response grows linearly in N, so no finite-energy
incentive survives the large-population limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DegenerateGainError
from .gaussian import Layout, Stationarity, solve_linear_policies, stationarity_residual
from .growth import GrowthFit, fit_growth
from .model import (
    Channel,
    EquilibriumSolution,
    Game,
    IncentivePolicy,
    LinearPolicy,
    PnGameSpec,
    Role,
    build_pn_costs,
)

GAIN_EPS = 1e-12
ENERGY_THRESHOLD = 1e5


@dataclass(frozen=True)
class PnSolution:
    alpha0: float
    alpha: float
    beta: float
    n: int
    gain: float | None = None

    @property
    def energy(self) -> float | None:
        """Mean squared slope of the incentive in the monitored action; constant for an affine map."""
        return None if self.gain is None else self.gain**2

    def to_dict(self) -> dict:
        out = {"n": self.n, "alpha0": self.alpha0, "alpha": self.alpha, "beta": self.beta}
        if self.gain is not None:
            out.update(gain=self.gain, energy=self.energy)
        return out


def pn_coefficients(r0: float, q0: float, n: int) -> tuple[float, float, float]:
    """Team-optimal ``(alpha0, alpha, beta)``; also defined at ``q0 = 0``.

    The follower weights do not enter: under the team problem everyone
    minimizes the leader's cost.
    """
    s = r0 + q0
    alpha0 = -q0 / (s * (n + 2))
    beta = -(n * (1 + alpha0) * s / (n + 1) - n * q0 / (n + 2)) / r0
    alpha = -(q0 / s) * (beta + n / (n + 2))
    return alpha0, alpha, beta


def pn_leader_optimal(spec: PnGameSpec) -> PnSolution:
    a0, a, b = pn_coefficients(spec.r0, spec.q0, spec.n)
    return PnSolution(a0, a, b, spec.n)


def gain_denominator(sol: PnSolution) -> float:
    """Coefficient of ``y_i`` in ``E[u_i + u0 + omega0 + ubar | y_i]``."""
    n = sol.n
    return 0.5 * (1 + sol.alpha0) + (n + 1) / (2 * n) * sol.alpha + (3 * n + 1) / (2 * n) * sol.beta


def pn_gain(spec: PnGameSpec, sol: PnSolution) -> float:
    """Gain on the mean action that makes ``beta`` each follower's best response."""
    den = gain_denominator(sol)
    if abs(den) < GAIN_EPS:
        raise DegenerateGainError(f"incentive gain undefined: follower tracking coefficient is {den:.3g}")
    n = sol.n
    return -(n * spec.r * sol.beta + spec.q * (n + 1) * den) / (spec.q * den)


def pn_solve(spec: PnGameSpec) -> PnSolution:
    sol = pn_leader_optimal(spec)
    return replace(sol, gain=pn_gain(spec, sol))


def pn_limits(spec: PnGameSpec) -> dict:
    """Large-population limits of the team coefficients (no gain: it diverges)."""
    s = spec.r0 + spec.q0
    alpha0 = 0.0
    beta = -((1 + alpha0) * s - spec.q0) / spec.r0
    alpha = -(spec.q0 / s) * (beta + 1)
    return {"alpha0_inf": alpha0, "beta_inf": beta, "alpha_inf": alpha}


def pn_gain_per_follower_limit(spec: PnGameSpec) -> float:
    """``lim Q_N / N`` evaluated from the limit coefficients."""
    lim = pn_limits(spec)
    den = 0.5 * (1 + lim["alpha0_inf"]) + 0.5 * lim["alpha_inf"] + 1.5 * lim["beta_inf"]
    return -(spec.r * lim["beta_inf"] / (spec.q * den) + 1)


def pn_profile(sol: PnSolution, incentive: bool = True) -> dict:
    """Leader shares observations through (y0, ybar); followers play ``beta * y_i``."""
    base = LinearPolicy.of(y0=sol.alpha0, ybar=sol.alpha)
    follower = LinearPolicy.of(yi=sol.beta)
    if not incentive:
        return {Role.LEADER: base, Role.FOLLOWER: follower}
    gain = 0.0 if sol.gain is None else sol.gain
    return {Role.LEADER: IncentivePolicy(base, gain, LinearPolicy.of(ybar=sol.beta)), Role.FOLLOWER: follower}


PN_UNKNOWNS = (
    (Role.LEADER, Channel.LEADER_OBS),
    (Role.LEADER, Channel.POP_MEAN_OBS),
    (Role.FOLLOWER, Channel.OWN_OBS),
)


def pn_leader_optimal_generic(spec: PnGameSpec) -> PnSolution:
    """The team solution from the generic stationarity assembler (cross-check path)."""
    leader, _ = build_pn_costs(spec)
    lay = Layout(Game.PN, spec.n)
    x = solve_linear_policies(lay, [Stationarity(Role.LEADER, leader), Stationarity(Role.FOLLOWER, leader)], PN_UNKNOWNS)
    a0, a, b = (x[s] for s in PN_UNKNOWNS)
    return PnSolution(a0, a, b, spec.n)


def pn_gain_generic(spec: PnGameSpec, sol: PnSolution) -> float:
    _, follower = build_pn_costs(spec)
    slot = (Role.LEADER, "gain")
    x = solve_linear_policies(Layout(Game.PN, spec.n), [Stationarity(Role.FOLLOWER, follower)], [slot], pn_profile(sol))
    return x[slot]


def pn_residuals(spec: PnGameSpec, sol: PnSolution) -> dict:
    """Residual norms: team conditions on the leader's cost, and the followers' own condition under the incentive."""
    leader, follower = build_pn_costs(spec)
    lay = Layout(Game.PN, spec.n)
    prof = pn_profile(sol)
    out = {
        "leader": stationarity_residual(leader, prof, Role.LEADER, lay).norm(),
        "follower_team": stationarity_residual(leader, prof, Role.FOLLOWER, lay).norm(),
    }
    if sol.gain is not None:
        out["follower"] = stationarity_residual(follower, prof, Role.FOLLOWER, lay).norm()
    return out


def pn_equilibrium(spec: PnGameSpec) -> EquilibriumSolution:
    sol = pn_solve(spec)
    params = {k: v for k, v in sol.to_dict().items() if k != "n"}
    return EquilibriumSolution(params, pn_residuals(spec, sol), spec.n)


def pn_sweep(spec: PnGameSpec, n_grid) -> list[PnSolution]:
    return [pn_solve(spec.with_n(n)) for n in n_grid]


@dataclass(frozen=True)
class DivergenceReport:
    rows: tuple  # PnSolution per grid point
    fit: GrowthFit
    energy_horizon: int  # 1000 * fitted constant, rounded up
    energy_at_horizon: float

    @property
    def verdict(self) -> str:
        return self.fit.verdict

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "fit": self.fit.to_dict(),
            "verdict": self.verdict,
            "energy_horizon": self.energy_horizon,
            "energy_at_horizon": self.energy_at_horizon,
            "energy_threshold": ENERGY_THRESHOLD,
        }


def pn_divergence_report(spec: PnGameSpec, n_grid) -> DivergenceReport:
    """Fit ``log|Q_N|`` against ``log N`` and report the energy ``Q_N**2`` along the grid."""
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise ValueError(f"need at least 3 grid points, got {len(n_grid)}")
    rows = tuple(pn_sweep(spec, n_grid))
    fit = fit_growth(n_grid, [r.gain for r in rows])
    horizon = max(1, math.ceil(1000 * fit.constant))
    return DivergenceReport(rows, fit, horizon, pn_solve(spec.with_n(horizon)).energy)
