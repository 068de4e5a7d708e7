"""The game where the leader incentivizes only a major follower.

N minor followers respond to the major in Nash fashion.  The leader's best
achievable plan (leader-major optimal) therefore anticipates that response,
and the incentive gain on the major's action stays bounded as N grows.  The
price of not controlling the minors directly is the loss against the team
(leader-optimal) plan.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateGainError, UnsupportedParameterizationError
from .gaussian import (
    Layout,
    Stationarity,
    build_profile,
    expected_cost,
    solve_dense,
    solve_linear_policies,
    stationarity_residual,
    minor_response_sensitivity,
)
from .model import (
    Action,
    Channel,
    EquilibriumSolution,
    Game,
    IncentivePolicy,
    LinearPolicy,
    MajGameSpec,
    Role,
    build_maj_costs,
    build_zero_loss_costs,
)

GAIN_EPS = 1e-12

Y0, YM, YI = Channel.LEADER_OBS, Channel.MAJOR_OBS, Channel.OWN_OBS
MAJ_UNKNOWNS = (
    (Role.LEADER, Y0),
    (Role.LEADER, YM),
    (Role.MAJOR, YM),
    (Role.FOLLOWER, YI),
    (Role.FOLLOWER, YM),
)
PARAM_NAMES = ("theta", "thetaM", "beta", "alpha", "alphaM")


@dataclass(frozen=True)
class MajSolution:
    theta: float
    thetaM: float
    beta: float
    alpha: float
    alphaM: float
    n: int | None  # None for the large-population limit
    rprime: float
    D: float
    gain: float | None = None
    L: float | None = None

    def coefficients(self) -> tuple:
        return tuple(getattr(self, k) for k in PARAM_NAMES)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in PARAM_NAMES}
        out.update(n=self.n, rprime=self.rprime, D=self.D)
        if self.gain is not None:
            out.update(gain=self.gain, L=self.L)
        return out


@dataclass(frozen=True)
class MajHatSolution:
    theta_hat: float
    thetaM_hat: float
    beta_hat: float
    alpha_hat: float
    alphaM_hat: float
    n: int

    def coefficients(self) -> tuple:
        return (self.theta_hat, self.thetaM_hat, self.beta_hat, self.alpha_hat, self.alphaM_hat)

    def to_dict(self) -> dict:
        return {**dict(zip(PARAM_NAMES, self.coefficients())), "n": self.n}


def _rprime(spec: MajGameSpec, n) -> float:
    return spec.r if n is None else spec.r * n / (n + 1)


def _alpha(spec: MajGameSpec, n) -> float:
    rp = _rprime(spec, n)
    spread = 4.0 if n is None else 2 * (2 * n + 1) / n
    return -spec.q / (3 * rp + spread * spec.q)


def _others(n) -> float:
    return 1.0 if n is None else (n - 1) / n


def maj_minor_response(spec: MajGameSpec, beta: float) -> tuple[float, float]:
    """Minor coefficients ``(alpha, alphaM)`` on ``(y_i, yM)`` given the major's ``beta``."""
    n = spec.n
    alpha = _alpha(spec, n)
    rp = _rprime(spec, n)
    alphaM = -(spec.q / (rp + 2 * spec.q)) * (beta + (1 + _others(n) * alpha) / 3)
    return alpha, alphaM


def _leader_major_system(spec: MajGameSpec, n):
    """Rows of the linear system in ``(theta, thetaM, beta, alphaM)``.

    1. leader, ``y0`` coefficient; 2. leader, ``yM`` coefficient;
    3. major (anticipating the minors, factor ``D``); 4. minors' ``yM`` coefficient.
    """
    q0, qh, q = spec.q0, spec.qhat0, spec.q
    s = spec.r0 + q0 + qh
    rp = _rprime(spec, n)
    alpha = _alpha(spec, n)
    kappa = q / (rp + 2 * q)
    D = 1 - kappa
    a = np.array(
        [
            [3 * s, 0, 0, 0],
            [0, s, qh + q0, q0],
            [(q0 * D + qh) / 2, q0 * D + qh, q0 * D + qh, q0 * D],
            [0, 0, kappa, 1],
        ],
        dtype=float,
    )
    b = np.array(
        [
            -q0 * (alpha + 1),
            -q0 * (alpha + 1) / 3,
            -q0 * D * (alpha + 1) / 2,
            -kappa * (1 + _others(n) * alpha) / 3,
        ]
    )
    return a, b, alpha, rp, D


def _solve_leader_major(spec: MajGameSpec, n) -> MajSolution:
    a, b, alpha, rp, D = _leader_major_system(spec, n)
    theta, thetaM, beta, alphaM = solve_dense(a, b, ["theta", "thetaM", "beta", "alphaM"])
    return MajSolution(theta, thetaM, beta, alpha, alphaM, n, rp, D)


def maj_leader_major_optimal(spec: MajGameSpec) -> MajSolution:
    """Best plan for the leader who sets her own and the major's policy, minors in Nash response."""
    return _solve_leader_major(spec, spec.n)


def tracking_coefficient(sol: MajSolution) -> float:
    """``L``: coefficient of ``yM`` in ``E[u0 + uM + ubar + omega0 | yM]``."""
    return sol.beta + sol.alphaM + sol.thetaM + 0.5 * (sol.alpha + sol.theta + 1)


def maj_gain(spec: MajGameSpec, sol: MajSolution) -> tuple[float, float]:
    """Gain on the major's action making ``beta`` her best response, and ``L``."""
    L = tracking_coefficient(sol)
    if abs(L) < GAIN_EPS:
        raise DegenerateGainError(f"incentive gain undefined: major tracking coefficient L = {L:.3g}")
    return -(1 + spec.rM * sol.beta / (spec.qM * L)), L


def maj_solve(spec: MajGameSpec) -> MajSolution:
    sol = maj_leader_major_optimal(spec)
    gain, L = maj_gain(spec, sol)
    return replace(sol, gain=gain, L=L)


def maj_limits(spec: MajGameSpec) -> MajSolution:
    """Large-population limit of the leader-major plan, with its (finite) gain."""
    sol = _solve_leader_major(spec, None)
    gain, L = maj_gain(spec, sol)
    return replace(sol, gain=gain, L=L)


def maj_leader_optimal(spec: MajGameSpec) -> MajHatSolution:
    """Team plan: the leader dictates every policy."""
    q0, qh = spec.q0, spec.qhat0
    if q0 == 0:
        raise UnsupportedParameterizationError(
            "leader-optimal plan undefined for q0 = 0: the major's relation divides by 2*q0"
        )
    n = spec.n
    s = spec.r0 + q0 + qh
    c = (qh + q0) / (2 * q0)
    # unknowns: theta, thetaM, beta, alpha, alphaM
    a = np.array(
        [
            [3 * s, 0, 0, q0, 0],
            [0, s, qh + q0, q0 / 3, q0],
            [1 / 3, 1, 1, (n - 1) / (3 * n), 1],
            [n / (n + 2), 0, 0, 1, 0],
            [c, 2 * c, 2 * c, 0.5, 1],
        ],
        dtype=float,
    )
    b = np.array([-q0, -q0 / 3, -1 / 3, -n / (n + 2), -0.5])
    x = solve_dense(a, b, [f"{k}_hat" for k in PARAM_NAMES])
    return MajHatSolution(*x, n)


# ---------------------------------------------------------------------------
# profiles and exact costs


def maj_profile(sol: MajSolution, incentive: bool = True) -> dict:
    base = LinearPolicy({Y0: sol.theta, YM: sol.thetaM})
    leader = base
    if incentive:
        gain = 0.0 if sol.gain is None else sol.gain
        leader = IncentivePolicy(base, gain, LinearPolicy({YM: sol.beta}), Action.MAJOR)
    return {
        Role.LEADER: leader,
        Role.MAJOR: LinearPolicy({YM: sol.beta}),
        Role.FOLLOWER: LinearPolicy({YI: sol.alpha, YM: sol.alphaM}),
    }


def maj_hat_profile(sol: MajHatSolution) -> dict:
    return {
        Role.LEADER: LinearPolicy({Y0: sol.theta_hat, YM: sol.thetaM_hat}),
        Role.MAJOR: LinearPolicy({YM: sol.beta_hat}),
        Role.FOLLOWER: LinearPolicy({YI: sol.alpha_hat, YM: sol.alphaM_hat}),
    }


@dataclass(frozen=True)
class LossPoint:
    n: int
    j_leader_opt: float
    j_leader_major: float

    @property
    def loss(self) -> float:
        return self.j_leader_major - self.j_leader_opt

    def to_dict(self) -> dict:
        return {"n": self.n, "j_leader_opt": self.j_leader_opt, "j_leader_major": self.j_leader_major, "loss": self.loss}


def maj_loss(spec: MajGameSpec) -> LossPoint:
    """Leader's exact cost under both plans; ``loss`` is their difference (>= 0)."""
    leader, _, _ = build_maj_costs(spec)
    lay = Layout(Game.MAJ, spec.n)
    j_lm = expected_cost(leader, maj_profile(maj_leader_major_optimal(spec), incentive=False), lay)
    j_lo = expected_cost(leader, maj_hat_profile(maj_leader_optimal(spec)), lay)
    return LossPoint(spec.n, j_lo, j_lm)


def maj_loss_curve(spec: MajGameSpec, n_grid) -> list[LossPoint]:
    return [maj_loss(spec.with_n(n)) for n in n_grid]


def maj_sweep(spec: MajGameSpec, n_grid) -> list[MajSolution]:
    return [maj_solve(spec.with_n(n)) for n in n_grid]


# ---------------------------------------------------------------------------
# generic cross-checks


def _as_maj(x) -> tuple:
    return tuple(x[s] for s in MAJ_UNKNOWNS)


def maj_leader_major_generic(spec: MajGameSpec) -> MajSolution:
    leader, _, minor = build_maj_costs(spec)
    lay = Layout(Game.MAJ, spec.n)
    conds = [
        Stationarity(Role.LEADER, leader),
        Stationarity(Role.MAJOR, leader, anticipate=minor),
        Stationarity(Role.FOLLOWER, minor),
    ]
    theta, thetaM, beta, alpha, alphaM = _as_maj(solve_linear_policies(lay, conds, MAJ_UNKNOWNS))
    rp = _rprime(spec, spec.n)
    return MajSolution(theta, thetaM, beta, alpha, alphaM, spec.n, rp, 1 - spec.q / (rp + 2 * spec.q))


def maj_leader_optimal_generic(spec: MajGameSpec) -> MajHatSolution:
    leader, _, _ = build_maj_costs(spec)
    lay = Layout(Game.MAJ, spec.n)
    conds = [Stationarity(r, leader) for r in (Role.LEADER, Role.MAJOR, Role.FOLLOWER)]
    return MajHatSolution(*_as_maj(solve_linear_policies(lay, conds, MAJ_UNKNOWNS)), spec.n)


def maj_gain_generic(spec: MajGameSpec, sol: MajSolution) -> float:
    _, major, _ = build_maj_costs(spec)
    slot = (Role.LEADER, "gain")
    x = solve_linear_policies(Layout(Game.MAJ, spec.n), [Stationarity(Role.MAJOR, major)], [slot], maj_profile(sol))
    return x[slot]


def maj_residuals(spec: MajGameSpec, sol: MajSolution) -> dict:
    """Leader and major (planning, anticipating minors) on the leader's cost; major
    under the incentive on her own cost; minors on theirs."""
    leader, major, minor = build_maj_costs(spec)
    lay = Layout(Game.MAJ, spec.n)
    prof = maj_profile(sol)
    k = minor_response_sensitivity(lay, minor, prof)
    out = {
        "leader": stationarity_residual(leader, prof, Role.LEADER, lay).norm(),
        "major_plan": stationarity_residual(leader, prof, Role.MAJOR, lay, k).norm(),
        "minor": stationarity_residual(minor, prof, Role.FOLLOWER, lay).norm(),
    }
    if sol.gain is not None:
        out["major"] = stationarity_residual(major, prof, Role.MAJOR, lay).norm()
    return out


def maj_hat_residuals(spec: MajGameSpec, sol: MajHatSolution) -> dict:
    leader, _, _ = build_maj_costs(spec)
    lay = Layout(Game.MAJ, spec.n)
    prof = maj_hat_profile(sol)
    return {f"{r.value}_team": stationarity_residual(leader, prof, r, lay).norm() for r in (Role.LEADER, Role.MAJOR, Role.FOLLOWER)}


def maj_equilibrium(spec: MajGameSpec) -> EquilibriumSolution:
    sol = maj_solve(spec)
    params = {k: v for k, v in sol.to_dict().items() if k != "n"}
    return EquilibriumSolution(params, maj_residuals(spec, sol), spec.n)


# ---------------------------------------------------------------------------
# shared-signal example with zero loss


@dataclass(frozen=True)
class ZeroLossSolution:
    """Leader ``theta*y0 + thetaM*yM``; major and every minor play ``beta*yM``."""

    theta: float
    thetaM: float
    beta: float
    n: int
    gain: float | None = None

    def to_dict(self) -> dict:
        out = {"theta": self.theta, "thetaM": self.thetaM, "beta": self.beta, "n": self.n}
        if self.gain is not None:
            out["gain"] = self.gain
        return out


def zero_loss_plan(spec: MajGameSpec) -> ZeroLossSolution:
    """Leader-major plan of the shared-signal game (uses ``r0, q0, n`` only).

    Minors who imitate the crowd and the major respond one-for-one to the
    major, so steering the major alone reaches the team optimum.
    """
    r0, q0, n = spec.r0, spec.q0, spec.n
    theta = -q0 / (3 * (q0 + r0))
    thetaM = q0 * (3 * theta + 1) / (6 * r0)
    beta = -n * (theta + 1 + 2 * thetaM) / (2 * (n + 1))
    return ZeroLossSolution(theta, thetaM, beta, n)


def zero_loss_solve(spec: MajGameSpec) -> ZeroLossSolution:
    """Plan plus the gain on the major's action (needs ``rM, qM`` too).

    At n = 1 the major's expected tracking error given ``yM`` vanishes on
    the plan, so no gain can steer her and a degenerate-gain error is raised.
    """
    sol = zero_loss_plan(spec)
    track = 4 * sol.beta + 1 + sol.theta + 2 * sol.thetaM
    if abs(spec.qM * track) < GAIN_EPS:
        raise DegenerateGainError(f"incentive gain undefined: major tracking term is {track:.3g}")
    gain = -(2 * spec.rM * sol.beta + spec.qM * track) / (spec.qM * track)
    return replace(sol, gain=gain)


ZL_UNKNOWNS = ((Role.LEADER, Y0), (Role.LEADER, YM), (Role.MAJOR, YM))
ZL_ALIASES = {(Role.FOLLOWER, YM): (Role.MAJOR, YM)}


def zero_loss_profile(sol: ZeroLossSolution, incentive: bool = True) -> dict:
    base = LinearPolicy({Y0: sol.theta, YM: sol.thetaM})
    act = LinearPolicy({YM: sol.beta})
    leader = base
    if incentive:
        gain = 0.0 if sol.gain is None else sol.gain
        leader = IncentivePolicy(base, gain, act, Action.MAJOR)
    return {Role.LEADER: leader, Role.MAJOR: act, Role.FOLLOWER: act}


def zero_loss_generic(spec: MajGameSpec) -> tuple[float, float, float]:
    """Leader-major plan of the shared-signal game from the assembler; minors tied to the major."""
    leader, _, minor = build_zero_loss_costs(spec)
    lay = Layout(Game.MAJ_SHARED, spec.n)
    conds = [Stationarity(Role.LEADER, leader), Stationarity(Role.MAJOR, leader, anticipate=minor)]
    x = solve_linear_policies(lay, conds, ZL_UNKNOWNS, aliases=ZL_ALIASES)
    return tuple(x[s] for s in ZL_UNKNOWNS)


def zero_loss_team_cost(spec: MajGameSpec) -> float:
    """Leader-optimal cost of the shared-signal game.

    Major and minors load on the same signal, so only their combined
    loading is pinned down; the team plan is computed with minors idle,
    which attains the same optimal value.
    """
    leader, _, _ = build_zero_loss_costs(spec)
    lay = Layout(Game.MAJ_SHARED, spec.n)
    template = {Role.FOLLOWER: LinearPolicy()}
    conds = [Stationarity(Role.LEADER, leader), Stationarity(Role.MAJOR, leader)]
    x = solve_linear_policies(lay, conds, ZL_UNKNOWNS, template)
    return expected_cost(leader, build_profile(x, template), lay)


def zero_loss_loss(spec: MajGameSpec) -> LossPoint:
    leader, _, _ = build_zero_loss_costs(spec)
    lay = Layout(Game.MAJ_SHARED, spec.n)
    j_lm = expected_cost(leader, zero_loss_profile(zero_loss_plan(spec), incentive=False), lay)
    return LossPoint(spec.n, zero_loss_team_cost(spec), j_lm)


def zero_loss_residuals(spec: MajGameSpec, sol: ZeroLossSolution) -> dict:
    leader, major, minor = build_zero_loss_costs(spec)
    lay = Layout(Game.MAJ_SHARED, spec.n)
    prof = zero_loss_profile(sol)
    k = minor_response_sensitivity(lay, minor, prof)
    out = {
        "leader": stationarity_residual(leader, prof, Role.LEADER, lay).norm(),
        "major_plan": stationarity_residual(leader, prof, Role.MAJOR, lay, k).norm(),
        "minor": stationarity_residual(minor, prof, Role.FOLLOWER, lay).norm(),
    }
    if sol.gain is not None:
        out["major"] = stationarity_residual(major, prof, Role.MAJOR, lay).norm()
    return out

