"""Independent certification of solved profiles.

Two routes that do not share code with the closed-form solvers: a seeded
Monte Carlo simulation of the whole population, and an exact best-response
search over each player's linear policies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SingularProblemError
from .gaussian import (
    Layout,
    action_vectors,
    apply_policy,
    check_profile,
    expected_cost,
    stationarity_residual,
)
from .model import (
    Action,
    Channel,
    Game,
    IncentivePolicy,
    LinearPolicy,
    MajGameSpec,
    PnGameSpec,
    QuadraticCostSpec,
    Role,
    build_maj_costs,
    build_pn_costs,
    build_zero_loss_costs,
)

EXACT_TOL = 1e-10
MC_SIGMAS = 4.0
MIN_SAMPLES = 10_000
_CHUNK_CELLS = 2_000_000  # follower draws held in memory at once


@dataclass(frozen=True)
class MonteCarloConfig:
    samples: int = 1_000_000
    seed: int = 0
    batches: int = 20

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < MIN_SAMPLES:
            raise ValueError(f"samples must be an integer >= {MIN_SAMPLES}, got {self.samples!r}")
        if int(self.batches) != self.batches or not 1 <= self.batches <= self.samples:
            raise ValueError(f"batches must be an integer in [1, samples], got {self.batches!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def _policy_on(policy: LinearPolicy, obs: dict) -> np.ndarray:
    out = np.zeros_like(obs[Channel.LEADER_OBS])
    for ch, c in policy.coeffs.items():
        out += c * obs[ch]
    return out


def _simulate_chunk(cost, profile, layout: Layout, rng, m: int) -> np.ndarray:
    """Cost realizations for ``m`` independent draws of the whole population."""
    n = layout.n
    omega = rng.standard_normal(m)
    y0 = omega + rng.standard_normal(m)
    yM = omega + rng.standard_normal(m)
    if layout.shared:
        ys = np.broadcast_to(yM[:, None], (m, n))
    else:
        ys = omega[:, None] + rng.standard_normal((m, n))
    ybar = ys.mean(axis=1)

    follower = profile.get(Role.FOLLOWER, LinearPolicy())
    u_followers = np.zeros((m, n))
    for ch, c in follower.coeffs.items():
        if ch is Channel.OWN_OBS:
            u_followers = u_followers + c * ys
        elif ch is Channel.MAJOR_OBS:
            u_followers = u_followers + c * yM[:, None]
        else:
            raise ContractViolation(f"follower policy uses unsupported channel {ch.value}")
    own = u_followers[:, 0]
    mean = u_followers.mean(axis=1)

    obs = {Channel.LEADER_OBS: y0, Channel.MAJOR_OBS: yM, Channel.POP_MEAN_OBS: ybar, Channel.OWN_OBS: ys[:, 0]}
    major = _policy_on(profile.get(Role.MAJOR, LinearPolicy()), obs)
    leader_policy = profile.get(Role.LEADER, LinearPolicy())
    if isinstance(leader_policy, IncentivePolicy):
        monitored = mean if leader_policy.monitored is Action.POP_MEAN else major
        leader = _policy_on(leader_policy.base, obs) + leader_policy.gain * (
            monitored - _policy_on(leader_policy.reference, obs)
        )
    else:
        leader = _policy_on(leader_policy, obs)

    values = {Action.LEADER: leader, Action.MAJOR: major, Action.OWN: own, Action.POP_MEAN: mean, Action.OMEGA0: omega}
    total = np.zeros(m)
    for w, combo in cost.terms:
        s = sum(c * values[a] for a, c in combo.items())
        total += w * s * s
    return total


def mc_expected_cost(
    cost: QuadraticCostSpec, profile, layout: Layout, cfg: MonteCarloConfig
) -> tuple[float, float]:
    """Batch-means estimate of the expected cost and its standard error.

    Every follower is simulated individually (follower 1 is the one whose
    own action enters the cost).  Batch ``b`` draws from its own stream
    spawned from ``cfg.seed``, so results are reproducible bit for bit.
    """
    check_profile(layout, profile)
    sizes = [len(s) for s in np.array_split(np.arange(cfg.samples), cfg.batches)]
    chunk = max(1, _CHUNK_CELLS // layout.n)
    means, sq = [], 0.0
    for b, size in enumerate(sizes):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(b,)))
        total, total_sq, done = 0.0, 0.0, 0
        while done < size:
            m = min(chunk, size - done)
            vals = _simulate_chunk(cost, profile, layout, rng, m)
            total += float(vals.sum())
            total_sq += float(np.dot(vals, vals))
            done += m
        means.append(total / size)
        sq += total_sq
    means = np.array(means)
    estimate = float(np.dot(means, sizes) / cfg.samples)
    if cfg.batches >= 2:
        se = float(np.std(means, ddof=1) / math.sqrt(cfg.batches))
    else:
        var = sq / cfg.samples - estimate**2
        se = math.sqrt(max(var, 0.0) / (cfg.samples - 1))
    return estimate, se


# ---------------------------------------------------------------------------
# exact best responses


def _player_policy(profile, player: Role) -> LinearPolicy:
    p = profile.get(player, LinearPolicy())
    return p.base if isinstance(p, IncentivePolicy) else p


def best_response_improvement(cost: QuadraticCostSpec, profile, player: Role, layout: Layout) -> float:
    """How much ``player`` gains by re-optimizing her linear policy, others fixed.

    The cost is an exact quadratic in her coefficients; its gradient and
    Hessian are read off by exact evaluations and the optimum is one solve.
    For a follower, only the distinguished follower deviates.
    """
    player = Role(player)
    chans = layout.info(player)
    start = _player_policy(profile, player)
    c0 = np.array([start[ch] for ch in chans])

    def J(c):
        dev = LinearPolicy(dict(zip(chans, c)))
        return expected_cost(cost, profile, layout, deviator=player, deviation=dev)

    k = len(chans)
    eye = np.eye(k)
    j0 = J(c0)
    jp = np.array([J(c0 + e) for e in eye])
    jm = np.array([J(c0 - e) for e in eye])
    grad = (jp - jm) / 2
    hess = np.empty((k, k))
    for a in range(k):
        hess[a, a] = jp[a] + jm[a] - 2 * j0
        for b in range(a + 1, k):
            hess[a, b] = hess[b, a] = J(c0 + eye[a] + eye[b]) - jp[a] - jp[b] + j0
    try:
        chol = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        raise SingularProblemError(f"{player.value}'s cost is not strictly convex in her policy coefficients") from None
    z = np.linalg.solve(chol, grad)
    return max(0.0, 0.5 * float(z @ z))


def pointwise_improvement(
    cost: QuadraticCostSpec, profile, player: Role, layout: Layout, realizations: int = 1000, seed: int = 0
) -> float:
    """Largest per-observation gain from re-optimizing the action itself.

    Samples the player's observations and, for each realization, compares
    the prescribed action with the minimizer of her conditional expected
    cost.  Covers non-linear deviations on the sampled grid.
    """
    player = Role(player)
    res = stationarity_residual(cost, profile, player, layout)
    ys = [layout.channel(ch) for ch in res.channels]
    gram = np.array([[a.cov(b) for b in ys] for a in ys])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    obs = rng.multivariate_normal(np.zeros(len(ys)), gram, size=realizations, method="cholesky")
    g = obs @ res.coeffs
    return float(np.max(g * g) / (2 * res.curvature))


# ---------------------------------------------------------------------------
# certification


@dataclass
class CertificationReport:
    verdict: str
    per_player_improvement: dict
    leader_gap: float
    tolerances: dict
    seed: int | None = None
    stages: dict = field(default_factory=dict)
    label: str = "optimistic"
    monte_carlo: dict | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "label": self.label,
            "per_player_improvement": self.per_player_improvement,
            "leader_gap": self.leader_gap,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "stages": self.stages,
        }
        if self.monte_carlo is not None:
            out["monte_carlo"] = self.monte_carlo
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _game_of(spec, solution):
    """Costs, layout, incentive profile, benchmark leader cost and monitored pair."""
    from . import major, pn

    if isinstance(solution, pn.PnSolution):
        if not isinstance(spec, PnGameSpec):
            raise ContractViolation("an all-followers solution needs an all-followers spec")
        if solution.gain is None:
            raise ContractViolation("solution carries no incentive gain")
        leader, follower = build_pn_costs(spec)
        lay = Layout(Game.PN, spec.n)
        bench = pn.pn_profile(pn.pn_leader_optimal(spec), incentive=False)
        players = {Role.FOLLOWER: follower}
        profile = pn.pn_profile(solution)
    elif isinstance(solution, (major.MajSolution, major.ZeroLossSolution)):
        if not isinstance(spec, MajGameSpec):
            raise ContractViolation("a major/minor solution needs a major/minor spec")
        if solution.gain is None:
            raise ContractViolation("solution carries no incentive gain")
        shared = isinstance(solution, major.ZeroLossSolution)
        costs = build_zero_loss_costs(spec) if shared else build_maj_costs(spec)
        leader = costs[0]
        lay = Layout(Game.MAJ_SHARED if shared else Game.MAJ, spec.n)
        if shared:
            profile = major.zero_loss_profile(solution)
            bench = major.zero_loss_profile(major.zero_loss_plan(spec), incentive=False)
        else:
            profile = major.maj_profile(solution)
            bench = major.maj_profile(major.maj_leader_major_optimal(spec), incentive=False)
        players = {Role.MAJOR: costs[1], Role.FOLLOWER: costs[2]}
    else:
        raise ContractViolation(f"cannot certify a {type(solution).__name__}")
    if solution.n != spec.n:
        raise ContractViolation(f"solution is for n={solution.n} but the spec has n={spec.n}")
    return leader, players, lay, profile, bench


def certify_incentive(
    spec,
    solution,
    epsilons: tuple[float, float] = (0.0, 0.0),
    tol: float = EXACT_TOL,
    mc: MonteCarloConfig | None = None,
) -> CertificationReport:
    """Check that ``solution``'s incentive policy is an epsilon-incentive strategy.

    (a) no follower (nor the major) gains more than ``eps_hat`` by deviating;
    (b) the leader's realized cost is within ``eps0`` of her benchmark
    (leader-optimal in the all-followers game, leader-major optimal with a
    major follower); (c) on path the monitored action equals its reference,
    so the incentive realizes the base policy.
    """
    eps0, eps_hat = (float(e) for e in epsilons)
    leader, players, lay, profile, bench = _game_of(spec, solution)

    improvements = {r.value: best_response_improvement(c, profile, r, lay) for r, c in players.items()}
    j_realized = expected_cost(leader, profile, lay)
    j_bench = expected_cost(leader, bench, lay)
    gap = j_realized - j_bench

    inc = profile[Role.LEADER]
    acts = action_vectors(lay, profile)
    off_path = (acts[inc.monitored] - apply_policy(lay, inc.reference)).mean_square()

    stages = {
        "epsilon_nash_response": all(v <= eps_hat + tol for v in improvements.values()),
        "epsilon_leader_optimal": gap <= eps0 + tol,
        "reference_consistent": off_path <= tol,
    }
    report = CertificationReport(
        verdict="pass",
        per_player_improvement=improvements,
        leader_gap=gap,
        tolerances={"eps0": eps0, "eps_hat": eps_hat, "exact": tol},
        seed=None if mc is None else mc.seed,
        stages=stages,
    )
    if mc is not None:
        est, se = mc_expected_cost(leader, profile, lay, mc)
        ok = abs(est - j_realized) <= MC_SIGMAS * se
        report.monte_carlo = {
            "leader_cost_estimate": est,
            "standard_error": se,
            "leader_cost_exact": j_realized,
            "samples": mc.samples,
            "batches": mc.batches,
            "within_4se": ok,
        }
        report.tolerances["monte_carlo_sigmas"] = MC_SIGMAS
        stages["monte_carlo_consistent"] = ok
    stages["epsilon_incentive"] = all(stages.values())
    report.verdict = "pass" if stages["epsilon_incentive"] else "fail"
    return report
