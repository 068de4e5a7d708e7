"""Exact second-moment calculus for linear policies over Gaussian observations.

All randomness is expanded over five independent sources seen from one
distinguished follower ``i``::

    omega0, w0, wM, wi, w_others  (w_others = sum of the other N-1 followers' noises)

with variances ``(1, 1, 1, 1, N-1)``.  Every observation, action and cost
integrand is a linear combination of these, so expectations, covariances and
conditional means reduce to weighted inner products.  The representation has
a fixed size for any N, which is what makes N = 10**6 as cheap as N = 2.

Conditioning the leader on ``ybar`` instead of the N individual signals is
exact for integrands that are symmetric in the followers, which is the case
for every leader-side quantity evaluated here.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DegenerateGameError, SingularProblemError
from .model import (
    Action,
    Channel,
    Game,
    IncentivePolicy,
    LinearPolicy,
    QuadraticCostSpec,
    Role,
    information_set,
)

log = logging.getLogger(__name__)

SOURCES = ("omega0", "w0", "wM", "wi", "w_others")
ZERO_TOL = 1e-10
COND_WARN = 1e8

Profile = Mapping[Role, "LinearPolicy | IncentivePolicy"]


def conditional_mean_coeff(k: int) -> float:
    """Weight on each of ``k`` unit-noise signals of omega0 in ``E[omega0 | signals]``."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"need at least one observation, got k={k!r}")
    return 1.0 / (k + 1)


@dataclass(frozen=True)
class SourceVector:
    """A zero-mean Gaussian scalar written over the independent source basis."""

    coeffs: np.ndarray
    var: np.ndarray

    def __add__(self, other):
        return SourceVector(self.coeffs + other.coeffs, self.var)

    def __sub__(self, other):
        return SourceVector(self.coeffs - other.coeffs, self.var)

    def __mul__(self, c):
        return SourceVector(self.coeffs * float(c), self.var)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return SourceVector(self.coeffs / float(c), self.var)

    def __neg__(self):
        return SourceVector(-self.coeffs, self.var)

    def cov(self, other) -> float:
        return float(np.dot(self.coeffs * self.var, other.coeffs))

    def mean_square(self) -> float:
        return self.cov(self)


@dataclass(frozen=True)
class Layout:
    """Which game is played and how many followers there are."""

    game: Game
    n: int

    def __post_init__(self):
        object.__setattr__(self, "game", Game(self.game))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def var(self) -> np.ndarray:
        return _variances(self.n)

    @property
    def shared(self) -> bool:
        return self.game is Game.MAJ_SHARED

    def source(self, **coeffs) -> SourceVector:
        v = np.zeros(len(SOURCES))
        for name, c in coeffs.items():
            v[SOURCES.index(name)] = c
        return SourceVector(v, self.var)

    def zero(self) -> SourceVector:
        return self.source()

    def channel(self, ch: Channel) -> SourceVector:
        return _channel(self, Channel(ch))

    def _build_channel(self, ch: Channel) -> SourceVector:
        if ch is Channel.LEADER_OBS:
            return self.source(omega0=1, w0=1)
        if ch is Channel.MAJOR_OBS or self.shared:
            return self.source(omega0=1, wM=1)
        if ch is Channel.OWN_OBS:
            return self.source(omega0=1, wi=1)
        return self.source(omega0=1, wi=1.0 / self.n, w_others=1.0 / self.n)

    def others_obs_sum(self, ch: Channel) -> SourceVector:
        """Sum over the N-1 other followers of their copy of channel ``ch``."""
        ch = Channel(ch)
        m = self.n - 1
        if ch is Channel.OWN_OBS and not self.shared:
            return self.source(omega0=m, w_others=1)
        return self.channel(ch) * m

    def info(self, role: Role) -> tuple[Channel, ...]:
        return information_set(self.game, role)


@lru_cache(maxsize=None)
def _variances(n: int) -> np.ndarray:
    var = np.array([1.0, 1.0, 1.0, 1.0, float(n - 1)])
    var.flags.writeable = False
    return var


@lru_cache(maxsize=4096)
def _channel(layout: Layout, ch: Channel) -> SourceVector:
    # shared between callers, so frozen; SourceVector arithmetic never mutates in place
    vec = layout._build_channel(ch)
    vec.coeffs.flags.writeable = False
    return vec


def apply_policy(layout: Layout, policy: LinearPolicy) -> SourceVector:
    out = layout.zero()
    for ch, c in policy.coeffs.items():
        out = out + layout.channel(ch) * c
    return out


def _base(policy):
    return policy.base if isinstance(policy, IncentivePolicy) else policy


def check_profile(layout: Layout, profile: Profile):
    for role, policy in profile.items():
        role = Role(role)
        if role is not Role.LEADER and isinstance(policy, IncentivePolicy):
            raise ContractViolation("only the leader may announce an incentive policy")
        policy.check_information(layout.game, role)


def action_vectors(
    layout: Layout,
    profile: Profile,
    deviator: Role | None = None,
    deviation: LinearPolicy | None = None,
) -> dict[Action, SourceVector]:
    """Every cost variable as a source vector.

    When ``deviator`` is given, that player (for followers: only the
    distinguished follower ``i``) uses ``deviation`` instead of her profile
    policy.  A leader incentive is composed with whatever the monitored
    action turns out to be, so deviations feed through the gain.
    """
    follower = profile.get(Role.FOLLOWER, LinearPolicy())
    own_policy = deviation if deviator is Role.FOLLOWER else follower
    own = apply_policy(layout, own_policy)
    others = layout.zero()
    for ch, c in follower.coeffs.items():
        others = others + layout.others_obs_sum(ch) * c
    mean = (own + others) / layout.n

    major_policy = deviation if deviator is Role.MAJOR else profile.get(Role.MAJOR, LinearPolicy())
    major = apply_policy(layout, major_policy)

    leader_policy = deviation if deviator is Role.LEADER else profile.get(Role.LEADER, LinearPolicy())
    if isinstance(leader_policy, IncentivePolicy):
        monitored = mean if leader_policy.monitored is Action.POP_MEAN else major
        leader = apply_policy(layout, leader_policy.base) + leader_policy.gain * (
            monitored - apply_policy(layout, leader_policy.reference)
        )
    else:
        leader = apply_policy(layout, leader_policy)

    return {
        Action.LEADER: leader,
        Action.MAJOR: major,
        Action.OWN: own,
        Action.POP_MEAN: mean,
        Action.OMEGA0: layout.source(omega0=1),
    }


def _term_vector(combo, actions):
    z = None
    for a, c in combo.items():
        z = actions[a] * c if z is None else z + actions[a] * c
    return z


def expected_cost(
    cost: QuadraticCostSpec,
    profile: Profile,
    layout: Layout,
    deviator: Role | None = None,
    deviation: LinearPolicy | None = None,
) -> float:
    """Exact ``E[cost]`` under the profile (and optional unilateral deviation)."""
    check_profile(layout, profile)
    missing = {Action.LEADER: Role.LEADER, Action.MAJOR: Role.MAJOR, Action.OWN: Role.FOLLOWER,
               Action.POP_MEAN: Role.FOLLOWER}
    for a in cost.actions():
        if a in missing and missing[a] not in profile:
            raise ContractViolation(f"cost uses {a.value} but the profile has no {missing[a].value} policy")
    actions = action_vectors(layout, profile, deviator, deviation)
    return sum(w * _term_vector(combo, actions).mean_square() for w, combo in cost.terms)


def conditional_coeffs(layout: Layout, x: SourceVector, channels: Sequence[Channel]) -> np.ndarray:
    """Coefficients ``c`` with ``E[x | y_channels] = sum_k c_k y_k``."""
    ys, gram_inv = _projector(layout, tuple(Channel(ch) for ch in channels))
    return gram_inv @ (ys @ (x.coeffs * layout.var))


@lru_cache(maxsize=1024)
def _projector(layout: Layout, channels: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Channel matrix and inverse Gram matrix of an information set."""
    ys = np.array([layout.channel(ch).coeffs for ch in channels])
    gram = (ys * layout.var) @ ys.T
    return ys, np.linalg.inv(gram)


@dataclass(frozen=True)
class ResidualForm:
    """``E[d cost / d u_player | player's observations]`` as a linear form."""

    role: Role
    channels: tuple
    coeffs: np.ndarray
    curvature: float

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if len(self.coeffs) else 0.0

    def is_zero(self, tol: float = ZERO_TOL) -> bool:
        return self.norm() <= tol

    def as_dict(self) -> dict:
        return {ch.value: float(c) for ch, c in zip(self.channels, self.coeffs)}


def minor_response_sensitivity(layout: Layout, minor_cost: QuadraticCostSpec, profile: Profile) -> float:
    """How much each minor's action moves per unit move of the major's action.

    Minors best-respond through their own stationarity; perturbing the major's
    policy by ``delta(yM)`` shifts every minor by ``k * delta(yM)``.  The
    minors' residual is affine in (their coefficients, the major's), so ``k``
    comes from one small linear solve.
    """
    chans = layout.info(Role.FOLLOWER)
    follower = profile.get(Role.FOLLOWER, LinearPolicy())

    def res(fcoeffs, major_shift):
        prof = dict(profile)
        prof[Role.FOLLOWER] = LinearPolicy(dict(zip(chans, fcoeffs)))
        prof[Role.MAJOR] = LinearPolicy(
            {Channel.MAJOR_OBS: profile.get(Role.MAJOR, LinearPolicy())[Channel.MAJOR_OBS] + major_shift}
        )
        return stationarity_residual(minor_cost, prof, Role.FOLLOWER, layout).coeffs

    x0 = np.array([follower[ch] for ch in chans])
    f0 = res(x0, 0.0)
    jac = np.column_stack([res(x0 + e, 0.0) - f0 for e in np.eye(len(chans))])
    jb = res(x0, 1.0) - f0
    dx = np.linalg.solve(jac, -jb)
    k = 0.0
    for ch, d in zip(chans, dx):
        if ch is Channel.MAJOR_OBS:
            k = float(d)
        elif abs(d) > 1e-12:
            raise ContractViolation("minor response to the major is not a pure function of yM")
    return k


def derivative_map(
    role: Role, profile: Profile, layout: Layout, response: float = 0.0
) -> dict[Action, float]:
    """Partial derivatives of every cost variable with respect to ``role``'s action.

    ``response`` is the minors' sensitivity to the major (used when the major's
    objective anticipates the minors' Nash reply).
    """
    role = Role(role)
    leader = profile.get(Role.LEADER)
    gain = leader.gain if isinstance(leader, IncentivePolicy) else 0.0
    monitored = leader.monitored if isinstance(leader, IncentivePolicy) else None
    if role is Role.LEADER:
        return {Action.LEADER: 1.0}
    if role is Role.MAJOR:
        d = {Action.MAJOR: 1.0, Action.POP_MEAN: response}
        if monitored is Action.MAJOR:
            d[Action.LEADER] = gain
        elif monitored is Action.POP_MEAN:
            d[Action.LEADER] = gain * response
        return d
    d = {Action.OWN: 1.0, Action.POP_MEAN: 1.0 / layout.n}
    if monitored is Action.POP_MEAN:
        d[Action.LEADER] = gain / layout.n
    return d


def stationarity_residual(
    cost: QuadraticCostSpec,
    profile: Profile,
    player: Role,
    layout: Layout,
    response: float = 0.0,
) -> ResidualForm:
    """Conditional expected gradient of ``cost`` in ``player``'s own action.

    The result is zero exactly when the player's profile policy is a best
    response among all (not only linear) policies, since the conditional
    problem is a strictly convex quadratic.
    """
    player = Role(player)
    check_profile(layout, profile)
    d = derivative_map(player, profile, layout, response)
    actions = action_vectors(layout, profile)
    grad = layout.zero()
    curvature = 0.0
    for w, combo in cost.terms:
        slope = sum(c * d.get(a, 0.0) for a, c in combo.items())
        if slope == 0.0:
            continue
        grad = grad + _term_vector(combo, actions) * (2.0 * w * slope)
        curvature += 2.0 * w * slope * slope
    if curvature <= 0.0:
        raise SingularProblemError(f"{player.value}'s cost has zero curvature in her own action")
    chans = layout.info(player)
    return ResidualForm(player, chans, conditional_coeffs(layout, grad, chans), curvature)


# ---------------------------------------------------------------------------
# generic assembler


@dataclass(frozen=True)
class Stationarity:
    """One block of the stacked system: ``role`` minimizes ``cost``.

    ``anticipate`` names the minors' cost when ``role`` (the major) optimizes
    while accounting for how the minors re-equilibrate.
    """

    role: Role
    cost: QuadraticCostSpec
    anticipate: QuadraticCostSpec | None = None


GAIN = "gain"


def slot_name(slot) -> str:
    role, key = slot
    key = key if key == GAIN else Channel(key).value
    return f"{Role(role).value}.{key}"


def build_profile(values: Mapping, template: Profile | None = None, aliases: Mapping | None = None) -> dict:
    """Profile whose slots ``(role, channel)`` / ``(Role.LEADER, "gain")`` take ``values``.

    Policies in ``template`` supply the incentive structure and any
    coefficient that is not a slot.  ``aliases`` ties a slot to another one.
    """
    template = dict(template or {})
    values = dict(values)
    for slot, target in (aliases or {}).items():
        values[slot] = values[target]
    coeffs, gain = {}, None
    for (role, key), v in values.items():
        role = Role(role)
        if key == GAIN:
            gain = v
        else:
            coeffs.setdefault(role, {})[Channel(key)] = v
    profile = {}
    for role in set(template) | set(coeffs) | ({Role.LEADER} if gain is not None else set()):
        base = template.get(role)
        inner = _base(base) if base is not None else LinearPolicy()
        merged = LinearPolicy({**inner.coeffs, **coeffs.get(role, {})})
        if isinstance(base, IncentivePolicy):
            profile[role] = IncentivePolicy(merged, base.gain if gain is None else gain, base.reference, base.monitored)
        elif gain is not None and role is Role.LEADER:
            raise ContractViolation("a gain slot needs an incentive policy in the template")
        else:
            profile[role] = merged
    return profile


def _sensitivity_key(profile):
    # the minors' Jacobian depends on the profile only through the incentive
    leader = profile.get(Role.LEADER)
    return (leader.monitored, leader.gain) if isinstance(leader, IncentivePolicy) else None


def stacked_residual(layout, conditions, profile, cache: dict | None = None) -> np.ndarray:
    """Residual coefficients of every condition, concatenated.

    ``cache`` memoizes the minors' response sensitivity across calls that
    share the incentive (the probes of one linear solve).
    """
    parts = []
    for j, cond in enumerate(conditions):
        k = 0.0
        if cond.anticipate is not None:
            key = (j, _sensitivity_key(profile))
            if cache is None or key not in cache:
                k = minor_response_sensitivity(layout, cond.anticipate, profile)
                if cache is not None:
                    cache[key] = k
            else:
                k = cache[key]
        parts.append(stationarity_residual(cond.cost, profile, cond.role, layout, k).coeffs)
    return np.concatenate(parts) if parts else np.zeros(0)


def solve_dense(a, b, names: Sequence[str] | None = None, rtol: float = 1e-12) -> np.ndarray:
    """Solve a small square system by LU with partial pivoting.

    Raises ``DegenerateGameError`` naming the unknown whose pivot collapses.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DegenerateGameError(f"stationarity system is not square: {a.shape}")
    names = list(names) if names is not None else [f"x{j}" for j in range(a.shape[1])]
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # reported below with the pivot's name
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    diag = np.abs(np.diag(lu))
    for j, p in enumerate(diag):
        if p <= rtol * scale:
            raise DegenerateGameError(
                f"singular stationarity system: pivot for {names[j]} is {p:.3g}", pivot=names[j]
            )
    cond = np.linalg.cond(a)
    if cond > COND_WARN:
        log.warning("ill-conditioned stationarity system (cond ~ %.3g)", cond)
    return scipy.linalg.lu_solve((lu, piv), b)


def solve_linear_policies(
    layout: Layout,
    conditions: Sequence[Stationarity],
    unknowns: Sequence,
    template: Profile | None = None,
    aliases: Mapping | None = None,
) -> dict:
    """Solve for the slots that zero every condition's residual form.

    Each residual coefficient is affine in the slots, so the system matrix is
    read off by probing at zero and at each unit vector, then solved once.
    """
    unknowns = list(unknowns)
    cache = {}

    def F(x):
        return stacked_residual(layout, conditions, build_profile(dict(zip(unknowns, x)), template, aliases), cache)

    x0 = np.zeros(len(unknowns))
    f0 = F(x0)
    if f0.size != len(unknowns):
        raise DegenerateGameError(
            f"{f0.size} stationarity equations for {len(unknowns)} unknowns; the system must be square"
        )
    a = np.column_stack([F(e) - f0 for e in np.eye(len(unknowns))])
    x = solve_dense(a, -f0, [slot_name(s) for s in unknowns])
    return dict(zip(unknowns, (float(v) for v in x)))
