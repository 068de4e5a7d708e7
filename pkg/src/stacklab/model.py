"""Domain types: game specifications, observation channels, policies and costs.

Every random quantity in these games is built from the common state
``omega0`` plus independent standard-normal noise, and every policy is
linear in the observations a player holds.  Followers are exchangeable, so
the population enters through two aggregate channels (the mean observation
and the mean action) instead of N separate ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import ContractViolation, InvalidSpecError


class Role(str, Enum):
    LEADER = "leader"
    MAJOR = "major"
    FOLLOWER = "follower"  # a representative follower (P_N) or minor follower


class Channel(str, Enum):
    LEADER_OBS = "y0"
    MAJOR_OBS = "yM"
    OWN_OBS = "yi"
    POP_MEAN_OBS = "ybar"


class Action(str, Enum):
    """Variables a quadratic cost can depend on."""

    LEADER = "u0"
    MAJOR = "uM"
    OWN = "ui"
    POP_MEAN = "ubar"
    OMEGA0 = "omega0"


class Game(str, Enum):
    PN = "pn"
    MAJ = "maj"
    MAJ_SHARED = "maj_shared"  # every follower observes the major's signal


_INFO = {
    Game.PN: {
        Role.LEADER: (Channel.LEADER_OBS, Channel.POP_MEAN_OBS),
        Role.FOLLOWER: (Channel.OWN_OBS,),
    },
    Game.MAJ: {
        Role.LEADER: (Channel.LEADER_OBS, Channel.MAJOR_OBS),
        Role.MAJOR: (Channel.MAJOR_OBS,),
        Role.FOLLOWER: (Channel.OWN_OBS, Channel.MAJOR_OBS),
    },
    Game.MAJ_SHARED: {
        Role.LEADER: (Channel.LEADER_OBS, Channel.MAJOR_OBS),
        Role.MAJOR: (Channel.MAJOR_OBS,),
        Role.FOLLOWER: (Channel.MAJOR_OBS,),
    },
}


def information_set(game: Game, role: Role) -> tuple[Channel, ...]:
    """Observation channels available to ``role`` in ``game``, in canonical order."""
    try:
        return _INFO[Game(game)][Role(role)]
    except KeyError:
        raise ContractViolation(f"role {role!s} does not play in game {game!s}") from None


def roles(game: Game) -> tuple[Role, ...]:
    return tuple(_INFO[Game(game)])


# ---------------------------------------------------------------------------
# game specifications


def _check_int_n(n):
    if isinstance(n, bool) or not isinstance(n, int):
        if isinstance(n, float) and n.is_integer():
            return int(n)
        raise InvalidSpecError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    return n


def _check_weight(name, value, strict):
    value = float(value)
    if not math.isfinite(value):
        raise InvalidSpecError(f"{name} must be finite, got {value}")
    if strict and value <= 0:
        raise InvalidSpecError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise InvalidSpecError(f"{name} must be >= 0, got {value}")
    return value


class _SpecIO:
    """JSON round-tripping shared by the two spec types."""

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: Mapping):
        names = [f.name for f in fields(cls)]
        missing = [k for k in names if k not in doc and k != "n"]
        if missing:
            raise InvalidSpecError(f"spec document is missing keys: {', '.join(missing)}")
        return cls(**{k: doc[k] for k in names if k in doc})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    def with_n(self, n: int):
        return type(self)(**{**self.to_dict(), "n": n})


@dataclass(frozen=True)
class PnGameSpec(_SpecIO):
    """Weights of the game with one leader and N directly incentivized followers."""

    r0: float
    q0: float
    r: float
    q: float
    n: int = 1

    def __post_init__(self):
        for name in ("r0", "q0", "r", "q"):
            object.__setattr__(self, name, _check_weight(name, getattr(self, name), True))
        object.__setattr__(self, "n", _check_int_n(self.n))


@dataclass(frozen=True)
class MajGameSpec(_SpecIO):
    """Weights of the game with a leader, one major follower and N minor followers."""

    r0: float
    rM: float
    r: float
    qM: float
    q0: float
    qhat0: float
    q: float
    n: int = 1

    def __post_init__(self):
        for name in ("r0", "rM", "r", "qM"):
            object.__setattr__(self, name, _check_weight(name, getattr(self, name), True))
        for name in ("q0", "qhat0", "q"):
            object.__setattr__(self, name, _check_weight(name, getattr(self, name), False))
        object.__setattr__(self, "n", _check_int_n(self.n))


def load_spec(path, game: Game | str | None = None):
    """Read a spec from a JSON file.

    The document may hold the spec keys at top level or under ``"spec"`` (the
    layout written by ``stacklab solve``).  ``game`` picks the spec type; when
    omitted it is read from the document's ``"game"`` key or guessed from the
    keys present.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if game is None:
        game = doc.get("game")
    body = doc.get("spec", doc)
    if game is None:
        game = Game.MAJ if "rM" in body else Game.PN
    game = Game(game)
    cls = PnGameSpec if game is Game.PN else MajGameSpec
    return cls.from_dict(body)


# ---------------------------------------------------------------------------
# policies


def _freeze(mapping, key_type):
    out = {}
    for k, v in dict(mapping).items():
        k = key_type(k)
        v = float(v)
        if v != 0.0:
            out[k] = v
    return MappingProxyType(out)


@dataclass(frozen=True)
class LinearPolicy:
    """``u = sum_c coeffs[c] * y_c``; absent channels have coefficient zero."""

    coeffs: Mapping[Channel, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _freeze(self.coeffs, Channel))

    def __getitem__(self, channel) -> float:
        return self.coeffs.get(Channel(channel), 0.0)

    def __call__(self, observations: Mapping[Channel, float]) -> float:
        return sum(c * observations[ch] for ch, c in self.coeffs.items())

    def channels(self) -> frozenset:
        return frozenset(self.coeffs)

    def check_information(self, game: Game, role: Role):
        extra = self.channels() - set(information_set(game, role))
        if extra:
            names = ", ".join(sorted(ch.value for ch in extra))
            raise ContractViolation(f"{Role(role).value} policy uses unobserved channel(s): {names}")

    @classmethod
    def of(cls, **coeffs):
        """``LinearPolicy.of(y0=-0.1, ybar=0.2)`` keyed by channel values."""
        return cls({Channel(k): v for k, v in coeffs.items()})


@dataclass(frozen=True)
class IncentivePolicy:
    """Leader policy ``base(y) + gain * (monitored action - reference(y))``."""

    base: LinearPolicy
    gain: float
    reference: LinearPolicy
    monitored: Action = Action.POP_MEAN

    def __post_init__(self):
        object.__setattr__(self, "gain", float(self.gain))
        object.__setattr__(self, "monitored", Action(self.monitored))
        if self.monitored not in (Action.POP_MEAN, Action.MAJOR):
            raise ContractViolation("an incentive can only monitor the mean action or the major action")
        if self.monitored is Action.MAJOR and self.reference.channels() - {Channel.MAJOR_OBS}:
            raise ContractViolation("a major-action reference may only use the major's observation")

    def __call__(self, observations, monitored_action: float) -> float:
        return self.base(observations) + self.gain * (monitored_action - self.reference(observations))

    def channels(self) -> frozenset:
        return self.base.channels() | self.reference.channels()

    def check_information(self, game: Game, role: Role):
        self.base.check_information(game, role)
        self.reference.check_information(game, role)


# ---------------------------------------------------------------------------
# quadratic costs


@dataclass(frozen=True)
class QuadraticCostSpec:
    """``sum_k weight_k * (sum_a combo_k[a] * value_a) ** 2``."""

    terms: tuple = ()

    def __post_init__(self):
        frozen = []
        for weight, combo in self.terms:
            weight = float(weight)
            if weight < 0 or not math.isfinite(weight):
                raise InvalidSpecError(f"cost weights must be finite and >= 0, got {weight}")
            if weight == 0.0:
                continue
            frozen.append((weight, _freeze(combo, Action)))
        object.__setattr__(self, "terms", tuple(frozen))

    def __call__(self, values: Mapping[Action, float]) -> float:
        total = 0.0
        for weight, combo in self.terms:
            s = sum(c * values[Action(a)] for a, c in combo.items())
            total += weight * s * s
        return total

    def actions(self) -> frozenset:
        return frozenset(a for _, combo in self.terms for a in combo)

    def as_list(self) -> list:
        """Plain ``[(weight, {name: coeff})]`` form, handy for printing and comparisons."""
        return [(w, {a.value: c for a, c in combo.items()}) for w, combo in self.terms]


def build_pn_costs(spec: PnGameSpec) -> tuple[QuadraticCostSpec, QuadraticCostSpec]:
    """Leader and follower costs of the all-followers game."""
    L, F, M, W = Action.LEADER, Action.OWN, Action.POP_MEAN, Action.OMEGA0
    leader = QuadraticCostSpec(((spec.r0, {L: 1}), (spec.q0, {L: 1, W: 1, M: 1})))
    follower = QuadraticCostSpec(((spec.r, {F: 1}), (spec.q, {F: 1, L: 1, W: 1, M: 1})))
    return leader, follower


def build_maj_costs(spec: MajGameSpec) -> tuple[QuadraticCostSpec, QuadraticCostSpec, QuadraticCostSpec]:
    """Leader, major and minor costs of the major/minor game."""
    L, J, F, M, W = Action.LEADER, Action.MAJOR, Action.OWN, Action.POP_MEAN, Action.OMEGA0
    leader = QuadraticCostSpec(
        ((spec.r0, {L: 1}), (spec.q0, {L: 1, J: 1, M: 1, W: 1}), (spec.qhat0, {L: 1, J: 1}))
    )
    major = QuadraticCostSpec(((spec.rM, {J: 1}), (spec.qM, {L: 1, J: 1, M: 1, W: 1})))
    minor = QuadraticCostSpec(((spec.r, {F: 1}), (spec.q, {F: 1, J: 1, M: 1, W: 1})))
    return leader, major, minor


def build_zero_loss_costs(spec: MajGameSpec) -> tuple[QuadraticCostSpec, QuadraticCostSpec, QuadraticCostSpec]:
    """Costs of the shared-signal variant in which minors imitate the major.

    The leader only weighs the major's action by 1/N inside the tracking
    term, and minors pay for distance from the crowd and from the major.
    Uses ``r0, q0, rM, qM`` and ``n`` from ``spec``; the other weights are ignored.
    """
    L, J, F, M, W = Action.LEADER, Action.MAJOR, Action.OWN, Action.POP_MEAN, Action.OMEGA0
    n = spec.n
    leader = QuadraticCostSpec(((spec.r0, {L: 1}), (spec.q0, {L: 1, J: 1.0 / n, M: 1, W: 1})))
    major = QuadraticCostSpec(((spec.rM, {J: 1}), (spec.qM, {L: 1, J: 1, M: 1, W: 1})))
    minor = QuadraticCostSpec(((1.0, {F: 1, M: -1}), (1.0, {F: 1, J: -1})))
    return leader, major, minor


# ---------------------------------------------------------------------------
# solver output


@dataclass(frozen=True)
class EquilibriumSolution:
    """Solved coefficients with per-player stationarity residual norms."""

    params: Mapping[str, float]
    residuals: Mapping[str, float]
    n: int
    tolerance: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "residuals", MappingProxyType(dict(self.residuals)))

    @property
    def ok(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "params": dict(self.params),
            "residuals": dict(self.residuals),
            "tolerance": self.tolerance,
        }
