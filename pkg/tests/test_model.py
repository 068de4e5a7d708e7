import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stacklab import (
    Action,
    Channel,
    ContractViolation,
    Game,
    IncentivePolicy,
    InvalidSpecError,
    LinearPolicy,
    MajGameSpec,
    PnGameSpec,
    QuadraticCostSpec,
    Role,
    build_maj_costs,
    build_pn_costs,
    build_zero_loss_costs,
)
from stacklab.model import load_spec

L, J, F, M, W = Action.LEADER, Action.MAJOR, Action.OWN, Action.POP_MEAN, Action.OMEGA0


def test_pn_leader_cost_terms():
    leader, follower = build_pn_costs(PnGameSpec(2, 1, 2, 1, n=5))
    assert leader.as_list() == [(2.0, {"u0": 1.0}), (1.0, {"u0": 1.0, "omega0": 1.0, "ubar": 1.0})]
    assert follower.as_list() == [(2.0, {"ui": 1.0}), (1.0, {"ui": 1.0, "u0": 1.0, "omega0": 1.0, "ubar": 1.0})]


def test_zero_weight_term_drops():
    cost = QuadraticCostSpec(((2.0, {L: 1}), (0.0, {L: 1, W: 1, M: 1})))
    assert cost.as_list() == [(2.0, {"u0": 1.0})]


def test_cost_at_zero_is_zero():
    _, follower = build_pn_costs(PnGameSpec(2, 1, 2, 1))
    assert follower({F: 0, L: 0, W: 0, M: 0}) == 0.0


def test_maj_costs():
    leader, major, minor = build_maj_costs(MajGameSpec(r0=2, rM=1, r=2, qM=1, q0=1, qhat0=1, q=1))
    assert major.as_list() == [(1.0, {"uM": 1.0}), (1.0, {"u0": 1.0, "uM": 1.0, "ubar": 1.0, "omega0": 1.0})]
    assert len(leader.terms) == 3
    leader, _, _ = build_maj_costs(MajGameSpec(r0=2, rM=1, r=2, qM=1, q0=1, qhat0=0, q=1))
    assert len(leader.terms) == 2
    assert minor.actions() == {F, J, M, W}


def test_zero_loss_minor_cost():
    _, _, minor = build_zero_loss_costs(MajGameSpec(r0=2, rM=1, r=1, qM=1, q0=1, qhat0=0, q=0, n=4))
    assert minor.as_list() == [(1.0, {"ui": 1.0, "ubar": -1.0}), (1.0, {"ui": 1.0, "uM": -1.0})]


@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5))
def test_costs_are_nonnegative(vals):
    leader, major, minor = build_maj_costs(MajGameSpec(r0=2, rM=1, r=2, qM=1, q0=1, qhat0=1, q=1))
    values = dict(zip((L, J, F, M, W), vals))
    for c in (leader, major, minor):
        assert c(values) >= 0


@pytest.mark.parametrize("kw", [dict(r0=0, q0=1, r=1, q=1), dict(r0=1, q0=-1, r=1, q=1),
                                dict(r0=1, q0=1, r=1, q=1, n=0), dict(r0=1, q0=1, r=1, q=1, n=2.5),
                                dict(r0=1, q0=float("nan"), r=1, q=1)])
def test_pn_spec_rejects_invalid(kw):
    with pytest.raises(InvalidSpecError):
        PnGameSpec(**kw)


def test_maj_spec_allows_zero_tracking_weights():
    s = MajGameSpec(r0=1, rM=1, r=1, qM=1, q0=0, qhat0=0, q=0)
    assert s.q0 == 0
    with pytest.raises(InvalidSpecError):
        MajGameSpec(r0=1, rM=0, r=1, qM=1, q0=0, qhat0=0, q=0)


def test_spec_json_round_trip(tmp_path):
    s = MajGameSpec(r0=2, rM=1, r=2, qM=1, q0=1, qhat0=1, q=1, n=7)
    assert MajGameSpec.from_json(s.to_json()) == s
    assert set(json.loads(s.to_json())) == {"r0", "rM", "r", "qM", "q0", "qhat0", "q", "n"}
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"game": "maj", "spec": s.to_dict()}))
    assert load_spec(p) == s
    p.write_text(json.dumps({"r0": 2, "q0": 1, "r": 2, "q": 1}))
    assert load_spec(p) == PnGameSpec(2, 1, 2, 1)
    with pytest.raises(InvalidSpecError):
        PnGameSpec.from_dict({"r0": 1})


def test_linear_policy_information_contract():
    LinearPolicy.of(yi=0.5).check_information(Game.PN, Role.FOLLOWER)
    with pytest.raises(ContractViolation):
        LinearPolicy.of(y0=0.5).check_information(Game.PN, Role.FOLLOWER)
    with pytest.raises(ContractViolation):
        LinearPolicy.of(yi=0.5).check_information(Game.MAJ, Role.MAJOR)
    assert LinearPolicy.of(yi=0.0).channels() == frozenset()


def test_incentive_with_zero_gain_is_base():
    base = LinearPolicy.of(y0=-0.2, yM=0.1)
    inc = IncentivePolicy(base, 0.0, LinearPolicy.of(yM=0.3), Action.MAJOR)
    obs = {Channel.LEADER_OBS: 1.3, Channel.MAJOR_OBS: -0.7}
    for u in (-5.0, 0.0, 2.0):
        assert inc(obs, u) == base(obs)
    inc = IncentivePolicy(base, 2.0, LinearPolicy.of(yM=0.3), Action.MAJOR)
    assert inc(obs, 1.0) == pytest.approx(base(obs) + 2.0 * (1.0 - 0.3 * -0.7))


def test_incentive_reference_must_be_major_signal():
    with pytest.raises(ContractViolation):
        IncentivePolicy(LinearPolicy(), 1.0, LinearPolicy.of(y0=1.0), Action.MAJOR)
    with pytest.raises(ContractViolation):
        IncentivePolicy(LinearPolicy(), 1.0, LinearPolicy(), Action.OWN)
