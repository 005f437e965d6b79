import numpy as np
import pytest

from aoisched.experiments import ExperimentSpec, generate_instance, random_instance
from aoisched.kernel import FactoredKernel
from aoisched.model import State, SystemConfig, enumerate_states
from aoisched.sim import ReducedPolicyAdapter
from aoisched.solver import relative_value_iteration
from aoisched.special_case import (
    ReducedModel,
    build_reduced_model,
    check_psi_structure,
    decision_grid,
    expand_reduced_policy,
    extract_psi,
    select_cheapest,
    solve_reduced,
)

from conftest import type1, type2


def flat_costs(costs, m=2, cap=4):
    return SystemConfig(tuple(type2((0.0,), cs=c) for c in costs), m, cap)


def test_select_cheapest_examples():
    assert select_cheapest(flat_costs((3.0, 1.0, 2.0)), (0, 0, 0)) == (1, 2)
    assert select_cheapest(flat_costs((2.0, 2.0, 2.0)), (0, 0, 0)) == (0, 1)


def test_select_cheapest_uses_weights():
    cfg = SystemConfig(
        (type2((1.0,), cs=1.0, weight=3.0), type2((1.0,), cs=1.0), type2((1.0,), cs=1.0, weight=0.5)), 2, 3
    )
    assert select_cheapest(cfg, (0, 0, 0)) == (1, 2)


def test_rejects_type1():
    cfg = SystemConfig((type1((1.0,)), type2((1.0,)), type2((1.0,))), 2, 3)
    with pytest.raises(ValueError):
        build_reduced_model(cfg)


def test_identical_devices_collapse_to_one_state():
    model = build_reduced_model(flat_costs((1.5, 1.5, 1.5)))
    assert model.ch_values.tolist() == [3.0] and model.ch_probs.tolist() == [1.0]


def test_three_device_aggregation():
    cfg = generate_instance(ExperimentSpec(n_type1=0, n_type2=3, n_channel=4), 3)
    model = build_reduced_model(cfg)
    assert len(model.ch_index) == 64 and len(model.ch_values) <= 64
    assert model.ch_probs.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(model.ch_values) > 0)
    for i, h in enumerate(enumerate_states(cfg).channel_vectors()):
        chosen = model.designated[i]
        total = sum(cfg.devices[n].weight * cfg.devices[n].update_cost(h[n]) for n in chosen)
        assert model.ch_values[model.ch_index[i]] == pytest.approx(total, abs=1e-11)


def test_cap_one_never_transmits():
    model = build_reduced_model(flat_costs((0.3, 0.4), cap=1))
    value, transmit, _ = solve_reduced(model)
    assert not transmit.any() and value.theta == pytest.approx(1.0)


def test_free_transmission_always_transmits():
    cfg = flat_costs((0.3, 0.4), cap=5)
    model = ReducedModel(cfg, np.array([0.0]), np.array([1.0]), np.array([[0, 1]], dtype=np.int32), np.array([0]))
    value, transmit, _ = solve_reduced(model)
    assert transmit.all() and value.theta == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_reduced_theta_matches_full(seed):
    cfg = random_instance(seed, max_states=3000, all_type2=True)
    full, full_pol, _ = relative_value_iteration(cfg)
    value, transmit, _ = solve_reduced(build_reduced_model(cfg))
    assert value.theta == pytest.approx(full.theta, abs=1e-8)


def test_expanded_policy_matches_full_up_to_ties():
    cfg = generate_instance(ExperimentSpec(n_type1=0, n_type2=3, n_channel=4), 5)
    kern = FactoredKernel(cfg)
    full, full_pol, _ = relative_value_iteration(kern)
    model = build_reduced_model(cfg)
    _, transmit, _ = solve_reduced(model)
    expanded = expand_reduced_policy(model, transmit).action_idx
    q = kern.q_values(full.v)
    rows = np.arange(len(q))
    gap = np.abs(q[rows, expanded] - q[rows, full_pol.action_idx])
    assert np.all(gap <= 1e-6)


def test_adapter_returns_designated_set():
    cfg = generate_instance(ExperimentSpec(n_type1=0, n_type2=3, n_channel=4), 2)
    model = build_reduced_model(cfg)
    transmit = np.ones((model.dest_cap, len(model.ch_values)), dtype=bool)
    adapter = ReducedPolicyAdapter(model, transmit)
    space = enumerate_states(cfg)
    for k, h in enumerate(space.channel_vectors()):
        s = State((0, 0, 0), 3, tuple(int(x) for x in h))
        assert adapter.decide(s) == select_cheapest(cfg, h) == tuple(model.designated[k])
    assert adapter.decide(State((0, 0, 0), 3, (0, 0, 0))) != ()
    with pytest.raises(ValueError):
        ReducedPolicyAdapter(model, transmit[:, :1])


def test_psi_single_column():
    transmit = np.array([[False], [True], [True]])
    assert extract_psi(transmit).tolist() == [2.0]
    assert check_psi_structure(transmit) == []


def test_psi_fault_injection():
    transmit = np.array([[False, False], [False, True], [True, True]])
    assert check_psi_structure(transmit)[0].kind == "monotone"
    holey = np.array([[False, False], [True, False], [False, True]])
    kinds = sorted(v.kind for v in check_psi_structure(holey))
    assert "upward_closure" in kinds
    never = np.array([[False, False], [True, False], [True, False]])
    assert check_psi_structure(never) == []  # psi = (2, inf) is non-decreasing


def test_decision_grid_rows():
    model = build_reduced_model(flat_costs((0.3, 0.4, 0.9), cap=3))
    _, transmit, _ = solve_reduced(model)
    rows = decision_grid(model, transmit)
    assert len(rows) == 3 and [r[0] for r in rows] == [1, 2, 3]
    assert rows[0][1] == pytest.approx(0.7)
