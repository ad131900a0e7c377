import numpy as np
import pytest

from conftest import random_relaxed_model
from topoforge.exceptions import ModelError
from topoforge.model import DesignModel, EdgeState, Mode, ModeTag, generate_grid, initial_relaxed_model, variable_count
from topoforge.powell import OptimizerConfig
from topoforge.relaxation import RelaxationConfig, eliminate_zero_switches, realize_switches, run_relaxation
from topoforge.simulator import SimConfig, transient

FAST = SimConfig(t_end=0.01, dt=2.5e-4)


def one_edge(*switches, **kw):
    return DesignModel(generate_grid(1, 2), (EdgeState(10.0, 1e-3, 1e-4, *switches, **kw),))


def test_eliminate_keeps_only_large_switch():
    m = eliminate_zero_switches(one_edge(1e-4, 0.7, 1e-4, 1e-4), 0.01)
    st = m.states[0]
    assert st.active() == ("L",)
    assert variable_count(m) == 2


def test_eliminate_noop_when_all_above():
    m = one_edge(0.2, 0.7, 0.5, 0.9)
    assert eliminate_zero_switches(m, 0.01) == m


def test_eliminate_edge_becomes_open():
    topo = generate_grid(2, 2)
    st_on = EdgeState(1.0, 1.0, 1.0, 0.9, 0.9, 0.9, 0.9)
    st_off = EdgeState(1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3, 1e-3)
    m = DesignModel(topo, (st_on, st_off, st_on, st_on))
    out = eliminate_zero_switches(m, 0.01)
    assert out.states[1] == Mode.open()


def test_eliminate_rolls_back_when_disconnected():
    # removing everything would open the only source-load edge
    report = {}
    m = eliminate_zero_switches(one_edge(1e-3, 5e-3, 2e-3, 1e-4), 0.01, FAST, report=report)
    assert report["restored"] == 1
    assert m.states[0].active() == ("L",)


def test_eliminate_threshold_validated():
    with pytest.raises(ModelError):
        eliminate_zero_switches(one_edge(0.5, 0.5, 0.5, 0.5), 1.5)


def test_realize_half_switch_is_one_ohm():
    g = realize_switches(one_edge(0.5, 0.5, 0.5, 0.5))
    sw = [c for c in g.components if c.name.endswith(".sw")]
    assert len(sw) == 4
    assert all(c.value == 1.0 for c in sw)


def test_realize_closed_switch_is_epsilon():
    m = one_edge(1.0, 0.5, 0.5, 0.5, branches={"R"})
    g = realize_switches(m)
    sw = [c for c in g.components if c.name.endswith(".sw")]
    assert [c.value for c in sw] == [m.epsilon]
    assert g.counts()["R"] == 2


def test_realize_snaps_when_asked():
    m = one_edge(0.97, 0.5, 0.5, 0.5, branches={"R"})
    g = realize_switches(m, hard_close_above=0.95)
    assert min(c.value for c in g.components if c.kind == "R") == m.epsilon


def test_realized_simulation_is_identical():
    rng = np.random.default_rng(11)
    topo = generate_grid(2, 3)
    for _ in range(10):
        m = random_relaxed_model(topo, rng)
        a = transient(m, FAST).samples
        b = transient(realize_switches(m), FAST).samples
        assert np.array_equal(a, b)


def test_already_optimal_target():
    m = initial_relaxed_model(generate_grid(1, 2), 0)
    target = transient(m, FAST)
    cfg = RelaxationConfig(sim=FAST, inner=OptimizerConfig(max_evaluations=300))
    _, trace = run_relaxation(m, target, cfg)
    assert trace.records[0].cost <= 1e-12 * target.mean_square()
    assert trace.final_cost <= 1e-12 * target.mean_square()


def test_max_outer_one():
    m = initial_relaxed_model(generate_grid(1, 2), 2)
    target = transient(initial_relaxed_model(generate_grid(1, 2), 3), FAST)
    calls = []
    cfg = RelaxationConfig(sim=FAST, max_outer=1, inner=OptimizerConfig(max_evaluations=200))
    _, trace = run_relaxation(m, target, cfg, callback=calls.append)
    assert len(trace.records) == len(calls) == 1
    assert trace.polish_seconds > 0
    assert trace.final_cost <= trace.initial_cost


def test_trace_shape_and_lambda_growth():
    topo = generate_grid(2, 2)
    m = initial_relaxed_model(topo, 1)
    target = transient(initial_relaxed_model(topo, 5), FAST)
    cfg = RelaxationConfig(sim=FAST, max_outer=3, inner=OptimizerConfig(max_evaluations=300))
    model, trace = run_relaxation(m, target, cfg)
    rows = list(trace.rows())
    assert [r[0] for r in rows] == list(range(len(rows)))
    for a, b in zip(trace.records, trace.records[1:]):
        assert b.lam == pytest.approx(a.lam * cfg.delta)
        assert b.nvars <= a.nvars
    assert trace.final_nvars == variable_count(model) <= trace.nvars[-1]


def test_rejects_discrete_model():
    topo = generate_grid(1, 2)
    with pytest.raises(ModelError):
        run_relaxation(DesignModel(topo, (Mode(ModeTag.RESISTOR, 1.0),)), None)


def test_single_edge_rc_reference_reached():
    # reference: the edge holds 1 kOhm and 1 uF (both switches closed) before a 1 kOhm load
    topo = generate_grid(1, 2)
    ref = DesignModel(topo, (EdgeState(1e3, 1e-3, 1e-6, 1.0, 0.0, 1.0, 0.0),), load_resistance=1e3)
    sim = SimConfig(t_end=5e-3, dt=5e-5)
    target = transient(ref, sim)
    cfg = RelaxationConfig(sim=sim, switch_zero_threshold=1e-4, inner=OptimizerConfig(max_evaluations=20000))
    m0 = initial_relaxed_model(topo, 1, load_resistance=1e3)
    _, trace = run_relaxation(m0, target, cfg)
    assert trace.final_cost <= 1e-6 * target.mean_square()
