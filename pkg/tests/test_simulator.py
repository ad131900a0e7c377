import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chain, rc_circuit
from topoforge.exceptions import DisconnectedError, ModelError
from topoforge.model import DesignModel, EdgeState, Mode, ModeTag, StepSource, generate_grid
from topoforge.netlist import Component, ComponentGraph
from topoforge.simulator import (SimConfig, Waveform, assemble_stamps, check_feasible, simulate,
                                 switch_conductance, transient)


def test_switch_conductance_endpoints():
    eps = 1e-5
    assert switch_conductance(1.0, eps) == 1 / eps
    assert switch_conductance(0.0, eps) == eps


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-12, 0.999999))
def test_switch_half_is_one_siemens(eps):
    assert switch_conductance(0.5, eps) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_switch_conductance_monotone(s1, s2):
    lo, hi = sorted((s1, s2))
    assert switch_conductance(lo, 1e-5) <= switch_conductance(hi, 1e-5)


def test_switch_rejects_out_of_range():
    with pytest.raises(ModelError):
        switch_conductance(1.5, 1e-5)
    with pytest.raises(ModelError):
        switch_conductance(0.5, 0.0)


def test_rc_step_response_matches_exponential():
    cfg = SimConfig(t_end=5.0, dt=1e-3)
    t0 = time.perf_counter()
    w = transient(rc_circuit(), cfg)
    elapsed = time.perf_counter() - t0
    err = np.abs(w.samples - (1 - np.exp(-w.times))).max()
    assert err <= 1e-3
    k = int(round(1.0 / cfg.dt))
    assert abs(w.samples[k] - (1 - math.exp(-1))) <= 1e-3
    assert elapsed < 1.0


def test_resistive_divider():
    # 2 Ohm series with a 1 Ohm load: one third of the step
    w = transient(chain(("R", 2.0)), SimConfig(t_end=1e-2, dt=1e-3))
    assert np.allclose(w.samples[1:], 1 / 3, rtol=0, atol=1e-12)
    assert w.samples[0] == 0.0


def test_series_switch_adds_epsilon():
    eps = 1e-5
    topo = generate_grid(1, 2)
    m = DesignModel(topo, (EdgeState(2.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, branches={"R"}),), epsilon=eps)
    w = transient(m, SimConfig(t_end=1e-2, dt=1e-3))
    assert w.samples[-1] == pytest.approx(1.0 / (1.0 + 2.0 + eps), rel=1e-12)


def test_open_edges_contribute_nothing():
    topo = generate_grid(2, 2)
    states = (Mode(ModeTag.RESISTOR, 1.0), Mode.open(), Mode.open(), Mode.open())
    sys1 = assemble_stamps(DesignModel(topo, states))
    sys2 = assemble_stamps(DesignModel(topo, states[:1] + (Mode(ModeTag.RESISTOR, 3.0),) + states[2:]))
    # edge 1 adds stamps, the open edges never do
    assert np.count_nonzero(sys2.G) > np.count_nonzero(sys1.G)


def test_all_open_grid_is_disconnected():
    topo = generate_grid(2, 3)
    m = DesignModel(topo, tuple(Mode.open() for _ in topo.edges))
    f = check_feasible(m)
    assert not f and f.reason == "Disconnected"
    with pytest.raises(DisconnectedError):
        transient(m)


def test_switched_off_edge_leaks_at_most_epsilon():
    eps = 1e-5
    m = DesignModel(generate_grid(1, 2), (EdgeState(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, branches={"S"}),),
                    epsilon=eps)
    w = transient(m, SimConfig(t_end=0.01, dt=1e-4))
    assert np.abs(w.samples).max() <= eps


def test_switched_off_grid_leak_scales_with_epsilon():
    topo = generate_grid(2, 3)
    eps = 1e-5
    m = DesignModel(topo, tuple(EdgeState(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0) for _ in topo.edges), epsilon=eps)
    w = transient(m, SimConfig(t_end=0.01, dt=1e-4))
    # at most four leaking branches per edge
    assert np.abs(w.samples).max() <= 4 * len(topo.edges) * eps


def test_all_short_grid_is_feasible():
    topo = generate_grid(3, 3)
    m = DesignModel(topo, tuple(Mode.short() for _ in topo.edges))
    assert check_feasible(m).ok


def test_single_series_capacitor_path_is_feasible():
    topo = generate_grid(1, 2)
    m = DesignModel(topo, (Mode(ModeTag.CAPACITOR, 1e-3),))
    assert check_feasible(m).ok
    w = transient(m, SimConfig(t_end=0.01, dt=1e-4))
    # series C into a 1 Ohm load: v = exp(-t/RC) after the step
    assert w.samples[-1] == pytest.approx(math.exp(-10.0), abs=2e-3)


def test_zero_source_gives_zero_output():
    g = ComponentGraph(rc_circuit().components, StepSource(0.0))
    w = transient(g, SimConfig(t_end=1.0, dt=1e-2))
    assert np.all(w.samples == 0.0)


def test_inductor_step_response():
    # series L into a 1 Ohm load: v = 1 - exp(-t R / L)
    w = transient(chain(("L", 1e-2)), SimConfig(t_end=0.05, dt=1e-5))
    assert np.abs(w.samples - (1 - np.exp(-w.times / 1e-2))).max() <= 1e-3


def test_backward_euler_converges_first_order():
    cfg = SimConfig(t_end=2.0, dt=1e-3, integrator="BackwardEuler")
    w = transient(rc_circuit(), cfg)
    assert np.abs(w.samples - (1 - np.exp(-w.times))).max() <= 1e-3


def test_residual_reported_and_small():
    res = simulate(rc_circuit(), SimConfig(t_end=1.0, dt=1e-3))
    assert res.max_residual <= 1e-9
    assert res.states.shape[0] == res.waveform.samples.size


def test_boundary_only_netlist_is_disconnected():
    g = ComponentGraph((Component("Source", 1.0, 1, 0), Component("Load", 1.0, 2, 0)))
    assert check_feasible(g).reason == "Disconnected"


def test_waveform_validation():
    with pytest.raises(ModelError):
        Waveform(0.0, 1e-3, np.array([1.0]))
    with pytest.raises(ModelError):
        Waveform(0.0, 0.0, np.zeros(3))
    with pytest.raises(ModelError):
        SimConfig(t_end=1.0, dt=2.0)
    w = Waveform(0.0, 0.5, np.array([0.0, 1.0, 2.0]))
    assert w.t_end == 1.0
    assert w.values([0.25]) == pytest.approx([0.5])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 100.0), st.floats(0.1, 100.0))
def test_linearity_in_source_amplitude(amp, r):
    base = chain(("R", r), ("C", 1e-2))
    cfg = SimConfig(t_end=0.05, dt=1e-3)
    w1 = transient(base, cfg)
    w2 = transient(ComponentGraph(base.components, StepSource(amp)), cfg)
    assert np.allclose(w2.samples, amp * w1.samples, rtol=1e-9, atol=1e-12)
