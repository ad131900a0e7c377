from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoforge.exceptions import ModelError
from topoforge.model import (DesignModel, EdgeState, Mode, ModeTag, ParameterBounds, generate_grid,
                             initial_relaxed_model, pack_variables, sample_random_states,
                             unpack_variables, variable_count, variable_kinds)


@pytest.mark.parametrize("rows,cols,n_nodes,n_edges", [(5, 6, 30, 49), (2, 2, 4, 4), (2, 3, 6, 7)])
def test_grid_counts(rows, cols, n_nodes, n_edges):
    topo = generate_grid(rows, cols)
    assert len(topo.nodes) == n_nodes
    assert len(topo.edges) == n_edges


def test_grid_1x2_has_single_edge_and_offgrid_ground():
    topo = generate_grid(1, 2)
    assert topo.n_grid_nodes == 2
    assert len(topo.edges) == 1
    b = topo.boundary
    assert b.source_neg == b.load_neg == 0
    assert {b.source_pos, b.load_pos} == {1, 2}


def test_grid_boundary_layout():
    topo = generate_grid(2, 3)
    b = topo.boundary
    assert (b.source_pos, b.source_neg, b.load_pos, b.load_neg) == (3, 0, 5, 0)
    assert topo.grid_node(1, 2) == 5


@pytest.mark.parametrize("rows,cols", [(0, 3), (1, 1), (-2, 2)])
def test_grid_rejects_bad_dims(rows, cols):
    with pytest.raises(ModelError):
        generate_grid(rows, cols)


def test_variable_count_full_relaxed_grid():
    topo = generate_grid(5, 6)
    assert variable_count(initial_relaxed_model(topo, 0)) == 343


def test_variable_count_single_edge():
    assert variable_count(initial_relaxed_model(generate_grid(1, 2), 0)) == 7


def test_variable_count_discrete_modes():
    topo = generate_grid(2, 2)
    m = DesignModel(topo, (Mode.short(), Mode.open(), Mode(ModeTag.RESISTOR, 2.0), Mode.open()))
    assert variable_count(m) == 1


def test_eliminated_branches_drop_variables():
    st_ = EdgeState(1.0, 1e-3, 1e-6, 0.5, 0.5, 0.5, 0.5, branches={"L"})
    assert st_.n_variables == 2


@pytest.mark.parametrize("seed", range(5))
def test_pack_unpack_roundtrip(seed):
    m = initial_relaxed_model(generate_grid(2, 3), seed)
    v = pack_variables(m)
    assert unpack_variables(m, v) == m
    w = np.random.default_rng(seed).uniform(0.1, 0.9, v.size)
    assert np.array_equal(pack_variables(unpack_variables(m, w)), w)
    assert len(variable_kinds(m)) == v.size


def test_pack_empty_model():
    topo = generate_grid(2, 2)
    m = DesignModel(topo, tuple(Mode.open() for _ in topo.edges))
    assert pack_variables(m).size == 0
    assert unpack_variables(m, []) == m


def test_unpack_wrong_length():
    m = initial_relaxed_model(generate_grid(1, 2), 0)
    with pytest.raises(ModelError):
        unpack_variables(m, [1.0, 2.0])


def test_sample_random_states_deterministic():
    topo = generate_grid(3, 3)
    assert sample_random_states(topo, 7) == sample_random_states(topo, 7)
    assert sample_random_states(topo, 7) != sample_random_states(topo, 8)


def test_sample_random_states_uniform_tags():
    topo = generate_grid(1, 2)
    rng = np.random.default_rng(0)
    counts = Counter(sample_random_states(topo, rng).states[0].tag for _ in range(10_000))
    assert set(counts) == set(ModeTag)
    for tag in ModeTag:
        assert abs(counts[tag] / 10_000 - 0.2) <= 0.015


def test_degenerate_bounds_fix_values():
    topo = generate_grid(3, 3)
    bounds = ParameterBounds(r=(1.0, 1.0))
    for seed in range(20):
        for s in sample_random_states(topo, seed, bounds).states:
            if s.tag is ModeTag.RESISTOR:
                assert s.param == 1.0


def test_mode_validation():
    with pytest.raises(ModelError):
        Mode(ModeTag.RESISTOR)
    with pytest.raises(ModelError):
        Mode(ModeTag.OPEN, 1.0)
    with pytest.raises(ModelError):
        EdgeState(1.0, 1.0, 1.0, 1.5, 0.0, 0.0, 0.0)
    with pytest.raises(ModelError):
        DesignModel(generate_grid(1, 2), ())


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(2, 6))
def test_grid_edge_count_formula(rows, cols):
    topo = generate_grid(rows, cols)
    assert len(topo.edges) == rows * (cols - 1) + (rows - 1) * cols
    assert topo.n_grid_nodes == rows * cols
    b = topo.boundary
    assert b.source_pos != b.load_pos
