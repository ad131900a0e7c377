"""Bottom-up analog circuit topology synthesis."""
from .estimators import RandomSearchDesigner, RelaxationDesigner
from .exceptions import (DisconnectedError, KCLViolationError, ModelError, NonFiniteError,
                         OptimizationError, SearchError, SimplificationError, SimulationError,
                         SingularSystemError, TopoforgeError)
from .io import load_netlist, read_waveform_csv, save_netlist, to_dot, write_waveform_csv
from .model import (DesignModel, EdgeState, MetaTopology, Mode, ModeTag, ParameterBounds, StepSource,
                    generate_grid, initial_relaxed_model, sample_random_states)
from .netlist import Component, ComponentGraph, to_component_graph
from .objective import VariableSpace, requirements_cost, total_loss
from .powell import OptimizerConfig, OptimizerResult, minimize
from .relaxation import RelaxationConfig, eliminate_zero_switches, realize_switches, run_relaxation
from .search import SearchConfig, canonical_hash, mutate, run_search
from .simplify import SimplifyThresholds, simplify_fixpoint
from .simulator import SimConfig, Waveform, check_feasible, simulate, transient

__version__ = "0.1.0"
