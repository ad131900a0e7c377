"""File formats: netlist and report JSON, waveform and trace CSV, DOT."""
from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import ModelError
from .model import DesignModel, EdgeState, MetaTopology, Mode, StepSource
from .netlist import Component, ComponentGraph

NETLIST_FORMAT = "topoforge-netlist/1"
REPORT_FORMAT = "topoforge-report/1"
CONFIG_FORMAT = "topoforge-config/1"


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("topoforge").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict, schema: str) -> None:
    """Raise :class:`ModelError` if ``doc`` does not match the named schema."""
    try:
        jsonschema.validate(doc, load_schema(schema))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelError(f"invalid {schema} document at {where}: {exc.message}") from None


# --- netlists ---------------------------------------------------------------

def _source_doc(source) -> dict:
    if not isinstance(source, StepSource):
        raise ModelError(f"only step sources can be serialized, got {type(source).__name__}")
    return {"type": "step", "amplitude": float(source.amplitude)}


def _vertex_doc(v):
    if isinstance(v, tuple):
        return [_vertex_doc(x) for x in v]
    if isinstance(v, (int, np.integer)):
        return int(v)
    return str(v)


def _vertex(v):
    return tuple(_vertex(x) for x in v) if isinstance(v, list) else v


def _state_doc(st) -> dict:
    if isinstance(st, Mode):
        d = {"mode": st.tag.value}
        if st.param is not None:
            d["param"] = st.param
        return d
    return {"relaxed": {"r": st.r, "l": st.l, "c": st.c, "s_r": st.s_r, "s_l": st.s_l,
                        "s_c": st.s_c, "s_short": st.s_short, "branches": list(st.active())}}


def _state(doc):
    if "mode" in doc:
        return Mode(doc["mode"], doc.get("param"))
    r = doc["relaxed"]
    return EdgeState(r["r"], r["l"], r["c"], r["s_r"], r["s_l"], r["s_c"], r["s_short"],
                     branches=frozenset(r["branches"]))


def topology_to_dict(topo: MetaTopology, states=None, *, source=None, load_resistance=None,
                     epsilon=None) -> dict:
    edges = []
    for i, (eid, a, b) in enumerate(topo.edges):
        e = {"id": eid, "a": a, "b": b}
        if states is not None:
            e["state"] = _state_doc(states[i])
        edges.append(e)
    doc = {
        "format": NETLIST_FORMAT,
        "kind": "design",
        "grid": {"rows": topo.rows, "cols": topo.cols} if topo.rows is not None else None,
        "nodes": list(topo.nodes),
        "edges": edges,
        "boundary": dict(topo.boundary._asdict()),
    }
    if source is not None:
        doc["source"] = _source_doc(source)
    if load_resistance is not None:
        doc["load_resistance"] = float(load_resistance)
    if epsilon is not None:
        doc["epsilon"] = float(epsilon)
    return doc


def netlist_to_dict(obj) -> dict:
    """JSON document for a topology, a design model or a component graph."""
    if isinstance(obj, MetaTopology):
        return topology_to_dict(obj)
    if isinstance(obj, DesignModel):
        return topology_to_dict(obj.topology, obj.states, source=obj.source,
                                load_resistance=obj.load_resistance, epsilon=obj.epsilon)
    if isinstance(obj, ComponentGraph):
        comps = []
        for c in obj.components:
            d = {"kind": c.kind, "value": float(c.value), "a": _vertex_doc(c.a), "b": _vertex_doc(c.b)}
            if c.name:
                d["name"] = c.name
            comps.append(d)
        return {"format": NETLIST_FORMAT, "kind": "components", "components": comps,
                "source": _source_doc(obj.source)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def netlist_from_dict(doc: dict):
    """Inverse of :func:`netlist_to_dict`.

    A design document without edge states yields a :class:`MetaTopology`.
    """
    validate(doc, "netlist")
    source = StepSource(doc["source"]["amplitude"]) if "source" in doc else StepSource()
    if doc["kind"] == "components":
        comps = [Component(c["kind"], c["value"], _vertex(c["a"]), _vertex(c["b"]), c.get("name", ""))
                 for c in doc["components"]]
        return ComponentGraph(tuple(comps), source)
    grid = doc.get("grid") or {}
    bd = doc["boundary"]
    topo = MetaTopology(tuple(doc["nodes"]), tuple((e["id"], e["a"], e["b"]) for e in doc["edges"]),
                        (bd["source_pos"], bd["source_neg"], bd["load_pos"], bd["load_neg"]),
                        rows=grid.get("rows"), cols=grid.get("cols"))
    have = ["state" in e for e in doc["edges"]]
    if not any(have) and doc["edges"]:
        return topo
    if not all(have):
        raise ModelError("either every edge or no edge must carry a state")
    states = tuple(_state(e["state"]) for e in doc["edges"])
    kw = {"source": source}
    if "load_resistance" in doc:
        kw["load_resistance"] = doc["load_resistance"]
    if "epsilon" in doc:
        kw["epsilon"] = doc["epsilon"]
    return DesignModel(topo, states, **kw)


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from None


def save_netlist(obj, path) -> Path:
    return write_json(path, netlist_to_dict(obj))


def load_netlist(path):
    return netlist_from_dict(read_json(path))


# --- CSV --------------------------------------------------------------------

def _num(x) -> str:
    return repr(float(x))


def write_waveform_csv(waveform, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v"])
        for t, v in zip(waveform.times, waveform.samples):
            w.writerow([_num(t), _num(v)])
    return path


def read_waveform_csv(path, *, rtol: float = 1e-6):
    """Read a ``t,v`` CSV; the time column must be uniformly spaced."""
    from .simulator import Waveform

    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "v"]:
        raise ModelError(f"{path}: expected header 't,v'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ModelError(f"{path}: {exc}") from None
    if data.shape[0] < 2:
        raise ModelError(f"{path}: need at least 2 samples")
    t = data[:, 0]
    steps = np.diff(t)
    dt = float((t[-1] - t[0]) / (t.size - 1))
    if not dt > 0 or np.abs(steps - dt).max() > rtol * dt + 1e-15:
        raise ModelError(f"{path}: time column is not uniformly spaced")
    return Waveform(float(t[0]), dt, data[:, 1])


def write_rows_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(x) if isinstance(x, float) else x for x in r])
    return path


RELAX_TRACE_HEADER = ("outer", "lambda", "cost", "nvars", "seconds")
SEARCH_TRACE_HEADER = ("gen", "best_cost", "best_ncomponents", "seconds")


# --- DOT --------------------------------------------------------------------

def _dot_id(v) -> str:
    if isinstance(v, tuple):
        v = "_".join(str(x) for x in v)
    return '"' + str(v).replace('"', r'\"') + '"'


def _fmt_value(kind, value) -> str:
    unit = {"R": "Ohm", "L": "H", "C": "F", "Source": "V", "Load": "Ohm"}[kind]
    return f"{value:.6g} {unit}"


def to_dot(graph: ComponentGraph, name: str = "netlist") -> str:
    """Undirected DOT graph with one edge statement per component."""
    lines = [f"graph {_dot_id(name)} {{", "  node [shape=point];"]
    for v in graph.vertices:
        lines.append(f"  {_dot_id(v)} [xlabel={_dot_id(v)}];")
    for c in graph.components:
        label = f"{c.name + ': ' if c.name else ''}{c.kind} {_fmt_value(c.kind, c.value)}"
        lines.append(f"  {_dot_id(c.a)} -- {_dot_id(c.b)} [label={_dot_id(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(graph: ComponentGraph, path, name: str = "netlist") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_dot(graph, name))
    return path


def json_number(x):
    """Finite floats pass through; inf and nan become ``None``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


__all__ = ["NETLIST_FORMAT", "REPORT_FORMAT", "CONFIG_FORMAT", "validate", "load_schema",
           "netlist_to_dict", "netlist_from_dict", "save_netlist", "load_netlist", "write_json",
           "read_json", "write_waveform_csv", "read_waveform_csv", "write_rows_csv", "to_dot",
           "write_dot", "json_number", "RELAX_TRACE_HEADER", "SEARCH_TRACE_HEADER"]
