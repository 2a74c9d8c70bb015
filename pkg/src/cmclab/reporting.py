"""Deterministic artifact writers.

All floats are rendered with ``repr`` (shortest round-trip), JSON keys are
sorted, and nothing time- or machine-dependent enters these files: identical
inputs produce byte-identical artifacts.  Volatile metadata (timestamps,
wall time) is quarantined in ``run_meta.json``, which is exempt from the
byte-identity contract.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def write_mesh_csvs(mesh, outdir) -> None:
    """Node/triangle CSV pair: ``id,x,y,is_boundary,s`` and ``id,n0,n1,n2``."""
    outdir = Path(outdir)
    s_of = {int(n): float(s) for n, s in zip(mesh.boundary_nodes, mesh.boundary_param)}
    rows = [
        (i, mesh.nodes[i, 0], mesh.nodes[i, 1], bool(mesh.is_boundary[i]),
         s_of.get(i, float("nan")))
        for i in range(mesh.n_nodes)
    ]
    write_csv(outdir / "mesh_nodes.csv", ["id", "x", "y", "is_boundary", "s"], rows)
    write_csv(
        outdir / "mesh_triangles.csv",
        ["id", "n0", "n1", "n2"],
        [(i, *mesh.triangles[i]) for i in range(mesh.n_triangles)],
    )


def write_solution_csv(solution, node_grads, path) -> None:
    """``node_id,x,y,v,u,grad_x,grad_y`` (graph-function gradients)."""
    mesh = solution.mesh
    u = solution.t * solution.values
    rows = [
        (i, mesh.nodes[i, 0], mesh.nodes[i, 1], solution.values[i], u[i],
         node_grads[i, 0], node_grads[i, 1])
        for i in range(mesh.n_nodes)
    ]
    write_csv(path, ["node_id", "x", "y", "v", "u", "grad_x", "grad_y"], rows)


def write_field_csv(field, path) -> None:
    """``node_id,x,y,value`` for a node field."""
    mesh = field.mesh
    rows = [
        (i, mesh.nodes[i, 0], mesh.nodes[i, 1], field.values[i])
        for i in range(mesh.n_nodes)
    ]
    write_csv(path, ["node_id", "x", "y", "value"], rows)
