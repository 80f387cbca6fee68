"""Exact Euclidean projection onto rooted-tree supports of cardinality k.

``project`` runs a bottom-up tree knapsack (compiled kernel when available,
NumPy fallback otherwise); ``project_bruteforce`` is the enumeration oracle
used to test it.  Both report the captured energy by summing squared entries
over the selected support in ascending index order, so agreement between
them is exact, not approximate.

Tie handling: the oracle returns the lexicographically smallest maximizing
support.  The dynamic program returns a deterministic maximizer (fixed child
order, smallest feasible allocation granted to later children first), which
coincides with the oracle whenever the maximizer is unique.  Energy equality
holds always.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .trees import TreeTopology, TreeSupport, enumerate_supports

if os.environ.get("TREEITP_FORCE_PY"):
    from . import _projection_py as _kernel_mod
    BACKEND = "python"
else:
    try:
        from . import _projection_core as _kernel_mod
        BACKEND = "native"
    except ImportError:
        from . import _projection_py as _kernel_mod
        BACKEND = "python"

BRUTE_FORCE_MAX_NODES = 26
BRUTE_FORCE_MAX_K = 10


def backend_name() -> str:
    """Which projection kernel was selected at import: 'native' or 'python'."""
    return BACKEND


@dataclass(frozen=True)
class ProjectionResult:
    support: TreeSupport
    projected: np.ndarray
    captured_energy: float
    clipped: bool = False


def _support_energy(x: np.ndarray, idx: np.ndarray) -> float:
    v = x[idx]
    return float(v @ v)


def _result(topology: TreeTopology, x: np.ndarray, idx: np.ndarray,
            clipped: bool) -> ProjectionResult:
    projected = np.zeros_like(x)
    projected[idx] = x[idx]
    support = TreeSupport(tuple(int(i) for i in idx), len(idx))
    return ProjectionResult(support, projected, _support_energy(x, idx), clipped)


def project(topology: TreeTopology, x: np.ndarray, k: int) -> ProjectionResult:
    """Best rooted subtree of cardinality k by captured energy, exactly.

    If k exceeds the number of nodes the result is clipped to the whole tree
    and flagged; solvers treat a clipped projection as a configuration error.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != topology.n_nodes:
        raise ValueError(
            f"vector length {x.shape} does not match topology ({topology.n_nodes})")
    if k < 1:
        raise ValueError("k must be >= 1")
    clipped = k > topology.n_nodes
    start, flat = topology._csr
    idx = _kernel_mod.project_kernel(start, flat, topology.post_order,
                                     topology.subtree_size, topology.root,
                                     x * x, min(k, topology.n_nodes))
    return _result(topology, x, idx, clipped)


def project_bruteforce(topology: TreeTopology, x: np.ndarray, k: int) -> ProjectionResult:
    """Oracle by exhaustive enumeration; refuses instances beyond test scale."""
    if topology.n_nodes > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_NODES} nodes, got {topology.n_nodes}")
    if k > BRUTE_FORCE_MAX_K and k <= topology.n_nodes:
        raise ValueError(f"brute force limited to k <= {BRUTE_FORCE_MAX_K}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != topology.n_nodes:
        raise ValueError(
            f"vector length {x.shape} does not match topology ({topology.n_nodes})")
    if k < 1:
        raise ValueError("k must be >= 1")
    clipped = k > topology.n_nodes
    kk = min(k, topology.n_nodes)
    best_idx: np.ndarray | None = None
    best_energy = -1.0
    for support in enumerate_supports(topology, kk):
        idx = support.as_array()
        energy = _support_energy(x, idx)
        if energy > best_energy:          # lex order of enumeration breaks ties
            best_energy = energy
            best_idx = idx
    assert best_idx is not None
    return _result(topology, x, best_idx, clipped)


# ---------------------------------------------------------------------------
# newline-delimited decimal vector files (shared with the CLI)
# ---------------------------------------------------------------------------

def load_vector(path: str) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line))
    return np.asarray(values, dtype=np.float64)


def save_vector(x: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(x, dtype=np.float64):
            fh.write(repr(float(v)))
            fh.write("\n")
