"""Rooted d-ary tree structure over signal coefficients.

A topology is a parent array: one root (parent None), every other node
points at its parent, and no node has more than ``order_d`` children.  The
admissible supports are the rooted, parent-closed subtrees of a given
cardinality; this module validates, enumerates and counts them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .theory import shannon_entropy

# Enumeration is exponential in k; refuse silently huge requests elsewhere
# (brute-force oracles) but keep uniform-sampling decisions on this cap.
ENUM_SUPPORT_BUDGET = 25000


class TreeError(ValueError):
    pass


class MissingRootError(TreeError):
    """Support does not contain the root node."""


class OrphanNodeError(TreeError):
    """Support contains a node whose parent is absent."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"node {node} is in the support but its parent is not")


class TreeTopology:
    """Immutable d-ary tree over node indices 0..n_nodes-1.

    Traversal structures (children lists, subtree sizes, post-order) are
    computed lazily and cached; instances are safe to share across threads
    once constructed.
    """

    def __init__(self, parent: Sequence[int | None], order_d: int):
        if order_d < 2:
            raise TreeError(f"tree order must be >= 2, got {order_d}")
        n = len(parent)
        if n < 1:
            raise TreeError("tree must have at least one node")
        par = np.full(n, -1, dtype=np.int64)
        root = -1
        for i, p in enumerate(parent):
            if p is None:
                if root >= 0:
                    raise TreeError(f"two roots: {root} and {i}")
                root = i
            else:
                p = int(p)
                if not 0 <= p < n:
                    raise TreeError(f"parent {p} of node {i} out of range")
                if p == i:
                    raise TreeError(f"node {i} is its own parent")
                par[i] = p
        if root < 0:
            raise TreeError("no root node (every node has a parent)")

        counts = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if par[i] >= 0:
                counts[par[i]] += 1
        if counts.max(initial=0) > order_d:
            bad = int(np.argmax(counts))
            raise TreeError(
                f"node {bad} has {counts[bad]} children, exceeds order {order_d}")

        self.n_nodes = n
        self.order_d = order_d
        self.root = root
        self.parent = par
        self.parent.setflags(write=False)
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        # Every node must reach the root; depth-first with memoized depths.
        depth = np.full(self.n_nodes, -1, dtype=np.int64)
        depth[self.root] = 0
        for i in range(self.n_nodes):
            chain = []
            v = i
            while depth[v] < 0:
                chain.append(v)
                v = int(self.parent[v])
                if len(chain) > self.n_nodes:
                    raise TreeError("parent links contain a cycle")
            base = depth[v]
            for off, u in enumerate(reversed(chain), start=1):
                depth[u] = base + off
        self._depth = depth

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        """Children of each node, ascending index order."""
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i in range(self.n_nodes):
            p = int(self.parent[i])
            if p >= 0:
                kids[p].append(i)
        return tuple(tuple(sorted(c)) for c in kids)

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        start = np.zeros(self.n_nodes + 1, dtype=np.int64)
        for i in range(self.n_nodes):
            start[i + 1] = start[i] + len(self.children[i])
        flat = np.empty(self.n_nodes - 1 if self.n_nodes else 0, dtype=np.int64)
        pos = 0
        for i in range(self.n_nodes):
            for c in self.children[i]:
                flat[pos] = c
                pos += 1
        return start, flat

    @cached_property
    def post_order(self) -> np.ndarray:
        """Children-before-parent node sequence (iterative, recursion-free)."""
        out = np.empty(self.n_nodes, dtype=np.int64)
        stack = [(self.root, False)]
        pos = 0
        while stack:
            v, expanded = stack.pop()
            if expanded:
                out[pos] = v
                pos += 1
            else:
                stack.append((v, True))
                for c in reversed(self.children[v]):
                    stack.append((c, False))
        return out

    @cached_property
    def subtree_size(self) -> np.ndarray:
        size = np.ones(self.n_nodes, dtype=np.int64)
        for v in self.post_order:
            p = int(self.parent[v])
            if p >= 0:
                size[p] += size[v]
        return size

    def __repr__(self) -> str:
        return f"TreeTopology(n_nodes={self.n_nodes}, order_d={self.order_d}, root={self.root})"


@dataclass(frozen=True)
class TreeSupport:
    """A rooted, parent-closed set of node indices (sorted tuple)."""
    indices: tuple[int, ...]
    cardinality: int

    def __post_init__(self):
        if len(self.indices) != self.cardinality:
            raise TreeError("cardinality does not match index count")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


def build_complete_tree(n_nodes: int, order_d: int) -> TreeTopology:
    """Canonical heap-style layout: children of i are d*i+1 .. d*i+d."""
    if n_nodes < 1:
        raise TreeError("n_nodes must be >= 1")
    if order_d < 2:
        raise TreeError(f"tree order must be >= 2, got {order_d}")
    parent: list[int | None] = [None] * n_nodes
    for i in range(1, n_nodes):
        parent[i] = (i - 1) // order_d
    return TreeTopology(parent, order_d)


def validate_support(topology: TreeTopology, indices: Iterable[int]) -> TreeSupport:
    """Check that ``indices`` form a rooted, parent-closed subtree."""
    idx = sorted(int(i) for i in indices)
    if len(set(idx)) != len(idx):
        raise TreeError("duplicate indices in support")
    for i in idx:
        if not 0 <= i < topology.n_nodes:
            raise TreeError(f"index {i} out of range")
    members = set(idx)
    if topology.root not in members:
        raise MissingRootError("support does not contain the root")
    for i in idx:
        p = int(topology.parent[i])
        if p >= 0 and p not in members:
            raise OrphanNodeError(i)
    return TreeSupport(tuple(idx), len(idx))


def enumerate_supports(topology: TreeTopology, k: int) -> Iterator[TreeSupport]:
    """All rooted subtrees of cardinality k, lexicographic on sorted tuples.

    Exponential in k; intended for oracle/test scale.  Each support is
    produced exactly once: boundary nodes are decided in ascending order,
    and excluding a node discards its whole subtree for that branch.
    """
    if k < 1:
        raise TreeError("k must be >= 1")
    if k > topology.n_nodes:
        return
    children = topology.children
    found: list[tuple[int, ...]] = []

    def grow(selected: list[int], boundary: list[int]) -> None:
        if len(selected) == k:
            found.append(tuple(sorted(selected)))
            return
        if len(selected) + len(boundary) < k:
            # quick reachability prune: boundary subtrees may still be deep,
            # so only prune when even taking every boundary node cannot help
            total = len(selected)
            for b in boundary:
                total += int(topology.subtree_size[b])
                if total >= k:
                    break
            if total < k:
                return
        if not boundary:
            return
        v = boundary[0]
        rest = boundary[1:]
        grow(selected + [v], sorted(rest + list(children[v])))
        grow(selected, rest)

    grow([topology.root], sorted(children[topology.root]))
    for tup in sorted(found):
        yield TreeSupport(tup, k)


_SUPPORT_CACHE: dict[tuple, list[tuple[int, ...]]] = {}
_SUPPORT_CACHE_MAX = 16


def within_enum_budget(order_d: int, k: int) -> bool:
    """Whether the cardinality-k support family is small enough to enumerate.

    The k <= 10 short-circuit avoids huge exact binomials on the hot path:
    already for binary trees the count passes the budget at k = 11.
    """
    return k <= 10 and tree_count(order_d, k) <= ENUM_SUPPORT_BUDGET


def list_supports(topology: TreeTopology, k: int) -> list[tuple[int, ...]]:
    """All cardinality-k supports as sorted tuples, cached by tree structure.

    Complete trees of the same shape recur across instances, so the cache is
    keyed on the parent array rather than object identity.
    """
    key = (topology.n_nodes, topology.order_d, topology.parent.tobytes(), k)
    hit = _SUPPORT_CACHE.get(key)
    if hit is None:
        hit = [s.indices for s in enumerate_supports(topology, k)]
        if len(_SUPPORT_CACHE) >= _SUPPORT_CACHE_MAX:
            _SUPPORT_CACHE.pop(next(iter(_SUPPORT_CACHE)))
        _SUPPORT_CACHE[key] = hit
    return hit


def tree_count(order_d: int, k: int) -> int:
    """Number of ordered rooted d-ary trees with k nodes: C(dk, k) / ((d-1)k + 1)."""
    if order_d < 2:
        raise TreeError(f"tree order must be >= 2, got {order_d}")
    if k < 1:
        raise TreeError("k must be >= 1")
    return math.comb(order_d * k, k) // ((order_d - 1) * k + 1)


def log_tree_count(order_d: int, k: int) -> float:
    """ln of tree_count via log-gamma, usable far beyond exact-integer scale."""
    d, kk = order_d, k
    return (math.lgamma(d * kk + 1) - math.lgamma(kk + 1)
            - math.lgamma((d - 1) * kk + 1) - math.log((d - 1) * kk + 1))


def tree_count_exponent(order_d: int) -> float:
    """Limit of (1/k) ln tree_count(d, k): the entropy rate d * H(1/d)."""
    if order_d < 2:
        raise TreeError(f"tree order must be >= 2, got {order_d}")
    return order_d * shannon_entropy(1.0 / order_d)


# ---------------------------------------------------------------------------
# topology file format
# ---------------------------------------------------------------------------

def topology_to_json(topology: TreeTopology) -> str:
    parent = [None if p < 0 else int(p) for p in topology.parent]
    return json.dumps({"n": topology.n_nodes, "d": topology.order_d,
                       "parent": parent})


def topology_from_json(text: str) -> TreeTopology:
    obj = json.loads(text)
    parent = obj["parent"]
    if len(parent) != obj["n"]:
        raise TreeError("parent array length does not match n")
    return TreeTopology(parent, int(obj["d"]))


def load_topology(path: str) -> TreeTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return topology_from_json(fh.read())


def save_topology(topology: TreeTopology, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(topology_to_json(topology))
        fh.write("\n")
