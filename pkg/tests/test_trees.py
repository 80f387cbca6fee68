import json
import math

import numpy as np
import pytest

from treeitp import trees
from treeitp.trees import (TreeTopology, build_complete_tree, validate_support,
                           enumerate_supports, tree_count, log_tree_count,
                           tree_count_exponent, MissingRootError,
                           OrphanNodeError, TreeError)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_single_node_tree():
    t = build_complete_tree(1, 2)
    assert t.root == 0
    assert t.children[0] == ()


def test_complete_binary_layout():
    t = build_complete_tree(7, 2)
    assert t.root == 0
    assert t.children[1] == (3, 4)
    assert t.children[2] == (5, 6)


def test_complete_quad_layout():
    t = build_complete_tree(10, 4)
    assert t.children[0] == (1, 2, 3, 4)
    assert t.children[2] == (9,)
    assert t.children[3] == ()


def test_reject_bad_order_and_size():
    with pytest.raises(TreeError):
        build_complete_tree(7, 1)
    with pytest.raises(TreeError):
        build_complete_tree(0, 2)


def test_reject_two_roots_cycle_self_parent():
    with pytest.raises(TreeError):
        TreeTopology([None, None, 0], 2)
    with pytest.raises(TreeError):
        TreeTopology([None, 2, 1], 2)        # 1 <-> 2 cycle
    with pytest.raises(TreeError):
        TreeTopology([None, 1], 2)           # self parent
    with pytest.raises(TreeError):
        TreeTopology([0, 1, 0, 0], 2)        # no root
    with pytest.raises(TreeError):
        TreeTopology([None, 0, 0, 0], 2)     # three children at order 2


def test_root_not_at_zero():
    t = TreeTopology([1, None, 1], 2)
    assert t.root == 1
    s = validate_support(t, [1, 0])
    assert s.indices == (0, 1)
    with pytest.raises(MissingRootError):
        validate_support(t, [0])


# ---------------------------------------------------------------------------
# support validation
# ---------------------------------------------------------------------------

def test_validate_root_and_children():
    t = build_complete_tree(7, 2)
    s = validate_support(t, [0, 1, 2])
    assert s.cardinality == 3


def test_validate_missing_root():
    t = build_complete_tree(7, 2)
    with pytest.raises(MissingRootError):
        validate_support(t, [1, 3])


def test_validate_chain_through_parent():
    # parent(4) = 1, parent(1) = 0: {0, 1, 4} is parent-closed
    t = build_complete_tree(7, 2)
    s = validate_support(t, [0, 1, 4])
    assert s.cardinality == 3


def test_validate_orphan():
    t = build_complete_tree(7, 2)
    with pytest.raises(OrphanNodeError) as err:
        validate_support(t, [0, 5])
    assert err.value.node == 5


def test_validate_rejects_duplicates_and_range():
    t = build_complete_tree(7, 2)
    with pytest.raises(TreeError):
        validate_support(t, [0, 1, 1])
    with pytest.raises(TreeError):
        validate_support(t, [0, 9])


# ---------------------------------------------------------------------------
# enumeration and counting
# ---------------------------------------------------------------------------

def test_enumerate_k1_and_k2():
    t = build_complete_tree(7, 2)
    assert [s.indices for s in enumerate_supports(t, 1)] == [(0,)]
    assert [s.indices for s in enumerate_supports(t, 2)] == [(0, 1), (0, 2)]


def test_enumerate_binary_depth3_k3():
    t = build_complete_tree(15, 2)
    sups = list(enumerate_supports(t, 3))
    assert len(sups) == 5


def test_enumerate_lexicographic_and_valid():
    t = build_complete_tree(15, 2)
    tuples = [s.indices for s in enumerate_supports(t, 4)]
    assert tuples == sorted(tuples)
    assert len(set(tuples)) == len(tuples)
    for tup in tuples:
        validate_support(t, tup)


def test_counts_small_values():
    assert tree_count(2, 1) == 1
    assert tree_count(2, 3) == 5
    assert tree_count(2, 4) == 14


def test_counts_match_enumeration_unclipped():
    for d in (2, 3, 4):
        for k in range(1, 7):
            depth = k
            n = (d ** depth - 1) // (d - 1)
            t = build_complete_tree(n, d)
            assert sum(1 for _ in enumerate_supports(t, k)) == tree_count(d, k)


def test_clipped_enumeration_bounded_by_count():
    t = build_complete_tree(7, 2)       # depth 3: size-4 subtrees get clipped
    got = sum(1 for _ in enumerate_supports(t, 4))
    assert 0 < got < tree_count(2, 4)


def test_count_strictly_increasing():
    for d in (2, 3, 4):
        vals = [tree_count(d, k) for k in range(1, 12)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_count_big_integer_exact():
    v = tree_count(2, 200)
    assert isinstance(v, int)
    # Fuss-Catalan identity: T(k) = C(dk, k) - d * C(dk, k - 1) ... use the
    # recurrence-free cross-check C(2k, k) / (k + 1) for d = 2 (Catalan)
    assert v == math.comb(400, 200) // 201


def test_exponent_values():
    assert tree_count_exponent(2) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert tree_count_exponent(4) == pytest.approx(2.249340578, abs=1e-8)


def test_exponent_limit_via_log_count():
    target = tree_count_exponent(2)
    errs = [abs(log_tree_count(2, k) / k - target) for k in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]
    assert abs(log_tree_count(2, 2000) / 2000 - target) < 0.01


def test_log_count_matches_exact():
    for d, k in ((2, 50), (3, 30), (4, 20)):
        assert log_tree_count(d, k) == pytest.approx(
            math.log(tree_count(d, k)), rel=1e-12)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_topology_json_roundtrip(tmp_path):
    t = build_complete_tree(10, 4)
    path = tmp_path / "topo.json"
    trees.save_topology(t, str(path))
    loaded = trees.load_topology(str(path))
    assert loaded.n_nodes == t.n_nodes
    assert loaded.order_d == t.order_d
    assert np.array_equal(loaded.parent, t.parent)
    obj = json.loads(path.read_text())
    assert obj["parent"][0] is None
    assert obj["n"] == 10 and obj["d"] == 4


def test_topology_json_length_check():
    with pytest.raises(TreeError):
        trees.topology_from_json('{"n": 3, "d": 2, "parent": [null, 0]}')
