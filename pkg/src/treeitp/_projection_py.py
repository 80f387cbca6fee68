"""Pure NumPy tree-projection kernel (fallback when the C extension is absent).

Bottom-up tree knapsack: for each node v and count j, the table holds the
best energy of a subtree rooted at v using exactly j nodes; sibling tables
are combined by bounded (max, +) convolution.  Support reconstruction walks
the tables top-down, re-running each node's child merge and taking, for the
last child first, the smallest allocation that reproduces the stored
optimum.  The compiled kernel performs the identical arithmetic, so both
backends return bit-identical tables and the same support.
"""

from __future__ import annotations

import numpy as np


def _merge(cur: np.ndarray, cur_len: int, g_child: np.ndarray, cap_child: int,
           cap_out: int) -> tuple[np.ndarray, int]:
    new_len = min(cap_out, cur_len + cap_child)
    nxt = np.full(new_len + 1, -np.inf)
    nxt[:cur_len + 1] = cur[:cur_len + 1]
    for s in range(1, min(cap_child, new_len) + 1):
        hi = min(cur_len, new_len - s)
        if hi < 0:
            break
        np.maximum(nxt[s:s + hi + 1], cur[:hi + 1] + g_child[s],
                   out=nxt[s:s + hi + 1])
    return nxt, new_len


def project_kernel(children_start: np.ndarray, children_flat: np.ndarray,
                   post_order: np.ndarray, subtree_size: np.ndarray,
                   root: int, energies: np.ndarray, k: int) -> np.ndarray:
    """Return the sorted index array of an optimal rooted k-subtree."""
    n = energies.shape[0]
    caps = np.minimum(subtree_size, k).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(caps + 1, out=offsets[1:])
    tables = np.zeros(int(offsets[n]), dtype=np.float64)

    def child_tables(v: int, cap_out: int) -> tuple[list[np.ndarray], list[int], list[int]]:
        # Sequential merge over v's children; returns every prefix table so
        # reconstruction can split counts without re-deriving them.
        prefixes = [np.zeros(1)]
        lens = [0]
        kids = [int(c) for c in children_flat[children_start[v]:children_start[v + 1]]]
        cur, cur_len = prefixes[0], 0
        for c in kids:
            gc = tables[offsets[c]:offsets[c] + caps[c] + 1]
            cur, cur_len = _merge(cur, cur_len, gc, int(caps[c]), cap_out)
            prefixes.append(cur)
            lens.append(cur_len)
        return prefixes, lens, kids

    for v in post_order:
        v = int(v)
        cap_v = int(caps[v])
        prefixes, lens, _ = child_tables(v, cap_v - 1)
        merged, m_len = prefixes[-1], lens[-1]
        gv = tables[offsets[v]:offsets[v] + cap_v + 1]
        gv[0] = 0.0
        gv[1:m_len + 2] = energies[v] + merged[:m_len + 1]

    kk = min(k, n)
    selected = np.empty(kk, dtype=np.int64)
    pos = 0
    stack: list[tuple[int, int]] = [(root, kk)]
    while stack:
        v, j = stack.pop()
        selected[pos] = v
        pos += 1
        rem = j - 1
        if rem == 0:
            continue
        prefixes, lens, kids = child_tables(v, rem)
        r = rem
        for t in range(len(kids), 0, -1):
            c = kids[t - 1]
            target = prefixes[t][r]
            gc = tables[offsets[c]:offsets[c] + caps[c] + 1]
            s_lo = max(0, r - lens[t - 1])
            chosen = -1
            for s in range(s_lo, min(r, int(caps[c])) + 1):
                if prefixes[t - 1][r - s] + gc[s] == target:
                    chosen = s
                    break
            if chosen < 0:          # unreachable: target built from these sums
                raise AssertionError("projection reconstruction failed")
            if chosen >= 1:
                stack.append((c, chosen))
            r -= chosen
        if r != 0:
            raise AssertionError("projection reconstruction failed")
    selected.sort()
    return selected
