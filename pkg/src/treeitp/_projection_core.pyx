# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tree-projection kernel.

Same table recurrence and reconstruction rule as ``_projection_py``; the two
backends produce bit-identical tables (plain IEEE adds and max, no
reassociation), so selection agrees exactly.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double NEG_INF = -np.inf


def project_kernel(cnp.int64_t[::1] children_start, cnp.int64_t[::1] children_flat,
                   cnp.int64_t[::1] post_order, cnp.int64_t[::1] subtree_size,
                   long long root, cnp.float64_t[::1] energies, long long k):
    cdef Py_ssize_t n = energies.shape[0]
    cdef Py_ssize_t v, c, ci, cs, ce, idx, t, m, s
    cdef Py_ssize_t cap_v, cap_c, cap_out, cur_len, new_len, hi, nrows
    cdef double cand, ev, target

    caps_np = np.minimum(np.asarray(subtree_size), k).astype(np.int64)
    cdef cnp.int64_t[::1] caps = caps_np
    offsets_np = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(caps_np + 1, out=offsets_np[1:])
    cdef cnp.int64_t[::1] offsets = offsets_np
    tables_np = np.zeros(int(offsets_np[n]), dtype=np.float64)
    cdef cnp.float64_t[::1] tables = tables_np

    # workspace: one row per child-merge prefix, row stride k + 1
    cdef Py_ssize_t max_children = 0
    for v in range(n):
        if children_start[v + 1] - children_start[v] > max_children:
            max_children = children_start[v + 1] - children_start[v]
    work_np = np.zeros((max_children + 1) * (k + 1), dtype=np.float64)
    cdef cnp.float64_t[::1] work = work_np
    lens_np = np.zeros(max_children + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] lens = lens_np
    cdef Py_ssize_t stride = k + 1

    # ---------------- forward pass ----------------
    for idx in range(n):
        v = post_order[idx]
        cap_v = caps[v]
        cap_out = cap_v - 1
        cs = children_start[v]
        ce = children_start[v + 1]
        work[0] = 0.0
        lens[0] = 0
        cur_len = 0
        t = 0
        for ci in range(cs, ce):
            c = children_flat[ci]
            cap_c = caps[c]
            new_len = cur_len + cap_c
            if new_len > cap_out:
                new_len = cap_out
            for m in range(new_len + 1):
                if m <= cur_len:
                    work[(t + 1) * stride + m] = work[t * stride + m]
                else:
                    work[(t + 1) * stride + m] = NEG_INF
            for s in range(1, (cap_c if cap_c < new_len else new_len) + 1):
                hi = new_len - s
                if hi > cur_len:
                    hi = cur_len
                if hi < 0:
                    break
                for m in range(hi + 1):
                    cand = work[t * stride + m] + tables[offsets[c] + s]
                    if cand > work[(t + 1) * stride + m + s]:
                        work[(t + 1) * stride + m + s] = cand
            t += 1
            cur_len = new_len
            lens[t] = cur_len
        ev = energies[v]
        tables[offsets[v]] = 0.0
        for m in range(cur_len + 1):
            tables[offsets[v] + 1 + m] = ev + work[t * stride + m]

    # ---------------- reconstruction ----------------
    cdef Py_ssize_t kk = k if k < n else n
    selected_np = np.empty(kk, dtype=np.int64)
    cdef cnp.int64_t[::1] selected = selected_np
    vstack_np = np.empty(kk, dtype=np.int64)
    jstack_np = np.empty(kk, dtype=np.int64)
    cdef cnp.int64_t[::1] vstack = vstack_np
    cdef cnp.int64_t[::1] jstack = jstack_np
    cdef Py_ssize_t sp = 0, pos = 0, rem, r, s_lo, s_hi, chosen, nc, j

    vstack[0] = root
    jstack[0] = kk
    sp = 1
    while sp > 0:
        sp -= 1
        v = vstack[sp]
        j = jstack[sp]
        selected[pos] = v
        pos += 1
        rem = j - 1
        if rem == 0:
            continue
        cs = children_start[v]
        ce = children_start[v + 1]
        nc = ce - cs
        # recompute prefix tables capped at rem
        work[0] = 0.0
        lens[0] = 0
        cur_len = 0
        t = 0
        for ci in range(cs, ce):
            c = children_flat[ci]
            cap_c = caps[c]
            new_len = cur_len + cap_c
            if new_len > rem:
                new_len = rem
            for m in range(new_len + 1):
                if m <= cur_len:
                    work[(t + 1) * stride + m] = work[t * stride + m]
                else:
                    work[(t + 1) * stride + m] = NEG_INF
            for s in range(1, (cap_c if cap_c < new_len else new_len) + 1):
                hi = new_len - s
                if hi > cur_len:
                    hi = cur_len
                if hi < 0:
                    break
                for m in range(hi + 1):
                    cand = work[t * stride + m] + tables[offsets[c] + s]
                    if cand > work[(t + 1) * stride + m + s]:
                        work[(t + 1) * stride + m + s] = cand
            t += 1
            cur_len = new_len
            lens[t] = cur_len
        r = rem
        for t in range(nc, 0, -1):
            c = children_flat[cs + t - 1]
            target = work[t * stride + r]
            s_lo = r - lens[t - 1]
            if s_lo < 0:
                s_lo = 0
            s_hi = caps[c] if caps[c] < r else r
            chosen = -1
            for s in range(s_lo, s_hi + 1):
                if work[(t - 1) * stride + r - s] + tables[offsets[c] + s] == target:
                    chosen = s
                    break
            if chosen < 0:
                raise AssertionError("projection reconstruction failed")
            if chosen >= 1:
                vstack[sp] = c
                jstack[sp] = chosen
                sp += 1
            r -= chosen
        if r != 0:
            raise AssertionError("projection reconstruction failed")

    selected_np.sort()
    return selected_np
