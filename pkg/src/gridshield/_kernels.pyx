# Compiled fixpoint kernels.  Same contract as _kernels_py; the fixpoint
# here runs a predecessor worklist instead of full sweeps, processed layer by
# layer so the sweep count and every bounded result match the numpy version.
import numpy as np

from libc.stdint cimport int64_t, uint8_t


def fixpoint_sweeps(const int64_t[::1] indptr, const int64_t[::1] indices,
                    const uint8_t[::1] escapes, Py_ssize_t n_cells, Py_ssize_t n_actions,
                    init, Py_ssize_t max_sweeps=-1):
    cdef Py_ssize_t n_rows = n_cells * n_actions
    cdef Py_ssize_t n_edges = indptr[n_rows]
    cdef Py_ssize_t r, e, c, cc, k, i, n_layer, n_next
    cdef Py_ssize_t sweeps = 0

    safe_arr = np.ascontiguousarray(init, dtype=np.uint8).copy()
    cdef uint8_t[::1] safe = safe_arr

    # reverse adjacency: for each cell, the rows that reach it
    pred_ptr_arr = np.zeros(n_cells + 1, dtype=np.int64)
    cdef int64_t[::1] pred_ptr = pred_ptr_arr
    for e in range(n_edges):
        pred_ptr[indices[e] + 1] += 1
    for c in range(n_cells):
        pred_ptr[c + 1] += pred_ptr[c]
    fill_arr = pred_ptr_arr[:-1].copy()
    cdef int64_t[::1] fill = fill_arr
    pred_arr = np.empty(n_edges, dtype=np.int64)
    cdef int64_t[::1] pred = pred_arr
    for r in range(n_rows):
        for e in range(indptr[r], indptr[r + 1]):
            c = indices[e]
            pred[fill[c]] = r
            fill[c] += 1

    bad_arr = np.zeros(n_rows, dtype=np.int64)
    cdef int64_t[::1] bad = bad_arr
    alive_arr = np.zeros(n_cells, dtype=np.int64)
    cdef int64_t[::1] alive = alive_arr
    for r in range(n_rows):
        bad[r] = escapes[r]
        for e in range(indptr[r], indptr[r + 1]):
            if not safe[indices[e]]:
                bad[r] += 1
        if bad[r] == 0:
            alive[r % n_cells] += 1

    layer_arr = np.empty(n_cells, dtype=np.int64)
    next_arr = np.empty(n_cells, dtype=np.int64)
    cdef int64_t[::1] layer = layer_arr
    cdef int64_t[::1] nxt = next_arr
    n_layer = 0
    for c in range(n_cells):
        if safe[c] and alive[c] == 0:
            layer[n_layer] = c
            n_layer += 1

    while n_layer > 0 and (max_sweeps < 0 or sweeps < max_sweeps):
        sweeps += 1
        for i in range(n_layer):
            safe[layer[i]] = 0
        n_next = 0
        for i in range(n_layer):
            c = layer[i]
            for k in range(pred_ptr[c], pred_ptr[c + 1]):
                r = pred[k]
                if bad[r] == 0:
                    cc = r % n_cells
                    alive[cc] -= 1
                    if safe[cc] and alive[cc] == 0:
                        nxt[n_next] = cc
                        n_next += 1
                bad[r] += 1
        layer, nxt = nxt, layer
        n_layer = n_next

    return safe_arr, int(sweeps)


def action_masks(const int64_t[::1] indptr, const int64_t[::1] indices,
                 const uint8_t[::1] escapes, Py_ssize_t n_cells, Py_ssize_t n_actions, safe_in):
    cdef const uint8_t[::1] safe = np.ascontiguousarray(safe_in, dtype=np.uint8)
    masks_arr = np.zeros(n_cells, dtype=np.uint8)
    cdef uint8_t[::1] masks = masks_arr
    cdef Py_ssize_t a, c, r, e
    cdef bint ok
    for a in range(n_actions):
        for c in range(n_cells):
            if not safe[c]:
                continue
            r = a * n_cells + c
            ok = not escapes[r]
            e = indptr[r]
            while ok and e < indptr[r + 1]:
                ok = safe[indices[e]] != 0
                e += 1
            if ok:
                masks[c] |= <uint8_t>(1 << a)
    return masks_arr
