"""Pure numpy fixpoint kernels, used when the compiled extension is unavailable.

Transition tables arrive in CSR form over rows ``action * n_cells + cell``:
``indptr`` (rows + 1), ``indices`` (successor cell per edge) and
``escapes`` (one flag per row).
"""
import numpy as np


def _good_rows(indptr, indices, escapes, safe):
    n_rows = len(indptr) - 1
    row_of_edge = np.repeat(np.arange(n_rows), np.diff(indptr))
    bad_edges = np.bincount(row_of_edge, weights=~safe[indices], minlength=n_rows)
    return (bad_edges == 0) & ~escapes.astype(bool)


def fixpoint_sweeps(indptr, indices, escapes, n_cells, n_actions, init, max_sweeps=-1):
    """Synchronous removal sweeps from ``init``.

    Each sweep drops every cell that has no action whose successors all lie
    in the current set.  Stops at the fixpoint or after ``max_sweeps``
    removing sweeps (negative: unbounded).  Returns ``(safe, sweeps)``.
    """
    safe = np.asarray(init, dtype=bool).copy()
    sweeps = 0
    while max_sweeps < 0 or sweeps < max_sweeps:
        good = _good_rows(indptr, indices, escapes, safe).reshape(n_actions, n_cells).any(axis=0)
        remove = safe & ~good
        if not remove.any():
            break
        safe &= ~remove
        sweeps += 1
    return safe.astype(np.uint8), sweeps


def action_masks(indptr, indices, escapes, n_cells, n_actions, safe):
    """Bitmask per cell of the actions whose successors all stay in ``safe``; 0 outside it."""
    safe = np.asarray(safe, dtype=bool)
    good = _good_rows(indptr, indices, escapes, safe).reshape(n_actions, n_cells)
    masks = np.zeros(n_cells, dtype=np.uint8)
    for a in range(n_actions):
        masks |= (good[a] & safe).astype(np.uint8) << a
    return masks
