"""Shields: per-cell action masks over a grid in T, queried from T or from S.

File layout (little-endian)::

    magic[4] version:u32 dim:u32 {low:f64 high:f64 count:u64}*dim
    n_actions:u32 {len:u32 utf8}*n_actions
    transform_tag:u32 n_params:u32 param:f64*n_params
    body

A shield body is the row-major ``u8`` mask array.  A tree body is
``n_nodes:u32`` followed by the preorder nodes: ``0:u8 mask:u8`` for a leaf,
``1:u8 dim:u32 threshold:f64`` for a split (left child holds ``x < threshold``).
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptFile, OutOfBounds, Uncontrollable, UndefinedTransform, VersionMismatch
from .grid import GridSpec
from .transform import Transform, from_params

SHIELD_MAGIC = b"SHLD"
TREE_MAGIC = b"SHTR"
QTABLE_MAGIC = b"QTBL"
FORMAT_VERSION = 1


class Strategy:
    """Most-permissive strategy over a grid in T, with the transform that maps S into it."""

    def __init__(self, grid: GridSpec, masks, actions, transform: Transform):
        masks = np.ascontiguousarray(masks, dtype=np.uint8).reshape(-1)
        if masks.shape[0] != grid.size:
            raise ValueError(f"{masks.shape[0]} masks for a grid of {grid.size} cells")
        if len(actions) > 8:
            raise ValueError("at most 8 actions fit in a u8 mask")
        if np.any(masks >> len(actions)):
            raise ValueError("mask bits beyond the action count")
        self.grid = grid
        self.masks = masks
        self.masks.setflags(write=False)
        self.actions = tuple(actions)
        self.transform = transform

    def __eq__(self, other):
        return (
            isinstance(other, Strategy)
            and self.grid == other.grid
            and self.actions == other.actions
            and self.transform == other.transform
            and np.array_equal(self.masks, other.masks)
        )

    def __repr__(self):
        return (f"Strategy({self.transform.name}, cells={self.grid.size}, "
                f"controllable={self.n_controllable}, actions={self.actions})")

    @property
    def controllable(self) -> np.ndarray:
        return self.masks != 0

    @property
    def n_controllable(self) -> int:
        return int(np.count_nonzero(self.masks))

    def names(self, mask: int) -> frozenset[str]:
        return frozenset(a for i, a in enumerate(self.actions) if mask >> i & 1)

    # -- batched lookups ------------------------------------------------

    def masks_in_T(self, t) -> np.ndarray:
        """Masks for a batch of T points; 0 for points outside the grid box."""
        ids = self.grid.cell_ids(t)
        out = np.zeros(len(ids), dtype=np.uint8)
        ok = ids >= 0
        out[ok] = self.masks[ids[ok]]
        return out

    def masks_in_S(self, s) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        return self.masks_in_T(self.transform.forward(s))

    # -- single-point queries -------------------------------------------

    def allowed_in_T(self, t) -> frozenset[str]:
        c = self.grid.cell_of(t)
        return self.names(int(self.masks[self.grid.flat_id(c)]))

    def allowed_in_S(self, s) -> frozenset[str]:
        s = np.asarray(s, dtype=float).reshape(-1)
        lo, hi = np.asarray(self.transform.s_lower), np.asarray(self.transform.s_upper)
        if s.shape[0] != len(lo) or np.any(s < lo) or np.any(s >= hi):
            raise OutOfBounds(f"state {tuple(s)} outside S box {tuple(lo)}..{tuple(hi)}")
        if not self.transform.defined(s[None, :])[0]:
            raise UndefinedTransform(f"{self.transform.name} is undefined at {tuple(s)}")
        t = self.transform.forward(s[None, :])[0]
        if not self.grid.contains(t[None, :])[0]:
            return frozenset()
        return self.allowed_in_T(t)

    def filter(self, s, proposed):
        """Pass ``proposed`` through if allowed at ``s``, else the lowest-index allowed action.

        ``proposed`` may be an action name or index; the result has the same kind.
        """
        allowed = self.allowed_in_S(s)
        if not allowed:
            raise Uncontrollable(f"no action is allowed at {tuple(np.ravel(s))}")
        by_index = not isinstance(proposed, str)
        name = self.actions[proposed] if by_index else proposed
        if name not in allowed:
            name = next(a for a in self.actions if a in allowed)
        return self.actions.index(name) if by_index else name

    # -- persistence ------------------------------------------------------

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        write_header(buf, SHIELD_MAGIC, self.grid, self.actions, self.transform)
        buf.write(self.masks.tobytes())
        return buf.getvalue()

    @classmethod
    def load(cls, path) -> Strategy:
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> Strategy:
        buf = io.BytesIO(data)
        grid, actions, transform = read_header(buf, SHIELD_MAGIC)
        body = buf.read()
        if len(body) != grid.size:
            raise CorruptFile(f"mask array has {len(body)} bytes, grid has {grid.size} cells")
        masks = np.frombuffer(body, dtype=np.uint8).copy()
        try:
            return cls(grid, masks, actions, transform)
        except ValueError as exc:
            raise CorruptFile(str(exc)) from exc


def save(st: Strategy, path):
    st.save(path)


def load(path) -> Strategy:
    return Strategy.load(path)


# ---------------------------------------------------------------------------
# Header encoding shared by shields, trees and Q-tables


def write_header(buf, magic: bytes, grid: GridSpec, actions, transform: Transform):
    buf.write(magic)
    buf.write(struct.pack("<II", FORMAT_VERSION, grid.dim))
    for lo, hi, n in zip(grid.lower, grid.upper, grid.counts):
        buf.write(struct.pack("<ddQ", lo, hi, n))
    buf.write(struct.pack("<I", len(actions)))
    for a in actions:
        raw = a.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    params = transform.params()
    buf.write(struct.pack("<II", transform.tag, len(params)))
    buf.write(struct.pack(f"<{len(params)}d", *params))


def _read(buf, fmt):
    size = struct.calcsize(fmt)
    raw = buf.read(size)
    if len(raw) != size:
        raise CorruptFile("unexpected end of file")
    return struct.unpack(fmt, raw)


def read_header(buf, magic: bytes):
    got = buf.read(4)
    if got != magic:
        raise VersionMismatch(f"bad magic {got!r}, expected {magic!r}")
    version, dim = _read(buf, "<II")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, this build reads {FORMAT_VERSION}")
    if not 1 <= dim <= 64:
        raise CorruptFile(f"implausible dimension {dim}")
    dims = [_read(buf, "<ddQ") for _ in range(dim)]
    try:
        grid = GridSpec.from_dims(dims)
    except ValueError as exc:
        raise CorruptFile(str(exc)) from exc
    (n_actions,) = _read(buf, "<I")
    actions = []
    for _ in range(n_actions):
        (length,) = _read(buf, "<I")
        raw = buf.read(length)
        if len(raw) != length:
            raise CorruptFile("truncated action name")
        actions.append(raw.decode("utf-8"))
    tag, n_params = _read(buf, "<II")
    params = _read(buf, f"<{n_params}d")
    try:
        transform = from_params(tag, params)
    except (ValueError, TypeError) as exc:
        raise CorruptFile(f"bad transform record: {exc}") from exc
    return grid, tuple(actions), transform


# ---------------------------------------------------------------------------
# Decision trees


@dataclass(frozen=True)
class Leaf:
    mask: int


@dataclass(frozen=True)
class Split:
    dim: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


def _entropy_cost(counts):
    """Count-weighted entropy ``n * H`` along the last axis."""
    n = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / n[..., None]
        h = -np.nansum(np.where(counts > 0, p * np.log2(p), 0.0), axis=-1)
    return n * h


def _best_split(block):
    """``(dim, offset)`` minimizing the children's weighted entropy; ties go to the lowest dim, then offset."""
    labels = np.unique(block)
    best = None
    for dim in range(block.ndim):
        n = block.shape[dim]
        if n < 2:
            continue
        other = tuple(ax for ax in range(block.ndim) if ax != dim)
        per_slice = np.stack([(block == lab).sum(axis=other) for lab in labels], axis=1)
        left = np.cumsum(per_slice, axis=0)[:-1]
        right = per_slice.sum(axis=0) - left
        cost = np.round(_entropy_cost(left) + _entropy_cost(right), 9)
        i = int(np.argmin(cost))
        if best is None or cost[i] < best[0]:
            best = (cost[i], dim, i + 1)
    return best[1], best[2]


class DecisionTree:
    """Axis-aligned tree equal to a strategy's cell map on every cell."""

    def __init__(self, root, grid: GridSpec, actions, transform: Transform):
        self.root = root
        self.grid = grid
        self.actions = tuple(actions)
        self.transform = transform

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self._preorder())

    def _preorder(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Split):
                stack.append(node.right)
                stack.append(node.left)

    def evaluate(self, t) -> int:
        t = np.asarray(t, dtype=float).reshape(-1)
        node = self.root
        while isinstance(node, Split):
            node = node.left if t[node.dim] < node.threshold else node.right
        return node.mask

    def evaluate_batch(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=np.uint8)
        stack = [(self.root, np.arange(len(pts)))]
        while stack:
            node, idx = stack.pop()
            if isinstance(node, Leaf):
                out[idx] = node.mask
                continue
            go_left = pts[idx, node.dim] < node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def equivalent_to(self, st: Strategy) -> bool:
        return bool(np.array_equal(self.evaluate_batch(st.grid.centers()), st.masks))

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        write_header(buf, TREE_MAGIC, self.grid, self.actions, self.transform)
        nodes = list(self._preorder())
        buf.write(struct.pack("<I", len(nodes)))
        for node in nodes:
            if isinstance(node, Leaf):
                buf.write(struct.pack("<BB", 0, node.mask))
            else:
                buf.write(struct.pack("<BId", 1, node.dim, node.threshold))
        return buf.getvalue()

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> DecisionTree:
        buf = io.BytesIO(data)
        grid, actions, transform = read_header(buf, TREE_MAGIC)
        (n_nodes,) = _read(buf, "<I")
        records = []
        for _ in range(n_nodes):
            (kind,) = _read(buf, "<B")
            if kind == 0:
                records.append(Leaf(_read(buf, "<B")[0]))
            elif kind == 1:
                records.append(_read(buf, "<Id"))
            else:
                raise CorruptFile(f"unknown node kind {kind}")
        if buf.read(1):
            raise CorruptFile("trailing bytes after the node list")
        # rebuild from preorder: each open split waits for its two children
        open_splits = []
        root = None
        for pos, rec in enumerate(records):
            node = rec if isinstance(rec, Leaf) else [rec[0], rec[1]]
            if open_splits:
                open_splits[-1].append(node)
            elif pos == 0:
                root = node
            else:
                raise CorruptFile("extra nodes after the root subtree")
            if not isinstance(node, Leaf):
                open_splits.append(node)
            while open_splits and len(open_splits[-1]) == 4:
                open_splits.pop()
        if root is None or open_splits:
            raise CorruptFile("node list ends inside a subtree")
        return cls(_freeze_lists(root), grid, actions, transform)

    @classmethod
    def load(cls, path) -> DecisionTree:
        return cls.from_bytes(Path(path).read_bytes())


LOOKAHEAD_CELLS = 1024


def _greedy_size(cube, origin, shape, memo) -> int:
    """Node count of the plain greedy tree over a block, memoized by block."""
    key = (origin, shape)
    if key in memo:
        return memo[key]
    # postorder over the blocks still to size
    stack = [(origin, shape, False)]
    while stack:
        o, sh, expanded = stack.pop()
        if (o, sh) in memo:
            continue
        block = cube[tuple(slice(a, a + n) for a, n in zip(o, sh))]
        if np.all(block == block.flat[0]):
            memo[(o, sh)] = 1
            continue
        dim, cut = _best_split(block)
        left, right = _halves(o, sh, dim, cut)
        if expanded:
            memo[(o, sh)] = 1 + memo[left] + memo[right]
        else:
            stack.append((o, sh, True))
            stack.append((*right, False))
            stack.append((*left, False))
    return memo[key]


def _halves(origin, shape, dim, cut):
    left = (origin, tuple(cut if ax == dim else n for ax, n in enumerate(shape)))
    right = (tuple(o + cut if ax == dim else o for ax, o in enumerate(origin)),
             tuple(n - cut if ax == dim else n for ax, n in enumerate(shape)))
    return left, right


def _lookahead_split(cube, origin, shape, memo):
    """Split whose two greedy subtrees are smallest; ties go to the lowest dim, then offset."""
    best = None
    for dim in range(len(shape)):
        for cut in range(1, shape[dim]):
            left, right = _halves(origin, shape, dim, cut)
            size = _greedy_size(cube, *left, memo) + _greedy_size(cube, *right, memo)
            if best is None or size < best[0]:
                best = (size, dim, cut)
    return best[1], best[2]


def to_tree(st: Strategy, lookahead_cells: int = LOOKAHEAD_CELLS) -> DecisionTree:
    """Split on cell boundaries until every block has one mask.

    Blocks larger than ``lookahead_cells`` take the greedy entropy split.
    Smaller blocks take the split whose greedy subtrees have the fewest
    nodes, which is never worse than the entropy split.  ``0`` gives the
    plain greedy tree.
    """
    grid = st.grid
    cube = st.masks.reshape(grid.counts)
    bounds = [grid.boundaries(ax) for ax in range(grid.dim)]
    memo = {}
    root_holder = []
    # explicit stack: (block origin, block shape, slot setter)
    stack = [((0,) * grid.dim, tuple(grid.counts), root_holder.append)]
    while stack:
        origin, shape, attach = stack.pop()
        block = cube[tuple(slice(o, o + n) for o, n in zip(origin, shape))]
        first = block.flat[0]
        if np.all(block == first):
            attach(Leaf(int(first)))
            continue
        if block.size <= lookahead_cells:
            dim, cut = _lookahead_split(cube, origin, shape, memo)
        else:
            dim, cut = _best_split(block)
        node = _PendingSplit(dim, float(bounds[dim][origin[dim] + cut]))
        attach(node)
        left, right = _halves(origin, shape, dim, cut)
        stack.append((*right, node.set_right))
        stack.append((*left, node.set_left))
    return DecisionTree(_freeze(root_holder[0]), grid, st.actions, st.transform)


class _PendingSplit:
    def __init__(self, dim, threshold):
        self.dim, self.threshold = dim, threshold
        self.left = self.right = None

    def set_left(self, node):
        self.left = node

    def set_right(self, node):
        self.right = node


def _freeze_lists(node):
    """Convert ``[dim, threshold, left, right]`` lists into Split nodes."""
    done = {}
    stack = [(node, False)]
    while stack:
        cur, expanded = stack.pop()
        if isinstance(cur, Leaf):
            done[id(cur)] = cur
        elif expanded:
            done[id(cur)] = Split(int(cur[0]), float(cur[1]), done[id(cur[2])], done[id(cur[3])])
        else:
            stack.append((cur, True))
            stack.append((cur[3], False))
            stack.append((cur[2], False))
    return done[id(node)]


def _freeze(node):
    # postorder without recursion; trees can be deeper than the recursion limit
    done = {}
    stack = [(node, False)]
    while stack:
        cur, expanded = stack.pop()
        if isinstance(cur, Leaf):
            done[id(cur)] = cur
        elif expanded:
            done[id(cur)] = Split(cur.dim, cur.threshold, done[id(cur.left)], done[id(cur.right)])
        else:
            stack.append((cur, True))
            stack.append((cur.right, False))
            stack.append((cur.left, False))
    return done[id(node)]
