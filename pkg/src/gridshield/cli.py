"""Command-line front end: ``gridshield <command> ...``.

A YAML run configuration describes the model, transform, grid, sampling
and learning set-up.  Flags only pick the config, the command and a few
overrides (seed, output directory).

Exit codes: 0 success, 1 usage or config error, 2 empty controllable set,
3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import learn as L
from . import models as M
from . import synthesis as syn
from . import transform as T
from .errors import ConfigError, Degenerate, GridshieldError, SingularFit, VersionMismatch
from .grid import GridSpec
from .shield import QTABLE_MAGIC, SHIELD_MAGIC, TREE_MAGIC, DecisionTree, Strategy, to_tree

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_RUNTIME = 0, 1, 2, 3

PRESETS = Path(__file__).parent / "configs"

TRANSFORMS = {
    "identity": None,
    "polar": T.polar_transform,
    "energy": T.energy_transform,
    "poly_offset": T.poly_offset_transform,
}

_MODEL_PARAMS = {
    "bouncing_ball": ("params", M.BallParams),
    "cart_pole": ("params", M.CartPoleParams),
    "pole": ("params", M.CartPoleParams),
}


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class LearnConfig:
    task: str
    episodes: int = 100
    eval_episodes: int = 1000
    batch: int = 10
    horizon: float | None = None
    hyper: dict = field(default_factory=dict)
    task_params: dict = field(default_factory=dict)
    shields: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    name: str
    model_name: str
    model_params: dict
    transform_name: str
    transform_params: dict
    grid: GridSpec
    sampling: syn.SamplingConfig
    mode: str = "fixpoint"
    k: int = 3
    fit: dict = field(default_factory=dict)
    learn: LearnConfig | None = None
    output: Path = Path("out")
    seed: int = 0
    source: Path | None = None

    def model(self):
        return build_model(self.model_name, self.model_params)

    def transform(self):
        return build_transform(self.transform_name, self.transform_params, self.model())

    def path(self, suffix: str) -> Path:
        return self.output / f"{self.name}{suffix}"


def build_model(name: str, params: dict):
    if name not in M.MODELS:
        raise ConfigError("model.name", f"unknown model {name!r}; choose from {sorted(M.MODELS)}")
    params = dict(params)
    if name in _MODEL_PARAMS:
        key, cls = _MODEL_PARAMS[name]
        names = {f.name for f in dataclasses.fields(cls)}
        inner = {k: params.pop(k) for k in list(params) if k in names}
        params[key] = cls(**inner)
    try:
        return M.MODELS[name](**params)
    except TypeError as exc:
        raise ConfigError("model.params", str(exc)) from exc


def build_transform(name: str, params: dict, model):
    if name not in TRANSFORMS:
        raise ConfigError("transform.name", f"unknown transform {name!r}; choose from {sorted(TRANSFORMS)}")
    if name == "identity":
        if params:
            raise ConfigError("transform.params", "identity takes no parameters")
        return T.identity_transform(model.lower, model.upper)
    try:
        return TRANSFORMS[name](**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError("transform.params", str(exc)) from exc


def _require(d, key, path, kind=None):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    val = d[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}" if path else key, f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def _number(val, path, integer=False):
    ok = isinstance(val, int) if integer else isinstance(val, (int, float))
    if isinstance(val, bool) or not ok:
        raise ConfigError(path, f"expected {'an integer' if integer else 'a number'}, got {val!r}")
    return val


def _int_fields(raw, path, cls, minimum) -> dict:
    """Check an optional mapping of integer fields of ``cls`` against per-field minimums."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key, val in raw.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown key")
        if _number(val, f"{path}.{key}", integer=True) < minimum.get(key, 0):
            raise ConfigError(f"{path}.{key}", f"must be at least {minimum.get(key, 0)}")
    return raw


def _grid(raw) -> GridSpec:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("grid", "expected a non-empty list of {low, high, count}")
    dims = []
    for i, d in enumerate(raw):
        p = f"grid[{i}]"
        lo = _number(_require(d, "low", p), f"{p}.low")
        hi = _number(_require(d, "high", p), f"{p}.high")
        n = _number(_require(d, "count", p), f"{p}.count", integer=True)
        if not lo < hi:
            raise ConfigError(p, f"low {lo} must be below high {hi}")
        if n < 1:
            raise ConfigError(f"{p}.count", "must be positive")
        dims.append((lo, hi, n))
    return GridSpec.from_dims(dims)


def _learn(raw) -> LearnConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("learn", "expected a mapping")
    task = _require(raw, "task", "learn", str)
    if task not in L.TASKS:
        raise ConfigError("learn.task", f"unknown task {task!r}; choose from {sorted(L.TASKS)}")
    known = {f.name for f in dataclasses.fields(LearnConfig)}
    for k in raw:
        if k not in known:
            raise ConfigError(f"learn.{k}", "unknown key")
    cfg = LearnConfig(**raw)
    for key in ("episodes", "eval_episodes", "batch"):
        if _number(getattr(cfg, key), f"learn.{key}", integer=True) < (1 if key == "batch" else 0):
            raise ConfigError(f"learn.{key}", "out of range")
    for key in cfg.shields:
        if key not in L.SPACES:
            raise ConfigError(f"learn.shields.{key}", f"shield keys are {L.SPACES}")
    return cfg


def parse_config(raw: dict, source: Path | None = None) -> RunConfig:
    """Validate a parsed YAML document; every problem names its field path."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    known = {"name", "model", "transform", "grid", "sampling", "synthesis", "fit", "learn", "output", "seed"}
    for k in raw:
        if k not in known:
            raise ConfigError(k, "unknown key")
    name = _require(raw, "name", "", str)
    model_raw = _require(raw, "model", "", dict)
    model_name = _require(model_raw, "name", "model", str)
    model_params = model_raw.get("params") or {}
    tr_raw = raw.get("transform") or {"name": "identity"}
    tr_name = _require(tr_raw, "name", "transform", str)
    tr_params = tr_raw.get("params") or {}
    grid = _grid(_require(raw, "grid", ""))

    sampling = syn.SamplingConfig(**_int_fields(raw.get("sampling"), "sampling", syn.SamplingConfig,
                                                {"per_axis": 1, "random_disturbances": 0, "seed": 0}))

    synth = raw.get("synthesis") or {}
    mode = synth.get("mode", "fixpoint")
    if mode not in ("fixpoint", "bounded"):
        raise ConfigError("synthesis.mode", f"expected fixpoint or bounded, got {mode!r}")
    k = _number(synth.get("k", 3), "synthesis.k", integer=True)
    if k < 0:
        raise ConfigError("synthesis.k", "must be non-negative")

    seed = _number(raw.get("seed", 0), "seed", integer=True)
    out = raw.get("output") or {}
    output = Path(out.get("dir", "out"))

    fit = raw.get("fit") or {}
    if not isinstance(fit, dict):
        raise ConfigError("fit", "expected a mapping")
    for key, val in fit.items():
        if key == "counts":
            if not isinstance(val, list) or len(val) != grid.dim:
                raise ConfigError("fit.counts", f"expected a list of {grid.dim} integers")
            for i, c in enumerate(val):
                if _number(c, f"fit.counts[{i}]", integer=True) < 1:
                    raise ConfigError(f"fit.counts[{i}]", "must be positive")
        elif key in ("k", "per_axis"):
            if _number(val, f"fit.{key}", integer=True) < (0 if key == "k" else 1):
                raise ConfigError(f"fit.{key}", "out of range")
        else:
            raise ConfigError(f"fit.{key}", "unknown key")

    cfg = RunConfig(name, model_name, model_params, tr_name, tr_params, grid, sampling,
                    mode, k, fit, _learn(raw.get("learn")), output, seed, source)
    model = cfg.model()
    tr = cfg.transform()
    if tr.s_dim != model.dim:
        raise ConfigError("transform", f"{tr.name} works on {tr.s_dim}-D states, model {model_name} has {model.dim}")
    if grid.dim != tr.t_dim or not (
        np.allclose(grid.lower, tr.t_lower, atol=1e-9, rtol=0) and np.allclose(grid.upper, tr.t_upper, atol=1e-9, rtol=0)
    ):
        raise ConfigError(
            "grid", f"box {grid.lower}..{grid.upper} differs from the {tr.name} codomain {tr.t_lower}..{tr.t_upper}"
        )
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists() and (PRESETS / f"{path.name}.yaml").exists():
        path = PRESETS / f"{path.name}.yaml"
    if not path.exists():
        raise ConfigError("<file>", f"no such config: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from exc
    return parse_config(raw, path)


# ---------------------------------------------------------------------------
# Output helpers


def emit(stats: dict, title: str, out=None):
    """Print a human-readable block followed by ``key=value`` records."""
    out = out or sys.stdout
    print(title, file=out)
    width = max(len(k) for k in stats)
    for k, v in stats.items():
        print(f"  {k:<{width}}  {v}", file=out)
    for k, v in stats.items():
        print(f"{k}={v}", file=out)


def _write(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)


def _csv(rows, header) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(cfg: RunConfig) -> int:
    model, tr = cfg.model(), cfg.transform()
    max_sweeps = cfg.k if cfg.mode == "bounded" else -1
    res = syn.synthesize(model, tr, cfg.grid, cfg.sampling, max_sweeps)
    stats = {"model": cfg.model_name, "transform": tr.name, **res.stats()}
    if res.controllable == 0:
        emit(stats, f"synth {cfg.name}")
        print("error: controllable set empty", file=sys.stderr)
        return EXIT_EMPTY
    path = cfg.path(".shld")
    _write(path, res.strategy.to_bytes())
    stats["shield"] = str(path)
    emit(stats, f"synth {cfg.name}")
    return EXIT_OK


def run_fit(cfg: RunConfig):
    """Bounded fixpoint on the identity grid, boundary extraction and the odd cubic fit."""
    model = cfg.model()
    if model.dim != 2:
        raise ConfigError("model", "fit needs a 2-D model")
    tr = T.identity_transform(model.lower, model.upper)
    grid = GridSpec(model.lower, model.upper, cfg.fit.get("counts", cfg.grid.counts))
    sampling = dataclasses.replace(cfg.sampling, per_axis=cfg.fit.get("per_axis", cfg.sampling.per_axis))
    k = cfg.fit.get("k", cfg.k)
    tt = syn.compute_transitions(model, tr, grid, sampling)
    init = syn.initial_safe(grid, tr, model.safety, tt.has_preimage)
    marking = syn.bounded_fixpoint(tt, init, k)
    rows = syn.extract_boundaries(marking, grid)
    coeffs = syn.fit_polynomial([(r[0], r[3]) for r in rows])
    return coeffs, rows, int(marking.sum())


def cmd_fit(cfg: RunConfig) -> int:
    try:
        coeffs, rows, marked = run_fit(cfg)
    except (Degenerate, SingularFit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY if isinstance(exc, Degenerate) else EXIT_RUNTIME
    path = cfg.path("_boundaries.csv")
    _write(path, _csv([[repr(x) for x in r] for r in rows], ["theta", "upper", "lower", "mid"]))
    emit({"marked": marked, "columns": len(rows), "c1": repr(float(coeffs[0])), "c3": repr(float(coeffs[1])),
          "boundaries": str(path)}, f"fit {cfg.name}")
    return EXIT_OK


def cmd_tree(shield_path: Path, out: Path | None, lookahead: int) -> int:
    st = Strategy.load(shield_path)
    tree = to_tree(st, lookahead)
    if not tree.equivalent_to(st):
        print("error: tree differs from the shield", file=sys.stderr)
        return EXIT_RUNTIME
    out = out or shield_path.with_suffix(".tree")
    _write(out, tree.to_bytes())
    emit({"cells": st.grid.size, "nodes": tree.node_count,
          "compression": round(st.grid.size / tree.node_count, 3), "tree": str(out)}, f"tree {shield_path.name}")
    return EXIT_OK


def _task(cfg: RunConfig) -> L.Task:
    if cfg.learn is None:
        raise ConfigError("learn", "missing")
    params = dict(cfg.learn.task_params)
    if cfg.learn.horizon is not None:
        params["horizon"] = cfg.learn.horizon
    try:
        return L.TASKS[cfg.learn.task](**params)
    except TypeError as exc:
        raise ConfigError("learn.task_params", str(exc)) from exc


def _shields(cfg: RunConfig) -> dict:
    out = {}
    for key, path in cfg.learn.shields.items():
        # relative shield paths live in the output directory
        path = cfg.output / path
        if not path.exists():
            raise ConfigError(f"learn.shields.{key}", f"no such shield file: {path}")
        out[key] = Strategy.load(path)
    return out


def learning_matrix(cfg: RunConfig, spaces=L.SPACES, columns=("none", "S", "T")):
    """Train and evaluate every (learning space, shield) pair; returns rows and per-run summaries."""
    task = _task(cfg)
    shields = _shields(cfg)
    rows, runs = [], {}
    for space in spaces:
        for col in columns:
            if col != "none" and col not in shields:
                raise ConfigError(f"learn.shields.{col}", "missing")
            sh = shields.get(col)
            q = L.train(task, sh, space, cfg.learn.episodes, cfg.seed, cfg.learn.batch, **cfg.learn.hyper)
            summary = L.evaluate(task, q, sh, cfg.learn.eval_episodes, seed=cfg.seed + 1)
            runs[(space, col)] = (q, summary)
            rows.append([space, col, repr(summary.mean_return), summary.violations])
    return rows, runs, task


def cmd_learn(cfg: RunConfig, space=None, shield_col=None) -> int:
    spaces = (space,) if space else L.SPACES
    columns = (shield_col,) if shield_col else ("none", "S", "T")
    rows, runs, task = learning_matrix(cfg, spaces, columns)
    for (sp, col), (q, summary) in runs.items():
        tr = task.transform if sp == "T" else T.identity_transform(task.model.lower, task.model.upper)
        _write(cfg.path(f"_{sp}_{col}.qtbl"), q.to_bytes(tr))
        _write(cfg.path(f"_{sp}_{col}.csv"), summary.to_csv())
    path = cfg.path("_matrix.csv")
    _write(path, _csv(rows, ["space", "shield", "mean_return", "violations"]))
    print(f"learn {cfg.name}: space x shield (mean return / violations)")
    for r in rows:
        print(f"  {r[0]}  {r[1]:<4}  {float(r[2]):>12.4f}  {r[3]}")
    for r in rows:
        print(f"return[{r[0]},{r[1]}]={r[2]}")
        print(f"violations[{r[0]},{r[1]}]={r[3]}")
    print(f"matrix={path}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, qtable: Path | None, shield_col: str | None, episodes: int | None) -> int:
    task = _task(cfg)
    policy = None
    if qtable is not None:
        if not qtable.exists():
            raise ConfigError("--qtable", f"no such file: {qtable}")
        policy, _ = L.QTable.load(qtable)
    sh = None
    if shield_col:
        shields = _shields(cfg)
        if shield_col not in shields:
            raise ConfigError(f"learn.shields.{shield_col}", "missing")
        sh = shields[shield_col]
    n = episodes if episodes is not None else cfg.learn.eval_episodes
    summary = L.evaluate(task, policy, sh, n, seed=cfg.seed)
    tag = f"{'greedy' if policy else 'random'}_{shield_col or 'none'}"
    path = cfg.path(f"_eval_{tag}.csv")
    _write(path, summary.to_csv())
    emit({"episodes": n, "mean_return": repr(summary.mean_return), "violations": summary.violations,
          "csv": str(path)}, f"eval {cfg.name} ({tag})")
    return EXIT_OK


def cmd_rollout(cfg: RunConfig, steps: int) -> int:
    model = cfg.model()
    start = None
    if cfg.learn is not None:
        start = _task(cfg).sample_starts(1, np.random.default_rng(cfg.seed))[0]
        model = _task(cfg).model
    ro = L.random_rollout(model, steps, cfg.seed, start)
    names = [f"x{i}" for i in range(model.dim)]
    path = cfg.path("_rollout.csv")
    _write(path, ro.to_csv(names))
    emit({"steps": steps, "unsafe_states": int(ro.unsafe.sum()), "csv": str(path)}, f"rollout {cfg.name}")
    return EXIT_OK


_PALETTE = ["#1a1a1a", "#4c72b0", "#dd8452", "#f2f2f2", "#55a868", "#c44e52", "#8172b3", "#937860"]


def cmd_heatmap(shield_path: Path, out: Path | None, backproject: int) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import BoundaryNorm, ListedColormap
    from matplotlib.patches import Patch

    st = Strategy.load(shield_path)
    if st.grid.dim != 2:
        print(f"error: heatmaps need a 2-D shield, got {st.grid.dim}-D", file=sys.stderr)
        return EXIT_CONFIG
    n_masks = 1 << len(st.actions)
    colors = [_PALETTE[i % len(_PALETTE)] for i in range(n_masks)]
    cmap = ListedColormap(colors)
    norm = BoundaryNorm(np.arange(n_masks + 1) - 0.5, n_masks)
    panels = 2 if backproject else 1
    fig, axes = plt.subplots(1, panels, figsize=(5 * panels, 4), squeeze=False)
    ax = axes[0, 0]
    grid_masks = st.masks.reshape(st.grid.counts).T
    ax.pcolormesh(st.grid.boundaries(0), st.grid.boundaries(1), grid_masks, cmap=cmap, norm=norm,
                  edgecolors="face", linewidth=0)
    ax.set_xlabel(f"{st.transform.name} t0")
    ax.set_ylabel(f"{st.transform.name} t1")
    ax.set_title("shield in T")
    if backproject:
        tr = st.transform
        xs = np.linspace(tr.s_lower[0], tr.s_upper[0], backproject + 1)
        ys = np.linspace(tr.s_lower[1], tr.s_upper[1], backproject + 1)
        cx, cy = (xs[:-1] + xs[1:]) / 2, (ys[:-1] + ys[1:]) / 2
        pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
        defined = tr.defined(pts)
        masks = np.zeros(len(pts), dtype=np.uint8)
        masks[defined] = st.masks_in_S(pts[defined])
        ax2 = axes[0, 1]
        ax2.pcolormesh(xs, ys, masks.reshape(backproject, backproject).T, cmap=cmap, norm=norm,
                       edgecolors="face", linewidth=0)
        ax2.set_xlabel("s0")
        ax2.set_ylabel("s1")
        ax2.set_title("shield in T, mapped back to S")
    present = sorted(set(int(m) for m in np.unique(st.masks)))
    handles = [Patch(color=colors[m], label="{" + ", ".join(sorted(st.names(m))) + "}") for m in present]
    fig.legend(handles=handles, loc="lower center", ncol=len(handles), frameon=False)
    fig.tight_layout(rect=(0, 0.08, 1, 1))
    out = out or shield_path.with_suffix(".svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    emit({"cells": st.grid.size, "masks": len(present), "image": str(out)}, f"heatmap {shield_path.name}")
    return EXIT_OK


def cmd_info(path: Path) -> int:
    data = path.read_bytes()
    magic = data[:4]
    if magic == SHIELD_MAGIC:
        st = Strategy.from_bytes(data)
        stats = {"kind": "shield", "cells": st.grid.size, "controllable": st.n_controllable}
        grid, actions, tr = st.grid, st.actions, st.transform
    elif magic == TREE_MAGIC:
        tree = DecisionTree.from_bytes(data)
        stats = {"kind": "tree", "nodes": tree.node_count}
        grid, actions, tr = tree.grid, tree.actions, tree.transform
    elif magic == QTABLE_MAGIC:
        q, tr = L.QTable.from_bytes(data)
        stats = {"kind": "qtable", "space": q.space, "cells": q.grid.size}
        grid, actions = q.grid, q.actions
    else:
        raise VersionMismatch(f"unrecognised magic {magic!r}")
    stats.update({
        "grid": " x ".join(f"[{lo:g},{hi:g})/{n}" for lo, hi, n in zip(grid.lower, grid.upper, grid.counts)),
        "actions": ",".join(actions),
        "transform": tr.name,
        "transform_params": ",".join(repr(p) for p in tr.params()),
    })
    emit(stats, f"info {path.name}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridshield", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("config", help="YAML run configuration, or the name of a bundled preset")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out", type=Path, help="override the output directory")
        return sp

    with_config("synth", "synthesize a shield")
    with_config("fit", "bounded fixpoint, boundary extraction and polynomial fit")
    sp = with_config("learn", "train and evaluate the space x shield matrix")
    sp.add_argument("--space", choices=L.SPACES, help="only this learning space")
    sp.add_argument("--shield", choices=("none", "S", "T"), help="only this shield column")
    sp = with_config("eval", "evaluate a Q-table (or a random policy)")
    sp.add_argument("--qtable", type=Path)
    sp.add_argument("--shield", choices=("S", "T"))
    sp.add_argument("--episodes", type=int)
    sp = with_config("rollout", "random rollout exported as CSV")
    sp.add_argument("--steps", type=int, default=1000)

    sp = sub.add_parser("tree", help="compress a shield into a decision tree")
    sp.add_argument("shield", type=Path)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--lookahead-cells", type=int, default=None,
                    help="blocks up to this size use one-step lookahead (0: plain greedy)")
    sp = sub.add_parser("heatmap", help="SVG of a 2-D shield")
    sp.add_argument("shield", type=Path)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--backproject", type=int, default=0, metavar="N",
                    help="also colour an N x N grid over S through the transform")
    sp = sub.add_parser("info", help="describe a shield, tree or Q-table file")
    sp.add_argument("file", type=Path)
    return p


def _run(args) -> int:
    if args.command == "tree":
        from .shield import LOOKAHEAD_CELLS

        la = LOOKAHEAD_CELLS if args.lookahead_cells is None else args.lookahead_cells
        return cmd_tree(args.shield, args.out, la)
    if args.command == "heatmap":
        return cmd_heatmap(args.shield, args.out, args.backproject)
    if args.command == "info":
        return cmd_info(args.file)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.sampling = dataclasses.replace(cfg.sampling, seed=args.seed)
    if args.out is not None:
        cfg.output = args.out
    if args.command == "synth":
        return cmd_synth(cfg)
    if args.command == "fit":
        return cmd_fit(cfg)
    if args.command == "learn":
        return cmd_learn(cfg, args.space, args.shield)
    if args.command == "eval":
        return cmd_eval(cfg, args.qtable, args.shield, args.episodes)
    if args.command == "rollout":
        return cmd_rollout(cfg, args.steps)
    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridshieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
