"""Config-driven experiment runner behind the command line interface.

A config is one JSON document::

    {
      "dataset": {"path": "coil20", "format": "pgm", "downsample": [4, 4]},
      "method": "crp",
      "split": {"per_class": 10, "repetitions": 5, "seed": 0},
      "crp": {"k": 2, "lambdas": [1e-6, 1e-4, 0.01, 1, 100, 1e4, 1e6]},
      "baseline": {"dims": null, "ridge": null, "iters": 1},
      "jobs": 1
    }

``dataset.format`` is ``csv``, ``pgm`` or ``synthetic`` (then
``dataset.synthetic`` holds :class:`~crp.dataio.SynthSpec` fields). Relative
paths resolve against the config file's directory. Every field except
``dataset`` has a default matching the published protocol.
"""
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .baselines import fit_2dlda, fit_lda, transform_2dlda, transform_lda
from .classify import SplitSpec, _run_trial_safe, stratified_split
from .core import CrpConfig, fit_crp, fit_pair, deflate, transform
from .dataio import SynthSpec, downsample_dataset, load_dataset, synth_dataset
from .errors import ConfigError
from .stats import compute_class_stats, within_deviations

logger = logging.getLogger(__name__)

__all__ = [
    "LAMBDA_GRID",
    "SUMMARY_SCHEMA_VERSION",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "load_data",
    "make_method",
    "run_experiment",
    "trace_convergence",
    "fit_model",
    "run_bench",
]

LAMBDA_GRID = (1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6)
SUMMARY_SCHEMA_VERSION = 1
METHODS = ("crp", "lda", "twodlda", "raw")


@dataclass(frozen=True)
class DatasetSection:
    path: str | None = None
    format: str | None = None
    downsample: tuple | None = None
    synthetic: dict | None = None


@dataclass(frozen=True)
class CrpSection:
    h: int | None = None
    k: int = 2
    lambdas: tuple = LAMBDA_GRID
    tol: float = 1e-6
    max_iter: int = 50
    init: str = "identity"
    init_scale: float = 1.0
    replay: bool = True
    k_sweep: tuple | None = None
    init_sweep: tuple | None = None


@dataclass(frozen=True)
class BaselineSection:
    dims: int | None = None
    ridge: float | None = None
    iters: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSection
    method: str = "crp"
    split: SplitSpec = field(default_factory=lambda: SplitSpec(per_class=10))
    crp: CrpSection = CrpSection()
    baseline: BaselineSection = BaselineSection()
    jobs: int = 1
    base_dir: str = "."

    def to_dict(self):
        # jobs is an execution detail and is reported with the timings
        d = asdict(self)
        d.pop("base_dir")
        d.pop("jobs")
        return d


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"'{name}' must be an object")
    known = set(cls.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{name}': {exc}") from exc


def parse_config(raw, base_dir="."):
    """Validate a decoded JSON config and return an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"dataset", "method", "split", "crp", "baseline", "jobs"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "dataset" not in raw:
        raise ConfigError("missing 'dataset' section")
    dataset = _section(DatasetSection, raw["dataset"], "dataset")
    fmt = dataset.format
    if fmt not in (None, "csv", "pgm", "synthetic"):
        raise ConfigError(f"unknown dataset format {fmt!r}")
    if fmt == "synthetic":
        if not isinstance(dataset.synthetic, dict):
            raise ConfigError("synthetic dataset needs a 'synthetic' object")
        try:
            SynthSpec(**dataset.synthetic)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synthetic spec: {exc}") from exc
    elif dataset.path is None:
        raise ConfigError("dataset.path is required unless format is 'synthetic'")
    if dataset.downsample is not None and (
            len(dataset.downsample) != 2 or min(dataset.downsample) < 1):
        raise ConfigError("dataset.downsample must be two positive integers")
    method = raw.get("method", "crp")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    split_raw = dict(raw.get("split") or {})
    if "per_class" not in split_raw and "fraction" not in split_raw:
        split_raw["per_class"] = 10
    split = _section(SplitSpec, split_raw, "split")
    crp = _section(CrpSection, raw.get("crp"), "crp")
    if method == "crp":
        if not crp.lambdas:
            raise ConfigError("crp.lambdas must be a nonempty list")
        try:
            for lam in crp.lambdas:
                CrpConfig(h=crp.h, k=crp.k, lam=float(lam), tol=crp.tol,
                          max_iter=crp.max_iter, init=crp.init,
                          init_scale=crp.init_scale, replay=crp.replay)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'crp': {exc}") from exc
        if crp.k_sweep and crp.init_sweep:
            raise ConfigError("use at most one of crp.k_sweep and crp.init_sweep")
        for value in crp.init_sweep or ():
            if value != "random" and not (isinstance(value, (int, float)) and value > 0):
                raise ConfigError(f"init_sweep entries are positive scales or 'random', got {value!r}")
    baseline = _section(BaselineSection, raw.get("baseline"), "baseline")
    jobs = raw.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs must be a positive integer")
    return ExperimentConfig(dataset, method, split, crp, baseline, jobs, str(base_dir))


def load_config(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw, base_dir=path.parent)


def load_data(cfg):
    ds = cfg.dataset
    if ds.format == "synthetic":
        d = synth_dataset(SynthSpec(**ds.synthetic))
    else:
        path = Path(ds.path)
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        d = load_dataset(path, ds.format)
    if ds.downsample is not None:
        d = downsample_dataset(d, *ds.downsample)
    return d


# -- methods: picklable factories mapping a training Dataset to an embedder --

class _Embedder:
    def __init__(self, fn, model, info=None):
        self.fn = fn
        self.model = model
        self.info = info

    def __call__(self, X):
        return self.fn(self.model, X)


def _flatten(_, X):
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(X.shape[0], -1)


class CrpMethod:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, train):
        model = fit_crp(train, self.cfg)
        info = {"traces": [list(t) for t in model.objective_traces],
                "degenerate_pairs": int(sum(model.degenerate))}
        return _Embedder(transform, model, info)


class LdaMethod:
    def __init__(self, dims=None, ridge=None):
        self.dims = dims
        self.ridge = ridge

    def __call__(self, train):
        l1, l2 = train.shape
        dims = self.dims or min((train.n_classes - 1) ** 2, l1 * l2)
        return _Embedder(transform_lda, fit_lda(train, max(dims, 1), self.ridge))


class TwoDldaMethod:
    def __init__(self, dims=None, ridge=None, iters=1):
        self.dims = dims
        self.ridge = ridge
        self.iters = iters

    def __call__(self, train):
        l1, l2 = train.shape
        d = self.dims or max(train.n_classes - 1, 1)
        model = fit_2dlda(train, min(d, l1), min(d, l2), self.iters, self.ridge)
        return _Embedder(transform_2dlda, model, {"objectives": list(model.objectives)})


class RawMethod:
    def __call__(self, train):
        return _Embedder(_flatten, None)


def crp_config(cfg, lam, k=None, init=None, seed=0):
    c = cfg.crp
    init_mode, init_scale = c.init, c.init_scale
    if init is not None:
        init_mode, init_scale = ("random", 1.0) if init == "random" else ("identity", float(init))
    return CrpConfig(h=c.h, k=int(k if k is not None else c.k), lam=float(lam), tol=c.tol,
                     max_iter=c.max_iter, init=init_mode, init_scale=init_scale,
                     seed=int(seed), replay=c.replay)


def make_method(cfg, lam=None, k=None, init=None):
    if cfg.method == "crp":
        return CrpMethod(crp_config(cfg, lam, k, init, cfg.split.seed))
    b = cfg.baseline
    if cfg.method == "lda":
        return LdaMethod(b.dims, b.ridge)
    if cfg.method == "twodlda":
        return TwoDldaMethod(b.dims, b.ridge, b.iters)
    return RawMethod()


def _sweep_points(cfg):
    if cfg.method != "crp":
        return None, [None]
    if cfg.crp.k_sweep:
        return "k", list(cfg.crp.k_sweep)
    if cfg.crp.init_sweep:
        return "init", list(cfg.crp.init_sweep)
    return None, [None]


def _task(d, cfg, param, value, lam, trial):
    kwargs = {param: value} if param else {}
    method = make_method(cfg, lam, **kwargs)
    label = f"lambda={lam!r}" if lam is not None else cfg.method
    if param:
        label += f", {param}={value!r}"
    t0 = time.perf_counter()
    acc, info = _run_trial_safe(d, method, cfg.split, trial, label)
    return acc, info, time.perf_counter() - t0


def _run_tasks(d, cfg, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_task, d, cfg, *t) for t in tasks]
            return [f.result() for f in futures]
    return [_task(d, cfg, *t) for t in tasks]


def _fmt(x):
    return "" if x is None else repr(float(x))


def _results_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "trial", "accuracy"])
    for lam, trial, acc in rows:
        w.writerow([_fmt(lam), trial, repr(float(acc))])
    return buf.getvalue()


def _best(grid):
    # arg-max of mean accuracy; ties go to the smaller lambda
    order = sorted(range(len(grid)), key=lambda i: (
        -grid[i]["mean"], grid[i]["lambda"] if grid[i]["lambda"] is not None else 0.0))
    b = grid[order[0]]
    return {"lambda": b["lambda"], "mean": b["mean"], "std": b["std"]}


def run_experiment(cfg, out_dir, jobs=None):
    """Run the protocol over the lambda grid (and sweep, if configured).

    Writes ``results.csv`` (or ``results_<param>-<value>.csv`` per sweep
    point) and ``summary.json`` into ``out_dir`` and returns the summary.
    Only the ``timings`` entry of the summary depends on the machine.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = cfg.jobs if jobs is None else int(jobs)
    t_start = time.perf_counter()
    d = load_data(cfg)
    lambdas = list(cfg.crp.lambdas) if cfg.method == "crp" else [None]
    param, values = _sweep_points(cfg)
    tasks = [(param, v, lam, t) for v in values for lam in lambdas
             for t in range(cfg.split.repetitions)]
    outputs = iter(_run_tasks(d, cfg, tasks, jobs))

    points, task_seconds = [], []
    for value in values:
        grid, rows = [], []
        for lam in lambdas:
            accs, infos = [], []
            for t in range(cfg.split.repetitions):
                acc, info, secs = next(outputs)
                accs.append(acc)
                infos.append(info)
                rows.append((lam, t, acc))
                task_seconds.append(secs)
            a = np.asarray(accs)
            entry = {"lambda": None if lam is None else float(lam),
                     "per_trial": [float(x) for x in a],
                     "mean": float(a.mean()), "std": float(a.std())}
            if cfg.method == "crp":
                entry["traces"] = [i["traces"] for i in infos]
                entry["degenerate_pairs"] = [i["degenerate_pairs"] for i in infos]
            elif cfg.method == "twodlda":
                entry["objectives"] = [i["objectives"] for i in infos]
            grid.append(entry)
        name = "results.csv" if param is None else f"results_{param}-{value}.csv"
        (out_dir / name).write_text(_results_csv(rows), encoding="utf-8")
        points.append({"value": value, "results_file": name, "grid": grid,
                       "best": _best(grid)})

    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "tool": "crp",
        "tool_version": __version__,
        "kernel_backend": kernels.get_backend(),
        "method": cfg.method,
        "config": cfg.to_dict(),
        "dataset": {"n": len(d), "classes": d.n_classes, "dims": list(d.shape)},
    }
    if param is None:
        summary.update(grid=points[0]["grid"], best=points[0]["best"])
    else:
        summary["sweep"] = {"param": param, "points": points}
    summary["timings"] = {"jobs": jobs, "total_seconds": time.perf_counter() - t_start,
                          "task_seconds": task_seconds}
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=1, allow_nan=False) + "\n", encoding="utf-8")
    return summary


def trace_convergence(cfg, out_dir, seed=None):
    """Fit one randomly chosen pair on the trial-0 training split and write
    its objective-per-iteration series to ``trace.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg.split.seed if seed is None else int(seed)
    d = load_data(cfg)
    train, _ = stratified_split(d, replace(cfg.split, seed=seed), 0)
    lam = float(cfg.crp.lambdas[0])
    ccfg = crp_config(cfg, lam, seed=seed)
    h = max(ccfg.resolved_h(train.n_classes), 1)
    chosen = int(np.random.default_rng(seed).integers(h))
    current = train
    for p in range(chosen + 1):
        stats = compute_class_stats(current)
        within = within_deviations(current, stats)
        pair, trace = fit_pair(stats, within, ccfg, p)
        if p < chosen:
            current = deflate(current, pair)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "objective"])
    for i, f in enumerate(trace, start=1):
        w.writerow([i, repr(float(f))])
    (out_dir / "trace.csv").write_text(buf.getvalue(), encoding="utf-8")
    meta = {"pair_index": chosen, "h": h, "lambda": lam, "k": ccfg.k,
            "iterations": len(trace), "max_iter": ccfg.max_iter, "seed": seed}
    (out_dir / "trace.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    return trace, meta


def fit_model(cfg, out_dir, lam=None):
    """Fit the configured method on the whole dataset; write ``model.json``."""
    from .serialize import save_model

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = load_data(cfg)
    if cfg.method == "raw":
        return None
    lam = cfg.crp.lambdas[0] if lam is None else lam
    embedder = make_method(cfg, lam)(d)
    save_model(embedder.model, out_dir / "model.json")
    return embedder.model


def _time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(out_dir=None, sizes=((16, 16, 100), (32, 32, 200)), k=2, h=8, repeat=5, seed=0):
    """Time each kernel and a short CRP fit under every available backend.

    ``sizes`` lists ``(l1, l2, n)`` problem sizes. Returns a list of rows
    ``{"backend", "kernel", "l1", "l2", "n", "seconds"}``.
    """
    from .dataio import SynthSpec, synth_dataset

    rows = []
    for l1, l2, n in sizes:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, l1, l2))
        u = rng.standard_normal((l1, k))
        v = rng.standard_normal((l2, k))
        feats = rng.standard_normal((n, (10 - 1) ** 2))
        queries = rng.standard_normal((4 * n, feats.shape[1]))
        data = synth_dataset(SynthSpec(c=10, per_class=max(n // 10, 2), l1=l1, l2=l2,
                                       noise_sigma=0.5, seed=seed))
        cfg = CrpConfig(h=h, k=k, lam=1.0)
        cases = {
            "side_scatter": lambda: kernels.side_scatter(X, v),
            "side_scatter_T": lambda: kernels.side_scatter(X, u, True),
            "bilinear_traces": lambda: kernels.bilinear_traces(X, u, v),
            "deflate": lambda: kernels.deflate(X, u, v),
            "nearest_neighbors": lambda: kernels.nearest_neighbors(feats, queries),
            f"fit_crp(h={h})": lambda: fit_crp(data, cfg),
        }
        for backend in kernels.available_backends():
            with kernels.use_backend(backend):
                for name, fn in cases.items():
                    reps = 1 if name.startswith("fit_crp") else repeat
                    rows.append({"backend": backend, "kernel": name, "l1": l1, "l2": l2,
                                 "n": n, "seconds": _time(fn, reps)})
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bench.json").write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    return rows


def format_bench(rows):
    by_key = {}
    for r in rows:
        by_key.setdefault((r["kernel"], r["l1"], r["l2"], r["n"]), {})[r["backend"]] = r["seconds"]
    lines = [f"{'kernel':<20} {'size':>12} {'python':>12} {'compiled':>12} {'speedup':>8}"]
    for (kernel, l1, l2, n), t in by_key.items():
        py, c = t.get("python"), t.get("compiled")
        sp = f"{py / c:7.1f}x" if py and c else "      -"
        fmt = lambda x: f"{x * 1e3:10.3f}ms" if x is not None else f"{'-':>12}"
        lines.append(f"{kernel:<20} {f'{l1}x{l2}/{n}':>12} {fmt(py)} {fmt(c)} {sp}")
    return "\n".join(lines)
