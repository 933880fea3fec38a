"""Build runs from config mappings, execute replicate grids, write outputs.

Configs are plain nested dicts (usually parsed from TOML); see the README
for the schema.  Everything that reaches a worker process is a dict, so
replicate tasks can be shipped to a process pool and every result is a pure
function of its config.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (ReplicateSet, acceptance_rate, empirical_variance, fit_rate,
                          gold_standard_mean, mean_squared_deviation, metric_stderr, msjd,
                          squared_bias)
from .driving import (PRIMITIVE_POLYNOMIALS, cud_capacity, make_driving, period_register,
                      polynomial_family)
from .errors import ConfigError, MPQMCError
from .proposals import build_kernel, uniforms_per_iteration
from .samplers import RunOutput, SamplerConfig, config_hash, run_sampler
from .targets import OdeTarget, build_target

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_WORKERS = "MPQMC_WORKERS"
ENV_OUTPUT_ROOT = "MPQMC_OUTPUT_ROOT"
METRICS_HEADER = ("experiment", "n", "N", "variant", "metric", "value", "stderr")

FUNCTIONALS = {
    "identity": lambda P: P,
    "square": lambda P: P * P,
}


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def default_workers(flag: int | None = None) -> int:
    """Flag, then the environment variable, then the number of logical cores."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{ENV_WORKERS} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def output_root(path) -> Path:
    root = os.environ.get(ENV_OUTPUT_ROOT)
    path = Path(path)
    return Path(root) / path if root and not path.is_absolute() else path


# --------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """17 significant digits, dot decimal separator."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), newline="")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, default=_plain) + "\n")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


# --------------------------------------------------------------------------
# single runs


@dataclass
class BuiltRun:
    config: SamplerConfig
    target: object
    kernel: object
    stream: object
    x0: np.ndarray
    f: object


def default_start(target, kernel) -> np.ndarray:
    mean = getattr(kernel, "mean", None)
    if mean is not None:
        return np.array(mean, dtype=float)
    if isinstance(target, OdeTarget):
        return np.array(target.model.true_params, dtype=float)
    if target.analytic_mean is not None:
        return np.array(target.analytic_mean, dtype=float)
    return np.zeros(target.dim)


def _kernel_spec(spec: dict, target) -> dict:
    """Resolve the ``"posterior"`` shortcuts: ``init_mean`` becomes the default
    start point, ``init_cov`` the analytic covariance when known and otherwise
    the inverse Fisher metric at the kernel mean."""
    spec = dict(spec)
    if isinstance(spec.get("init_mean"), str):
        if spec["init_mean"] != "posterior":
            raise ConfigError(f"unknown init_mean shortcut {spec['init_mean']!r}")
        spec["init_mean"] = default_start(target, type("K", (), {"mean": None})())
    if isinstance(spec.get("init_cov"), str):
        if spec["init_cov"] != "posterior":
            raise ConfigError(f"unknown init_cov shortcut {spec['init_cov']!r}")
        if target.analytic_cov is not None:
            spec["init_cov"] = np.asarray(target.analytic_cov)
        else:
            at = spec.get("init_mean")
            if at is None:
                at = default_start(target, type("K", (), {"mean": None})())
            G = np.atleast_2d(target.fisher_metric(np.asarray(at, dtype=float)))
            spec["init_cov"] = np.linalg.inv(G)
    return spec


def sampler_config(sampler: dict, seed: int, workers: int = 1) -> SamplerConfig:
    known = {"N", "L", "M", "mode", "transition", "adapt", "burn_in", "bounded_jump",
             "freeze_box", "record_proposals", "eig_bounds"}
    unknown = set(sampler) - known
    if unknown:
        raise ConfigError(f"unknown sampler keys: {sorted(unknown)}")
    kw = dict(sampler)
    if "N" not in kw or "L" not in kw:
        raise ConfigError("sampler needs N and L")
    box = kw.get("freeze_box")
    if isinstance(box, dict):
        kw["freeze_box"] = (np.asarray(box["lo"], dtype=float), np.asarray(box["hi"], dtype=float))
    if "eig_bounds" in kw:
        kw["eig_bounds"] = tuple(kw["eig_bounds"])
    return SamplerConfig(seed=seed, workers=workers, **kw).validate()


def build_run(cfg: dict, seed: int | None = None, workers: int = 1) -> BuiltRun:
    """Construct config, target, kernel, stream and start point from a mapping
    with ``target``, ``kernel``, ``sampler``, ``driving`` tables."""
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    target_spec = cfg.get("target", {})
    target = build_target(target_spec, int(target_spec.get("data_seed", cfg.get("data_seed", 0))))
    kernel = build_kernel(_kernel_spec(cfg.get("kernel", {}), target), target)
    config = sampler_config(cfg.get("sampler", {}), seed, workers)
    drv = cfg.get("driving", {"kind": "pseudo_random"})
    stream = build_stream(drv, seed, kernel, config)
    x0 = cfg.get("x0")
    x0 = default_start(target, kernel) if x0 is None else np.asarray(x0, dtype=float)
    fname = cfg.get("f", "identity")
    if fname not in FUNCTIONALS:
        raise ConfigError(f"unknown functional {fname!r}; choose from {sorted(FUNCTIONALS)}")
    return BuiltRun(config, target, kernel, stream, x0, FUNCTIONALS[fname])


def build_stream(drv: dict, seed: int, kernel, config: SamplerConfig):
    kind = drv.get("kind", "pseudo_random")
    if kind != "cud_lfsr":
        return make_driving(kind, seed)
    width = uniforms_per_iteration(kernel, config.N, config.index_draws)
    n_iter = config.L + config.burn_in
    m = drv.get("m")
    if m is None:
        m = period_register(width, n_iter)
    if m not in PRIMITIVE_POLYNOMIALS:
        raise ConfigError(f"no embedded register of size {m}")
    if cud_capacity(m, width) < n_iter:
        raise ConfigError(
            f"CUD budget: {n_iter} iterations of {width} uniforms exceed the m={m} schedule "
            f"({cud_capacity(m, width)} tuples)")
    variant = int(drv.get("variant", 0))
    polynomial_family(m, variant + 1)  # fails fast when the variant is unavailable
    return make_driving("cud_lfsr", seed, m=m, width=width, variant=variant)


def run_config(cfg: dict, seed: int | None = None, workers: int = 1) -> RunOutput:
    b = build_run(cfg, seed, workers)
    return run_sampler(b.config, b.target, b.kernel, b.stream, b.x0, b.f)


def write_run(out: RunOutput, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    d = out.samples.shape[1] if out.samples.size else len(out.meta["x0"])
    M = out.meta["config"]["M"]
    coords = [f"coord_{j}" for j in range(d)]
    rows = ([k // M + 1, k % M] + list(x) for k, x in enumerate(out.samples))
    write_csv(outdir / "samples.csv", ["iter", "m"] + coords, rows)
    diag = out.diagnostics
    mu = np.asarray(diag["mu"]).reshape(len(diag["iter"]), -1)
    header = (["iter", "acpt_rate", "msjd"] + [f"mu_{j}" for j in range(mu.shape[1])]
              + ["trace_Sigma"])
    rows = ([it, a, s] + list(m) + [t] for it, a, s, m, t in
            zip(diag["iter"], diag["acpt_rate"], diag["msjd"], mu, diag["trace_Sigma"]))
    write_csv(outdir / "diagnostics.csv", header, rows)
    write_json(outdir / "meta.json", out.meta)


# --------------------------------------------------------------------------
# experiments


@dataclass
class Cell:
    variant: dict
    N: int
    L: int
    burn_in: int
    width: int
    m: int | None


@dataclass
class ExperimentSpec:
    name: str
    target: dict
    kernel: dict
    variants: list
    N_values: list
    replicates: int = 10
    seed: int = 0
    data_seed: int = 0
    samples: int | None = None
    L: int | str | None = None
    period_iterations: int = 255
    burn_in: int = 0
    reference: object = "analytic"
    gold: dict = field(default_factory=dict)
    error_k: float = 2.0
    per_run: bool = False
    out: str | None = None
    x0: list | None = None
    f: str = "identity"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "name" not in d:
            raise ConfigError("experiment needs a name")
        spec = cls(**{k: d[k] for k in d})
        spec.validate()
        return spec

    def validate(self) -> None:
        if not self.variants:
            raise ConfigError("experiment grid is empty: no variants")
        if not self.N_values:
            raise ConfigError("experiment grid is empty: no N values")
        if self.replicates < 1:
            raise ConfigError("replicate count must be at least 1")
        names = [v.get("name") for v in self.variants]
        if None in names or len(set(names)) != len(names):
            raise ConfigError("every variant needs a unique name")
        for v in self.variants:
            base = v.get("compare_to")
            if base is not None and base not in names:
                raise ConfigError(f"variant {v['name']!r} compares to unknown {base!r}")

    def run_dict(self, variant: dict, N: int, L: int, seed: int, replicate: int,
                 m: int | None = None) -> dict:
        """The single-run config of one replicate of one cell."""
        sampler = {"N": N, "L": L, "M": variant.get("M", 1),
                   "mode": variant.get("mode", "sampling"),
                   "transition": variant.get("transition", "barker"),
                   "adapt": variant.get("adapt", "off"),
                   "burn_in": variant.get("burn_in", self.burn_in)}
        for key in ("bounded_jump", "freeze_box", "eig_bounds"):
            if key in variant:
                sampler[key] = variant[key]
        driving = {"kind": variant.get("driving", "pseudo_random")}
        if driving["kind"] == "cud_lfsr":
            if m is not None:
                driving["m"] = m
            if variant.get("cud_replicates", "polynomial") == "polynomial":
                driving["variant"] = replicate
        kernel = dict(self.kernel, **variant.get("kernel", {}))
        return {"seed": seed, "target": dict(self.target, data_seed=self.data_seed),
                "kernel": kernel, "sampler": sampler, "driving": driving,
                "x0": self.x0, "f": self.f}

    def cells(self) -> list[Cell]:
        """Every (variant, N) cell with its iteration count; checks CUD budgets."""
        target = build_target(dict(self.target), self.data_seed)
        out = []
        for N in self.N_values:
            widths = {}
            for v in self.variants:
                kernel = build_kernel(_kernel_spec(dict(self.kernel, **v.get("kernel", {})), target),
                                      target)
                cfg = SamplerConfig(N=N, L=1, M=v.get("M", 1), mode=v.get("mode", "sampling"))
                widths[v["name"]] = uniforms_per_iteration(kernel, N, cfg.index_draws)
            for v in self.variants:
                if N in v.get("N_values", self.N_values):
                    out.append(self._cell(v, N, widths))
        return out

    def _cell(self, v: dict, N: int, widths: dict) -> Cell:
        width = widths[v["name"]]
        burn = v.get("burn_in", self.burn_in)
        mode = v.get("mode", "sampling")
        per_iter = N + 1 if mode == "importance" else v.get("M", 1)
        L = v.get("L", self.L)
        m = v.get("m")
        cud_widths = [widths[u["name"]] for u in self.variants if u.get("driving") == "cud_lfsr"]
        ref_width = max(cud_widths) if cud_widths else width
        if L == "cud_capacity":
            # every variant of the cell runs as many iterations as the CUD
            # schedule of the reference register holds
            ref_m = m or self._reference_m()
            L = cud_capacity(ref_m, ref_width) - burn
        elif L == "period":
            # the smallest register whose single pass holds period_iterations
            # tuples; the run then uses about one period of the sequence
            ref_m = period_register(ref_width, self.period_iterations + burn)
            if (2**ref_m - 1) // ref_width < self.period_iterations + burn:
                raise ConfigError(f"no embedded register holds {self.period_iterations + burn} "
                                  f"disjoint tuples of width {ref_width}")
            L = (2**ref_m - 1) // ref_width - burn
            if v.get("driving") == "cud_lfsr" and m is None:
                m = period_register(width, L + burn)
        elif L is None:
            if self.samples is None:
                raise ConfigError("experiment needs samples or L")
            L = max(1, self.samples // per_iter)
        L = int(L)
        if L < 1:
            raise ConfigError(f"cell N={N} of {v['name']!r} has no iterations")
        if v.get("driving") == "cud_lfsr":
            if m is None:
                m = period_register(width, L + burn)
            if cud_capacity(m, width) < L + burn:
                raise ConfigError(
                    f"CUD budget: {v['name']!r} at N={N} needs {L + burn} tuples of width {width}, "
                    f"the m={m} schedule holds {cud_capacity(m, width)}")
            if v.get("cud_replicates", "polynomial") == "polynomial":
                polynomial_family(m, self.replicates)
        return Cell(v, N, L, burn, width, m)

    def _reference_m(self) -> int:
        ms = {v.get("m") for v in self.variants if v.get("driving") == "cud_lfsr"}
        ms.discard(None)
        if len(ms) != 1:
            raise ConfigError('L = "cud_capacity" needs exactly one register size m among the variants')
        return ms.pop()


def _run_task(task: dict) -> dict:
    """Worker entry point: one replicate, reduced to what aggregation needs."""
    cfg, checkpoints = task["cfg"], task["checkpoints"]
    try:
        out = run_config(cfg)
    except MPQMCError as exc:
        return {"error": f"{exc.code}: {type(exc).__name__}: {exc}"}
    mu = np.asarray(out.diagnostics["mu"])
    res = {"estimates": mu[np.asarray(checkpoints) - 1], "meta": out.meta}
    if out.mode == "sampling":
        res["acpt_rate"] = acceptance_rate(out) if out.fresh.size >= 2 else np.nan
        res["msjd"] = msjd(out) if len(out.samples) >= 2 else np.nan
    if task.get("outdir"):
        write_run(out, task["outdir"])
    return res


def _map(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def checkpoints_for(L: int, count: int = 1) -> list[int]:
    """``count`` iteration counts, log-spaced up to L (always including L)."""
    if count <= 1:
        return [L]
    pts = np.unique(np.round(np.geomspace(max(1, L / 2 ** (count - 1)), L, count)).astype(int))
    return [int(p) for p in pts]


def _reference(spec: ExperimentSpec, outdir: Path | None):
    if isinstance(spec.reference, (list, tuple)):
        return np.asarray(spec.reference, dtype=float)
    if spec.reference in (None, "none"):
        return None
    target = build_target(dict(spec.target), spec.data_seed)
    if spec.reference == "analytic":
        if target.analytic_mean is None:
            raise ConfigError("target has no analytic mean; use reference = \"gold\"")
        mean = np.asarray(target.analytic_mean)
        if spec.f == "square":
            mean = np.diag(target.analytic_cov) + mean**2
        return mean
    if spec.reference == "gold":
        g = spec.gold
        kernel = build_kernel(_kernel_spec(dict(spec.kernel, **g.get("kernel", {})), target), target)
        cache = g.get("cache_dir") or (outdir / ".gold" if outdir is not None else None)
        gs = gold_standard_mean(target, kernel, FUNCTIONALS[spec.f], budget=g.get("budget", 1 << 18),
                                N=g.get("N", 255), replicates=g.get("replicates", 10),
                                seed=g.get("seed", 0), x0=spec.x0, cache_dir=cache)
        return gs.mean
    raise ConfigError(f"unknown reference {spec.reference!r}")


@dataclass
class ExperimentResult:
    rows: list
    meta: dict


def run_experiment(spec: ExperimentSpec | dict, workers: int = 1, outdir=None,
                   checkpoint_count: int = 1) -> ExperimentResult:
    """Run every cell and replicate, aggregate metrics, optionally write
    ``metrics.csv`` and ``meta.json`` into ``outdir``."""
    if isinstance(spec, dict):
        spec = ExperimentSpec.from_dict(spec)
    outdir = Path(outdir) if outdir is not None else None
    cells = spec.cells()  # validates budgets before any sampling
    reference = _reference(spec, outdir)

    tasks, index = [], []
    for ci, cell in enumerate(cells):
        cps = checkpoints_for(cell.L, checkpoint_count)
        for r in range(spec.replicates):
            seed = spec.seed + r
            cfg = spec.run_dict(cell.variant, cell.N, cell.L, seed, r, cell.m)
            rundir = None
            if spec.per_run and outdir is not None:
                rundir = str(outdir / "runs" / f"{cell.variant['name']}_N{cell.N}_r{r}")
            tasks.append({"cfg": cfg, "checkpoints": cps, "outdir": rundir})
            index.append((ci, r))
    results = _map(tasks, workers)

    rows, failures, seeds = [], [], {}
    per_cell: dict[int, list] = {}
    for (ci, r), res in zip(index, results):
        per_cell.setdefault(ci, []).append(res)
    mse_table: dict[tuple, float] = {}
    var_table: dict[tuple, float] = {}
    for ci, cell in enumerate(cells):
        name, N = cell.variant["name"], cell.N
        res = per_cell[ci]
        errs = [x["error"] for x in res if "error" in x]
        seeds[f"{name}/N={N}"] = [spec.seed + r for r in range(spec.replicates)]
        if errs:
            failures.append({"variant": name, "N": N, "errors": errs})
            rows.append([spec.name, "", N, name, "failed", np.nan, np.nan])
            continue
        cps = checkpoints_for(cell.L, checkpoint_count)
        per_iter = N + 1 if cell.variant.get("mode", "sampling") == "importance" else cell.variant.get("M", 1)
        ns = [c * per_iter for c in cps]
        rs = ReplicateSet(np.asarray(cps), np.stack([x["estimates"] for x in res]), reference,
                          seeds[f"{name}/N={N}"])
        for c, n in zip(cps, ns):
            if rs.R >= 2:
                var = empirical_variance(rs, c)
                rows.append([spec.name, n, N, name, "variance", var, metric_stderr(rs, c, "variance")])
                var_table[(name, N, n)] = var
                if reference is not None:
                    b2 = squared_bias(rs, c)
                    rows.append([spec.name, n, N, name, "bias2", b2, metric_stderr(rs, c, "bias2")])
                    rows.append([spec.name, n, N, name, "mse", var + b2, metric_stderr(rs, c, "mse")])
                    rows.append([spec.name, n, N, name, "msd", mean_squared_deviation(rs, c),
                                 metric_stderr(rs, c, "msd")])
                    mse_table[(name, N, n)] = var + b2
        if "acpt_rate" in res[0]:
            for key in ("acpt_rate", "msjd"):
                vals = np.array([x[key] for x in res])
                se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else np.nan
                rows.append([spec.name, ns[-1], N, name, key, vals.mean(), se])

    # rate fits: across the N grid at each cell's final checkpoint, or over
    # the checkpoints when the grid has a single N
    for v in spec.variants:
        name = v["name"]
        for metric, table in (("mse", mse_table), ("variance", var_table)):
            mine = {k: val for k, val in table.items() if k[0] == name}
            if len(v.get("N_values", spec.N_values)) > 1:
                last = {}
                for (_, N, n), val in mine.items():
                    if N not in last or n > last[N][0]:
                        last[N] = (n, val)
                pts = sorted(last.values())
            else:
                pts = sorted((n, val) for (_, _, n), val in mine.items())
            if len({p[0] for p in pts}) >= 3 and all(p[1] > 0 for p in pts):
                fit = fit_rate(pts)
                rows.append([spec.name, "", "", name, f"rate_{metric}", fit.slope, fit.stderr])
    # reduction factors against a named baseline variant, cell by cell
    for v in spec.variants:
        base = v.get("compare_to")
        if base is None:
            continue
        for metric, table in (("mse", mse_table), ("variance", var_table)):
            for (nm, N, n), val in sorted(table.items()):
                if nm != v["name"] or val <= 0:
                    continue
                ref = table.get((base, N, n))
                if ref is None:
                    # baseline run on another N: take its cell closest in sample size
                    near = [(abs(bn - n), bv) for (bm, _, bn), bv in table.items() if bm == base]
                    ref = min(near)[1] if near else None
                if ref is not None:
                    rows.append([spec.name, n, N, nm, f"reduction_{metric}", ref / val, np.nan])

    meta = {"experiment": spec.name, "replicates": spec.replicates, "seeds": seeds,
            "reference": None if reference is None else np.asarray(reference).tolist(),
            "cells": [{"variant": c.variant["name"], "N": c.N, "L": c.L, "burn_in": c.burn_in,
                       "width": c.width, "m": c.m} for c in cells],
            "failures": failures, "error_k": spec.error_k,
            "spec_hash": config_hash(spec.__dict__)}
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        write_csv(outdir / "metrics.csv", METRICS_HEADER, rows)
        write_json(outdir / "meta.json", meta)
    return ExperimentResult(rows, meta)


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report(path, out=None) -> None:
    """Print the metrics of an experiment directory as summary tables."""
    out = sys.stdout if out is None else out
    path = Path(path)
    rows = read_metrics(path / "metrics.csv" if path.is_dir() else path)
    if not rows:
        raise ConfigError("metrics file is empty")
    meta_path = (path if path.is_dir() else path.parent) / "meta.json"
    k = json.loads(meta_path.read_text()).get("error_k", 2.0) if meta_path.exists() else 2.0
    print(f"experiment: {rows[0]['experiment']}", file=out)
    for metric in ("mse", "variance", "acpt_rate", "reduction_mse", "reduction_variance"):
        sel = [r for r in rows if r["metric"] == metric]
        if not sel:
            continue
        print(f"\n{metric} (+- {k:g} stderr)" if not metric.startswith("reduction") else f"\n{metric}",
              file=out)
        print(f"  {'variant':<24}{'N':>6}{'n':>10}{'value':>14}{'err':>12}", file=out)
        for r in sel:
            err = float(r["stderr"]) * k if r["stderr"] not in ("", "nan") else float("nan")
            print(f"  {r['variant']:<24}{r['N']:>6}{r['n']:>10}{float(r['value']):>14.4e}{err:>12.2e}",
                  file=out)
    fits = [r for r in rows if r["metric"].startswith("rate_")]
    if fits:
        print("\nconvergence rates (slope of log metric vs log n)", file=out)
        for r in fits:
            print(f"  {r['variant']:<24}{r['metric']:<16}{float(r['value']):>8.3f} "
                  f"+- {float(r['stderr']):.3f}", file=out)
    failed = [r for r in rows if r["metric"] == "failed"]
    for r in failed:
        print(f"\nFAILED cell: {r['variant']} N={r['N']}", file=out)

