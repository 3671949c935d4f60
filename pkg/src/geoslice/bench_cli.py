"""Config-driven ESS benchmark runner.

One JSON config describes one experiment; list-valued hyperparameters are
swept. Each repetition writes one CSV row, and each sweep point ends with a
``summary`` row whose ``ess`` column is the lower-middle median. A sidecar
``<output stem>.meta.json`` echoes the config and records per-run seeds,
min/median/max summaries and the final states.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
import argparse
import csv
import itertools
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path
from typing import Any, List

import numpy as np

from . import __version__
from .diagnostics import ess_details, summarize_repetitions
from .manifolds import make_manifold
from .samplers import SAMPLERS, ChainError, SamplerSpec, run_chain
from .targets import (
    FAMILIES,
    build_benchmark_params,
    vmf_grassmann_target,
    vmf_sphere_target,
    vmf_stiefel_target,
)

log = logging.getLogger("geoslice.bench")

CSV_HEADER = [
    "sampler", "manifold", "n", "k", "family", "lambda", "w", "m", "step", "run",
    "n_steps", "ess", "wall_time_s", "mean_shrink_attempts", "superefficient_flag",
]
SPHERE_FAMILY = "sphere_vmf"
MANIFOLD_KINDS = ("sphere", "stiefel", "grassmann")
SWEEPABLE = ("lambda", "w", "m", "h_a", "h")
_MASK64 = (1 << 64) - 1

_TOP_KEYS = {"manifold", "target", "sampler", "n_steps", "n_repetitions", "master_seed",
             "output_path", "workers"}
_MANIFOLD_KEYS = {"kind", "n", "k"}
_TARGET_KEYS = {"family", "lambda"}
_SAMPLER_KEYS = {"name", "w", "m", "max_shrink_attempts", "h_a", "h", "adapt"}


class ConfigError(ValueError):
    pass


def mix_seed(master_seed, run_index):
    """SplitMix64 finaliser applied to ``master + (run + 1) * golden``."""
    z = (int(master_seed) + (int(run_index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass
class ExperimentConfig:
    manifold: str
    n: int
    k: int
    family: str
    sampler: str
    lam: Any = None
    w: Any = 2.0 * math.pi
    m: Any = 1
    max_shrink_attempts: int = 10_000
    h_a: Any = 0.01
    h: Any = 0.1
    adapt: bool = True
    n_steps: int = 20_000
    n_repetitions: int = 10
    master_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1
    warnings: List[str] = field(default_factory=list)

    def sweep_axes(self):
        names = {"lambda": "lam"}
        axes = []
        for key in sorted(SWEEPABLE):
            val = getattr(self, names.get(key, key))
            axes.append((names.get(key, key), val if isinstance(val, list) else [val]))
        return axes

    def points(self):
        """Sweep points, cartesian product over axes in lexicographic key order."""
        axes = self.sweep_axes()
        out = []
        for combo in itertools.product(*(vals for _, vals in axes)):
            point = {f.name: getattr(self, f.name) for f in fields(self)}
            point.update({name: val for (name, _), val in zip(axes, combo)})
            point.pop("warnings")
            out.append(point)
        return out


def _line_of(text, key):
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return lineno
    return None


def _reject_unknown(section, allowed, where, text):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    for key in section:
        if key not in allowed:
            lineno = _line_of(text, key)
            at = f" (line {lineno})" if lineno else ""
            raise ConfigError(f"unknown key {key!r} in {where}{at}; allowed: {sorted(allowed)}")


def _int_field(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def _num_list(value, name, positive=True, integer=False):
    vals = value if isinstance(value, list) else [value]
    if not vals:
        raise ConfigError(f"{name} sweep list is empty")
    for v in vals:
        bad = isinstance(v, bool) or not isinstance(v, (int, float))
        if integer:
            bad = bad or not isinstance(v, int)
        if bad or (positive and not v > 0) or not math.isfinite(v):
            raise ConfigError(f"{name} must be {'a positive integer' if integer else 'positive'}"
                              f" (or a list of such), got {v!r}")
    return value


def parse_config_text(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    _reject_unknown(raw, _TOP_KEYS, "config", text)
    for sec in ("manifold", "target", "sampler"):
        if sec not in raw:
            raise ConfigError(f"missing required section {sec!r}")
    man, tgt, smp = raw["manifold"], raw["target"], raw["sampler"]
    _reject_unknown(man, _MANIFOLD_KEYS, "manifold", text)
    _reject_unknown(tgt, _TARGET_KEYS, "target", text)
    _reject_unknown(smp, _SAMPLER_KEYS, "sampler", text)

    kind = man.get("kind")
    if kind not in MANIFOLD_KINDS:
        raise ConfigError(f"manifold.kind must be one of {MANIFOLD_KINDS}, got {kind!r}")
    n = _int_field(man.get("n"), "manifold.n", 2)
    k = _int_field(man.get("k", 1), "manifold.k", 1)

    family = tgt.get("family")
    lam = tgt.get("lambda")
    warnings = []
    if kind == "sphere":
        if family != SPHERE_FAMILY:
            raise ConfigError(f"target.family on the sphere must be {SPHERE_FAMILY!r}")
        if lam is None:
            raise ConfigError("target.lambda (the vMF concentration) is required on the sphere")
        _num_list(lam, "target.lambda")
    else:
        if family not in FAMILIES:
            raise ConfigError(f"target.family must be one of {FAMILIES}, got {family!r}")
        if family in ("anisotropy", "grassmann_variance"):
            if lam is None:
                raise ConfigError(f"target.lambda is required for family {family}")
            _num_list(lam, "target.lambda")
        elif lam is not None:
            msg = f"target.lambda is ignored by family {family}"
            log.warning(msg)
            warnings.append(msg)
            lam = None
        for lv in (lam if isinstance(lam, list) else [lam]):
            try:
                build_benchmark_params(n, k, family, lv, kind)
            except ValueError as exc:
                raise ConfigError(f"target: {exc}")

    name = smp.get("name")
    if name not in SAMPLERS:
        raise ConfigError(f"sampler.name must be one of {SAMPLERS}, got {name!r}")
    if name == "rmh" and kind != "stiefel":
        raise ConfigError("sampler rmh requires manifold.kind = stiefel")
    if name == "geomala" and kind != "grassmann":
        raise ConfigError("sampler geomala requires manifold.kind = grassmann")

    cfg = ExperimentConfig(manifold=kind, n=n, k=k, family=family, sampler=name, lam=lam,
                           warnings=warnings)
    if "w" in smp:
        cfg.w = _num_list(smp["w"], "sampler.w")
    if "m" in smp:
        cfg.m = _num_list(smp["m"], "sampler.m", integer=True)
    if "h_a" in smp:
        cfg.h_a = _num_list(smp["h_a"], "sampler.h_a")
    if "h" in smp:
        cfg.h = _num_list(smp["h"], "sampler.h")
    if "max_shrink_attempts" in smp:
        cfg.max_shrink_attempts = _int_field(smp["max_shrink_attempts"],
                                             "sampler.max_shrink_attempts", 1)
    if "adapt" in smp:
        if not isinstance(smp["adapt"], bool):
            raise ConfigError("sampler.adapt must be true or false")
        cfg.adapt = smp["adapt"]
    if "n_steps" in raw:
        cfg.n_steps = _int_field(raw["n_steps"], "n_steps", 10)
    if "n_repetitions" in raw:
        cfg.n_repetitions = _int_field(raw["n_repetitions"], "n_repetitions", 1)
    if "master_seed" in raw:
        seed = raw["master_seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= _MASK64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {seed!r}")
        cfg.master_seed = seed
    if "output_path" in raw:
        if not isinstance(raw["output_path"], str) or not raw["output_path"]:
            raise ConfigError("output_path must be a non-empty string")
        cfg.output_path = raw["output_path"]
    if "workers" in raw:
        cfg.workers = _int_field(raw["workers"], "workers", 1)
    return cfg


def parse_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config_text(text)


def build_target(point):
    kind, n, k = point["manifold"], point["n"], point["k"]
    if kind == "sphere":
        mu = np.zeros(n)
        mu[-1] = 1.0
        return vmf_sphere_target(mu, float(point["lam"]))
    params = build_benchmark_params(n, k, point["family"], point["lam"], kind)
    if kind == "stiefel":
        return vmf_stiefel_target(params)
    return vmf_grassmann_target(params, k)


def sampler_spec(point):
    name = point["sampler"]
    step = point["h"] if name == "geomala" else point["h_a"]
    return SamplerSpec(name=name, w=float(point["w"]), m=int(point["m"]),
                       max_shrink_attempts=point["max_shrink_attempts"],
                       step=float(step), adapt=point["adapt"])


def initial_point(point):
    """Projection of a Unif([0, 1]) array, fixed across repetitions."""
    man = make_manifold(point["manifold"], point["n"], point["k"])
    rng = np.random.default_rng(point["master_seed"])
    return man.project(rng.random(man.shape))


def run_repetition(job):
    """Worker entry point; returns a plain dict so it crosses process boundaries."""
    point, run, seed = job
    target = build_target(point)
    spec = sampler_spec(point)
    x0 = initial_point(point)
    t0 = time.perf_counter()
    try:
        chain = run_chain(target, spec, x0, point["n_steps"], np.random.default_rng(seed))
    except ChainError as exc:
        return {"run": run, "seed": seed, "error": str(exc), "partial_len": len(exc.partial)}
    wall = time.perf_counter() - t0
    try:
        res = ess_details(chain.log_p)
    except ValueError as exc:
        return {"run": run, "seed": seed, "error": f"ess: {exc}", "partial_len": len(chain)}
    return {
        "run": run,
        "seed": seed,
        "ess": res.ess,
        "superefficient": res.superefficient,
        "wall_time_s": wall,
        "mean_shrink_attempts": chain.meta.get("mean_shrink_attempts"),
        "accept_rate": chain.meta.get("accept_rate"),
        "final_state": target.manifold.to_record(chain.states[-1]),
    }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row(point, run, n_steps, ess_val, wall, shrink, flag):
    gss = point["sampler"] == "gss"
    step = None
    if not gss:
        step = float(point["h"] if point["sampler"] == "geomala" else point["h_a"])
    lam = None if point["lam"] is None else float(point["lam"])
    return [_fmt(v) for v in (
        point["sampler"], point["manifold"], point["n"], point["k"], point["family"], lam,
        float(point["w"]) if gss else None, int(point["m"]) if gss else None, step, run,
        n_steps, ess_val, wall, shrink, flag)]


def meta_path(output_path):
    p = Path(output_path)
    return p.with_name(p.stem + ".meta.json")


def run_experiment(cfg, workers=None, quiet=True):
    """Run every sweep point and repetition; write the CSV and sidecar JSON.

    Returns the exit code (0 or 3).
    """
    workers = workers or cfg.workers
    points = cfg.points()
    seeds = [mix_seed(cfg.master_seed, r) for r in range(cfg.n_repetitions)]
    jobs = [(pt, r, seeds[r]) for pt in points for r in range(cfg.n_repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_repetition, jobs))
    else:
        results = []
        for job in jobs:
            results.append(run_repetition(job))
            if not quiet:
                r = results[-1]
                log.info("run %d of %s: ess=%s", r["run"], job[0]["sampler"], r.get("ess"))

    out = Path(cfg.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    summaries = []
    errors = []
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for ip, pt in enumerate(points):
            block = results[ip * cfg.n_repetitions:(ip + 1) * cfg.n_repetitions]
            ok = [r for r in block if "error" not in r]
            errors += [dict(r, point=ip) for r in block if "error" in r]
            for r in ok:
                writer.writerow(_row(pt, r["run"], cfg.n_steps, r["ess"], r["wall_time_s"],
                                     r["mean_shrink_attempts"], r["superefficient"]))
            if not ok:
                continue
            summ = summarize_repetitions([r["ess"] for r in ok])
            shrinks = [r["mean_shrink_attempts"] for r in ok
                       if r["mean_shrink_attempts"] is not None]
            writer.writerow(_row(pt, "summary", cfg.n_steps, summ.median,
                                 sum(r["wall_time_s"] for r in ok),
                                 float(np.mean(shrinks)) if shrinks else None,
                                 any(r["superefficient"] for r in ok)))
            summaries.append({"point": {k: pt[k] for k in ("sampler", "lam", "w", "m", "h_a", "h")},
                              **asdict(summ),
                              "accept_rates": [r["accept_rate"] for r in ok]})

    meta = {
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "build": {"package": "geoslice", "version": __version__,
                  "python": platform.python_version(), "numpy": np.__version__},
        "seed_mixing": "splitmix64(master_seed + (run + 1) * 0x9E3779B97F4A7C15)",
        "per_run_seeds": seeds,
        "summaries": summaries,
        "final_states": [{"point": i // cfg.n_repetitions, "run": r["run"],
                          "state": r["final_state"]}
                         for i, r in enumerate(results) if "error" not in r],
        "errors": errors,
    }
    if cfg.sampler == "rmh":
        meta["warning"] = "rmh uses an uncorrected projected proposal and is biased"
    meta_path(out).write_text(json.dumps(meta, indent=2))
    if errors:
        for e in errors:
            log.error("run %d failed: %s", e["run"], e["error"])
        return 3
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="geoslice-bench", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment JSON file")
    ap.add_argument("--output", help="CSV output path (overrides the config)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--workers", type=int, help="parallel repetitions")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.output:
            cfg.output_path = args.output
        if args.seed is not None:
            if not 0 <= args.seed <= _MASK64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.master_seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.workers = args.workers
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        code = run_experiment(cfg, quiet=args.quiet)
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(f"wrote {cfg.output_path} and {meta_path(cfg.output_path)}")
    return code


if __name__ == "__main__":
    sys.exit(main())
