"""Command-line front end: analyze / simulate / sample / verify.

One JSON config file describes the model, the simulation budget, the
inversion grid and the verification windows; unknown keys anywhere are
rejected.  Commands write CSV/JSON artifacts into the output directory
atomically (temp file + rename) and append one record per run to
runs.jsonl.  Everything except that log's timestamp is a pure function of
(config, seed), so repeated runs are byte-identical.

Exit codes: 0 success, 2 configuration problem, 3 numeric failure,
4 insufficient or too-noisy data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, asymptotics, transforms, verify
from .decomposition import PAIR_TARGETS, SCALAR_TARGETS, DecompositionSampler
from .errors import (
    AssumptionViolation,
    BadParam,
    InsufficientData,
    NotApplicable,
    RtqError,
    Unstable,
    WindowTooNoisy,
)
from .model import Erlang, Exponential, ModelParams, ParetoShifted, validate
from .simulator import SimConfig, simulate

__all__ = ["RunConfig", "load_config", "entry", "main"]

_CONFIG_ERRORS = (BadParam, Unstable, AssumptionViolation)
_DATA_ERRORS = (InsufficientData, WindowTooNoisy)


@dataclass
class RunConfig:
    params: ModelParams
    sim: SimConfig
    inversion_n: int = 150
    inversion_radius: float = 0.9
    inversion_points: int | None = None
    verify_window: tuple = (50, 1000)
    verify_light_window: tuple = (30, 100)
    verify_n_states: int = 50
    verify_samples: int = 1_000_000
    kappa_tol: float = 0.15
    c_tol: float = 0.25
    out: str = "out"
    seed: int = 0
    raw: dict = field(default_factory=dict)


def _require_keys(block: dict, allowed: set, where: str):
    unknown = set(block) - allowed
    if unknown:
        raise BadParam(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_dist(block: dict, where: str):
    if not isinstance(block, dict) or "kind" not in block:
        raise BadParam(f"{where} must be an object with a 'kind'")
    kind = block["kind"]
    if kind == "exponential":
        _require_keys(block, {"kind", "rate", "mean"}, where)
        if ("rate" in block) == ("mean" in block):
            raise BadParam(f"{where}: give exactly one of rate/mean")
        rate = block.get("rate", None)
        return Exponential(rate if rate is not None else 1.0 / block["mean"])
    if kind == "erlang":
        _require_keys(block, {"kind", "shape", "rate"}, where)
        return Erlang(block["shape"], block["rate"])
    if kind == "pareto":
        _require_keys(block, {"kind", "index", "scale", "mean"}, where)
        if ("scale" in block) == ("mean" in block):
            raise BadParam(f"{where}: give exactly one of scale/mean")
        if "mean" in block:
            return ParetoShifted.from_mean(block["index"], block["mean"])
        return ParetoShifted(block["index"], block["scale"])
    raise BadParam(f"{where}: unknown distribution kind {kind!r}")


def load_config(path: str, seed_override=None, out_override=None) -> RunConfig:
    """Parse, validate and freeze a run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadParam(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise BadParam("config root must be a JSON object")
    _require_keys(raw, {"model", "sim", "inversion", "verify", "out", "seed"}, "config")

    model = raw.get("model")
    if not isinstance(model, dict):
        raise BadParam("config needs a 'model' block")
    _require_keys(model, {"lam", "q", "mu", "dist1", "dist2"}, "model")
    for key in ("lam", "q", "mu", "dist1", "dist2"):
        if key not in model:
            raise BadParam(f"model block is missing {key!r}")
    params = validate(
        ModelParams(
            lam=float(model["lam"]),
            q=float(model["q"]),
            mu=float(model["mu"]),
            dist1=_parse_dist(model["dist1"], "model.dist1"),
            dist2=_parse_dist(model["dist2"], "model.dist2"),
        )
    )

    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    sim_block = raw.get("sim", {})
    _require_keys(
        sim_block,
        {"max_events", "max_time", "warmup_fraction", "batches", "queue_cap"},
        "sim",
    )
    sim = SimConfig(
        max_events=int(sim_block.get("max_events", 1_000_000)),
        max_time=float(sim_block.get("max_time", float("inf"))),
        seed=seed,
        warmup_fraction=float(sim_block.get("warmup_fraction", 0.2)),
        batches=int(sim_block.get("batches", 20)),
        queue_cap=int(sim_block.get("queue_cap", 10_000_000)),
    )

    inv = raw.get("inversion", {})
    _require_keys(inv, {"n", "radius", "points"}, "inversion")
    ver = raw.get("verify", {})
    _require_keys(
        ver,
        {"window", "light_window", "n_states", "samples", "kappa_tol", "c_tol"},
        "verify",
    )

    return RunConfig(
        params=params,
        sim=sim,
        inversion_n=int(inv.get("n", 150)),
        inversion_radius=float(inv.get("radius", 0.9)),
        inversion_points=(None if inv.get("points") is None else int(inv["points"])),
        verify_window=tuple(ver.get("window", (50, 1000))),
        verify_light_window=tuple(ver.get("light_window", (30, 100))),
        verify_n_states=int(ver.get("n_states", 50)),
        verify_samples=int(ver.get("samples", 1_000_000)),
        kappa_tol=float(ver.get("kappa_tol", 0.15)),
        c_tol=float(ver.get("c_tol", 0.25)),
        out=str(raw.get("out", "out")) if out_override is None else str(out_override),
        seed=seed,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# persistence helpers


def _atomic_write(path: str, data: str):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    canon += f"|seed={cfg.seed}"
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _record_run(cfg: RunConfig, command: str, artifacts: list):
    rec = {
        "command": command,
        "config_hash": _config_hash(cfg),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "artifacts": sorted(artifacts),
        "version": __version__,
    }
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "runs.jsonl"), "a") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _workers() -> int:
    env = os.environ.get("RTQ_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig) -> list:
    pmfs = transforms.conditional_pmfs(
        cfg.params, cfg.inversion_n, radius=cfg.inversion_radius,
        points=cfg.inversion_points,
    )
    paths = []
    for name, pmf in sorted(pmfs.items()):
        rows = [(j, f"{v:.17g}") for j, v in enumerate(pmf.probs)]
        rows.append(("deficit", f"{pmf.deficit:.17g}"))
        path = os.path.join(cfg.out, f"pmf_{name}.csv")
        _atomic_write(path, _csv_text(("j", "probability"), rows))
        paths.append(path)

    u = np.linspace(0.0, 0.99, 100)
    kf = transforms.factor_K(cfg.params, u)
    rows = [
        (f"{ui:.4f}", f"{a.real:.17g}", f"{b.real:.17g}", f"{c.real:.17g}",
         f"{k.real:.17g}")
        for ui, a, b, c, k in zip(u, kf.ka, kf.kb, kf.kc, kf.k)
    ]
    path = os.path.join(cfg.out, "factors.csv")
    _atomic_write(path, _csv_text(("u", "ka", "kb", "kc", "k"), rows))
    paths.append(path)

    try:
        catalog = asymptotics.tail_catalog(cfg.params)
    except NotApplicable:
        # no power-law type-1 service: there is no tail catalog to write
        catalog = None
    if catalog is not None:
        path = os.path.join(cfg.out, "catalog.json")
        _atomic_write(path, asymptotics.catalog_to_json(catalog) + "\n")
        paths.append(path)
    return paths


def cmd_simulate(cfg: RunConfig) -> list:
    res = simulate(cfg.params, cfg.sim)
    stats = {
        "events": res.events,
        "collected_time": res.collected_time,
        "state_fractions": res.state_fractions().tolist(),
        "state_fraction_stderr": res.state_fraction_stderr().tolist(),
        "pasta_fractions": res.pasta_fractions().tolist(),
        "expected_fractions": [1 - cfg.params.rho, cfg.params.rho1, cfg.params.rho2],
    }
    paths = [os.path.join(cfg.out, "sim_stats.json")]
    _atomic_write(paths[0], _json_text(stats))
    for state, coord, tag in (
        ("idle", "orbit", "R0"),
        ("busy1", "queue", "R11"),
        ("busy1", "orbit", "R12"),
        ("busy2", "queue", "R21"),
        ("busy2", "orbit", "R22"),
    ):
        pmf = res.conditional_pmf(state, coord)
        path = os.path.join(cfg.out, f"hist_{tag}.csv")
        rows = [(j, f"{v:.17g}") for j, v in enumerate(pmf)]
        _atomic_write(path, _csv_text(("j", "fraction"), rows))
        paths.append(path)
    return paths


def cmd_sample(cfg: RunConfig, target: str, n: int) -> list:
    sampler = DecompositionSampler(cfg.params, seed=cfg.seed)
    drawn = sampler.sample(target, n)
    path = os.path.join(cfg.out, f"samples_{target.lower()}.csv")
    if isinstance(drawn, tuple):
        rows = list(zip(drawn[0].tolist(), drawn[1].tolist()))
        _atomic_write(path, _csv_text(("queue", "orbit"), rows))
    else:
        _atomic_write(path, _csv_text(("value",), [(v,) for v in drawn.tolist()]))
    return [path]


def _verify_target(cfg, target, pmfs, sim_res, sampler_pmfs, catalog):
    sources = {"inversion": pmfs[target]}
    if target in sampler_pmfs:
        sources["sampler"] = sampler_pmfs[target]
    state, coord = {
        "R0": ("idle", "orbit"),
        "R11": ("busy1", "queue"),
        "R12": ("busy1", "orbit"),
        "R21": ("busy2", "queue"),
        "R22": ("busy2", "orbit"),
    }[target]
    try:
        sources["simulator"] = sim_res.conditional_pmf(state, coord)
    except InsufficientData:
        pass
    entry = catalog[verify.TARGET_TO_CATALOG[target]]
    window = cfg.verify_window
    if entry.geom < 1.0:
        window = cfg.verify_light_window
        sources["inversion"] = verify.light_queue_pmf(
            cfg.params, max(window[1] + 2, 120)
        )
    j_hi = min(window[1], len(pmfs[target]) - 2)
    return verify.compare(
        cfg.params, target, sources, n_states=cfg.verify_n_states,
        window=(window[0], j_hi), catalog=catalog,
    )


def cmd_verify(cfg: RunConfig) -> list:
    params = cfg.params
    n_tail = max(cfg.inversion_n, 4 * cfg.verify_window[1] // 3)
    pmfs = transforms.conditional_pmfs(params, n_tail, radius=0.995)
    sim_res = simulate(params, cfg.sim)
    sampler = DecompositionSampler(params, seed=cfg.seed)
    nd = cfg.verify_samples
    draws = {
        "R0": sampler.sample_r0(nd),
        "R1": sampler.sample_r1_pair(nd),
        "R2": sampler.sample_r2_pair(nd),
    }
    m = cfg.verify_n_states
    sampler_pmfs = {
        "R0": verify.empirical_pmf(draws["R0"], m),
        "R11": verify.empirical_pmf(draws["R1"][0], m),
        "R12": verify.empirical_pmf(draws["R1"][1], m),
        "R21": verify.empirical_pmf(draws["R2"][0], m),
        "R22": verify.empirical_pmf(draws["R2"][1], m),
    }
    catalog = asymptotics.tail_catalog(params)
    targets = ["R0", "R11", "R12", "R21", "R22"]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        reports = list(
            pool.map(
                lambda t: _verify_target(cfg, t, pmfs, sim_res, sampler_pmfs, catalog),
                targets,
            )
        )

    frac = sim_res.state_fractions()
    err = sim_res.state_fraction_stderr()
    expected = np.array([1 - params.rho, params.rho1, params.rho2])
    occupancy = {
        "observed": frac.tolist(),
        "stderr": err.tolist(),
        "expected": expected.tolist(),
        "within_ci": bool(np.all(np.abs(frac - expected) <= 1.96 * err + 1e-12)),
    }
    body = {
        "occupancy": occupancy,
        "targets": {r.target: r.to_dict() for r in reports},
        "lemmas": verify.check_appendix_lemmas(params, seed=cfg.seed),
        "tolerances": {"kappa": cfg.kappa_tol, "c": cfg.c_tol,
                       "note": "windowed trend checks, not limits"},
    }
    path = os.path.join(cfg.out, "verify_report.json")
    _atomic_write(path, _json_text(body))
    return [path]


# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rtq",
        description="stationary analysis of a two-class priority retrial queue",
    )
    parser.add_argument("command", choices=("analyze", "simulate", "sample", "verify"))
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument(
        "--target",
        default=None,
        help=f"sampling target: one of {', '.join(SCALAR_TARGETS + PAIR_TARGETS)}",
    )
    parser.add_argument("-n", "--count", type=int, default=100_000,
                        help="number of draws for the sample command")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "analyze":
            artifacts = cmd_analyze(cfg)
        elif args.command == "simulate":
            artifacts = cmd_simulate(cfg)
        elif args.command == "sample":
            if not args.target:
                raise BadParam("sample requires --target")
            if args.count < 1:
                raise BadParam("sample requires a positive --count")
            artifacts = cmd_sample(cfg, args.target, args.count)
        else:
            artifacts = cmd_verify(cfg)
    except _CONFIG_ERRORS as exc:
        print(f"rtq: config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"rtq: config error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"rtq: data error: {exc}", file=sys.stderr)
        return 4
    except RtqError as exc:
        print(f"rtq: numeric error: {exc}", file=sys.stderr)
        return 3
    _record_run(cfg, args.command, artifacts)
    for path in artifacts:
        print(path)
    return 0


def entry():
    sys.exit(main())
