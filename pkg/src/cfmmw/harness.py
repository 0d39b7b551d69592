"""Drop pipeline, Monte Carlo campaigns and report files."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .channel import ChannelDrop, realize_channel
from .config import SimConfig, rng_streams
from .geometry import NetworkScenario, generate_scenario
from .optimizer import AllocationState, SolverError, Status, bcd_dl, bcd_ul
from .pilots import PilotAssignment, assign_pilots, canonical_labels
from .rates import DropContext, ExpectationSet, InsufficientSamplesError, build_context, \
    estimate_expectations
from .rf import RfPlan, build_rf_plan

__all__ = ["DropResult", "PreparedDrop", "CampaignReport", "prepare_drop", "optimize_drop",
           "run_drop", "run_campaign", "sweep_fronthaul", "drop_seed", "percentile", "summarize",
           "write_drops_csv", "read_drops_csv", "write_report_json", "write_cdf_csv",
           "DROP_COLUMNS", "SCHEMA_PATH"]

log = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).with_name("schema.json")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


@dataclass
class DropResult:
    drop_id: int
    seed: int
    dl_min_rate: float = math.nan
    ul_min_rate: float = math.nan
    dl_rates: list = field(default_factory=list)
    ul_rates: list = field(default_factory=list)
    dl_status: str = ""
    ul_status: str = ""
    dl_iterations: int = 0
    ul_iterations: int = 0
    dl_fronthaul_util: float = math.nan
    ul_fronthaul_util: float = math.nan
    n_mc_used: int = 0
    n_mc_failed: int = 0
    discarded: bool = False
    reason: str = ""
    elapsed_s: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.discarded

    def row(self) -> dict[str, str]:
        # timing stays out of the CSV so identical seeds give identical rows
        d = asdict(self)
        d.pop("elapsed_s")
        d["dl_rates"] = " ".join(_fmt(x) for x in self.dl_rates)
        d["ul_rates"] = " ".join(_fmt(x) for x in self.ul_rates)
        return {k: _fmt(v) if not isinstance(v, str) else v for k, v in d.items()}


DROP_COLUMNS = [f for f in DropResult.__dataclass_fields__ if f != "elapsed_s"]


@dataclass
class PreparedDrop:
    """Large-scale state of one drop plus its expectation terms."""
    config: SimConfig
    seed: int
    scenario: NetworkScenario
    channel: ChannelDrop
    rf: RfPlan
    pilots: PilotAssignment
    context: DropContext
    expectations: ExpectationSet


class DiscardedDrop(RuntimeError):
    pass


def prepare_drop(config: SimConfig, seed: int, perfect_csi: bool = False) -> PreparedDrop:
    """Scenario, channel, RF plan, pilots and expectation terms for one seed."""
    streams = rng_streams(seed)
    scenario = generate_scenario(config, rng=streams["placement"])
    channel = realize_channel(scenario, config, streams)
    rf = build_rf_plan(channel, config)
    fingerprints = rf.xi.T
    if np.any(np.all(fingerprints == 0, axis=1)):
        raise DiscardedDrop("isolated_ms")
    pilots = assign_pilots(config.pilot_strategy, config.K, config.tau_p, fingerprints,
                           rng=streams["pilots"])
    pilots = PilotAssignment(pilots.book, canonical_labels(pilots.assignment), pilots.strategy)
    ctx = build_context(rf, pilots, config)
    try:
        E = estimate_expectations(ctx, config.n_mc, streams["fading"], perfect_csi=perfect_csi,
                                  noise_rng=streams["noise"])
    except InsufficientSamplesError as exc:
        raise DiscardedDrop("singular_channel") from exc
    return PreparedDrop(config, seed, scenario, channel, rf, pilots, ctx, E)


def optimize_drop(prep: PreparedDrop, config: SimConfig | None = None,
                  upsilon0=None) -> tuple[AllocationState, AllocationState]:
    """Run the DL and UL block coordinate descent on a prepared drop.

    ``config`` may differ from the one used to prepare the drop in
    optimizer-only fields (fronthaul capacities, tolerances, powers).
    """
    cfg = prep.config if config is None else config
    ctx, E = prep.context, prep.expectations
    dl = bcd_dl(E, prep.rf.R_rf, ctx.sigma_d2, cfg.ap_power_w, cfg.fronthaul_dl, cfg.l_active,
                cfg.N, upsilon0=upsilon0, sigma2_min=cfg.sigma2_min, tol=cfg.bcd_tol,
                max_iter=cfg.bcd_max_iter, bisection_rel_tol=cfg.bisection_rel_tol,
                quant_rel_tol=cfg.quant_rel_tol)
    ul = bcd_ul(E, prep.rf.R_rf, ctx.sigma_u2, cfg.ms_power_w, cfg.fronthaul_ul,
                sigma2_min=cfg.sigma2_min, tol=cfg.bcd_tol, max_iter=cfg.bcd_max_iter,
                bisection_rel_tol=cfg.bisection_rel_tol, quant_rel_tol=cfg.quant_rel_tol)
    return dl, ul


def sweep_fronthaul(prep: PreparedDrop, capacities: Sequence[float],
                    config: SimConfig | None = None) -> list[tuple[AllocationState, AllocationState]]:
    """Optimize one drop at increasing fronthaul capacities.

    Each capacity is warm-started from the previous solution, which stays
    feasible when the capacity grows, so min-rates never decrease along the
    sweep beyond solver tolerance.
    """
    cfg = prep.config if config is None else config
    out, dl_prev, ul_prev = [], None, None
    for C in sorted(capacities):
        c = cfg.replace(fronthaul_dl=C, fronthaul_ul=C)
        ctx, E = prep.context, prep.expectations
        dl = bcd_dl(E, prep.rf.R_rf, ctx.sigma_d2, c.ap_power_w, C, c.l_active, c.N,
                    upsilon0=dl_prev, sigma2_min=c.sigma2_min, tol=c.bcd_tol,
                    max_iter=c.bcd_max_iter, bisection_rel_tol=c.bisection_rel_tol,
                    quant_rel_tol=c.quant_rel_tol)
        ul = bcd_ul(E, prep.rf.R_rf, ctx.sigma_u2, c.ms_power_w, C, omega0=ul_prev,
                    sigma2_min=c.sigma2_min, tol=c.bcd_tol, max_iter=c.bcd_max_iter,
                    bisection_rel_tol=c.bisection_rel_tol, quant_rel_tol=c.quant_rel_tol)
        if dl.status is not Status.INFEASIBLE:
            dl_prev = dl.powers
        ul_prev = ul.powers
        out.append((dl, ul))
    return out


def run_drop(config: SimConfig, seed: int, drop_id: int = 0) -> DropResult:
    """Full pipeline for one drop; failures are recorded, not raised."""
    t0 = time.perf_counter()
    res = DropResult(drop_id, int(seed))
    try:
        prep = prepare_drop(config, seed)
        dl, ul = optimize_drop(prep)
    except DiscardedDrop as exc:
        res.discarded, res.reason = True, str(exc)
    except (SolverError, np.linalg.LinAlgError) as exc:
        log.warning("drop %d (seed %d) failed: %s", drop_id, seed, exc)
        res.discarded, res.reason = True, f"solver_error: {exc}"
    else:
        res.n_mc_used = prep.expectations.n_samples
        res.n_mc_failed = prep.expectations.n_failed
        res.dl_min_rate, res.ul_min_rate = dl.min_rate, ul.min_rate
        res.dl_rates = [float(x) for x in dl.rates]
        res.ul_rates = [float(x) for x in ul.rates]
        res.dl_status, res.ul_status = dl.status.value, ul.status.value
        res.dl_iterations, res.ul_iterations = dl.iterations, ul.iterations
        if dl.fronthaul_bits is not None:
            res.dl_fronthaul_util = float(np.max(dl.fronthaul_bits) / config.fronthaul_dl)
        if ul.fronthaul_bits is not None:
            res.ul_fronthaul_util = float(np.max(ul.fronthaul_bits) / config.fronthaul_ul)
        if Status.INFEASIBLE in (dl.status, ul.status):
            res.discarded, res.reason = True, "infeasible"
    res.elapsed_s = time.perf_counter() - t0
    return res


def drop_seed(campaign_seed: int, index: int) -> int:
    """Per-drop seed, independent of execution order and of the sweep point."""
    return int(np.random.SeedSequence([int(campaign_seed), int(index)]).generate_state(1)[0])


def percentile(values: Sequence[float], p: float) -> float:
    """Linearly interpolated order statistic (``p`` in percent)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan
    return float(np.percentile(values, p))


def summarize(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    n = int(v.size)
    if n == 0:
        return {"n": 0, "mean": math.nan, "std": math.nan, "se": math.nan,
                "median": math.nan, "p5": math.nan}
    std = float(v.std(ddof=1)) if n > 1 else 0.0
    return {"n": n, "mean": float(v.mean()), "std": std, "se": std / math.sqrt(n),
            "median": percentile(v, 50), "p5": percentile(v, 5)}


@dataclass
class CampaignReport:
    config: dict[str, Any]
    sweep_key: str | None
    points: list = field(default_factory=list)      # [{"value", "drops", "dl", "ul", ...}]

    def to_json(self) -> dict[str, Any]:
        out = {"config": self.config, "sweep_key": self.sweep_key, "points": []}
        for pt in self.points:
            out["points"].append({
                "value": pt["value"],
                "n_drops": len(pt["drops"]),
                "n_discarded": sum(d.discarded for d in pt["drops"]),
                "dl_min_rate": pt["dl"], "ul_min_rate": pt["ul"],
                "elapsed_s": float(sum(d.elapsed_s for d in pt["drops"])),
            })
        return out


def _run_task(args):
    config, seed, drop_id = args
    return run_drop(config, seed, drop_id)


def _aggregate(drops: list[DropResult]) -> tuple[dict, dict]:
    good = [d for d in drops if d.ok]
    return summarize([d.dl_min_rate for d in good]), summarize([d.ul_min_rate for d in good])


def run_campaign(config: SimConfig, sweep_key: str | None = None, values: Sequence = (None,),
                 n_drops: int = 20, seed: int | None = None, workers: int = 1) -> CampaignReport:
    """Run ``n_drops`` drops at every sweep value.

    Drop ``i`` uses the same seed at every sweep point, so points are compared
    on common geometry. ``workers > 1`` runs drops in a process pool; results
    do not depend on the worker count.
    """
    seed = config.seed if seed is None else seed
    report = CampaignReport(config.to_dict(), sweep_key)
    for value in values:
        cfg = config if sweep_key is None else config.replace(**{sweep_key: value})
        tasks = [(cfg, drop_seed(seed, i), i) for i in range(n_drops)]
        if workers > 1 and n_drops > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                drops = list(pool.map(_run_task, tasks))
        else:
            drops = [_run_task(t) for t in tasks]
        dl, ul = _aggregate(drops)
        if drops and dl["n"] == 0:
            log.warning("all drops failed at %s=%r", sweep_key, value)
        report.points.append({"value": value, "drops": drops, "dl": dl, "ul": ul})
    return report


# ------------------------------------------------------------------- file output

def write_drops_csv(drops: Sequence[DropResult], path: str | Path, extra: dict | None = None):
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(extra) + DROP_COLUMNS)
        writer.writeheader()
        for d in drops:
            writer.writerow({**{k: _fmt(v) for k, v in extra.items()}, **d.row()})


def read_drops_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_cdf_csv(values: Sequence[float], path: str | Path) -> None:
    v = np.sort(np.asarray([x for x in values if np.isfinite(x)], dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["min_rate", "cdf"])
        for i, x in enumerate(v, start=1):
            writer.writerow([_fmt(x), _fmt(i / v.size)])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def write_report_json(report: CampaignReport, path: str | Path) -> None:
    def clean(x):
        if isinstance(x, float):
            return None if not math.isfinite(x) else float(_fmt(x))
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, list):
            return [clean(v) for v in x]
        return x
    Path(path).write_text(json.dumps(clean(report.to_json()), indent=2, default=_json_default))


def write_campaign_outputs(report: CampaignReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_drops, written = [], []
    with open(out / "drops.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["sweep_value"] + DROP_COLUMNS)
        writer.writeheader()
        for pt in report.points:
            for d in pt["drops"]:
                writer.writerow({"sweep_value": _fmt(pt["value"]), **d.row()})
                all_drops.append(d)
    written.append(out / "drops.csv")
    for i, pt in enumerate(report.points):
        good = [d for d in pt["drops"] if d.ok]
        tag = "" if report.sweep_key is None else f"_{report.sweep_key}={pt['value']}"
        for link in ("dl", "ul"):
            p = out / f"cdf_{link}{tag}.csv"
            write_cdf_csv([getattr(d, f"{link}_min_rate") for d in good], p)
            written.append(p)
    write_report_json(report, out / "report.json")
    shutil.copy(SCHEMA_PATH, out / "schema.json")
    written += [out / "report.json", out / "schema.json"]
    return written


def env_defaults() -> dict[str, Any]:
    """Output directory and worker count overrides from the environment."""
    out = {}
    if "CFMMW_OUTPUT_DIR" in os.environ:
        out["out"] = os.environ["CFMMW_OUTPUT_DIR"]
    if "CFMMW_WORKERS" in os.environ:
        out["workers"] = int(os.environ["CFMMW_WORKERS"])
    return out
