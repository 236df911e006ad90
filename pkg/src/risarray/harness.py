"""Monte Carlo drops and experiment campaigns.

A *drop* places the UEs (large-scale gains), then runs ``n_fading``
small-scale realizations through training, estimation, RIS configuration,
precoding and max-min power control. Drop ``d`` of a campaign with seed
``s`` draws all randomness from ``SeedSequence([s, d])``, so results do not
depend on how drops are distributed over worker processes, and variants of
one experiment see the same UE positions and fading.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import ris as ris_mod
from .config import ScenarioConfig
from .estimation import (build_training_basis, lmmse_estimate, make_pilot_book,
                         make_training_configs, simulate_training)
from .exceptions import DropError
from .geometry import (build_coupling_matrix, build_geometry, draw_channels, large_scale_gains,
                       legacy_coupling, place_ues)
from .power import maxmin_bisection, pcsi_coefficients
from .spectral import (HardeningAccumulator, gain_matrix, hardening_closed_form, make_precoders,
                       se_from_sinr, sinr_perfect_csi)

log = logging.getLogger(__name__)

EXPERIMENTS = ("cdf_compare", "epsilon_sweep", "quantization_sweep", "ris_policy_compare",
               "legacy_mimo_baseline")
METRICS = ("pcsi", "lb")
MANIFEST_VERSION = 1


@dataclass
class Scenario:
    """Deterministic part of a scenario, shared read-only by all drops."""

    config: ScenarioConfig
    H: np.ndarray
    pilots: object
    sigma2: float
    sigma_r2: float
    delta: int
    prelog: float

    @classmethod
    def prepare(cls, config: ScenarioConfig) -> "Scenario":
        config.validate()
        if config.is_legacy:
            H = legacy_coupling(config.n_active)
        else:
            H = build_coupling_matrix(build_geometry(config), config)
        pilots = make_pilot_book(config.pilot_length, config.ue_count, config.uplink_pilot_power)
        return cls(config, H, pilots, config.noise_power, config.ris_noise_power, config.delta,
                   config.effective_prelog)


@dataclass
class DropResult:
    drop: int
    beta: np.ndarray
    pcsi_se: np.ndarray | None = None  # (n_fading, K)
    lb_se: np.ndarray | None = None  # (K,)
    ub_se: np.ndarray | None = None  # (K,)
    ub_stderr: np.ndarray | None = None
    lb_mode: str | None = None  # LB-MC or LB-CF

    @property
    def pcsi_min(self) -> float:
        return float(self.pcsi_se.min(axis=1).mean())

    @property
    def lb_min(self) -> float:
        return float(self.lb_se.min())


def drop_streams(seed: int, drop: int):
    """Independent generators for UE placement, fading, training, the fixed
    random RIS configuration and the optimizer initializations of the
    perfect-CSI and estimated-CSI branches."""
    ss = np.random.SeedSequence([int(seed), int(drop)])
    return [np.random.default_rng(s) for s in ss.spawn(6)]


def fixed_configuration(scn: Scenario, rng) -> np.ndarray | None:
    """RIS diagonal that does not depend on the fading, or ``None`` when it is optimized."""
    cfg = scn.config
    if cfg.is_legacy:
        return np.ones(cfg.n_active, dtype=complex)
    if cfg.ris_policy != "random":
        return None
    if scn.delta:
        rc = ris_mod.random_active(cfg.n_ris, rng)
        if cfg.phase_bits is not None:
            rc = ris_mod.quantize(rc, cfg.phase_bits)
        return scale_active(scn, rc.p)
    return ris_mod.random_passive(cfg.n_ris, rng, cfg.phase_bits).p


def scale_active(scn: Scenario, p) -> np.ndarray:
    cfg = scn.config
    omega = ris_mod.ris_power_scale(p, scn.H, cfg.power_split, cfg.power_budget, scn.sigma_r2)
    return np.sqrt(omega) * p


def configure(scn: Scenario, h_used, rng) -> np.ndarray:
    """Optimized RIS diagonal for the channels ``h_used`` (true or estimated)."""
    cfg = scn.config
    ctx = ris_mod.CostContext(scn.H, h_used)
    if scn.delta:
        init = ris_mod.random_active(cfg.n_ris, rng)
        rc = ris_mod.optimize_active_direction(ctx, init, cfg.max_iters, cfg.opt_tol)
        if cfg.phase_bits is not None:
            rc = ris_mod.quantize(rc, cfg.phase_bits)
        return scale_active(scn, rc.p)
    init = ris_mod.random_passive(cfg.n_ris, rng, cfg.phase_bits)
    return ris_mod.optimize_passive(ctx, init, cfg.grid_size, cfg.max_sweeps, cfg.opt_tol).p


def run_drop(scn: Scenario, seed: int, drop: int, metrics=METRICS) -> DropResult:
    """Simulate one drop; see the module docstring for the pipeline."""
    try:
        return _run_drop(scn, seed, drop, tuple(metrics))
    except DropError:
        raise
    except Exception as exc:  # attach the drop index for the campaign report
        raise DropError(drop, exc) from exc


def _run_drop(scn: Scenario, seed: int, drop: int, metrics) -> DropResult:
    cfg = scn.config
    ue_rng, fade_rng, train_rng, fixed_rng, pcsi_rng, lb_rng = drop_streams(seed, drop)
    beta = large_scale_gains(place_ues(cfg, ue_rng), cfg, ue_rng)
    H = scn.H
    K = cfg.ue_count
    budget = cfg.array_budget
    want_pcsi = "pcsi" in metrics
    want_lb = "lb" in metrics

    if cfg.is_legacy:
        configs = np.ones((1, cfg.n_active), dtype=complex)
        basis = build_training_basis(H, configs, cfg.svd_energy_fraction, strict=False)
    else:
        configs = make_training_configs(
            cfg.n_ris, cfg.n_active, train_rng, active=bool(scn.delta), betas=beta,
            powers=scn.pilots.powers, sigma_r2=scn.sigma_r2, gain_db=cfg.training_gain_db)
        basis = build_training_basis(H, configs, cfg.svd_energy_fraction)

    fixed = fixed_configuration(scn, fixed_rng)
    pcsi = []
    acc = HardeningAccumulator(K)
    gains, dyns = [], []
    for _ in range(cfg.n_fading):
        ch = draw_channels(H, beta, fade_rng, cfg.n_elements)
        if want_pcsi:
            p = fixed if fixed is not None else configure(scn, ch.h, pcsi_rng)
            W = make_precoders(H, p, ch.h)
            coeffs = pcsi_coefficients(ch.h, H, p, W, scn.sigma2, scn.sigma_r2, scn.delta, budget)
            alloc = maxmin_bisection(coeffs, tol=cfg.bisection_tol)
            sinr = sinr_perfect_csi(ch.h, H, p, W, alloc.eta, scn.sigma2, scn.sigma_r2, scn.delta)
            pcsi.append(se_from_sinr(sinr, scn.prelog))
        if want_lb:
            y = simulate_training(ch.h, H, basis, scn.pilots, scn.sigma2, scn.sigma_r2,
                                  scn.delta, train_rng)
            est = lmmse_estimate(y, basis, scn.pilots, beta, scn.sigma2, scn.sigma_r2, scn.delta)
            if fixed is None:
                p = configure(scn, est.estimates, lb_rng)
                M = acc.add(ch.h, H, p, make_precoders(H, p, est.estimates), scn.sigma_r2)
            else:
                # channel-independent RIS: closed-form bound with unnormalized precoders
                p = fixed
                M = gain_matrix(ch.h, H, p, make_precoders(H, p, est.estimates, normalized=False))
            gains.append(np.abs(M) ** 2)
            dyns.append(scn.sigma_r2 * np.sum(np.abs(ch.h * p) ** 2, axis=1))

    out = DropResult(drop, beta)
    if want_pcsi:
        out.pcsi_se = np.array(pcsi)
    if want_lb:
        if fixed is None:
            terms = acc.terms()
            out.lb_mode = "LB-MC"
        else:
            # the estimate covariances do not depend on the realization
            terms = hardening_closed_form(H, fixed, est, beta, scn.sigma_r2)
            out.lb_mode = "LB-CF"
        coeffs = terms.coefficients(scn.sigma2, scn.delta, budget)
        alloc = maxmin_bisection(coeffs, tol=cfg.bisection_tol)
        out.lb_se = se_from_sinr(terms.sinr(alloc.eta, scn.sigma2, scn.delta), scn.prelog)
        G = np.array(gains)
        sig = alloc.eta * np.diagonal(G, axis1=1, axis2=2)
        interf = G @ alloc.eta - sig
        sinr_t = sig / (interf + scn.delta * np.array(dyns) + scn.sigma2)
        rates = np.log2(1 + sinr_t)
        out.ub_se = scn.prelog * rates.mean(axis=0)
        n = rates.shape[0]
        out.ub_stderr = (scn.prelog * rates.std(axis=0, ddof=1) / math.sqrt(n)
                         if n > 1 else np.zeros(K))
    return out


# --------------------------------------------------------------------------- campaigns

@dataclass
class Variant:
    name: str
    config: ScenarioConfig
    sweep_value: object = None


@dataclass
class Campaign:
    scenario: ScenarioConfig
    experiment: str
    n_drops: int
    out: Path
    seed: int | None = None
    sweep: list | None = None
    metrics: tuple = METRICS
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.n_drops < 1:
            raise ValueError("n_drops must be >= 1")
        bad = set(self.metrics) - set(METRICS)
        if bad:
            raise ValueError(f"unknown metrics {sorted(bad)}")
        self.out = Path(self.out)
        if self.seed is None:
            self.seed = self.scenario.rng_seed
        if self.sweep is None:
            self.sweep = default_sweep(self.experiment, self.scenario)

    def variants(self) -> list[Variant]:
        cfg = self.scenario
        exp = self.experiment
        if exp == "cdf_compare":
            eps = cfg.power_split if cfg.power_split > 0 else 0.2
            return [
                Variant("legacy", cfg.replace(architecture="legacy", ris_mode="passive",
                                              power_split=0.0)),
                Variant("passive", cfg.replace(architecture="ris", ris_mode="passive",
                                               power_split=0.0)),
                Variant("active", cfg.replace(architecture="ris", ris_mode="active",
                                              power_split=eps)),
            ]
        if exp == "epsilon_sweep":
            return [Variant(f"eps_{e:g}", cfg.replace(architecture="ris", ris_mode="active",
                                                      power_split=float(e)), float(e))
                    for e in self.sweep]
        if exp == "quantization_sweep":
            out = []
            for b in self.sweep:
                bits = None if b in (None, "continuous") else int(b)
                name = "nq_continuous" if bits is None else f"nq_{bits}"
                out.append(Variant(name, cfg.replace(phase_bits=bits),
                                   "continuous" if bits is None else bits))
            return out
        if exp == "ris_policy_compare":
            return [Variant(f"{pol}", cfg.replace(ris_policy=pol), pol) for pol in self.sweep]
        # legacy_mimo_baseline
        return [Variant(f"legacy_{n}", cfg.replace(architecture="legacy", n_active=int(n),
                                                   ris_mode="passive", power_split=0.0), int(n))
                for n in self.sweep]

    def manifest(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "experiment": self.experiment,
            "n_drops": self.n_drops,
            "seed": self.seed,
            "sweep": self.sweep,
            "metrics": list(self.metrics),
            "scenario": self.scenario.to_dict(),
            "drop_seeds": "SeedSequence([seed, drop]) for drop in range(n_drops)",
        }

    @classmethod
    def from_manifest(cls, data: dict, out, workers: int = 1) -> "Campaign":
        return cls(ScenarioConfig.from_dict(data["scenario"]), data["experiment"],
                   int(data["n_drops"]), out, int(data["seed"]), data["sweep"],
                   tuple(data["metrics"]), workers)


def default_sweep(experiment: str, cfg: ScenarioConfig) -> list:
    if experiment == "epsilon_sweep":
        return [round(0.1 * i, 1) for i in range(10)]
    if experiment == "quantization_sweep":
        return [3, 4, "continuous"]
    if experiment == "ris_policy_compare":
        return ["random", "optimized"]
    if experiment == "legacy_mimo_baseline":
        return [cfg.n_active, 2 * cfg.n_active, 4 * cfg.n_active]
    return []


def _drop_task(args):
    scn, seed, drop, metrics = args
    with threadpool_limits(1):
        return run_drop(scn, seed, drop, metrics)


def run_variant(cfg: ScenarioConfig, n_drops: int, seed: int, metrics=METRICS,
                workers: int = 1) -> list[DropResult]:
    scn = Scenario.prepare(cfg)
    tasks = [(scn, seed, d, tuple(metrics)) for d in range(n_drops)]
    if workers <= 1:
        return [_drop_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_drop_task, tasks, chunksize=max(1, n_drops // (4 * workers))))


@dataclass
class CdfTable:
    se: np.ndarray
    cdf: np.ndarray
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, **metadata) -> "CdfTable":
        se = np.sort(np.asarray(samples, dtype=float).ravel())
        n = se.size
        return cls(se, np.arange(1, n + 1) / n, metadata)

    def write(self, path: Path) -> None:
        write_csv(path, ["se_bps_hz", "cdf"], zip(self.se, self.cdf))


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def run_campaign(campaign: Campaign) -> dict:
    """Run all variants of a campaign and write CSVs plus ``manifest.json``.

    Returns a dict with per-variant drop results and the written files.
    """
    out = campaign.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    results = {}
    files = []
    summary_rows = []
    for var in campaign.variants():
        log.info("variant %s: %d drops", var.name, campaign.n_drops)
        drops = run_variant(var.config, campaign.n_drops, campaign.seed, campaign.metrics,
                            campaign.workers)
        results[var.name] = drops
        for metric in campaign.metrics:
            samples, mins = _collect(drops, metric)
            table = CdfTable.from_samples(samples, variant=var.name, metric=metric)
            path = out / f"cdf_{var.name}_{metric}.csv"
            table.write(path)
            files.append(path)
            summary_rows.append((var.name, metric, float(np.median(samples)), float(np.mean(mins)),
                                 samples.size))

    if campaign.experiment == "epsilon_sweep":
        for metric in campaign.metrics:
            rows = []
            for var in campaign.variants():
                _, mins = _collect(results[var.name], metric)
                rows.append((var.sweep_value, float(np.mean(mins))))
            path = out / f"min_se_vs_epsilon_{metric}.csv"
            write_csv(path, ["epsilon", "min_se_bps_hz"], rows)
            files.append(path)
    if campaign.experiment == "ris_policy_compare" and "lb" in campaign.metrics:
        names = [v.name for v in campaign.variants()]
        path = out / "per_drop_min_se_lb.csv"
        cols = [[d.lb_min for d in results[n]] for n in names]
        write_csv(path, ["drop", *[f"{n}_min_se_bps_hz" for n in names]],
                  [(str(i), *vals) for i, vals in enumerate(zip(*cols))])
        files.append(path)

    path = out / "summary.csv"
    write_csv(path, ["variant", "metric", "median_se_bps_hz", "mean_min_se_bps_hz", "n_samples"],
              [(v, m, med, mn, str(n)) for v, m, med, mn, n in summary_rows])
    files.append(path)

    manifest = campaign.manifest()
    manifest["files"] = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"results": results, "files": files, "manifest": manifest,
            "manifest_path": out / "manifest.json"}


def _collect(drops, metric):
    if metric == "pcsi":
        samples = np.concatenate([d.pcsi_se.ravel() for d in drops])
        mins = np.array([d.pcsi_min for d in drops])
    else:
        samples = np.concatenate([d.lb_se for d in drops])
        mins = np.array([d.lb_min for d in drops])
    return samples, mins


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else 1)
