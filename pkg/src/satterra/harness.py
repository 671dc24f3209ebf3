"""Seeded network drops and batch experiments.

Each drop places APs and users uniformly over a square, draws shadow fading
and reduces the result to a :class:`~satterra.channel.Scenario`. Drops are
independent, may run on a thread pool, and are always folded back in drop
order so every output is independent of scheduling.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .channel import ChannelStatistics, Scenario, build_statistics
from .geometry import (ArrayGeometry, LinkGains, Position3D, RadioConstants, beam_gain,
                       boresight_offset, db_to_linear, elevation_azimuth, noise_power_w,
                       satellite_pathloss_db, slant_range, terrestrial_pathloss_db)
from .power_control import (full_power_report, solve_fullpower_congestion, solve_maxmin,
                            solve_soft_removal)
from .throughput import (ALL_MODES, COMBINER_RULES, SystemMode, ergodic_rate, rate_to_sinr,
                         sinr_closed_form, sinr_monte_carlo_modes)

log = logging.getLogger(__name__)

KINDS = ("validate", "cdf", "maxmin", "congestion")
PROFILES = ("desk", "paper")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    Units: GHz, MHz, m, km, dB, dBi, dBW as the field names state. ``kappa``
    is linear.
    """

    kind: str = "cdf"
    drops: int = 100
    users: int = 4
    aps: int = 8
    n_h: int = 4
    n_v: int = 4
    area_km2: float = 20.0
    satellite_position_km: tuple[float, float, float] = (300.0, 300.0, 400.0)
    beam_center_km: tuple[float, float] | None = None
    ap_height_m: float = 10.0
    user_height_m: float = 1.5
    carrier_ghz: float = 20.0
    bandwidth_mhz: float = 100.0
    coherence_block: int = 10_000
    p_max_dbw: float = 20.0
    pilot_power_dbw: float = 20.0
    nf_ap_db: float = 7.0
    nf_sat_db: float = 1.2
    ap_gain_dbi: float = 10.0
    user_gain_dbi: float = 10.0
    sat_gain_dbi: float = 26.9
    shadow_terrestrial_db: float = 8.0
    shadow_sat_db: float = 4.0
    kappa: float = 10.0
    corr_h: float = 0.5
    corr_v: float = 0.5
    aperture_wavelengths: float = 10.0
    earth_radius_km: float = 6371.0
    master_seed: int = 0
    modes: tuple[str, ...] = ("hybrid", "terrestrial", "satellite")
    # Monte-Carlo checks
    mc_drops: int = 0
    mc_trials: int = 10_000
    validate_drops: int = 20
    gap_tolerance: float = 0.03
    combiners: tuple[str, ...] = ("mrc",)
    # power control
    delta: float = 0.01
    epsilon: float = 1e-4
    max_iters: int = 500
    max_outer: int = 64
    warm_start: bool = False
    target_rates_mbps: tuple[float, ...] = (35.0, 40.0, 45.0, 50.0)
    # sweeps: terrestrial antenna gain override and satellite noise multiplier
    gain_overrides_dbi: tuple[float, ...] = ()
    sigma_s2_multipliers: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if self.area_km2 <= 0:
            raise ConfigError("area_km2 must be positive")
        if self.users < 1 or self.aps < 0 or self.n_h < 1 or self.n_v < 1:
            raise ConfigError("need users >= 1, aps >= 0 and a non-empty array")
        if self.coherence_block <= self.users:
            raise ConfigError("coherence_block must exceed the number of users")
        if len(self.satellite_position_km) != 3:
            raise ConfigError("satellite_position_km needs three coordinates")
        for m in self.modes:
            if m not in {x.value for x in SystemMode}:
                raise ConfigError(f"unknown mode {m!r}")
        for c in self.combiners:
            if c not in COMBINER_RULES:
                raise ConfigError(f"unknown combiner {c!r}")
        if self.mc_trials < 1000:
            raise ConfigError("mc_trials must be >= 1000")
        if any(t <= 0 for t in self.target_rates_mbps):
            raise ConfigError("target rates must be positive")
        if any(s <= 0 for s in self.sigma_s2_multipliers):
            raise ConfigError("sigma_s2 multipliers must be positive")
        if self.delta <= 0 or self.epsilon <= 0:
            raise ConfigError("delta and epsilon must be positive")
        if not (abs(self.corr_h) < 1 and abs(self.corr_v) < 1) or self.kappa < 0:
            raise ConfigError("need |corr| < 1 and kappa >= 0")

    # --- construction helpers ---

    @classmethod
    def profile(cls, name: str, **overrides) -> "ExperimentConfig":
        if name == "desk":
            base: dict[str, Any] = {}
        elif name == "paper":
            base = dict(drops=1000, users=20, aps=40, n_h=10, n_v=10, delta=1e-4)
        else:
            raise ConfigError(f"unknown profile {name!r}")
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict, profile: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        profile = data.pop("profile", None) if profile is None else profile
        data.pop("schema_version", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for f in dataclasses.fields(cls):
            if f.name in data and isinstance(data[f.name], list):
                data[f.name] = tuple(data[f.name])
        try:
            return cls.profile(profile or "desk", **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path: str, profile: str | None = None) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, profile)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # --- derived constants ---

    @property
    def side_m(self) -> float:
        return math.sqrt(self.area_km2) * 1000.0

    @property
    def p_max_w(self) -> float:
        return 10.0 ** (self.p_max_dbw / 10.0)

    def radio(self, sigma_s2_multiplier: float = 1.0) -> RadioConstants:
        return RadioConstants(
            carrier_frequency_ghz=self.carrier_ghz,
            bandwidth_mhz=self.bandwidth_mhz,
            coherence_block_len=self.coherence_block,
            num_pilots=self.users,
            pilot_power_w=10.0 ** (self.pilot_power_dbw / 10.0),
            ap_noise_power_w=noise_power_w(self.bandwidth_mhz, self.nf_ap_db),
            sat_noise_power_w=sigma_s2_multiplier * noise_power_w(self.bandwidth_mhz, self.nf_sat_db),
            earth_radius_m=self.earth_radius_km * 1000.0,
            satellite_altitude_m=self.satellite_position_km[2] * 1000.0,
        )

    def array(self) -> ArrayGeometry:
        lam = self.radio().wavelength_m
        return ArrayGeometry.half_wavelength(self.n_h, self.n_v, lam, self.aperture_wavelengths)

    def system_modes(self) -> tuple[SystemMode, ...]:
        return tuple(SystemMode(m) for m in self.modes)


def derived_seed(master_seed: int, *key: int) -> int:
    """Deterministic 63-bit seed for a (master, key...) tuple."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


# stream identifiers below the drop index
_STREAM_GEOMETRY = 0
_STREAM_MC = 1


def generate_drop(config: ExperimentConfig, drop_index: int, *,
                  gain_override_dbi: float | None = None,
                  sigma_s2_multiplier: float = 1.0) -> Scenario:
    """Random AP and user placement with per-link shadow fading."""
    rng = np.random.default_rng(
        np.random.SeedSequence(config.master_seed, spawn_key=(_STREAM_GEOMETRY, drop_index)))
    m, k = config.aps, config.users
    side = config.side_m
    ap_xy = rng.uniform(0.0, side, size=(m, 2))
    user_xy = rng.uniform(0.0, side, size=(k, 2))
    shadow_ter = rng.standard_normal((m, k)) * config.shadow_terrestrial_db
    shadow_sat = rng.standard_normal(k) * config.shadow_sat_db

    aps = tuple(Position3D(float(x), float(y), config.ap_height_m) for x, y in ap_xy)
    users = tuple(Position3D(float(x), float(y), config.user_height_m) for x, y in user_xy)
    sx, sy, sz = (1000.0 * v for v in config.satellite_position_km)
    sat = Position3D(sx, sy, sz)
    if config.beam_center_km is None:
        center = Position3D(side / 2, side / 2, 0.0)
    else:
        center = Position3D(1000.0 * config.beam_center_km[0], 1000.0 * config.beam_center_km[1], 0.0)

    radio = config.radio(sigma_s2_multiplier)
    array = config.array()
    ap_gain = config.ap_gain_dbi if gain_override_dbi is None else gain_override_dbi
    user_gain = config.user_gain_dbi if gain_override_dbi is None else gain_override_dbi
    gains = LinkGains(ap_gain, user_gain, config.sat_gain_dbi,
                      config.shadow_terrestrial_db, config.shadow_sat_db)

    if m:
        d = np.linalg.norm(np.array([a.as_array() for a in aps])[:, None, :]
                           - np.array([u.as_array() for u in users])[None, :, :], axis=2)
        beta_ter = db_to_linear(terrestrial_pathloss_db(ap_gain, user_gain, config.carrier_ghz,
                                                        d, shadow_ter))
    else:
        beta_ter = np.zeros((0, k))

    beta_sat = np.empty(k)
    for i, u in enumerate(users):
        theta, _ = elevation_azimuth(u, sat)
        dist = slant_range(theta, radio.earth_radius_m, radio.satellite_altitude_m)
        phi = boresight_offset(u, sat, center)
        g = beam_gain(phi, array.aperture_radius_m, radio.wavelength_m)
        if g <= 0:
            raise ValueError(f"user {i} sits in a null of the beam pattern")
        beta_sat[i] = db_to_linear(satellite_pathloss_db(
            config.sat_gain_dbi, user_gain, 10.0 * math.log10(g), config.carrier_ghz, dist,
            shadow_sat[i]))

    return Scenario(aps, users, sat, radio, array, gains, beta_ter, beta_sat,
                    np.full(k, config.kappa), np.full(k, config.p_max_w),
                    config.corr_h, config.corr_v)


# --- results ------------------------------------------------------------------

@dataclass
class DropRecord:
    drop: int
    ok: bool = True
    error: str = ""
    sum_rate: dict[str, float] = field(default_factory=dict)
    min_rate: dict[str, float] = field(default_factory=dict)
    rates: dict[str, np.ndarray] = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    timings: list[tuple[str, float]] = field(default_factory=list)
    flags: dict[str, Any] = field(default_factory=dict)


@dataclass
class AggregateResult:
    kind: str
    config: ExperimentConfig
    records: list[DropRecord]
    cdfs: dict[str, np.ndarray] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)

    @property
    def failed(self) -> list[DropRecord]:
        return [r for r in self.records if not r.ok]

    @property
    def succeeded(self) -> list[DropRecord]:
        return [r for r in self.records if r.ok]


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    return x, (np.arange(n) + 1.0) / n


def likely_95(samples) -> float:
    """Value exceeded with 95% probability (5th percentile)."""
    return float(np.percentile(np.asarray(samples, dtype=float), 5.0))


def _map_drops(config: ExperimentConfig, n: int, work: Callable[[int], DropRecord],
               threads: int) -> list[DropRecord]:
    def guarded(i: int) -> DropRecord:
        try:
            return work(i)
        except Exception as exc:  # one bad drop must not abort the batch
            log.error("drop %d failed: %s", i, exc)
            return DropRecord(i, ok=False, error=f"{type(exc).__name__}: {exc}")

    if threads <= 1:
        return [guarded(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, range(n)))


def _collect_cdfs(result: AggregateResult, metrics: dict[str, Callable[[DropRecord], float]]):
    ok = result.succeeded
    for name, getter in metrics.items():
        vals = [getter(r) for r in ok]
        if vals:
            result.cdfs[name] = np.sort(np.array(vals, dtype=float))


def _mode_metrics(config: ExperimentConfig, suffix: str = "") -> dict:
    out = {}
    for mode in config.modes:
        out[f"sum{suffix}_{mode}"] = (lambda r, m=mode + suffix: r.sum_rate[m])
        out[f"min{suffix}_{mode}"] = (lambda r, m=mode + suffix: r.min_rate[m])
    return out


# --- experiments --------------------------------------------------------------

def run_validate(config: ExperimentConfig, threads: int = 1) -> AggregateResult:
    """Closed form against Monte Carlo (MRC) on ``validate_drops`` drops."""
    modes = config.system_modes()

    def work(i: int) -> DropRecord:
        scen = generate_drop(config, i)
        stats = build_statistics(scen)
        rho = scen.max_power_w
        rec = DropRecord(i)
        mc = sinr_monte_carlo_modes(stats, rho, modes, "mrc", config.mc_trials,
                                    derived_seed(config.master_seed, _STREAM_MC, i),
                                    float(rho.max()))
        worst = 0.0
        for mode in modes:
            cf = sinr_closed_form(stats, rho, mode).sinr
            est = mc[mode]
            gap = np.abs(cf - est.sinr) / cf
            worst = max(worst, float(gap.max()))
            for k in range(cf.size):
                rec.rows.append(dict(drop=i, mode=mode.value, user=k, closed_form=cf[k],
                                     monte_carlo=est.sinr[k], stderr=est.stderr[k],
                                     rel_gap=gap[k]))
        rec.flags["max_gap"] = worst
        if worst > config.gap_tolerance:
            rec.flags["gap_exceeded"] = True
        return rec

    n = config.validate_drops
    res = AggregateResult("validate", config, _map_drops(config, n, work, threads))
    gaps = [r.flags["max_gap"] for r in res.succeeded]
    res.summary = dict(drops=n, failed=len(res.failed),
                       max_gap=max(gaps) if gaps else math.nan,
                       exceeded=sum(1 for r in res.succeeded if r.flags.get("gap_exceeded")))
    res.tables["validate"] = (["drop", "mode", "user", "closed_form", "monte_carlo", "stderr",
                               "rel_gap"], [list(row.values()) for r in res.records for row in r.rows])
    return res


def _rates_for_modes(stats: ChannelStatistics, rho, modes) -> dict[str, np.ndarray]:
    return {m.value: sinr_closed_form(stats, rho, m).rate_mbps for m in modes}


def run_cdf_experiment(config: ExperimentConfig, threads: int = 1) -> AggregateResult:
    """Full-power rates per mode; optional Monte-Carlo and combiner comparison on the first drops."""
    modes = config.system_modes()

    def work(i: int) -> DropRecord:
        scen = generate_drop(config, i)
        stats = build_statistics(scen)
        rho = scen.max_power_w
        rec = DropRecord(i)
        t0 = time.perf_counter()
        rates = _rates_for_modes(stats, rho, modes)
        rec.timings.append(("closed_form", time.perf_counter() - t0))
        for m, r in rates.items():
            rec.rates[m] = r
            rec.sum_rate[m] = float(r.sum())
            rec.min_rate[m] = float(r.min())
        if i < config.mc_drops:
            for rule in config.combiners:
                seed = derived_seed(config.master_seed, _STREAM_MC, i)
                mc = sinr_monte_carlo_modes(stats, rho, modes, rule, config.mc_trials, seed,
                                            float(rho.max()))
                for mode, est in mc.items():
                    key = f"{mode.value}_{rule}_mc"
                    r = ergodic_rate(est.sinr, stats.radio, stats.num_users)
                    rec.rates[key] = r
                    rec.sum_rate[key] = float(r.sum())
                    rec.min_rate[key] = float(r.min())
        for g in config.gain_overrides_dbi or ():
            for s in config.sigma_s2_multipliers or (1.0,):
                st = build_statistics(generate_drop(config, i, gain_override_dbi=g,
                                                    sigma_s2_multiplier=s))
                for m, r in _rates_for_modes(st, rho, modes).items():
                    rec.rows.append(dict(gain_dbi=g, sigma_s2_multiplier=s, mode=m,
                                         sum_mbps=float(r.sum())))
        return rec

    res = AggregateResult("cdf", config, _map_drops(config, config.drops, work, threads))
    _collect_cdfs(res, _mode_metrics(config))
    ok = res.succeeded
    mc_ok = [r for r in ok if r.drop < config.mc_drops]
    for rule in config.combiners if mc_ok else ():
        for mode in config.modes:
            key = f"{mode}_{rule}_mc"
            res.cdfs[f"sum-{rule}-mc_{mode}"] = np.sort([r.sum_rate[key] for r in mc_ok])
            res.cdfs[f"min-{rule}-mc_{mode}"] = np.sort([r.min_rate[key] for r in mc_ok])
    summary: dict[str, float] = dict(drops=config.drops, failed=len(res.failed))
    for mode in config.modes:
        if ok:
            summary[f"mean_sum_{mode}"] = float(np.mean([r.sum_rate[mode] for r in ok]))
            summary[f"mean_min_{mode}"] = float(np.mean([r.min_rate[mode] for r in ok]))
            summary[f"likely95_sum_{mode}"] = likely_95([r.sum_rate[mode] for r in ok])
    if "hybrid" in config.modes and "terrestrial" in config.modes and ok:
        summary["hybrid_below_terrestrial_drops"] = sum(
            1 for r in ok if r.sum_rate["hybrid"] < r.sum_rate["terrestrial"])
    res.summary = summary
    if config.gain_overrides_dbi:
        agg: dict[tuple, list[float]] = {}
        for r in ok:
            for row in r.rows:
                agg.setdefault((row["gain_dbi"], row["sigma_s2_multiplier"], row["mode"]),
                               []).append(row["sum_mbps"])
        res.tables["sweep"] = (["gain_dbi", "sigma_s2_multiplier", "mode", "mean_sum_mbps"],
                               [[g, s, m, float(np.mean(v))] for (g, s, m), v in agg.items()])
    return res


def run_maxmin_experiment(config: ExperimentConfig, threads: int = 1) -> AggregateResult:
    """Full power against the bisection max-min allocation, per drop and mode."""
    modes = config.system_modes()

    def work(i: int) -> DropRecord:
        scen = generate_drop(config, i)
        stats = build_statistics(scen)
        p = scen.max_power_w
        rec = DropRecord(i)
        for mode in modes:
            full = sinr_closed_form(stats, p, mode).rate_mbps
            t0 = time.perf_counter()
            fr = solve_maxmin(stats, p, config.delta, config.epsilon, config.max_iters,
                              config.max_outer, mode, config.warm_start)
            rec.timings.append((f"maxmin_{mode.value}", time.perf_counter() - t0))
            opt = sinr_closed_form(stats, fr.allocation.rho, mode).rate_mbps
            rec.min_rate[f"{mode.value}_fullpower"] = float(full.min())
            rec.min_rate[f"{mode.value}_maxmin"] = float(opt.min())
            rec.sum_rate[f"{mode.value}_fullpower"] = float(full.sum())
            rec.sum_rate[f"{mode.value}_maxmin"] = float(opt.sum())
            rec.rates[f"{mode.value}_maxmin"] = opt
            rec.flags[f"converged_{mode.value}"] = fr.allocation.converged
            rec.flags[f"inner_converged_{mode.value}"] = fr.inner_converged
            rec.flags[f"xi_{mode.value}"] = fr.xi_star
        return rec

    res = AggregateResult("maxmin", config, _map_drops(config, config.drops, work, threads))
    metrics = {}
    for mode in config.modes:
        for sol in ("fullpower", "maxmin"):
            metrics[f"min-{sol}_{mode}"] = (lambda r, key=f"{mode}_{sol}": r.min_rate[key])
    _collect_cdfs(res, metrics)
    ok = res.succeeded
    summary: dict[str, float] = dict(drops=config.drops, failed=len(res.failed))
    for mode in config.modes:
        if ok:
            summary[f"mean_min_fullpower_{mode}"] = float(np.mean([r.min_rate[f"{mode}_fullpower"] for r in ok]))
            summary[f"mean_min_maxmin_{mode}"] = float(np.mean([r.min_rate[f"{mode}_maxmin"] for r in ok]))
            summary[f"nonconverged_{mode}"] = sum(1 for r in ok if not r.flags[f"converged_{mode}"])
            summary[f"inner_nonconverged_{mode}"] = sum(
                1 for r in ok if not r.flags[f"inner_converged_{mode}"])
    res.summary = summary
    return res


CONGESTION_METHODS = ("fullpower", "capped", "softremoval")


def run_congestion_experiment(config: ExperimentConfig, threads: int = 1) -> AggregateResult:
    """Per-drop satisfaction, fairness and power under each target rate (hybrid system)."""
    mode = SystemMode.HYBRID
    radio = config.radio()

    def work(i: int) -> DropRecord:
        scen = generate_drop(config, i)
        stats = build_statistics(scen)
        p = scen.max_power_w
        k = scen.num_users
        rec = DropRecord(i)
        for target in config.target_rates_mbps:
            xi = np.full(k, float(rate_to_sinr(target, radio, k)))
            runs = {"fullpower": lambda: full_power_report(stats, xi, p, mode)}
            runs["capped"] = lambda: solve_fullpower_congestion(stats, xi, p, config.epsilon,
                                                              config.max_iters, mode)
            runs["softremoval"] = lambda: solve_soft_removal(stats, xi, p, config.epsilon,
                                                      config.max_iters, mode)
            for name in CONGESTION_METHODS:
                t0 = time.perf_counter()
                alloc, rep = runs[name]()
                rec.timings.append((f"{name}@{target:g}", time.perf_counter() - t0))
                rec.rows.append(dict(drop=i, target_mbps=target, method=name,
                                     satisfied=len(rep.satisfied), unsatisfied=len(rep.unsatisfied),
                                     jain=rep.jain, mean_power_w=float(np.mean(alloc.rho)),
                                     converged=alloc.converged))
        return rec

    res = AggregateResult("congestion", config, _map_drops(config, config.drops, work, threads))
    ok = res.succeeded
    k = config.users
    table = []
    for target in config.target_rates_mbps:
        for name in CONGESTION_METHODS:
            rows = [row for r in ok for row in r.rows
                    if row["method"] == name and row["target_mbps"] == target]
            if not rows:
                continue
            uns = 100.0 * float(np.mean([row["unsatisfied"] for row in rows])) / k
            sat = 100.0 * float(np.mean([row["satisfied"] for row in rows])) / k
            jain = float(np.mean([row["jain"] for row in rows]))
            power = float(np.mean([row["mean_power_w"] for row in rows]))
            power_dbw = 10.0 * math.log10(power) if power > 0 else -math.inf
            table.append([target, name, uns, sat, jain, power_dbw])
    res.tables["congestion"] = (["target_mbps", "method", "unsatisfied_pct", "satisfied_pct",
                                 "jain", "mean_power_dbw"], table)
    res.tables["congestion_drops"] = (
        ["drop", "target_mbps", "method", "satisfied", "unsatisfied", "jain", "mean_power_w",
         "converged"],
        [list(row.values()) for r in res.records for row in r.rows])
    res.summary = dict(drops=config.drops, failed=len(res.failed))
    if table:
        worst = max(config.target_rates_mbps)
        for row in table:
            if row[0] == worst:
                res.summary[f"unsatisfied_pct_{row[1]}@{worst:g}"] = row[2]
    return res


RUNNERS = {
    "validate": run_validate,
    "cdf": run_cdf_experiment,
    "maxmin": run_maxmin_experiment,
    "congestion": run_congestion_experiment,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> AggregateResult:
    return RUNNERS[config.kind](config, threads)


# --- output -------------------------------------------------------------------

def fmt(value) -> str:
    """Nine significant digits for floats; plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_outputs(result: AggregateResult, out_dir: str) -> list[str]:
    """Write every CSV for ``result`` into ``out_dir``; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in sorted(result.cdfs):
        x, p = empirical_cdf(result.cdfs[name])
        path = os.path.join(out_dir, f"cdf_{name}.csv")
        _write_csv(path, ["value_mbps", "cdf"], zip(x, p))
        written.append(path)
    for name in sorted(result.tables):
        header, rows = result.tables[name]
        path = os.path.join(out_dir, f"{name}.csv")
        _write_csv(path, header, rows)
        written.append(path)
    timing = [(r.drop, s, t) for r in result.records for s, t in r.timings]
    if timing:
        path = os.path.join(out_dir, "timing.csv")
        _write_csv(path, ["drop", "solver", "seconds"], timing)
        written.append(path)
    if result.failed:
        path = os.path.join(out_dir, "failed_drops.csv")
        _write_csv(path, ["drop", "error"], [(r.drop, r.error) for r in result.failed])
        written.append(path)
    return written


def dump_statistics(config: ExperimentConfig, drop_index: int, out_dir: str) -> str:
    """Per-user summary of one drop's channel statistics."""
    stats = build_statistics(generate_drop(config, drop_index))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "stats_dump.csv")
    header = ["user", "los_norm2", "trace_theta", "beta_sat"] + [
        f"gamma_ap{m}" for m in range(stats.num_aps)]
    rows = [[k, stats.los_norm2[k], stats.trace_theta[k], stats.beta_sat[k],
             *stats.gamma[:, k]] for k in range(stats.num_users)]
    _write_csv(path, header, rows)
    return path
