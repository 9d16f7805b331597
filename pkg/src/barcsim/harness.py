"""Monte Carlo experiment orchestration.

A study sweeps one parameter over ``grid`` and runs ``num_runs`` independent
realizations per grid point. Every realization draws its own user ensemble,
channels, symbols and noise from a seed derived from ``(seed, grid index,
run index)``; with ``common_random`` the grid index is left out so all grid
points see the same realizations, which tightens comparisons between them.

Noise convention: ``snr_db`` is ``A_1^2 / sigma^2`` for the desired user
(unit-norm codes, unit total channel power), and ``Eb/N0 = A_1^2 / (2 sigma^2)``
for QPSK, so the two differ by ``10 log10(2)`` dB.
"""

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import jsonschema
import numpy as np

from . import adapt_select as sel
from . import baselines as bl
from . import barc
from . import chanmodel as cm
from .errors import BarcError, ConfigError
from .numerics import count_combinations

__all__ = [
    "STUDIES",
    "ALGORITHMS",
    "CONFIG_SCHEMA",
    "NO_DATA",
    "ExperimentConfig",
    "PointResult",
    "RunResult",
    "load_config",
    "validate_config",
    "run_seed",
    "run_single",
    "run_experiment",
    "compute_ber",
    "emit_results",
    "ebn0_to_snr_db",
]

STUDIES = {
    "ber_vs_rank": "BER against the reduced rank D (grid: D values)",
    "ber_vs_interp_rank": "BER against the interpolator length I (grid: I values)",
    "ber_vs_symbols": "BER in windows ending at each grid value (grid: symbol indices)",
    "ber_vs_branches": "BER against the number of decimation branches B (grid: B values)",
    "ber_vs_snr": "BER against Eb/N0 in dB (grid: Eb/N0 values)",
    "ber_vs_users": "BER against the number of users K (grid: K values)",
    "order_selection": "BER of fixed ranks against Auto-Rank (grid: 'auto' or 'D<d>I<i>')",
    "branch_selection": "BER and B_avg of SNB, SNB-S and fixed banks (grid: 'snb', 'snb_s', 'fixed')",
}
ALGORITHMS = ("barc_sg", "barc_rls", "fullrank_sg", "fullrank_rls", "mmse")
NO_DATA = "NA"

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "barcsim experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["study", "grid"],
    "properties": {
        "study": {"enum": sorted(STUDIES)},
        "grid": {"type": "array", "minItems": 1, "items": {"type": ["number", "string"]}},
        "n": {"type": "integer", "minimum": 1},
        "lp": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "snr_db": {"type": "number"},
        "doppler": {"type": "number", "minimum": 0},
        "fading": {"enum": ["clarke", "static"]},
        "power_std_db": {"type": "number", "minimum": 0},
        "modulation": {"enum": ["qpsk", "bpsk"]},
        "num_symbols": {"type": "integer", "minimum": 0},
        "num_runs": {"type": "integer", "minimum": 1},
        "prefix": {"type": "integer", "minimum": 0},
        "algorithm": {"enum": list(ALGORITHMS)},
        "scheme": {"enum": list(barc.SCHEMES)},
        "b": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "i": {"type": "integer", "minimum": 1},
        "mu_v": {"type": "number", "exclusiveMinimum": 0},
        "mu_w": {"type": "number", "exclusiveMinimum": 0},
        "mu": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "rho_init": {"type": "number", "exclusiveMinimum": 0},
        "cross_weight": {"enum": ["forgetting", "sum"]},
        "branch_norm": {"type": "boolean"},
        "rho_multiplier": {"type": "number", "exclusiveMinimum": 0},
        "b_max": {"type": "integer", "minimum": 1},
        "calibration_symbols": {"type": "integer", "minimum": 1},
        "warmup": {"type": "integer", "minimum": 0},
        "resort_every": {"type": "integer", "minimum": 1},
        "d_min": {"type": "integer", "minimum": 1},
        "d_max": {"type": "integer", "minimum": 1},
        "i_min": {"type": "integer", "minimum": 1},
        "i_max": {"type": "integer", "minimum": 1},
        "select_for": {"type": "integer", "minimum": 0},
        "channel": {"enum": ["genie", "blind"]},
        "blind_forgetting": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "optimal_cap": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "common_random": {"type": "boolean"},
    },
}


@dataclass
class ExperimentConfig:
    study: str
    grid: list
    n: int = 32
    lp: int = 9
    k: int = 8
    snr_db: float = 15.0
    doppler: float = 0.0
    fading: str = "clarke"
    power_std_db: float = 1.5
    modulation: str = "qpsk"
    num_symbols: int = 1500
    num_runs: int = 50
    prefix: int = 500
    algorithm: str = "barc_rls"
    scheme: str = "prestored"
    b: int = 8
    d: int = 5
    i: int = 3
    mu_v: float = 0.002
    mu_w: float = 0.002
    mu: float = 0.002
    alpha: float = 0.998
    nu: float = 1.0
    delta: float = 0.01
    rho_init: float = 0.01
    cross_weight: str = "forgetting"
    branch_norm: bool = True
    rho_multiplier: float = 1.04
    b_max: int = 16
    calibration_symbols: int = 200
    warmup: int = 200
    resort_every: int = 500
    d_min: int = 3
    d_max: int = 6
    i_min: int = 2
    i_max: int = 6
    select_for: int = 500
    channel: str = "genie"
    blind_forgetting: float = 0.998
    optimal_cap: int = barc.DEFAULT_OPTIMAL_CAP
    seed: int = 0
    common_random: bool = True

    def replace(self, **kw):
        data = asdict(self)
        data.update(kw)
        return validate_config(data)


def _schema_path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        parts.append(err.message.split("'")[1])
    if err.validator == "additionalProperties":
        extra = [x for x in err.instance if x not in CONFIG_SCHEMA["properties"]]
        parts.extend(extra[:1])
    return "/" + "/".join(parts)


def validate_config(data):
    """Check a config mapping and return an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        With ``path`` naming the offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError("/", "config must be a JSON object")
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(data), key=lambda e: [str(x) for x in e.absolute_path])
    if errors:
        err = errors[0]
        raise ConfigError(_schema_path(err), err.message)
    cfg = ExperimentConfig(**data)
    study = cfg.study
    numeric = {"ber_vs_rank", "ber_vs_interp_rank", "ber_vs_symbols", "ber_vs_branches", "ber_vs_snr", "ber_vs_users"}
    for j, g in enumerate(cfg.grid):
        if study in numeric and isinstance(g, str):
            raise ConfigError(f"/grid/{j}", f"{study} needs numeric grid values")
        if study in numeric - {"ber_vs_snr"} and (g != int(g) or g < 1):
            raise ConfigError(f"/grid/{j}", "grid values must be positive integers")
        if study == "order_selection" and not _parse_rank_label(g):
            raise ConfigError(f"/grid/{j}", "expected 'auto' or 'D<d>I<i>'")
        if study == "branch_selection" and g not in ("snb", "snb_s", "fixed"):
            raise ConfigError(f"/grid/{j}", "expected 'snb', 'snb_s' or 'fixed'")
    if study == "ber_vs_symbols":
        if list(cfg.grid) != sorted(cfg.grid) or cfg.grid[-1] > cfg.num_symbols:
            raise ConfigError("/grid", "symbol checkpoints must be increasing and within num_symbols")
    if cfg.d_min > cfg.d_max:
        raise ConfigError("/d_min", "d_min exceeds d_max")
    if cfg.i_min > cfg.i_max:
        raise ConfigError("/i_min", "i_min exceeds i_max")
    if cfg.k < 1:
        raise ConfigError("/k", "need at least one user")
    _check_banks(cfg)
    return cfg


def _check_banks(cfg):
    # Bank sizes that cannot be built are configuration errors, caught before any run.
    m = cfg.n + cfg.lp - 1
    if cfg.algorithm not in ("barc_sg", "barc_rls"):
        return
    for j, value in enumerate(cfg.grid):
        par = _point_params(cfg, value)
        d, b = par["d"], par["b"]
        if cfg.study == "order_selection":
            rank = _parse_rank_label(value)
            if rank == "auto":
                continue
            d = rank[0]
        if value in ("snb", "snb_s", "fixed"):
            b = cfg.b_max
        where = f"/grid/{j}" if cfg.study in ("ber_vs_rank", "ber_vs_branches") else "/d"
        if d > m:
            raise ConfigError(where, f"rank D={d} exceeds the observation length M={m}")
        if cfg.scheme == "prestored" and (d - 1) * (m // d) + b > m:
            raise ConfigError("/b" if where == "/d" else where, f"at most {m - (d - 1) * (m // d)} prestored branches fit at D={d}, M={m}")
        if cfg.scheme == "optimal" and count_combinations(m, d) > cfg.optimal_cap:
            raise ConfigError("/optimal_cap", f"choose({m}, {d}) patterns exceed optimal_cap={cfg.optimal_cap}")


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if isinstance(data, dict) and overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return validate_config(data)


def _parse_rank_label(label):
    if label == "auto":
        return "auto"
    if isinstance(label, str) and label.startswith("D") and "I" in label:
        d, _, i = label[1:].partition("I")
        if d.isdigit() and i.isdigit() and int(d) > 0 and int(i) > 0:
            return int(d), int(i)
    return None


def ebn0_to_snr_db(ebn0_db, modulation="qpsk"):
    bits = 2 if modulation == "qpsk" else 1
    return float(ebn0_db) + 10.0 * math.log10(bits)


def run_seed(master, grid_index, run_index, common_random=True):
    """Per-run seed: ``SeedSequence(master, spawn_key=(g, run))`` reduced to
    64 bits, with ``g = 0`` for every grid point under common random numbers."""
    g = 0 if common_random else int(grid_index)
    ss = np.random.SeedSequence(int(master), spawn_key=(g, int(run_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _bits(sym, modulation):
    sym = np.asarray(sym)
    if modulation == "qpsk":
        return np.stack([sym.real < 0, sym.imag < 0], axis=-1)
    return (sym.real < 0)[..., None]


def compute_ber(detected, truth, modulation="qpsk"):
    """Gray-mapped bit error rate.

    Returns
    -------
    ber : float
        NaN when there are no symbols.
    errors : int
        Bit errors.
    count : int
        Symbols compared.
    """
    detected = np.asarray(detected)
    truth = np.asarray(truth)
    if detected.shape != truth.shape:
        raise ValueError(f"length mismatch: {detected.shape} vs {truth.shape}")
    count = int(detected.size)
    if count == 0:
        return float("nan"), 0, 0
    errs = int(np.sum(_bits(detected, modulation) != _bits(truth, modulation)))
    per = 2 if modulation == "qpsk" else 1
    return errs / (per * count), errs, count


# -- one realization -----------------------------------------------------------


def _point_params(cfg, value):
    """Receiver and scenario parameters at one grid point."""
    par = {"k": cfg.k, "d": cfg.d, "i": cfg.i, "b": cfg.b, "snr_db": cfg.snr_db, "variant": None}
    s = cfg.study
    if s == "ber_vs_rank":
        par["d"] = int(value)
    elif s == "ber_vs_interp_rank":
        par["i"] = int(value)
    elif s == "ber_vs_branches":
        par["b"] = int(value)
    elif s == "ber_vs_snr":
        par["snr_db"] = ebn0_to_snr_db(value, cfg.modulation)
    elif s == "ber_vs_users":
        par["k"] = int(value)
    elif s in ("order_selection", "branch_selection"):
        par["variant"] = value
    return par


def _bank(cfg, m, d, b, seed):
    scheme = cfg.scheme
    if scheme == "uniform":
        return barc.gen_patterns("uniform", m, d)
    if scheme == "random":
        # Nested banks: the first b patterns do not depend on b.
        full = barc.gen_patterns("random", m, d, max(b, cfg.b_max), seed=seed)
        return barc.BranchBank(full.patterns[:b].copy(), m, "random")
    return barc.gen_patterns(scheme, m, d, b, seed=seed, cap=cfg.optimal_cap)


class _Signature:
    """Effective signature and detection phase reference per symbol."""

    def __init__(self, cfg, ens, frames):
        self.ens = ens
        self.blind = cfg.channel == "blind"
        if self.blind:
            self.tracker = bl.BlindChannelTracker(ens.constraints[0], forgetting=cfg.blind_forgetting)
            self.frames = frames

    def at(self, i):
        h_true = self.ens.taps(0, i)
        if not self.blind:
            return self.ens.constraints[0] @ h_true, 1.0 + 0j
        h_hat = self.tracker.update(self.frames[i])
        return self.ens.constraints[0] @ h_hat, bl.phase_reference(h_true, h_hat)


def _mmse_outputs(cfg, ens, frames, noise_var):
    z = np.empty(frames.shape[0], dtype=complex)
    static = cfg.doppler == 0.0 or cfg.fading == "static"
    w = None
    for i in range(frames.shape[0]):
        if w is None or not static:
            w = bl.mmse_oracle(bl.analytic_covariance(ens, i, noise_var), ens.desired_signature(i), cfg.nu)
        z[i] = np.vdot(w, frames[i])
    return z


def _calibrated_rho(cfg, ens, frames, noise_var):
    q = min(cfg.calibration_symbols, frames.shape[0])
    z = _mmse_outputs(cfg, ens, frames[:q], noise_var)
    return sel.calibrate_rho(z, cfg.rho_multiplier)


def _receiver_outputs(cfg, par, ens, frames, noise_var, seed):
    """Run the configured receiver; returns ``(z, phase_refs, extras)``."""
    q, m = frames.shape
    sig = _Signature(cfg, ens, frames)
    z = np.empty(q, dtype=complex)
    ref = np.ones(q, dtype=complex)
    extras = {}
    algo = cfg.algorithm
    variant = par["variant"]

    if algo == "mmse":
        return _mmse_outputs(cfg, ens, frames, noise_var), ref, extras

    if algo in ("fullrank_sg", "fullrank_rls"):
        state = None
        for i in range(q):
            p, ref[i] = sig.at(i)
            if state is None:
                state = bl.fullrank_init(p, cfg.nu)
            if algo == "fullrank_sg":
                _, z[i] = bl.fullrank_ccm_sg_step(state, frames[i], p, cfg.mu)
            else:
                _, z[i] = bl.fullrank_ccm_rls_step(
                    state, frames[i], p, cfg.alpha, cfg.delta, cfg.rho_init, cfg.cross_weight
                )
        return z, ref, extras

    rank = _parse_rank_label(variant) if cfg.study == "order_selection" else None
    if rank == "auto":
        rr = sel.RankRange(cfg.d_min, cfg.d_max, cfg.i_min, cfg.i_max)
        if q == 0:
            return z, ref, extras
        p, ref[0] = sig.at(0)
        rx = sel.AutoRankReceiver(
            p, m, rr, cfg.alpha, select_for=cfg.select_for, nu=cfg.nu, rls_kwargs=_rls_kwargs(cfg)
        )
        for i in range(q):
            if i:
                p, ref[i] = sig.at(i)
            z[i], _ = rx.step(p, frames[i])
        hist = np.asarray(rx.history, dtype=float)
        extras["d_sel"], extras["i_sel"] = hist[-1]
        return z, ref, extras
    d, n = rank if rank else (par["d"], par["i"])

    selector = None
    b = par["b"]
    if variant in ("snb", "snb_s"):
        b = cfg.b_max
        rho = _calibrated_rho(cfg, ens, frames, noise_var)
        selector = sel.BranchSelector(rho, cfg.b_max, variant == "snb_s", cfg.warmup, cfg.resort_every)
        extras["rho"] = rho
    elif variant == "fixed":
        b = cfg.b_max
    bank = _bank(cfg, m, d, b, seed)
    if q == 0:
        return z, ref, extras
    p, ref[0] = sig.at(0)
    state = barc.init_state(bank, p, n, nu=cfg.nu)
    for i in range(q):
        if i:
            p, ref[i] = sig.at(i)
        if algo == "barc_sg":
            res = barc.sg_step(state, p, frames[i], cfg.mu_v, cfg.mu_w, selector=selector, branch_norm=cfg.branch_norm)
        else:
            res = barc.rls_step(state, p, frames[i], cfg.alpha, selector=selector, **_rls_kwargs(cfg))
        z[i] = res.z
    if selector is not None:
        extras["b_avg"] = selector.b_avg
    else:
        extras["b_avg"] = float(bank.b)
    return z, ref, extras


def _rls_kwargs(cfg):
    return dict(
        delta_v=cfg.delta,
        delta_w=cfg.delta,
        rho_v=cfg.rho_init,
        rho_w=cfg.rho_init,
        cross_weight=cfg.cross_weight,
        branch_norm=cfg.branch_norm,
    )


def run_single(cfg, grid_index, run_index):
    """One realization at one grid point.

    Returns a dict with ``seed``, per-window ``errors`` / ``symbols`` lists
    (one window unless the study is ``ber_vs_symbols``), ``extras`` and
    ``failure`` (the error message of a numerical failure, else ``None``).
    """
    value = cfg.grid[grid_index]
    par = _point_params(cfg, value)
    seed = run_seed(cfg.seed, grid_index, run_index, cfg.common_random)
    ens_seed, noise_seed, bank_seed = np.random.SeedSequence(seed).generate_state(3)
    windows = _windows(cfg, grid_index)
    out = {"seed": seed, "errors": [0] * len(windows), "symbols": [0] * len(windows), "extras": {}, "failure": None}
    try:
        ens = cm.draw_user_ensemble(
            par["k"],
            cfg.n,
            cfg.lp,
            cfg.power_std_db,
            int(ens_seed),
            num_symbols=cfg.num_symbols,
            normalized_doppler=cfg.doppler,
            modulation=cfg.modulation,
            fading=cfg.fading,
        )
        noise_var = ens.amplitudes[0] ** 2 / 10.0 ** (par["snr_db"] / 10.0)
        frames = cm.synthesize_block(ens, noise_var, np.random.default_rng(int(noise_seed)))
        z, ref, extras = _receiver_outputs(cfg, par, ens, frames, noise_var, int(bank_seed))
        detect = bl.detect_qpsk if cfg.modulation == "qpsk" else bl.detect_bpsk
        truth = ens.symbols[0, 1 : 1 + cfg.num_symbols]
        for j, (lo, hi) in enumerate(windows):
            if hi > lo:
                _, errs, count = compute_ber(detect(z[lo:hi], ref[lo:hi]), truth[lo:hi], cfg.modulation)
                out["errors"][j], out["symbols"][j] = errs, count
        out["extras"] = extras
    except BarcError as exc:
        out["failure"] = f"{type(exc).__name__}: {exc}"
    return out


def _windows(cfg, grid_index):
    if cfg.study == "ber_vs_symbols":
        hi = int(cfg.grid[grid_index])
        lo = int(cfg.grid[grid_index - 1]) if grid_index else 0
        return [(lo, hi)]
    return [(min(cfg.prefix, cfg.num_symbols), cfg.num_symbols)]


# -- aggregation ---------------------------------------------------------------


@dataclass
class PointResult:
    grid_value: object
    ber: Optional[float]
    stderr: Optional[float]
    bit_errors: int
    bits: int
    runs: int
    failed_runs: int
    b_avg: Optional[float] = None
    d_sel: Optional[float] = None
    i_sel: Optional[float] = None
    rho: Optional[float] = None
    seeds: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def no_data(self):
        return self.ber is None


@dataclass
class RunResult:
    config: ExperimentConfig
    points: list
    wall_time: float = 0.0


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def _aggregate(cfg, g, runs):
    per = 2 if cfg.modulation == "qpsk" else 1
    ok = [r for r in runs if r["failure"] is None]
    errs = sum(sum(r["errors"]) for r in ok)
    syms = sum(sum(r["symbols"]) for r in ok)
    bits = per * syms
    if bits:
        ber = errs / bits
        se = math.sqrt(max(ber * (1 - ber), 0.0) / bits)
    else:
        ber = se = None
    ex = [r["extras"] for r in ok]
    return PointResult(
        grid_value=cfg.grid[g],
        ber=ber,
        stderr=se,
        bit_errors=int(errs),
        bits=int(bits),
        runs=len(runs),
        failed_runs=len(runs) - len(ok),
        b_avg=_mean([e.get("b_avg") for e in ex]),
        d_sel=_mean([e.get("d_sel") for e in ex]),
        i_sel=_mean([e.get("i_sel") for e in ex]),
        rho=_mean([e.get("rho") for e in ex]),
        seeds=[r["seed"] for r in runs],
        failures=[r["failure"] for r in runs if r["failure"] is not None],
    )


def _task(args):
    cfg, g, run = args
    return run_single(cfg, g, run)


def run_experiment(cfg, threads=1):
    """Execute every ``(grid point, run)`` pair and aggregate per grid point.

    The BER of a grid point pools bit errors over its successful runs (equal
    symbol counts make this the mean per-run BER); ``stderr`` is the binomial
    standard error ``sqrt(ber (1 - ber) / bits)``. Results do not depend on
    ``threads``.
    """
    if isinstance(cfg, dict):
        cfg = validate_config(cfg)
    t0 = time.perf_counter()
    tasks = [(cfg, g, run) for g in range(len(cfg.grid)) for run in range(cfg.num_runs)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        outs = [_task(t) for t in tasks]
    points = []
    for g in range(len(cfg.grid)):
        points.append(_aggregate(cfg, g, outs[g * cfg.num_runs : (g + 1) * cfg.num_runs]))
    return RunResult(cfg, points, time.perf_counter() - t0)


# -- output --------------------------------------------------------------------

METRICS = ("grid_value", "ber", "stderr", "bit_errors", "bits", "runs", "failed_runs", "b_avg", "d_sel", "i_sel", "rho")


def _fmt(x):
    if x is None:
        return NO_DATA
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return NO_DATA if math.isnan(x) else repr(x)
    if isinstance(x, (list, dict)):
        return json.dumps(x, separators=(",", ":"))
    return str(x)


def results_csv(result):
    cfg_fields = [f.name for f in fields(ExperimentConfig)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(METRICS) + ["cfg_" + n for n in cfg_fields])
    cfg_row = [_fmt(getattr(result.config, n)) for n in cfg_fields] if result.config else []
    for pt in result.points:
        writer.writerow([_fmt(getattr(pt, n)) for n in METRICS] + cfg_row)
    return buf.getvalue()


_PLOT = """# gnuplot script: gnuplot {name}.gp  ->  {name}.png
set datafile separator ","
set datafile missing "{na}"
set terminal pngcairo size 800,600
set output "{name}.png"
set key autotitle columnhead
set title "{study}"
set xlabel "{xlabel}"
set ylabel "BER"
set logscale y
set grid
plot "{name}.csv" using {xcol}:2:3 with yerrorlines title "{algorithm}"
"""


def emit_results(result, path, emit_plot=False, name="results"):
    """Write ``<name>.csv``, ``<name>.json`` and optionally ``<name>.gp`` under
    ``path``; returns the list of written files.

    Raises
    ------
    OSError
        Re-raised with the failing path in the message.
    """
    os.makedirs(path, exist_ok=True)
    written = []
    cfg = result.config
    sidecar = {
        "config": asdict(cfg) if cfg else None,
        "seed_derivation": "SeedSequence(seed, spawn_key=(grid_index or 0 under common_random, run_index))",
        "noise_convention": "snr_db = A_1^2/sigma^2 of the desired user; Eb/N0 = snr / bits per symbol",
        "points": [
            {"grid_value": p.grid_value, "seeds": p.seeds, "failures": p.failures, "ber": p.ber, "stderr": p.stderr}
            for p in result.points
        ],
        "metrics": {"wall_time": result.wall_time},
    }
    files = [(f"{name}.csv", results_csv(result)), (f"{name}.json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")]
    if emit_plot:
        xcol = 1
        xlabel = {"ber_vs_snr": "Eb/N0 (dB)", "ber_vs_rank": "D", "ber_vs_interp_rank": "I"}.get(
            cfg.study if cfg else "", "grid value"
        )
        text = _PLOT.format(
            name=name,
            na=NO_DATA,
            study=cfg.study if cfg else "",
            xlabel=xlabel,
            xcol=xcol,
            algorithm=cfg.algorithm if cfg else "",
        )
        files.append((f"{name}.gp", text))
    for fname, text in files:
        target = os.path.join(path, fname)
        try:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {target}: {exc.strerror}") from exc
        written.append(target)
    return written
