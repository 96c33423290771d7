"""End-to-end BER experiments: pilot tuning, test transmission, reporting."""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from . import analytics, detector
from .channel import ChannelParams, normalize, simulate_binomial, simulate_gaussian
from .particle import DriftParams, run_transmission
from .schemes import DECODERS, Scheme, get_scheme

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BACKENDS = ("binomial", "gaussian", "particle", "particle-drift", "particle-transparent")
DETECTIONS = ("static", "dynamic", "adaptive", "baseline", "estimated")

PILOT_RUNS, PILOT_RUN_BITS = 7, 7680
TEST_RUNS, TEST_RUN_BITS = 5, 20160

# stream tags for seed derivation
_INFO, _CHANNEL, _DECODER = 1, 2, 3
_PILOT, _TEST = 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One point of a BER sweep.  ``t_s`` and ``M`` are the Uncoded anchors."""

    scheme: str = "rlim1"
    k: int = 16
    t_s: float = 0.2
    M: int = 1000
    r_0: float = 10.0
    sigma_n2: float = 0.0
    D: float = 79.4
    r_R: float = 5.0
    L: int = 200
    taps: tuple[float, ...] | None = None
    backend: str = "binomial"
    detection: str = "static"
    decoder: str = "greedy"
    pilot_runs: int = PILOT_RUNS
    pilot_bits: int = PILOT_RUNS * PILOT_RUN_BITS
    test_runs: int = TEST_RUNS
    test_bits: int = TEST_RUNS * TEST_RUN_BITS
    seed: int = 0
    fixed_params: tuple | None = None  # skip pilot tuning with these detection params
    drift: DriftParams = field(default_factory=DriftParams)

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.detection not in DETECTIONS:
            raise ConfigError(f"detection must be one of {DETECTIONS}")
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}")
        for name, total, runs in (("pilot", self.pilot_bits, self.pilot_runs),
                                  ("test", self.test_bits, self.test_runs)):
            if runs < 1 or total % runs or (total // runs) % self.k:
                raise ConfigError(f"{name} budget {total} must split into {runs} runs of a multiple of k={self.k}")
        if self.backend.startswith("particle"):
            t_s, _ = self.normalized()
            if round(t_s / self.drift.dt) < 1:
                raise ConfigError(f"normalised interval {t_s} s is shorter than the particle time step")

    def get_scheme(self) -> Scheme:
        return get_scheme(self.scheme, self.k)

    def normalized(self) -> tuple[float, int]:
        return normalize(self.get_scheme().stats, self.t_s, self.M, k=self.k)

    def channel(self) -> ChannelParams:
        t_s, M = self.normalized()
        if self.backend.startswith("particle"):
            t_s = round(t_s / self.drift.dt) * self.drift.dt
        return ChannelParams(self.D, self.r_R, self.r_0, t_s, M, self.sigma_n2, self.L, self.taps)

    def resolved_detection(self) -> str:
        if self.detection == "dynamic":
            return self.get_scheme().dynamic_mode()
        return self.detection


@dataclass
class BerRecord:
    scheme: str
    order: int
    n: int
    k: int
    backend: str
    detection: str
    t_s_ms: float
    M: int
    r0_um: float
    sigma_n2: float
    tuned_params: str
    bits: int
    errors: int
    ber: float
    seed: int
    wall_ms: float
    decoder: str = "greedy"
    t_s_norm_ms: float = 0.0
    M_norm: int = 0
    D: float = 79.4
    r_R: float = 5.0
    L: int = 200
    pilot_bits: int = 0
    pilot_runs: int = 0
    test_runs: int = 0
    pilot_ber: float = float("nan")
    schema_version: int = SCHEMA_VERSION

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        return ber_interval(self.errors, self.bits, level)


CSV_COLUMNS = ["schema_version", "scheme", "order", "n", "k", "backend", "detection", "t_s_ms", "M",
               "r0_um", "sigma_n2", "tuned_params", "bits", "errors", "ber", "seed", "wall_ms",
               "decoder", "t_s_norm_ms", "M_norm", "D", "r_R", "L", "pilot_bits", "pilot_runs",
               "test_runs", "pilot_ber"]


def ber_interval(errors: int, bits: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval for a bit error rate."""
    ci = binomtest(errors, bits).proportion_ci(confidence_level=level, method="exact")
    return ci.low, ci.high


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


def info_bits(seed: int, phase: int, run: int, count: int) -> np.ndarray:
    """Information bits for one run; identical for every scheme at a given seed."""
    return _rng(seed, _INFO, phase, run).integers(0, 2, size=count, dtype=np.uint8)


def transmit(tx: np.ndarray, cfg: ExperimentConfig, params: ChannelParams, rng) -> np.ndarray:
    if cfg.backend == "binomial":
        return simulate_binomial(tx, params, rng)
    if cfg.backend == "gaussian":
        return simulate_gaussian(tx, params, rng)
    mode = "transparent" if cfg.backend == "particle-transparent" else "absorbing"
    drift = cfg.drift if cfg.backend == "particle-drift" else None
    dp = drift or DriftParams.still(cfg.drift.dt)
    return run_transmission(tx, params, dp, mode, rng)


def _phase_data(cfg: ExperimentConfig, scheme: Scheme, params: ChannelParams, phase: int):
    runs = cfg.pilot_runs if phase == _PILOT else cfg.test_runs
    total = cfg.pilot_bits if phase == _PILOT else cfg.test_bits
    counts, truth = [], []
    for run in range(runs):
        info = info_bits(cfg.seed, phase, run, total // runs)
        tx = scheme.encode(info)
        counts.append(transmit(tx, cfg, params, _rng(cfg.seed, _CHANNEL, phase, run)))
        truth.append(info)
    # runs start from an empty channel; their codeword windows never straddle runs
    return np.concatenate(counts), np.concatenate(truth)


def _format_params(mode: str, p) -> str:
    if mode == "baseline":
        a, floor, spacing = p
        return f"a={a:.12g};min={floor:.12g};spacing={spacing}"
    if mode == "adaptive":
        return f"a={p:.12g}"
    return f"tau={p:.12g}"


def parse_params(mode: str, text: str):
    kv = dict(item.split("=", 1) for item in text.split(";") if "=" in item)
    if mode == "baseline":
        return float(kv["a"]), float(kv["min"]), int(kv["spacing"])
    if mode == "adaptive":
        return float(kv["a"])
    return float(kv["tau"])


def baseline_floors(params: ChannelParams) -> tuple[float, ...]:
    """Candidate window floors: fractions of a lone emission's mean first-slot count."""
    peak = params.M * float(params.coefficients[0])
    return tuple(float(round(f * peak)) for f in (0.0, 0.25, 0.5, 0.75))


def tune(cfg: ExperimentConfig, scheme: Scheme, params: ChannelParams, counts, truth,
         mode: str) -> tuple[object, float]:
    """Pick detection parameters on pilot data; returns (params, pilot BER)."""
    def receive(c, p):
        # a fresh decoder stream per grid point keeps random tie-breaks replayable
        return scheme.receive(c, mode, p, cfg.decoder, _rng(cfg.seed, _DECODER, _PILOT))

    if mode == "static":
        res = detector.tune_static([counts], [truth], receive, params.M)
    elif mode == "adaptive":
        res = detector.tune_adaptive([counts], [truth], receive)
    elif mode == "baseline":
        res = detector.tune_baseline([counts], [truth], receive, baseline_floors(params), scheme.spacing_grid())
    else:
        raise ValueError(f"mode {mode!r} is not tuned on pilots")
    return res.best, res.ber


def estimated_threshold(scheme: Scheme, params: ChannelParams) -> float:
    if scheme.kind != "rlim":
        raise ConfigError("analytic threshold estimation applies to RLIM schemes")
    m = analytics.moments(params, scheme.order)
    return analytics.estimate_threshold(m, analytics.symbol_class_probs(scheme.codebook))


def run_experiment(cfg: ExperimentConfig) -> BerRecord:
    cfg.validate()
    start = time.perf_counter()
    scheme = cfg.get_scheme()
    params = cfg.channel()
    mode = cfg.resolved_detection()
    pilot_ber = float("nan")
    label = ""
    if cfg.fixed_params is not None:
        chosen = cfg.fixed_params if mode == "baseline" else cfg.fixed_params[0]
        tune_mode = "static" if mode == "estimated" else mode
        label = ";source=fixed"
    elif mode == "estimated":
        tune_mode = "static"
        try:
            chosen = estimated_threshold(scheme, params)
        except analytics.NoInteriorOptimum as exc:
            log.warning("threshold estimate failed (%s); tuning on pilots instead", exc)
            counts, truth = _phase_data(cfg, scheme, params, _PILOT)
            chosen, pilot_ber = tune(cfg, scheme, params, counts, truth, "static")
            label = ";source=pilot-fallback"
    else:
        tune_mode = mode
        counts, truth = _phase_data(cfg, scheme, params, _PILOT)
        chosen, pilot_ber = tune(cfg, scheme, params, counts, truth, mode)

    counts, truth = _phase_data(cfg, scheme, params, _TEST)
    decoded = scheme.receive(counts, tune_mode, chosen, cfg.decoder, _rng(cfg.seed, _DECODER, _TEST))
    errors = int(np.count_nonzero(decoded != truth))
    wall = (time.perf_counter() - start) * 1000
    return BerRecord(
        scheme=scheme.name, order=scheme.order, n=scheme.n, k=scheme.k, backend=cfg.backend,
        detection=mode, t_s_ms=cfg.t_s * 1000, M=cfg.M, r0_um=cfg.r_0, sigma_n2=cfg.sigma_n2,
        tuned_params=_format_params(tune_mode, chosen) + label, bits=int(truth.size), errors=errors,
        ber=errors / truth.size, seed=cfg.seed, wall_ms=round(wall, 1), decoder=cfg.decoder,
        t_s_norm_ms=params.t_s * 1000, M_norm=params.M, D=cfg.D, r_R=cfg.r_R, L=cfg.L,
        pilot_bits=cfg.pilot_bits, pilot_runs=cfg.pilot_runs, test_runs=cfg.test_runs, pilot_ber=pilot_ber,
    )


def config_from_record(row: dict) -> ExperimentConfig:
    """Rebuild the configuration that produced a results.csv row."""
    fixed = None
    if "source=fixed" in row["tuned_params"]:
        mode = "static" if row["detection"] == "estimated" else row["detection"]
        fixed = parse_params(mode, row["tuned_params"])
        fixed = fixed if isinstance(fixed, tuple) else (fixed,)
    return ExperimentConfig(
        scheme=row["scheme"], k=int(row["k"]), t_s=float(row["t_s_ms"]) / 1000, M=int(row["M"]),
        r_0=float(row["r0_um"]), sigma_n2=float(row["sigma_n2"]), D=float(row["D"]), r_R=float(row["r_R"]),
        L=int(row["L"]), backend=row["backend"], detection=row["detection"], decoder=row["decoder"],
        pilot_runs=int(row["pilot_runs"]), pilot_bits=int(row["pilot_bits"]),
        test_runs=int(row["test_runs"]), test_bits=int(row["bits"]), seed=int(row["seed"]),
        fixed_params=fixed,
    )


# ---------------------------------------------------------------- CSV I/O

def append_records(path, records) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        for rec in records:
            w.writerow({k: getattr(rec, k) for k in CSV_COLUMNS})


def read_records(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def record_from_row(row: dict) -> BerRecord:
    kwargs = {}
    for f in fields(BerRecord):
        if f.name not in row:
            continue
        raw = row[f.name]
        kwargs[f.name] = int(raw) if f.type == "int" else float(raw) if f.type == "float" else raw
    return BerRecord(**kwargs)


# ------------------------------------------------------------ comparisons

POINT_KEY = ("order", "k", "backend", "detection", "t_s_ms", "M", "r0_um", "sigma_n2")


def _key(rec: BerRecord) -> tuple:
    return tuple(getattr(rec, name) for name in POINT_KEY)


@dataclass
class ComparisonRow:
    point: tuple
    ber_a: float
    ber_b: float
    winner: str  # "a", "b" or "tie"
    fold: float | None


@dataclass
class ComparisonSummary:
    order: int
    wins_a: int
    fold_a: float | None
    wins_b: int
    fold_b: float | None
    ties: int


def compare_elementwise(results_a, results_b) -> tuple[list[ComparisonRow], list[ComparisonSummary]]:
    """Point-by-point BER comparison of two result sets over the same configs.

    Fold is loser BER over winner BER (infinite when the winner saw no
    errors); per-order means use finite folds only.
    """
    a = {_key(r): r for r in results_a}
    b = {_key(r): r for r in results_b}
    if set(a) != set(b):
        raise ValueError("result sets cover different configuration points")
    rows = []
    for key in sorted(a):
        x, y = a[key].ber, b[key].ber
        if x == y:
            rows.append(ComparisonRow(key, x, y, "tie", None))
        elif x < y:
            rows.append(ComparisonRow(key, x, y, "a", y / x if x else math.inf))
        else:
            rows.append(ComparisonRow(key, x, y, "b", x / y if y else math.inf))
    summaries = []
    for order, group in itertools.groupby(rows, key=lambda r: r.point[0]):
        group = list(group)

        def mean_fold(side):
            folds = [r.fold for r in group if r.winner == side and math.isfinite(r.fold)]
            return sum(folds) / len(folds) if folds else None

        summaries.append(ComparisonSummary(
            order,
            sum(r.winner == "a" for r in group), mean_fold("a"),
            sum(r.winner == "b" for r in group), mean_fold("b"),
            sum(r.winner == "tie" for r in group),
        ))
    return rows, summaries


def format_summary(summaries) -> str:
    def fold(f):
        return "—" if f is None else f"{f:.3f}x"

    lines = ["order  a_wins  a_fold   b_wins  b_fold   ties"]
    for s in summaries:
        lines.append(f"{s.order:>5}  {s.wins_a:>6}  {fold(s.fold_a):>7}  {s.wins_b:>6}  {fold(s.fold_b):>7}  {s.ties:>5}")
    return "\n".join(lines)


# ------------------------------------------------------------------ sweeps

SWEEP_AXES = {"M": "M", "t_s_ms": "t_s", "r0_um": "r_0", "sigma_n2": "sigma_n2"}


def load_sweep(path) -> dict:
    with Path(path).open("rb") as fh:
        return tomllib.load(fh)


def sweep_configs(spec: dict) -> list[ExperimentConfig]:
    """Expand a sweep description into the cartesian product of its axes."""
    def listify(v):
        return list(v) if isinstance(v, (list, tuple)) else [v]

    base = {}
    for key in ("k", "backend", "decoder", "pilot_runs", "pilot_bits", "test_runs", "test_bits",
                "seed", "D", "r_R", "L"):
        if key in spec:
            base[key] = spec[key]
    axes = {
        "scheme": listify(spec.get("schemes", spec.get("scheme", "rlim1"))),
        "detection": listify(spec.get("detection", "static")),
        "M": listify(spec.get("M", 1000)),
        "t_s": [t / 1000 for t in listify(spec.get("t_s_ms", 200))],
        "r_0": listify(spec.get("r0_um", 10.0)),
        "sigma_n2": listify(spec.get("sigma_n2", 0.0)),
    }
    names = list(axes)
    out = []
    for combo in itertools.product(*(axes[n] for n in names)):
        cfg = ExperimentConfig(**base, **dict(zip(names, combo)))
        out.append(cfg)
    return out


def _config_key(cfg: ExperimentConfig) -> tuple:
    scheme = cfg.get_scheme()
    return (scheme.name, cfg.k, cfg.backend, cfg.resolved_detection(), cfg.decoder,
            round(cfg.t_s * 1000, 6), cfg.M, cfg.r_0, cfg.sigma_n2, cfg.seed)


def _row_key(row: dict) -> tuple:
    return (row["scheme"], int(row["k"]), row["backend"], row["detection"], row["decoder"],
            round(float(row["t_s_ms"]), 6), int(row["M"]), float(row["r0_um"]), float(row["sigma_n2"]),
            int(row["seed"]))


def run_sweep(configs, out_path, fixed_params=None, progress=None) -> list[BerRecord]:
    """Run configs not already present in ``out_path`` and append their rows."""
    done = set()
    if Path(out_path).exists():
        done = {_row_key(r) for r in read_records(out_path)}
    records = []
    for cfg in configs:
        if fixed_params is not None:
            cfg = replace(cfg, fixed_params=fixed_params)
        if _config_key(cfg) in done:
            continue
        rec = run_experiment(cfg)
        append_records(out_path, [rec])
        records.append(rec)
        if progress:
            progress(rec)
    return records


def figure_table(records, x: str = "M") -> tuple[list[str], list[list]]:
    """Pivot BER records into one row per x value and one column per curve."""
    curves = sorted({f"{r.scheme}/{r.detection}/{r.decoder}" for r in records})
    xs = sorted({getattr(r, x) for r in records})
    table = {(getattr(r, x), f"{r.scheme}/{r.detection}/{r.decoder}"): r.ber for r in records}
    rows = [[xv] + [table.get((xv, c), "") for c in curves] for xv in xs]
    return [x] + curves, rows
