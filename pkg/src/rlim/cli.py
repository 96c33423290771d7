"""Command-line entry point: ``rlim <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analytics, harness
from .bits import as_bits, bits_to_str
from .channel import ChannelParams, simulate_binomial, simulate_gaussian
from .codebook import Codebook, build_block_codebook, generate_rlim, generate_rll
from .codec import decode_stream, encode_stream
from .corrector import correct_greedy, viterbi_correct
from .particle import DriftParams, run_transmission


def read_kv(path) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_kv(path, items: dict) -> None:
    text = "".join(f"{k}={v}\n" for k, v in items.items())
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


_PARAM_TYPES = {"D": float, "r_R": float, "r_0": float, "t_s": float, "M": int, "sigma_n2": float, "L": int}


def read_params(path) -> ChannelParams:
    kv = read_kv(path)
    return ChannelParams(**{k: _PARAM_TYPES[k](v) for k, v in kv.items() if k in _PARAM_TYPES})


def _read_text(path) -> str:
    return sys.stdin.read() if str(path) == "-" else Path(path).read_text()


def _write_text(path, text: str) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_codebook(args) -> None:
    if args.block is not None:
        cb = build_block_codebook(args.order, args.block, args.length, rll=args.rll)
    else:
        cb = (generate_rll if args.rll else generate_rlim)(args.order, args.length)
    cb.save(args.out)
    print(cb.header())


def cmd_encode(args) -> None:
    cb = Codebook.load(args.map)
    _write_text(args.out, bits_to_str(encode_stream(_read_text(args.inp), cb)) + "\n")


def cmd_decode(args) -> None:
    cb = Codebook.load(args.map)
    _write_text(args.out, bits_to_str(decode_stream(_read_text(args.inp), cb)) + "\n")


def cmd_correct(args) -> None:
    rng = np.random.default_rng(args.seed)
    lines = []
    for word in _read_text(args.inp).split():
        if args.viterbi:
            fixed = viterbi_correct(word, args.order, args.viterbi, rng=rng)
        else:
            fixed = correct_greedy(as_bits(word), args.order)
        lines.append(bits_to_str(fixed))
    _write_text(args.out, "\n".join(lines) + "\n")


def _experiment_from_args(args, **extra) -> harness.ExperimentConfig:
    kv = read_kv(args.params) if args.params else {}
    names = {f.name: f.type for f in fields(harness.ExperimentConfig)}
    casts = {"int": int, "float": float, "str": str}
    kwargs = {k: casts[names[k]](v) for k, v in kv.items() if names.get(k) in casts}
    kwargs.update(extra)
    return harness.ExperimentConfig(**kwargs)


def cmd_tune(args) -> None:
    mode = {"static": "static", "adaptive": "adaptive", "baseline": "baseline"}[args.mode]
    pilot_runs = args.pilot_runs
    cfg = _experiment_from_args(args, scheme=args.scheme, detection=mode, backend=args.backend,
                                pilot_bits=args.pilot_bits, pilot_runs=pilot_runs, seed=args.seed,
                                decoder=args.decoder)
    cfg.validate()
    scheme = cfg.get_scheme()
    params = cfg.channel()
    counts, truth = harness._phase_data(cfg, scheme, params, harness._PILOT)
    best, ber = harness.tune(cfg, scheme, params, counts, truth, mode)
    out = {"scheme": scheme.name, "mode": mode, "decoder": cfg.decoder}
    out.update(dict(item.split("=", 1) for item in harness._format_params(mode, best).split(";")))
    out.update({"pilot_ber": f"{ber:.6g}", "pilot_bits": cfg.pilot_bits, "seed": cfg.seed})
    write_kv(args.out, out)


def cmd_simulate(args) -> None:
    params = read_params(args.params)
    tx = as_bits(_read_text(args.bits))
    rng = np.random.Generator(np.random.Philox(args.seed))
    if args.backend == "binomial":
        counts = simulate_binomial(tx, params, rng)
    elif args.backend == "gaussian":
        counts = simulate_gaussian(tx, params, rng)
    else:
        dp = DriftParams() if args.drift == "on" else DriftParams.still()
        counts = run_transmission(tx, params, dp, args.mode, rng)
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# backend={args.backend} seed={args.seed}\n")
        w = csv.writer(fh)
        w.writerow(["interval_index", "tx_bit", "count"])
        for j, (b, c) in enumerate(zip(tx, counts), start=1):
            w.writerow([j, int(b), repr(float(c))])


def read_counts(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return (np.array([int(r["tx_bit"]) for r in rows], dtype=np.uint8),
            np.array([float(r["count"]) for r in rows]))


def cmd_estimate(args) -> None:
    params = read_params(args.params)
    cb = Codebook.load(args.codebook)
    probs = analytics.symbol_class_probs(cb)
    m = analytics.moments(params, cb.order)
    try:
        tau = f"{analytics.estimate_threshold(m, probs):.6f}"
    except analytics.NoInteriorOptimum as exc:
        tau = f"none ({exc})"
    print(f"tau={tau}")
    print(f"A={m.A:.6f} B={m.B:.6f} C={m.C:.6f} D={m.D:.6f}")
    print(f"P_1={probs.p_one:.8f} ({probs.ones}/{probs.positions}) "
          f"P_0hat={probs.p_zero_hat:.8f} ({probs.zero_hats}/{probs.positions})")


def cmd_sweep(args) -> None:
    configs = harness.sweep_configs(harness.load_sweep(args.config))
    fixed = None
    if args.tuned:
        kv = read_kv(args.tuned)
        mode = kv["mode"]
        fixed = harness.parse_params(mode, ";".join(f"{k}={v}" for k, v in kv.items()))
        fixed = fixed if isinstance(fixed, tuple) else (fixed,)

    def show(rec):
        lo, hi = rec.confidence_interval()
        print(f"{rec.scheme:>9} {rec.detection:>9} M={rec.M:<5} t_s={rec.t_s_ms:g}ms r0={rec.r0_um:g} "
              f"s2={rec.sigma_n2:g}  BER={rec.ber:.3e} [{lo:.2e}, {hi:.2e}]  {rec.tuned_params}")

    harness.run_sweep(configs, args.out, fixed_params=fixed, progress=show)


def cmd_compare(args) -> None:
    a = [harness.record_from_row(r) for r in harness.read_records(args.a)]
    b = [harness.record_from_row(r) for r in harness.read_records(args.b)]
    _, summary = harness.compare_elementwise(a, b)
    print(harness.format_summary(summary))


def cmd_figure(args) -> None:
    recs = [harness.record_from_row(r) for r in harness.read_records(args.results)]
    header, rows = harness.figure_table(recs, args.x)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_replay(args) -> None:
    """Re-run rows of a results file and report whether they match."""
    rows = harness.read_records(args.results)
    picks = args.rows or range(len(rows))
    bad = 0
    for idx in picks:
        row = rows[idx]
        rec = harness.run_experiment(harness.config_from_record(row))
        same = (str(rec.errors) == row["errors"] and rec.tuned_params == row["tuned_params"])
        bad += not same
        print(f"row {idx}: {'match' if same else 'MISMATCH'} errors={rec.errors} {rec.tuned_params}")
    if bad:
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlim", description="RLIM constrained codes for molecular communication")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="build and save a codebook")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--block", type=int)
    p.add_argument("--rll", action="store_true", help="classical RLL (zero word kept, lexicographic subset)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codebook)

    for name, func in (("encode", cmd_encode), ("decode", cmd_decode)):
        p = sub.add_parser(name, help=f"{name} an ASCII 0/1 stream with a saved codebook")
        p.add_argument("--map", required=True)
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--out", default="-")
        p.set_defaults(func=func)

    p = sub.add_parser("correct", help="correct detected words, one per line")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--viterbi", choices=("first", "last", "random"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("tune", help="tune detection parameters on pilot transmissions")
    p.add_argument("--mode", choices=("static", "adaptive", "baseline"), required=True)
    p.add_argument("--scheme", default="rlim1")
    p.add_argument("--params", help="key=value file of experiment settings (anchor t_s, M, r_0, ...)")
    p.add_argument("--backend", default="binomial", choices=harness.BACKENDS)
    p.add_argument("--decoder", default="greedy")
    p.add_argument("--pilot-bits", type=int, default=harness.PILOT_RUNS * harness.PILOT_RUN_BITS)
    p.add_argument("--pilot-runs", type=int, default=harness.PILOT_RUNS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="simulate channel counts for a bit stream")
    p.add_argument("--backend", choices=("binomial", "gaussian", "particle"), default="binomial")
    p.add_argument("--mode", choices=("absorbing", "transparent"), default="absorbing")
    p.add_argument("--drift", choices=("on", "off"), default="off")
    p.add_argument("--params", required=True)
    p.add_argument("--bits", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-threshold", help="analytic static threshold for a codebook")
    p.add_argument("--params", required=True)
    p.add_argument("--codebook", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="run a BER sweep described by a TOML file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tuned", help="key=value file from 'rlim tune' to skip pilot tuning")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="elementwise BER comparison of two results files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("figure", help="pivot results into a per-figure CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--x", default="M", choices=("M", "t_s_ms", "r0_um", "sigma_n2", "k"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("replay", help="regenerate results rows from their recorded seeds")
    p.add_argument("--results", required=True)
    p.add_argument("--rows", type=int, nargs="*")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.func(args)


if __name__ == "__main__":
    main()
