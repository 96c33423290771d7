import itertools
import math

import numpy as np
import pytest

from rlim import harness
from rlim.harness import (
    BerRecord,
    ConfigError,
    ExperimentConfig,
    append_records,
    compare_elementwise,
    config_from_record,
    format_summary,
    read_records,
    record_from_row,
    run_experiment,
    run_sweep,
    sweep_configs,
)
from rlim.schemes import (
    NotImplementedScheme,
    get_scheme,
    hamming74_decode,
    hamming74_encode,
    hamming_codewords,
)

SMALL = dict(pilot_runs=2, pilot_bits=2 * 768, test_runs=2, test_bits=2 * 1536)


def test_hamming_zero_and_distance():
    assert hamming74_encode([0, 0, 0, 0]).tolist() == [0] * 7
    cws = hamming_codewords()
    assert len({tuple(c) for c in cws}) == 16
    for a, b in itertools.combinations(cws, 2):
        assert (a != b).sum() >= 3


def test_hamming_single_flip_corrected():
    data = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.uint8)
    cws = hamming74_encode(data)
    for pos in range(7):
        flipped = cws.copy()
        flipped[:, pos] ^= 1
        assert (hamming74_decode(flipped) == data).all()
        for d, w in zip(data, flipped):
            assert (hamming74_decode(w) == d).all()
    assert (hamming74_decode(cws) == data).all()


def test_scheme_registry():
    unc = get_scheme("uncoded", 16)
    assert unc.n == 16 and unc.ones_total == 16 * 2**15
    bits = np.random.default_rng(0).integers(0, 2, 64).astype(np.uint8)
    assert (unc.encode(bits) == bits).all()
    assert (unc.receive(bits * 10.0, "static", 5) == bits).all()
    ham = get_scheme("hamming74", 16)
    assert ham.n == 28 and ham.ones_total == 917504
    assert get_scheme("RLIM_3", 16).n == 37
    assert get_scheme("rll2", 16).codebook.kind == "rll"
    assert get_scheme("rlim4", 8).n == 23
    with pytest.raises(NotImplementedScheme, match="not implemented"):
        get_scheme("isi-free", 16)
    with pytest.raises(ValueError):
        get_scheme("turbo", 16)
    with pytest.raises(ValueError):
        get_scheme("hamming74", 6)


def test_spacing_grids():
    assert get_scheme("uncoded", 16).spacing_grid() == (4, 8, 16)
    assert get_scheme("rll2", 16).spacing_grid() == (31,)
    assert get_scheme("rlim2", 16).dynamic_mode() == "adaptive"
    assert get_scheme("uncoded", 16).dynamic_mode() == "baseline"


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(backend="quantum").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(detection="psychic").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(decoder="magic").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(test_bits=1000, test_runs=5).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(backend="particle", t_s=0.0005, scheme="rlim4").validate()
    ExperimentConfig().validate()
    assert ExperimentConfig().pilot_bits == 53760
    assert ExperimentConfig().test_bits % 16 == 0 and ExperimentConfig().test_bits >= 10**5


def test_particle_channel_rounds_interval():
    cfg = ExperimentConfig(scheme="rlim4", backend="particle")
    assert cfg.channel().t_s == pytest.approx(0.076)
    assert ExperimentConfig(scheme="rlim4").channel().t_s == pytest.approx(16 / 42 * 0.2)


@pytest.mark.parametrize("scheme", ["rlim1", "rlim2", "rlim3", "rlim4"])
def test_sanity_channel_is_error_free(scheme):
    cfg = ExperimentConfig(scheme=scheme, M=50, taps=(0.4,), fixed_params=(1.0,),
                           test_runs=1, test_bits=10_080, seed=3)
    rec = run_experiment(cfg)
    assert rec.bits == 10_080
    assert rec.errors == 0 and rec.ber == 0.0
    assert rec.M_norm >= 50


def test_isi_free_run_is_reported():
    with pytest.raises(NotImplementedScheme):
        run_experiment(ExperimentConfig(scheme="isifree"))


def test_record_accounting_and_determinism(tmp_path):
    cfg = ExperimentConfig(scheme="rlim2", M=300, seed=11, **SMALL)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a.bits == cfg.test_bits
    assert a.ber == a.errors / a.bits
    assert (a.errors, a.tuned_params, a.pilot_ber) == (b.errors, b.tuned_params, b.pilot_ber)
    lo, hi = a.confidence_interval()
    assert lo <= a.ber <= hi
    path = tmp_path / "r.csv"
    append_records(path, [a])
    row = read_records(path)[0]
    assert list(row)[:17] == ["schema_version", "scheme", "order", "n", "k", "backend", "detection",
                              "t_s_ms", "M", "r0_um", "sigma_n2", "tuned_params", "bits", "errors",
                              "ber", "seed", "wall_ms"]
    again = run_experiment(config_from_record(row))
    assert str(again.errors) == row["errors"] and again.tuned_params == row["tuned_params"]


def test_info_bits_shared_across_schemes():
    assert (harness.info_bits(5, 2, 0, 64) == harness.info_bits(5, 2, 0, 64)).all()
    assert (harness.info_bits(5, 2, 0, 64) != harness.info_bits(5, 2, 1, 64)).any()


def test_block_locality():
    scheme = get_scheme("rlim2", 16)
    rng = np.random.default_rng(1)
    info = rng.integers(0, 2, 16 * 6).astype(np.uint8)
    counts = scheme.encode(info) * 80.0 + rng.normal(0, 3, 31 * 6)
    base = scheme.receive(counts, "static", 40)
    hit = counts.copy()
    hit[31 * 2 : 31 * 3] = rng.uniform(0, 100, 31)
    changed = np.flatnonzero(scheme.receive(hit, "static", 40) != base)
    assert changed.size <= 16
    assert ((changed >= 32) & (changed < 48)).all()


@pytest.mark.parametrize("detection", ["adaptive", "dynamic", "estimated"])
def test_other_detection_modes_run(detection):
    rec = run_experiment(ExperimentConfig(scheme="rlim3", M=400, detection=detection, seed=2, **SMALL))
    assert rec.detection in ("adaptive", "estimated")
    assert 0 <= rec.ber < 0.2


def test_baseline_mode_on_uncoded():
    rec = run_experiment(ExperimentConfig(scheme="uncoded", M=400, detection="dynamic", seed=2, **SMALL))
    assert rec.detection == "baseline"
    a, floor, spacing = harness.parse_params("baseline", rec.tuned_params)
    assert 0 <= a <= 1 and spacing in (4, 8, 16)


def test_estimated_needs_rlim():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig(scheme="rll2", detection="estimated", **SMALL))


def test_viterbi_decoders_and_gaussian_backend():
    for decoder in ("viterbi-last", "viterbi-random"):
        rec = run_experiment(ExperimentConfig(scheme="rll2", M=300, decoder=decoder, backend="gaussian",
                                              seed=4, **SMALL))
        assert rec.decoder == decoder
    last = run_experiment(ExperimentConfig(scheme="rll2", M=300, decoder="viterbi-last", seed=4, **SMALL))
    greedy = run_experiment(ExperimentConfig(scheme="rll2", M=300, seed=4, **SMALL))
    assert (last.errors, last.tuned_params) == (greedy.errors, greedy.tuned_params)


def test_particle_backend_smoke():
    cfg = ExperimentConfig(scheme="rlim1", M=40, t_s=0.02, backend="particle-drift", fixed_params=(3.0,),
                           test_runs=1, test_bits=96, seed=0)
    rec = run_experiment(cfg)
    assert rec.bits == 96 and rec.t_s_norm_ms == pytest.approx(13.0)


def _rec(order, M, ber, scheme="rlim"):
    return BerRecord(scheme=f"{scheme}{order}", order=order, n=24, k=16, backend="binomial",
                     detection="static", t_s_ms=200, M=M, r0_um=10, sigma_n2=0, tuned_params="tau=1",
                     bits=1000, errors=int(ber * 1000), ber=ber, seed=0, wall_ms=0)


def test_compare_identical_is_all_ties():
    recs = [_rec(1, M, 0.01) for M in (100, 200)]
    rows, summary = compare_elementwise(recs, recs)
    assert all(r.winner == "tie" and r.fold is None for r in rows)
    assert summary[0].ties == 2 and summary[0].fold_a is None
    assert "—" in format_summary(summary)


def test_compare_fold_arithmetic():
    rows, summary = compare_elementwise([_rec(1, 100, 1e-3)], [_rec(1, 100, 2e-3, "rll")])
    assert rows[0].winner == "a" and rows[0].fold == pytest.approx(2.0)
    a = [_rec(1, 100, 1e-3), _rec(1, 200, 0.0), _rec(2, 100, 4e-3)]
    b = [_rec(1, 100, 3e-3, "rll"), _rec(1, 200, 1e-3, "rll"), _rec(2, 100, 1e-3, "rll")]
    rows, summary = compare_elementwise(a, b)
    s1, s2 = summary
    assert (s1.order, s1.wins_a, s1.wins_b) == (1, 2, 0)
    assert s1.fold_a == pytest.approx(3.0)  # the infinite fold is left out of the mean
    assert math.isinf(rows[1].fold)
    assert (s2.wins_b, s2.fold_b) == (1, pytest.approx(4.0))


def test_compare_rejects_mismatched_points():
    with pytest.raises(ValueError):
        compare_elementwise([_rec(1, 100, 0.1)], [_rec(1, 200, 0.1)])


def test_sweep_is_resumable(tmp_path):
    spec = {"schemes": ["rlim1", "uncoded"], "M": [200, 400], "seed": 5, "t_s_ms": 200, **SMALL}
    configs = sweep_configs(spec)
    assert len(configs) == 4
    out = tmp_path / "results.csv"
    first = run_sweep(configs[:3], out)
    assert len(first) == 3
    second = run_sweep(configs, out)
    assert len(second) == 1
    rows = read_records(out)
    assert len(rows) == 4
    recs = [record_from_row(r) for r in rows]
    assert recs[0].M == 200 and isinstance(recs[0].ber, float)
    header, table = harness.figure_table(recs, "M")
    assert header[0] == "M" and len(table) == 2 and len(header) == 3


def test_fixed_params_replay(tmp_path):
    cfgs = sweep_configs({"schemes": "rlim2", "M": 300, "seed": 8, **SMALL})
    out = tmp_path / "fixed.csv"
    rec = run_sweep(cfgs, out, fixed_params=(37.5,))[0]
    assert rec.tuned_params == "tau=37.5;source=fixed"
    row = read_records(out)[0]
    cfg = config_from_record(row)
    assert cfg.fixed_params == (37.5,)
    assert run_experiment(cfg).errors == rec.errors
