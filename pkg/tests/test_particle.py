import math

import numpy as np
import pytest

from rlim.channel import ChannelParams, hitting_probability
from rlim.particle import (
    DriftParams,
    ParticleWorld,
    drift_step,
    position_step,
    run_transmission,
    steps_per_interval,
)

BASE = ChannelParams()


def test_drift_fixed_point():
    dp = DriftParams(sigma_v=0.0)
    v = np.array(dp.v_mean)
    assert (drift_step(v, dp, np.random.default_rng(0)) == v).all()


def test_drift_relaxation():
    dp = DriftParams(sigma_v=0.0, v_mean=(1.0, 0.0, 0.0))
    v0 = np.array([5.0, -2.0, 3.0])
    v = v0
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = drift_step(v, dp, rng)
    factor = (1 - dp.dt / dp.tau_drift) ** 100
    expect = np.array(dp.v_mean) + (v0 - np.array(dp.v_mean)) * factor
    assert np.allclose(v, expect, rtol=0, atol=1e-12)


def test_drift_params_validation():
    with pytest.raises(ValueError):
        DriftParams(dt=0)
    with pytest.raises(ValueError):
        DriftParams(sigma_v=-1)


def test_ou_stationary_short_run():
    # many short chains from the stationary law keep their law after 200 steps
    dp = DriftParams(dt=0.01, tau_drift=0.5, sigma_v=3.0, v_mean=(1.0, -2.0, 0.5))
    rng = np.random.default_rng(3)
    chains = 4000
    v = np.array(dp.v_mean) + dp.sigma_v * rng.standard_normal((chains, 3))
    mean = np.array(dp.v_mean)
    a = dp.dt / dp.tau_drift
    kick = math.sqrt(2 * dp.sigma_v**2 * dp.dt / dp.tau_drift)
    for _ in range(200):
        v = v + (mean - v) * a + kick * rng.standard_normal(v.shape)
    # the discrete chain's exact stationary variance
    var = kick**2 / (1 - (1 - a) ** 2)
    assert var == pytest.approx(dp.sigma_v**2, rel=0.02)
    assert (np.abs(v.mean(axis=0) - mean) < 3 * math.sqrt(var / chains)).all()
    assert (np.abs(v.var(axis=0) - var) < 3 * var * math.sqrt(2 / chains)).all()


def test_drift_step_matches_vector_recursion():
    dp = DriftParams(dt=0.01, tau_drift=0.5, sigma_v=3.0)
    a, b = np.random.default_rng(8), np.random.default_rng(8)
    v = np.zeros(3)
    v = drift_step(v, dp, a)
    kick = math.sqrt(2 * dp.sigma_v**2 * dp.dt / dp.tau_drift)
    ref = np.array(dp.v_mean) * dp.dt / dp.tau_drift + kick * b.standard_normal(3)
    assert np.allclose(v, ref)


def test_position_step():
    r = np.array([[1.0, 2.0, 3.0]])
    assert (position_step(r, np.zeros(3), 0.0, 1e-3, np.random.default_rng(0)) == r).all()
    rng = np.random.default_rng(1)
    D, dt = 79.4, 1e-3
    v = np.array([2.0, 0.0, -1.0])
    steps = position_step(np.zeros((100_000, 3)), v, D, dt, rng)
    var = 2 * D * dt
    assert (np.abs(steps.var(axis=0) - var) < 3 * var * math.sqrt(2 / 100_000)).all()
    assert (np.abs(steps.mean(axis=0) - v * dt) < 3 * math.sqrt(var / 100_000)).all()


def test_steps_per_interval():
    assert steps_per_interval(0.2, 1e-3) == 200
    assert steps_per_interval(16 / 42 * 0.2, 1e-3) == 76
    with pytest.raises(ValueError):
        steps_per_interval(5e-4, 1e-3)


def test_zero_molecules():
    params = BASE.with_(M=0, t_s=0.01)
    out = run_transmission([1, 0, 1, 1], params, None, "absorbing", np.random.default_rng(0))
    assert (out == 0).all()


def test_conservation_and_culling():
    params = BASE.with_(M=300, t_s=0.02)
    world = ParticleWorld(params, DriftParams(), max_age=0.05, rng=np.random.default_rng(4))
    for step in range(200):
        if step % 20 == 0:
            world.emit(params.M)
        world.step()
        assert world.emitted == world.absorbed + world.culled + world.live
        assert ((world.time - world.births) <= world.max_age + 1e-9).all()
        if world.live:
            dist = np.linalg.norm(world.positions - world.center, axis=1)
            assert (dist > params.r_R).all()
    assert world.culled > 0 and world.absorbed > 0


def test_absorption_tracks_hitting_probability():
    world = ParticleWorld(BASE, DriftParams.still(), rng=np.random.default_rng(10))
    world.emit(4000)
    for _ in range(300):
        world.step()
    F = hitting_probability(0.3, BASE)
    se = math.sqrt(F * (1 - F) / 4000)
    assert abs(world.absorbed / 4000 - F) < 3 * se


def test_transparent_counts_repeat_molecules():
    params = BASE.with_(M=2000, t_s=0.05, r_0=7.0)
    out = run_transmission([1, 0, 0, 0, 0, 0], params, None, "transparent", np.random.default_rng(2))
    assert (out >= 0).all()
    # nothing is removed, so the counts can add up to more molecules than were sent
    world = ParticleWorld(params, DriftParams.still(), mode="transparent", rng=np.random.default_rng(2))
    world.emit(params.M)
    seen = 0
    for _ in range(40):
        for _ in range(25):
            world.step()
        seen += world.inside()
    assert world.live == params.M
    assert seen > params.M


def test_seeded_reproducibility():
    params = BASE.with_(M=200, t_s=0.02)
    tx = [1, 0, 1, 1, 0]
    a = run_transmission(tx, params, DriftParams(), "absorbing", np.random.default_rng(6))
    b = run_transmission(tx, params, DriftParams(), "absorbing", np.random.default_rng(6))
    assert (a == b).all()


def test_noise_added_only_when_requested():
    params = BASE.with_(M=0, t_s=0.01, sigma_n2=4.0)
    quiet = run_transmission([1, 0], params, None, "absorbing", np.random.default_rng(0), noise=False)
    loud = run_transmission([1, 0], params, None, "absorbing", np.random.default_rng(0))
    assert (quiet == 0).all() and (loud != 0).all()


def test_bad_mode():
    with pytest.raises(ValueError):
        ParticleWorld(BASE, mode="reflecting")
