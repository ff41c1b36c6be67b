import json
import math

import numpy as np
import pytest

from spdepeaks.bounds import Linear, SaturatingLinear
from spdepeaks.grid import Grid, GridError
from spdepeaks.kernels import Heat, Wave
from spdepeaks.levy import Brownian, TruncatedStable
from spdepeaks.oracle import semigroup, wave_deterministic
from spdepeaks.profiles import Bump, Flat, InitialData
from spdepeaks.rng import noise_increment, normal_row, normal_rows
from spdepeaks.simulate import (HEAT_FD, HEAT_SPECTRAL, WAVE_CONE, PicardDivergenceError, SimConfig,
                                SimulationError, dump_path, picard_solve, simulate_ensemble,
                                simulate_heat_path, simulate_path, simulate_wave_path)

HEAT = Heat(Brownian(1.0))


def heat_cfg(lam=1.0, u0=None, T=1.0, dt=1 / 32, dx=1 / 8, L=6.0, save_every=4, n=2, seed=7, **kw):
    sigma = kw.pop("sigma", Linear(lam))
    return SimConfig(kw.pop("equation", HEAT), sigma, InitialData(u0 or Bump()),
                     Grid(dt, dx, T, L, save_every), n, seed, **kw)


def wave_cfg(lam=1.0, u0=None, kappa=1.0, T=2.0, dt=1 / 16, L=None, save_every=4, n=2, seed=7, **kw):
    sigma = kw.pop("sigma", Linear(lam))
    return SimConfig(Wave(kappa), sigma, InitialData(u0 or Bump()),
                     Grid(dt, kappa * dt, T, L, save_every), n, seed, **kw)


class TestNoise:
    def test_deterministic(self):
        a = noise_increment(42, 3, 17, 5, dt=0.1, dx=0.2)
        assert a == noise_increment(42, 3, 17, 5, dt=0.1, dx=0.2)
        assert a == pytest.approx(math.sqrt(0.1 * 0.2) * normal_row(42, 17, 0, 3, 6)[5], rel=1e-15)

    def test_distinct_keys_differ(self):
        base = noise_increment(1, 0, 0, 0)
        others = [noise_increment(2, 0, 0, 0), noise_increment(1, 1, 0, 0),
                  noise_increment(1, 0, 1, 0), noise_increment(1, 0, 0, 1),
                  noise_increment(1, 0, 0, 0, stream=1)]
        assert len(set(others + [base])) == 6

    def test_moments_over_a_million_keys(self):
        dt, dx = 0.01, 0.05
        z = normal_rows(2024, 5, 0, range(1000), 1000) * math.sqrt(dt * dx)
        assert abs(z.mean()) <= 3e-3 * math.sqrt(dt * dx)
        assert z.var() == pytest.approx(dt * dx, rel=0.01)

    def test_neighbouring_keys_uncorrelated(self):
        a = normal_rows(9, 0, 0, range(200), 500)
        b = normal_rows(9, 1, 0, range(200), 500)
        c = normal_rows(9, 0, 1, range(200), 500)
        for other in (b, c, a[:, ::-1], np.roll(a, 1, axis=0)):
            r = np.corrcoef(a.ravel(), other.ravel())[0, 1]
            assert abs(r) < 4 / math.sqrt(a.size)

    def test_rejects_negative_key(self):
        with pytest.raises(ValueError):
            normal_row(-1, 0, 0, 0, 4)
        with pytest.raises(ValueError):
            noise_increment(0, 0, 0, -1)


class TestConfig:
    def test_rejects_zero_paths(self):
        with pytest.raises(ValueError):
            heat_cfg(n=0)

    def test_fd_stability(self):
        with pytest.raises(GridError):
            heat_cfg(dt=1 / 16, dx=1 / 8, scheme=HEAT_FD)
        heat_cfg(dt=1 / 128, dx=1 / 8, scheme=HEAT_FD)

    def test_fd_needs_brownian(self):
        with pytest.raises(ValueError):
            heat_cfg(equation=Heat(TruncatedStable(1.5)), dt=1 / 512, scheme=HEAT_FD)

    def test_scheme_must_match_equation(self):
        with pytest.raises(ValueError):
            wave_cfg(scheme=HEAT_SPECTRAL)
        with pytest.raises(ValueError):
            heat_cfg(scheme=WAVE_CONE)

    def test_wave_grid_follows_cone(self):
        with pytest.raises(GridError):
            SimConfig(Wave(1.0), Linear(1.0), InitialData(), Grid(1 / 16, 1 / 8, 1.0), 2)

    def test_hash_ignores_path_count(self):
        assert heat_cfg(n=2).config_hash == heat_cfg(n=50).config_hash
        assert heat_cfg(seed=1).config_hash != heat_cfg(seed=2).config_hash

    def test_type_checked_entry_points(self):
        with pytest.raises(ValueError):
            simulate_heat_path(wave_cfg(), 0)
        with pytest.raises(ValueError):
            simulate_wave_path(heat_cfg(), 0)


class TestHeat:
    def test_zero_horizon_returns_initial_row(self):
        cfg = heat_cfg(T=0.0)
        pf = simulate_heat_path(cfg, 0)
        assert pf.values.shape == (1, cfg.xs().size)
        np.testing.assert_array_equal(pf.values[0], Bump()(cfg.xs()))

    @pytest.mark.parametrize("scheme,dt,dx,tol", [(HEAT_SPECTRAL, 1 / 32, 1 / 32, 1e-3),
                                                  (HEAT_FD, 1 / 2048, 1 / 32, 5e-3)])
    def test_noiseless_is_semigroup(self, scheme, dt, dx, tol):
        cfg = heat_cfg(lam=0.0, dt=dt, dx=dx, save_every=1 if scheme == HEAT_SPECTRAL else 64, scheme=scheme)
        pf = simulate_heat_path(cfg, 3)
        ref = np.array([semigroup(HEAT.model, Bump(), t, pf.xs, cfg.grid) for t in pf.times])
        assert np.max(np.abs(pf.values - ref)) <= tol

    def test_noiseless_ignores_seed(self):
        a = simulate_heat_path(heat_cfg(lam=0.0, seed=1), 0).values
        b = simulate_heat_path(heat_cfg(lam=0.0, seed=99), 5).values
        np.testing.assert_array_equal(a, b)

    def test_stable_generator_runs(self):
        cfg = heat_cfg(equation=Heat(TruncatedStable(1.5)), lam=0.0, L=10.0, dx=1 / 16)
        pf = simulate_heat_path(cfg, 0)
        ref = semigroup(cfg.equation.model, Bump(), 1.0, pf.xs, cfg.grid)
        assert np.max(np.abs(pf.values[-1] - ref)) <= 1e-3

    def test_flat_mean_preserved(self):
        cfg = heat_cfg(u0=Flat(1.0), T=1.0, L=4.0, dx=1 / 8, n=400)
        finals = np.array([simulate_heat_path(cfg, p).values[-1] for p in range(cfg.n_paths)])
        avg = finals.mean(axis=1) - 1.0
        se = avg.std(ddof=1) / math.sqrt(avg.size)
        assert abs(avg.mean()) <= 3 * se
        # weak positivity of the ensemble mean
        mean = finals.mean(axis=0)
        se_x = finals.std(axis=0, ddof=1) / math.sqrt(finals.shape[0])
        assert np.all(mean >= -3 * se_x)

    def test_causal(self):
        short = simulate_heat_path(heat_cfg(T=0.5, save_every=1), 2).values
        long = simulate_heat_path(heat_cfg(T=1.0, save_every=1), 2).values
        np.testing.assert_array_equal(short, long[: short.shape[0]])

    def test_overflow_reported(self):
        with pytest.raises(SimulationError, match="step"):
            with np.errstate(all="ignore"):
                simulate_heat_path(heat_cfg(lam=1e80, dt=1 / 8, dx=1 / 4, save_every=1), 0)

    def test_refined_noise_couples_paths(self):
        # the coarse run sums the fine cells, so both runs see one noise field
        fine = heat_cfg(dt=1 / 64, dx=1 / 16, save_every=8, T=0.5)
        coarse = heat_cfg(dt=1 / 32, dx=1 / 8, save_every=4, T=0.5, noise_refine=1)
        other = heat_cfg(dt=1 / 32, dx=1 / 8, save_every=4, T=0.5, noise_refine=1, seed=8)
        f = simulate_heat_path(fine, 0)
        c = simulate_heat_path(coarse, 0)
        o = simulate_heat_path(other, 0)
        fi = np.array([np.interp(c.xs, f.xs, row) for row in f.values])
        coupled = np.max(np.abs(fi - c.values))
        uncoupled = np.max(np.abs(o.values - c.values))
        assert coupled < 0.3 * uncoupled


class TestWave:
    def test_travelling_bump(self):
        cfg = wave_cfg(lam=0.0, T=4.0, save_every=8)
        pf = simulate_wave_path(cfg, 0)
        i = int(np.argmin(np.abs(pf.times - 3.0)))
        j = int(np.argmin(np.abs(pf.xs - 3.0)))
        assert pf.times[i] == 3.0 and pf.xs[j] == 3.0
        assert pf.values[i, j] == 0.5

    def test_noiseless_is_dalembert(self):
        cfg = wave_cfg(lam=0.0, T=3.0)
        pf = simulate_wave_path(cfg, 1)
        for t, row in zip(pf.times, pf.values):
            np.testing.assert_array_equal(row, wave_deterministic(1.0, cfg.initial, t, pf.xs))

    @pytest.mark.parametrize("sigma", [Linear(1.0), SaturatingLinear(2.0, 1.0)])
    def test_light_cone_exact_zero(self, sigma):
        cfg = wave_cfg(sigma=sigma, T=3.0, save_every=1, n=8)
        for p in range(cfg.n_paths):
            pf = simulate_wave_path(cfg, p)
            for t, row in zip(pf.times, pf.values):
                outside = np.abs(pf.xs) > 1.0 + t + 1e-12
                assert np.all(row[outside] == 0.0)
            assert np.any(pf.values[-1] != wave_deterministic(1.0, cfg.initial, 3.0, pf.xs))

    def test_flat_second_moment_is_cosh(self):
        cfg = wave_cfg(u0=Flat(1.0), kappa=2.0, T=3.0, dt=1 / 32, save_every=32, n=2000, seed=11)
        # the sampled domain must hold the whole light cone
        assert cfg.grid.L > 2.0 * 3.0
        (f,) = simulate_ensemble(cfg)
        for t in (1.0, 2.0, 3.0):
            v, se = f.at(t, 0.0)
            assert abs(v - math.cosh(t)) <= 3 * se + 0.01 * math.cosh(t)

    def test_explicit_domain_must_hold_cone(self):
        with pytest.raises(GridError, match="reuse noise"):
            wave_cfg(u0=Flat(1.0), T=3.0, L=2.5)

    def test_causal(self):
        a = simulate_wave_path(wave_cfg(T=1.0, L=4.0, save_every=1), 0).values
        b = simulate_wave_path(wave_cfg(T=2.0, L=4.0, save_every=1), 0).values
        np.testing.assert_array_equal(a, b[: a.shape[0]])


class TestEnsemble:
    def test_bit_identical_paths(self):
        cfg = heat_cfg()
        np.testing.assert_array_equal(simulate_path(cfg, 4).values, simulate_path(cfg, 4).values)

    def test_single_path_matches_batch(self):
        cfg = heat_cfg(n=6, nus=(1.0,))
        (f,) = simulate_ensemble(cfg)
        paths = np.array([np.abs(simulate_path(cfg, p).values) for p in range(6)])
        np.testing.assert_allclose(f.values, paths.mean(axis=0), rtol=1e-13, atol=0)

    @pytest.mark.parametrize("make", [heat_cfg, wave_cfg])
    def test_worker_count_invariant(self, make):
        cfg = make(n=40, nus=(2.0, 4.0))
        one = simulate_ensemble(cfg, workers=1)
        two = simulate_ensemble(cfg, workers=2)
        for a, b in zip(one, two):
            np.testing.assert_array_equal(a.values, b.values)
            np.testing.assert_array_equal(a.ses, b.ses)

    def test_noiseless_ses_zero(self):
        for f in simulate_ensemble(heat_cfg(lam=0.0, n=5, nus=(1.0, 2.0))):
            assert np.all(f.ses == 0)

    def test_needs_two_paths(self):
        with pytest.raises(ValueError):
            simulate_ensemble(heat_cfg(n=1))


class TestPicard:
    def test_zero_iterations(self):
        cfg = heat_cfg(T=0.5)
        r = picard_solve(cfg, 0, 0)
        assert r.diff_norms == []
        assert np.all(r.field.values == Bump()(cfg.xs()))

    def test_noiseless_single_iteration(self):
        cfg = heat_cfg(lam=0.0, T=0.5)
        r = picard_solve(cfg, 0, 1)
        np.testing.assert_allclose(r.field.values, simulate_heat_path(cfg, 0).values, atol=1e-15)

    def test_converges_to_direct_path(self):
        cfg = heat_cfg(lam=0.5, T=1.0)
        r = picard_solve(cfg, 3, 8)
        d = simulate_heat_path(cfg, 3).values
        assert np.max(np.abs(r.field.values - d)) <= 1e-2 * np.max(np.abs(d))
        assert r.diff_norms[-1] < r.diff_norms[0]

    def test_wave_converges(self):
        cfg = wave_cfg(lam=1.0, T=1.0)
        r = picard_solve(cfg, 0, 10)
        d = simulate_wave_path(cfg, 0).values
        assert np.max(np.abs(r.field.values - d)) <= 1e-6

    def test_divergence_reported_without_weight(self):
        with pytest.raises(PicardDivergenceError):
            picard_solve(heat_cfg(lam=3.0, T=1.0, dt=1 / 16), 0, 10, beta=0.0)


def test_dump_path(tmp_path):
    cfg = heat_cfg(T=0.25)
    pf = simulate_heat_path(cfg, 12)
    raw, side = dump_path(pf, tmp_path, cfg.grid)
    meta = json.loads(side.read_text())
    back = np.fromfile(raw, dtype=meta["dtype"]).reshape(meta["shape"])
    np.testing.assert_array_equal(back, pf.values)
    assert meta["config_hash"] == cfg.config_hash and meta["path_index"] == 12
