import json
import math
import os

import numpy as np
import pytest

from conftest import smooth_random_field
from fdkin import equilibrium as eq
from fdkin import solver
from fdkin.collision import q_eps
from fdkin.grid import DistributionField, build_grid, moments
from fdkin.solver import (
    NearSaturated,
    ScaledEquilibrium,
    SimConfig,
    SolverState,
    StagnationError,
    TwoMaxwellians,
    adaptive_dt,
    nominal_moments,
    run,
    sample_initial,
    step,
)

GOLDEN = os.path.join(os.path.dirname(__file__), "goldens", "classical_run.json")


def beams(rho=0.3, u=1.0, t=0.5):
    return TwoMaxwellians(rho1=rho / 2, u1=(u, 0, 0), t1=t, rho2=rho / 2, u2=(-u, 0, 0), t2=t)


@pytest.fixture(scope="module")
def small_cfg(const_spec):
    datum = beams()
    rho, _, e = nominal_moments(datum, 0.0)
    return SimConfig(
        kernel=const_spec,
        eps=0.05 * eq.eps_sat(rho, e),
        initial=datum,
        t_end=0.8,
        n=8,
        l=4.0,
        theta=0.4,
        diag_stride=2,
    )


class TestInitialData:
    def test_two_maxwellians_moments(self, grid12, const_spec):
        datum = beams()
        f = sample_initial(datum, grid12, 0.0)
        rho, u, e = nominal_moments(datum, 0.0)
        m = moments(f)
        # midpoint sampling plus cube truncation keep a small moment defect
        assert m.rho == pytest.approx(rho, rel=1e-4)
        assert np.allclose(m.u, u, atol=1e-8)
        assert m.e == pytest.approx(e, rel=1e-3)

    def test_near_saturated_identities(self, grid8):
        eps = 4.0
        datum = NearSaturated(fill=0.5, radius=1.5)
        f = sample_initial(datum, grid8, eps)
        assert f.sup() == pytest.approx(0.5 / eps)
        rho, _, e = nominal_moments(datum, eps)
        # saturation threshold sits exactly at eps/fill
        assert eq.eps_sat(rho, e) == pytest.approx(eps / 0.5, rel=1e-12)

    def test_scaled_equilibrium_admissible(self, grid12):
        eps = 0.3 * eq.eps_sat(1.0, 1.0)
        datum = ScaledEquilibrium(rho=1.0, u=(0, 0, 0), e=1.0, amplitude=0.2)
        f = sample_initial(datum, grid12, eps)
        assert f.pauli_margin() > 0.0

    def test_file_round_trip(self, grid8, tmp_path):
        from fdkin.snapshots import load_field, save_field

        f = smooth_random_field(grid8, eps=1.0, seed=42, kappa=0.3)
        path = tmp_path / "snap.csv"
        save_field(str(path), f)
        g = load_field(str(path))
        assert g.eps == f.eps
        assert np.array_equal(g.values, f.values)


class TestAdaptiveDt:
    def test_linear_in_theta(self, grid8, const_spec):
        f = smooth_random_field(grid8, eps=1.0, seed=5, kappa=0.4)
        st = SolverState(0.0, f, 0, 0.0)
        ev = q_eps(f, const_spec)
        dt1 = adaptive_dt(st, const_spec, 0.2, evaluation=ev)
        dt2 = adaptive_dt(st, const_spec, 0.4, evaluation=ev)
        assert dt2 == pytest.approx(2.0 * dt1, rel=1e-13)

    def test_step_stays_in_box(self, grid8, const_spec):
        for seed in range(5):
            f = smooth_random_field(grid8, eps=1.5, seed=600 + seed, kappa=0.15)
            st = SolverState(0.0, f, 0, 0.0)
            ev = q_eps(f, const_spec)
            dt = adaptive_dt(st, const_spec, 0.8, evaluation=ev)
            new = step(st, const_spec, dt, evaluation=ev)
            assert new.f.values.min() >= 0.0
            assert 1.5 * new.f.values.max() <= 1.0 + 1e-12

    def test_stagnation_on_extreme_rates(self, grid8, const_spec):
        from fdkin.collision import CollisionOutput

        f = smooth_random_field(grid8, eps=0.0, seed=7)
        st = SolverState(0.0, f, 0, 0.0)
        huge = np.full(grid8.size, 1e15)
        ev = CollisionOutput(gain=huge, loss=huge, net=huge, nu=huge,
                             net_raw=huge, gain_rate=huge)
        with pytest.raises(StagnationError):
            adaptive_dt(st, const_spec, 0.5, evaluation=ev)


class TestStep:
    def test_zero_dt_identity(self, grid8, const_spec):
        f = smooth_random_field(grid8, eps=1.0, seed=77, kappa=0.3)
        st = SolverState(0.0, f, 0, 0.0)
        new = step(st, const_spec, 0.0)
        assert np.array_equal(new.f.values, f.values)
        assert new.step_count == 0

    def test_equilibrium_near_fixed_point(self, const_spec):
        g = build_grid(12, 4.5, 8, 8)
        eps = 0.1 * eq.eps_sat(1.0, 1.0)
        params = eq.fit_fermi_dirac(1.0, [0, 0, 0], 1.0, eps)
        m = eq.sample_fermi_dirac(params, g)
        st = SolverState(0.0, m, 0, 0.0)
        ev = q_eps(m, const_spec)
        dt = adaptive_dt(st, const_spec, 0.3, evaluation=ev)
        new = step(st, const_spec, dt, evaluation=ev)
        drift = g.dv**3 * np.abs(new.f.values - m.values).sum()
        # the equilibrium moves only by the scheme's consistency error; a
        # same-moment bimodal state moves an order of magnitude more
        u = math.sqrt(3.0 * (1.0 - 0.6))
        d2p = np.sum((g.nodes - (u, 0, 0)) ** 2, axis=1)
        d2m = np.sum((g.nodes + (u, 0, 0)) ** 2, axis=1)
        c = 0.5 * (2 * math.pi * 0.6) ** -1.5
        bi = DistributionField(g, c * np.exp(-d2p / 1.2) + c * np.exp(-d2m / 1.2), eps)
        st2 = SolverState(0.0, bi, 0, 0.0)
        ev2 = q_eps(bi, const_spec)
        new2 = step(st2, const_spec, dt, evaluation=ev2)
        drift2 = g.dv**3 * np.abs(new2.f.values - bi.values).sum()
        assert drift < 0.25 * drift2

    def test_per_step_conservation(self, grid8, const_spec):
        f = smooth_random_field(grid8, eps=1.2, seed=88, kappa=0.35)
        st = SolverState(0.0, f, 0, 0.0)
        ev = q_eps(f, const_spec)
        dt = adaptive_dt(st, const_spec, 0.5, evaluation=ev)
        new = step(st, const_spec, dt, evaluation=ev)
        v = grid8.nodes
        for phi in (np.ones(grid8.size), v[:, 0], np.sum(v**2, axis=1)):
            a = grid8.dv**3 * np.dot(f.values, phi)
            b = grid8.dv**3 * np.dot(new.f.values, phi)
            assert abs(b - a) <= 1e-12 * max(abs(a), 1.0)

    def test_clamp_budget_enforced(self, grid8, const_spec):
        f = smooth_random_field(grid8, eps=1.0, seed=99, kappa=0.3)
        st = SolverState(0.0, f, 0, 0.0)
        new = step(st, const_spec, 1e-3)
        assert new.clamp_l1 <= 1e-12 * moments(f).rho


class TestRun:
    def test_trajectory_invariants(self, small_cfg):
        res = run(small_cfg)
        recs = res.records
        assert recs[0].t == 0.0
        assert res.state.t == pytest.approx(small_cfg.t_end)
        # conservation and Pauli at every record
        assert max(r.cons_drift for r in recs) < 1e-8
        assert min(r.kappa_min for r in recs) > 0.0
        # discrete H-theorem
        hs = [r.h_eps for r in recs]
        scale = max(abs(hs[0]), recs[0].rho)
        assert all(b <= a + 1e-10 * scale for a, b in zip(hs, hs[1:]))
        # distances shrink toward the fixed equilibrium
        assert recs[-1].l1k2_dist < recs[0].l1k2_dist
        assert res.total_clamp_l1 <= 1e-12 * recs[0].rho * res.state.step_count

    def test_equilibrium_start_flat(self, const_spec):
        rho, e = 1.0, 1.0
        cfg = SimConfig(
            kernel=const_spec,
            eps=0.1 * eq.eps_sat(rho, e),
            initial=ScaledEquilibrium(rho=rho, u=(0, 0, 0), e=e, amplitude=0.0),
            t_end=0.3,
            n=8,
            l=4.0,
            theta=0.4,
            diag_stride=1,
            enable_sandwich=False,
            enable_ckp=False,
        )
        res = run(cfg)
        sups = [r.sup_f for r in res.records]
        assert max(sups) - min(sups) < 5e-2 * sups[0]
        hs = [r.h_eps for r in res.records]
        assert abs(hs[-1] - hs[0]) < 2e-3 * abs(hs[0])

    def test_snapshot_times(self, small_cfg):
        from dataclasses import replace

        cfg = replace(small_cfg, snapshot_times=(0.3, 0.6), keep_fields=True)
        res = run(cfg)
        assert set(res.snapshots) == {0.3, 0.6}
        assert len(res.fields) == len(res.records)

    def test_classical_regression_golden(self, const_spec):
        # eps = 0 trajectory pinned against stored values (same thread count)
        datum = beams()
        cfg = SimConfig(
            kernel=const_spec, eps=0.0, initial=datum, t_end=0.5, n=8,
            l=4.0, theta=0.4, diag_stride=2, enable_sandwich=False,
            enable_ckp=False, enable_dissipation=False,
        )
        res = run(cfg)
        got = {
            "t": [r.t for r in res.records],
            "rho": [r.rho for r in res.records],
            "sup_f": [r.sup_f for r in res.records],
            "h_eps": [r.h_eps for r in res.records],
            "l1k2_dist": [r.l1k2_dist for r in res.records],
        }
        if not os.path.exists(GOLDEN):
            os.makedirs(os.path.dirname(GOLDEN), exist_ok=True)
            with open(GOLDEN, "w") as fh:
                json.dump(got, fh, indent=1)
            pytest.skip("golden created; rerun to compare")
        with open(GOLDEN) as fh:
            want = json.load(fh)
        for key in want:
            assert np.allclose(got[key], want[key], rtol=1e-10, atol=1e-14), key

    def test_inadmissible_eps_rejected_at_run(self, const_spec):
        datum = beams()
        rho, _, e = nominal_moments(datum, 0.0)
        cfg = SimConfig(
            kernel=const_spec, eps=1.01 * eq.eps_sat(rho, e),
            initial=datum, t_end=0.1, n=8, l=4.0, theta=0.3,
        )
        # the sampled datum violates the Pauli bound at this eps
        from fdkin.grid import FieldError

        with pytest.raises(FieldError):
            run(cfg)
