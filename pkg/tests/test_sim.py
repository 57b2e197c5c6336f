import io

import numpy as np
import pytest

from formscale.cbt import GroupLayout
from formscale.control import ConstantTrajectory, ControllerConfig, DesiredFormation
from formscale.dynamics import RobotParams, SwarmState
from formscale.errors import BarrierViolationError, ConfigError, IntegrationError
from formscale.potential import PotentialParams
from formscale.sim import (
    Scenario,
    SimConfig,
    TrajectoryLog,
    euler_step,
    integrate_error_system,
    integrate_step,
    min_pair_distance,
    rk4_step,
    run_scenario,
    settling_times,
)

from conftest import make_paper_scenario


def small_scenario(**overrides):
    """Fast four-robot scenario for exercising the loop."""
    layout = GroupLayout([2, 2])
    formation = DesiredFormation(
        layout,
        intra=[np.array([[3.0, 0.0]]), np.array([[0.0, 3.0]])],
        inter=np.array([[8.0, 0.0]]),
        trajectory=ConstantTrajectory((0.0, 0.0)),
    )
    defaults = dict(
        name="small",
        layout=layout,
        params=RobotParams(),
        # eps small enough that the fully coupled error system is Hurwitz
        controller=ControllerConfig(epsilons=(0.3, 0.3)),
        formation=formation,
        initial=SwarmState.at_rest(
            np.array([[-6.0, 0.0], [-2.0, 1.0], [3.0, -1.0], [7.0, 2.0]])
        ),
        potential=PotentialParams(),
        sim=SimConfig(dt=2e-3, horizon=1.0, log_every=1),
    )
    defaults.update(overrides)
    return Scenario(**defaults)


def synthetic_log(z_err_series, dt=0.1, layout=None):
    layout = layout or GroupLayout([2, 2])
    z_err = np.asarray(z_err_series, dtype=float)
    k = z_err.shape[0]
    n = layout.n_robots
    return TrajectoryLog(
        layout=layout,
        times=np.arange(k) * dt,
        positions=np.zeros((k, n, 2)),
        velocities=np.zeros((k, n, 2)),
        headings=np.zeros((k, n)),
        spins=np.zeros((k, n)),
        z=np.zeros((k, 2 * n)),
        z_err=z_err,
        torques=np.zeros((k, n, 2)),
        min_distance=np.full(k, 5.0),
        force_levels=np.zeros((k, layout.m + 2)),
    )


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------


def test_rk4_exponential_decay():
    y = np.array([1.0])
    t = 0.0
    for _ in range(100):
        y = rk4_step(lambda _t, v: -v, t, y, 0.01)
        t += 0.01
    assert abs(y[0] - np.exp(-1.0)) <= 1e-8


def test_rk4_fourth_order_convergence():
    def solve(dt):
        y = np.array([1.0])
        n = int(round(1.0 / dt))
        for k in range(n):
            y = rk4_step(lambda _t, v: -v, k * dt, y, dt)
        return y[0]

    err_h = abs(solve(0.02) - np.exp(-1.0))
    err_h2 = abs(solve(0.01) - np.exp(-1.0))
    assert 14.0 <= err_h / err_h2 <= 18.0


def test_zero_dynamics_leaves_state_unchanged():
    y0 = np.array([1.0, -2.0, 3.0])
    y1 = rk4_step(lambda _t, _y: np.zeros(3), 0.0, y0, 0.5)
    np.testing.assert_array_equal(y0, y1)
    np.testing.assert_array_equal(euler_step(lambda _t, _y: np.zeros(3), 0.0, y0, 0.5), y0)


def test_integrate_step_dispatch():
    f = lambda _t, v: -v
    y = np.array([1.0])
    np.testing.assert_allclose(
        integrate_step(f, 0.0, y, 0.1, "euler"), euler_step(f, 0.0, y, 0.1)
    )
    np.testing.assert_allclose(
        integrate_step(f, 0.0, y, 0.1, "rk4"), rk4_step(f, 0.0, y, 0.1)
    )
    with pytest.raises(ConfigError):
        integrate_step(f, 0.0, y, 0.1, "rk45")


# ---------------------------------------------------------------------------
# closed-loop runs
# ---------------------------------------------------------------------------


def test_equilibrium_start_stays_settled():
    scenario = small_scenario()
    z_d, _, _ = scenario.formation.desired(0.0)
    x = scenario.cbt.inverse @ z_d
    scenario = small_scenario(
        initial=SwarmState.at_rest(x.reshape(-1, 2)),
        sim=SimConfig(dt=2e-3, horizon=0.5, log_every=1),
    )
    log = run_scenario(scenario)
    assert np.abs(log.z_err).max() <= 1e-9


def test_oracle_equivalence_on_small_scenario():
    scenario = small_scenario(
        controller=ControllerConfig(epsilons=(0.3, 0.3)),
        sim=SimConfig(dt=1e-3, horizon=0.5, log_every=1),
    )
    log = run_scenario(scenario)
    z_d0, zd_d0, _ = scenario.formation.desired(0.0)
    ze0 = scenario.cbt.matrix @ scenario.initial.positions.reshape(-1) - z_d0
    zde0 = -zd_d0
    _, ze_lin, _ = integrate_error_system(scenario.gains, ze0, zde0, 1e-3, 0.5)
    assert np.abs(log.z_err - ze_lin).max() <= 1e-8


def test_potential_inactive_when_separations_large():
    # all pairwise separations stay far beyond the sensing radius, so the
    # potential-on and potential-off runs coincide
    base = small_scenario()
    x = (base.cbt.inverse @ base.formation.desired(0.0)[0]).reshape(-1, 2)
    x[0] += 0.05  # small transient, distances stay > 2 m
    off = small_scenario(initial=SwarmState.at_rest(x.copy()),
                         sim=SimConfig(dt=2e-3, horizon=0.5, log_every=1))
    on = small_scenario(initial=SwarmState.at_rest(x.copy()),
                        sim=SimConfig(dt=2e-3, horizon=0.5, log_every=1,
                                      potential_enabled=True))
    log_off = run_scenario(off)
    log_on = run_scenario(on)
    assert log_off.min_distance.min() > on.potential.sensing_radius
    assert np.abs(log_on.positions - log_off.positions).max() <= 1e-9


def test_determinism_bit_identical():
    log1 = run_scenario(small_scenario())
    log2 = run_scenario(small_scenario())
    assert np.array_equal(log1.positions, log2.positions)
    assert np.array_equal(log1.torques, log2.torques)
    buf1, buf2 = io.StringIO(), io.StringIO()
    log1.to_csv(buf1)
    log2.to_csv(buf2)
    assert buf1.getvalue() == buf2.getvalue()


def test_barrier_violation_aborts_with_diagnostics():
    # robots closing so fast that one integration stage jumps from outside
    # the sensing annulus (zero barrier force) straight inside the safety
    # distance, which the stage evaluation must catch and abort
    layout = GroupLayout([2])
    formation = DesiredFormation(
        layout,
        intra=[np.array([[10.0, 0.0]])],
        inter=np.zeros((0, 2)),
        trajectory=ConstantTrajectory((0.0, 0.0)),
    )
    state = SwarmState(
        positions=np.array([[-1.3, 0.0], [1.3, 0.0]]),
        headings=np.zeros(2),
        velocities=np.array([[1150.0, 0.0], [-1150.0, 0.0]]),
        spins=np.zeros(2),
    )
    scenario = Scenario(
        name="collide",
        layout=layout,
        params=RobotParams(),
        controller=ControllerConfig(epsilons=(1.0, 1.0)),
        formation=formation,
        initial=state,
        potential=PotentialParams(sensing_radius=2.0, safe_distance=0.5),
        sim=SimConfig(dt=2e-3, horizon=0.5, log_every=1, potential_enabled=True),
    )
    with pytest.raises(BarrierViolationError) as err:
        run_scenario(scenario)
    assert err.value.time is not None
    assert err.value.distance <= 0.5


def test_infeasible_initial_conditions_rejected():
    with pytest.raises(ConfigError, match="safety distance"):
        small_scenario(
            initial=SwarmState.at_rest(
                np.array([[0.0, 0.0], [0.3, 0.0], [5.0, 0.0], [9.0, 0.0]])
            ),
            sim=SimConfig(dt=2e-3, horizon=0.1, potential_enabled=True),
        )


def test_dt_guard_rejects_coarse_steps():
    with pytest.raises(ConfigError, match="scale"):
        small_scenario(sim=SimConfig(dt=0.06, horizon=1.0))


def test_non_finite_state_aborts():
    scenario = small_scenario(
        initial=SwarmState.at_rest(
            np.array([[1e308, 0.0], [-1e308, 1.0], [3.0, -1.0], [7.0, 2.0]])
        )
    )
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(IntegrationError):
            run_scenario(scenario)


def test_euler_integrator_path():
    scenario = small_scenario(
        sim=SimConfig(dt=5e-4, horizon=2.0, log_every=10, integrator="euler")
    )
    log = run_scenario(scenario)
    norms = log.error_norms()
    # a first-order run still converges, just less accurately than rk4
    assert norms["intra_1"][-1] < 0.05 * norms["intra_1"][0]


def test_zero_horizon_empty_log():
    scenario = small_scenario(sim=SimConfig(dt=2e-3, horizon=0.0))
    log = run_scenario(scenario)
    assert log.n_samples == 0
    buf = io.StringIO()
    log.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == 2  # metadata comment + header row
    assert lines[1].startswith("t,x1,y1")


def test_log_csv_roundtrip():
    log = run_scenario(small_scenario(sim=SimConfig(dt=2e-3, horizon=0.1, log_every=5)))
    buf = io.StringIO()
    log.to_csv(buf)
    buf.seek(0)
    path = None
    import tempfile, os
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write(buf.getvalue())
        path = fh.name
    try:
        back = TrajectoryLog.from_csv(path)
        assert back.layout.sizes == log.layout.sizes
        np.testing.assert_allclose(back.times, log.times, atol=1e-12)
        np.testing.assert_allclose(back.positions, log.positions, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(back.z_err, log.z_err, rtol=1e-9, atol=1e-9)
    finally:
        os.unlink(path)


# ---------------------------------------------------------------------------
# settling and distance analysis
# ---------------------------------------------------------------------------


def test_settling_pre_settled_log_is_zero():
    log = synthetic_log(np.zeros((50, 8)))
    report = settling_times(log, 0.02)
    assert all(t == 0.0 for t in report.times.values())


def test_settling_detects_crossing_index():
    layout = GroupLayout([2, 2])
    k = 100
    z_err = np.zeros((k, 8))
    # centroid level decays below 2% of its initial norm at a known sample
    z_err[:, 6] = 10.0 * np.exp(-np.arange(k) * 0.1)
    log = synthetic_log(z_err, dt=0.1, layout=layout)
    report = settling_times(log, 0.02)
    # 10 exp(-0.1 k) <= 0.2 first at k = 40, so it stays below from t = 4.0
    assert report.times["centroid"] == pytest.approx(4.0)
    assert report.times["inter"] == 0.0


def test_settling_never_settled_reported_none():
    z_err = np.ones((10, 8))
    report = settling_times(synthetic_log(z_err), 0.02)
    assert report.times["centroid"] is None
    assert report.ratio_centroid_inter is None


def test_min_pair_distance_stationary_pair():
    layout = GroupLayout([2])
    k = 5
    log = TrajectoryLog(
        layout=layout,
        times=np.arange(k) * 0.1,
        positions=np.tile(np.array([[0.0, 0.0], [5.0, 0.0]]), (k, 1, 1)),
        velocities=np.zeros((k, 2, 2)),
        headings=np.zeros((k, 2)),
        spins=np.zeros((k, 2)),
        z=np.zeros((k, 4)),
        z_err=np.zeros((k, 4)),
        torques=np.zeros((k, 2, 2)),
        min_distance=np.full(k, 5.0),
        force_levels=np.zeros((k, 3)),
    )
    report = min_pair_distance(log)
    assert report.distance == pytest.approx(5.0)
    assert report.pair == (0, 1)


def test_min_pair_distance_provenance():
    layout = GroupLayout([2])
    k = 4
    positions = np.tile(np.array([[0.0, 0.0], [5.0, 0.0]]), (k, 1, 1))
    positions[2, 1] = [1.5, 0.0]  # closest approach at sample 2
    log = TrajectoryLog(
        layout=layout,
        times=np.arange(k) * 0.5,
        positions=positions,
        velocities=np.zeros((k, 2, 2)),
        headings=np.zeros((k, 2)),
        spins=np.zeros((k, 2)),
        z=np.zeros((k, 4)),
        z_err=np.zeros((k, 4)),
        torques=np.zeros((k, 2, 2)),
        min_distance=np.full(k, 5.0),
        force_levels=np.zeros((k, 3)),
    )
    report = min_pair_distance(log)
    assert report.distance == pytest.approx(1.5)
    assert report.time == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# time-scale behaviour
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_halving_first_scale_parameter_halves_fast_levels():
    # shrinking eps1 by half halves both fast settling times while leaving
    # the centroid's untouched (its gains are unscaled).  Couplings are
    # zeroed so each level settles on its own exponential; with all-ones
    # couplings the slower run's inter level is re-excited by the centroid's
    # rate and its settling time is no longer a pure scale effect.  The
    # perturbation enters per level in transformed coordinates, and starting
    # near the target keeps transient speeds low enough that a coarser step
    # is stable in the heading-rate subsystem.
    base = make_paper_scenario(dt=4e-4, horizon=13.0, log_every=10)
    z_d, _, _ = base.formation.desired(0.0)
    z0 = z_d.copy()
    z0[base.layout.intra_all_slice] += 3.0
    z0[base.layout.inter_slice] += 4.0
    z0[base.layout.centroid_slice] += [2.0, -1.5]
    initial = SwarmState.at_rest((base.cbt.inverse @ z0).reshape(-1, 2))
    zero_couplings = {
        k: 0.0
        for k in ("intra_inter", "intra_centroid", "inter_intra",
                  "inter_centroid", "centroid_intra", "centroid_inter")
    }
    kwargs = dict(
        layout=base.layout,
        params=base.params,
        formation=base.formation,
        initial=initial,
        potential=base.potential,
        sim=base.sim,
    )
    slow = Scenario(
        name="near_slow",
        controller=ControllerConfig(epsilons=(0.2, 0.1), couplings=zero_couplings),
        **kwargs,
    )
    fast = Scenario(
        name="near_fast",
        controller=ControllerConfig(epsilons=(0.1, 0.1), couplings=zero_couplings),
        **kwargs,
    )
    rep_slow = settling_times(run_scenario(slow), 0.02)
    rep_fast = settling_times(run_scenario(fast), 0.02)
    assert rep_fast.intra == pytest.approx(rep_slow.intra * 0.5, rel=0.25)
    assert rep_fast.times["inter"] == pytest.approx(rep_slow.times["inter"] * 0.5, rel=0.25)
    assert rep_fast.times["centroid"] == pytest.approx(
        rep_slow.times["centroid"], rel=0.25
    )
    # strict fast-to-slow ordering in both runs
    for rep in (rep_slow, rep_fast):
        assert rep.intra < rep.times["inter"] < rep.times["centroid"]
