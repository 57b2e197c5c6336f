"""Closed-loop simulation of the full swarm with per-level logging.

The coupled state of all N robots is packed as ``[X, V, theta, omega]``
(positions, velocities, headings, heading rates) and integrated with a
fixed-step classical Runge-Kutta scheme, evaluating the controller at every
stage.  Because the controller cancels the plant terms exactly, the
transformed tracking errors of a potential-free run follow the stacked
linear error system; ``integrate_error_system`` integrates that system
directly and serves as the independent oracle for the nonlinear loop.

Fixed steps keep runs deterministic and oracle comparisons clean.  The
scale parameters make the loop stiff (proportional gains grow as the
inverse square of the scale products), so scenario validation enforces
``dt <= 0.2 * min scale product``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .cbt import CbtMatrix, GroupLayout, build_multi_group_phi
from .control import (
    ControllerConfig,
    DesiredFormation,
    GainMatrices,
    error_system_matrix,
    gain_matrices,
)
from .dynamics import RobotParams, SwarmState
from .errors import BarrierViolationError, ConfigError, IntegrationError
from .potential import PotentialParams, avoidance_gradients

__all__ = [
    "SimConfig",
    "Scenario",
    "TrajectoryLog",
    "SettlingReport",
    "MinDistanceReport",
    "rk4_step",
    "euler_step",
    "integrate_step",
    "run_scenario",
    "integrate_error_system",
    "settling_times",
    "min_pair_distance",
]

#: Integration stability guard: dt must not exceed this fraction of the
#: fastest time-scale product.
DT_SCALE_GUARD = 0.2


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    horizon: float = 10.0
    integrator: str = "rk4"
    settling_tolerance: float = 0.02  # fraction of each level's initial error
    potential_enabled: bool = False
    seed: int | None = None
    log_every: int = 1
    torque_limit: float | None = None  # optional saturation, diagnostic only

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.horizon}")
        if self.integrator not in ("rk4", "euler"):
            raise ConfigError(f"integrator must be 'rk4' or 'euler', got {self.integrator!r}")
        if not 0 < self.settling_tolerance < 1:
            raise ConfigError("settling_tolerance must lie in (0, 1)")
        if int(self.log_every) < 1:
            raise ConfigError("log_every must be a positive integer")
        if self.torque_limit is not None and self.torque_limit <= 0:
            raise ConfigError("torque_limit must be positive when set")


@dataclass
class Scenario:
    """A fully assembled, validated closed-loop experiment."""

    name: str
    layout: GroupLayout
    params: RobotParams
    controller: ControllerConfig
    formation: DesiredFormation
    initial: SwarmState
    potential: PotentialParams
    sim: SimConfig
    cbt: CbtMatrix = field(default=None, repr=False)
    gains: GainMatrices = field(default=None, repr=False)
    notes: str = ""

    def __post_init__(self):
        if self.cbt is None:
            self.cbt = build_multi_group_phi(self.layout)
        if self.gains is None:
            self.gains = gain_matrices(self.controller, self.layout)
        if self.initial.n_robots != self.layout.n_robots:
            raise ConfigError(
                f"layout expects {self.layout.n_robots} robots, initial state has "
                f"{self.initial.n_robots}"
            )
        sigma_min = min(self.gains.scaled.intra_sigmas)
        if self.sim.dt > DT_SCALE_GUARD * sigma_min:
            raise ConfigError(
                f"dt = {self.sim.dt:g} exceeds {DT_SCALE_GUARD} * smallest scale "
                f"product ({sigma_min:g}); reduce dt to at most "
                f"{DT_SCALE_GUARD * sigma_min:g}"
            )
        if self.sim.potential_enabled:
            d_min, pair = _min_separation(self.initial.positions)
            if d_min <= self.potential.safe_distance:
                raise ConfigError(
                    f"initial positions of robots {pair} are {d_min:.4g} m apart, "
                    "not outside the safety distance"
                )

    def with_overrides(self, **sim_fields) -> "Scenario":
        """Copy of the scenario with some sim settings replaced."""
        sim = SimConfig(**{**self.sim.__dict__, **sim_fields})
        return Scenario(
            name=self.name,
            layout=self.layout,
            params=self.params,
            controller=self.controller,
            formation=self.formation,
            initial=self.initial,
            potential=self.potential,
            sim=sim,
            cbt=self.cbt,
            gains=self.gains,
            notes=self.notes,
        )


def _min_separation(positions):
    pts = np.atleast_2d(positions)
    n = pts.shape[0]
    if n < 2:
        return np.inf, (0, 0)
    iu, ju = np.triu_indices(n, k=1)
    d = np.linalg.norm(pts[iu] - pts[ju], axis=1)
    k = int(np.argmin(d))
    return float(d[k]), (int(iu[k]), int(ju[k]))


# ---------------------------------------------------------------------------
# fixed-step integrators
# ---------------------------------------------------------------------------


def rk4_step(f, t, y, dt):
    """One classical 4th-order Runge-Kutta step of dy/dt = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(f, t, y, dt):
    """One explicit Euler step."""
    return y + dt * f(t, y)


def integrate_step(f, t, y, dt, method="rk4"):
    """Advance one fixed step with the selected scheme."""
    if method == "rk4":
        return rk4_step(f, t, y, dt)
    if method == "euler":
        return euler_step(f, t, y, dt)
    raise ConfigError(f"unknown integrator {method!r}")


# ---------------------------------------------------------------------------
# trajectory log
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryLog:
    """Uniformly sampled closed-loop history.

    Arrays are sampled every ``log_every`` integration steps (plus the final
    state); a zero-length log (headers only) results from a zero horizon.
    """

    layout: GroupLayout
    times: np.ndarray  # (n,)
    positions: np.ndarray  # (n, N, 2)
    velocities: np.ndarray  # (n, N, 2)
    headings: np.ndarray  # (n, N)
    spins: np.ndarray  # (n, N)
    z: np.ndarray  # (n, 2N)
    z_err: np.ndarray  # (n, 2N)
    torques: np.ndarray  # (n, N, 2)
    min_distance: np.ndarray  # (n,)
    force_levels: np.ndarray  # (n, m + 2), controller force norm per level
    name: str = "run"
    dt: float = np.nan
    log_every: int = 1
    potential_enabled: bool = False
    peak_torque: float = 0.0
    n_clipped: int = 0

    @property
    def n_samples(self) -> int:
        return self.times.size

    def error_norms(self) -> dict:
        """Per-level position-error norm time series."""
        return {
            name: np.linalg.norm(self.z_err[:, sl], axis=1)
            for name, sl in zip(self.layout.level_names(), self.layout.level_slices())
        }

    # -- CSV round trip ------------------------------------------------------

    def column_names(self) -> list:
        n = self.layout.n_robots
        cols = ["t"]
        cols += [f"{ax}{i + 1}" for i in range(n) for ax in ("x", "y")]
        cols += [f"{ax}{i + 1}" for i in range(n) for ax in ("vx", "vy")]
        cols += [f"theta{i + 1}" for i in range(n)]
        cols += [f"omega{i + 1}" for i in range(n)]
        cols += [f"z{j + 1}{ax}" for j in range(n) for ax in ("x", "y")]
        cols += [f"e{j + 1}{ax}" for j in range(n) for ax in ("x", "y")]
        cols += [f"{side}{i + 1}" for i in range(n) for side in ("taur", "taul")]
        cols.append("min_dist")
        cols += [f"F_{name}" for name in self.layout.level_names()]
        return cols

    def as_table(self) -> np.ndarray:
        n = self.n_samples
        if n == 0:
            return np.empty((0, len(self.column_names())))
        blocks = [
            self.times.reshape(n, 1),
            self.positions.reshape(n, -1),
            self.velocities.reshape(n, -1),
            self.headings.reshape(n, -1),
            self.spins.reshape(n, -1),
            self.z,
            self.z_err,
            self.torques.reshape(n, -1),
            self.min_distance.reshape(n, 1),
            self.force_levels,
        ]
        return np.hstack(blocks)

    def to_csv(self, path_or_buf):
        """Write the log as CSV with a metadata comment line."""
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            buf = open(path_or_buf, "w", newline="")
            close = True
        else:
            buf = path_or_buf
        try:
            sizes = ",".join(str(s) for s in self.layout.sizes)
            buf.write(
                f"# formscale-log name={self.name} layout={sizes} dt={self.dt:.10g} "
                f"log_every={self.log_every} potential={int(self.potential_enabled)}\n"
            )
            buf.write(",".join(self.column_names()) + "\n")
            table = self.as_table()
            if table.size:
                np.savetxt(buf, table, fmt="%.10g", delimiter=",")
        finally:
            if close:
                buf.close()

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        """Rebuild a log from its CSV form (used by the plot command)."""
        with open(path) as fh:
            first = fh.readline().strip()
            meta = {}
            if first.startswith("#"):
                for tok in first.lstrip("# ").split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                header = fh.readline().strip()
            else:
                header = first
            names = header.split(",")
            body = fh.read()
        if "layout" in meta:
            layout = GroupLayout(int(s) for s in meta["layout"].split(","))
        else:
            n_guess = sum(1 for c in names if c.startswith("theta"))
            layout = GroupLayout([n_guess])
        n = layout.n_robots
        if body.strip():
            table = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
        else:
            table = np.empty((0, len(names)))
        if table.shape[1] != len(names):
            raise ConfigError(
                f"log has {table.shape[1]} columns but header names {len(names)}"
            )
        bad = ~np.isfinite(table)
        if np.any(bad):
            row = int(np.argwhere(bad)[0, 0])
            raise ConfigError(f"log contains a non-finite value in data row {row}")
        k = table.shape[0]
        idx = 1
        def take(count, shape):
            nonlocal idx
            block = table[:, idx : idx + count].reshape(shape)
            idx += count
            return block
        times = table[:, 0]
        positions = take(2 * n, (k, n, 2))
        velocities = take(2 * n, (k, n, 2))
        headings = take(n, (k, n))
        spins = take(n, (k, n))
        z = take(2 * n, (k, 2 * n))
        z_err = take(2 * n, (k, 2 * n))
        torques = take(2 * n, (k, n, 2))
        min_distance = take(1, (k,))
        force_levels = take(layout.m + 2, (k, layout.m + 2))
        return cls(
            layout=layout,
            times=times,
            positions=positions,
            velocities=velocities,
            headings=headings,
            spins=spins,
            z=z,
            z_err=z_err,
            torques=torques,
            min_distance=min_distance,
            force_levels=force_levels,
            name=meta.get("name", "log"),
            dt=float(meta.get("dt", "nan")),
            log_every=int(meta.get("log_every", "1")),
            potential_enabled=bool(int(meta.get("potential", "0"))),
        )


# ---------------------------------------------------------------------------
# the closed loop
# ---------------------------------------------------------------------------


class _ClosedLoop:
    """Precomputed arrays and the stage-rate function of one scenario."""

    def __init__(self, scenario: Scenario):
        lay = scenario.layout
        n = lay.n_robots
        self.n = n
        self.phi = scenario.cbt.matrix
        self.phi_inv = scenario.cbt.inverse
        gains = scenario.gains
        self.kp = gains.kp
        self.kd = gains.kd
        self.pot_gain = gains.pot_gain
        self.trajectory = scenario.formation.trajectory
        self.c_sl = lay.centroid_slice
        zd_static, _, _ = scenario.formation.desired(0.0)
        zd_static[self.c_sl] = 0.0
        self.zd_static = zd_static
        p = scenario.params
        self.mr = p.mass * p.wheel_radius
        self.jr = p.effective_inertia * p.wheel_radius
        self.dr = p.com_offset * p.half_wheel_base
        self.d_off = p.com_offset
        self.spin_gain = p.half_wheel_base / (p.effective_inertia * p.wheel_radius)
        self.det_b = -2.0 * self.dr / (self.mr * self.jr)
        self.potential = scenario.potential if scenario.sim.potential_enabled else None
        self.torque_limit = scenario.sim.torque_limit
        self.n_clipped = 0
        self.peak_torque = 0.0
        # state vector slices
        self.sl_x = slice(0, 2 * n)
        self.sl_v = slice(2 * n, 4 * n)
        self.sl_th = slice(4 * n, 5 * n)
        self.sl_om = slice(5 * n, 6 * n)

    def pack(self, state: SwarmState) -> np.ndarray:
        return np.concatenate(
            [
                state.positions.reshape(-1),
                state.velocities.reshape(-1),
                state.headings,
                state.spins,
            ]
        )

    def rates(self, t, y, extras=False):
        n = self.n
        x = y[self.sl_x]
        v = y[self.sl_v]
        th = y[self.sl_th]
        om = y[self.sl_om]
        s = np.sin(th)
        c = np.cos(th)
        vx = v[0::2]
        vy = v[1::2]
        # plant terms A v + C per robot (A v is the lateral sweep om * v_par)
        v_par = c * vx + s * vy
        g = np.empty(2 * n)
        g[0::2] = -om * v_par * s - self.d_off * om**2 * c
        g[1::2] = om * v_par * c - self.d_off * om**2 * s

        # one batched product for Phi @ [x, v, g]
        zc = self.phi @ np.stack([x, v, g], axis=1)
        z = zc[:, 0]
        zdot = zc[:, 1]
        pos_d, vel_d, acc_d = self.trajectory.evaluate(t)
        z_err = z - self.zd_static
        z_err[self.c_sl] -= pos_d
        zdot_err = zdot.copy()
        zdot_err[self.c_sl] -= vel_d

        f = -self.kp * z_err - self.kd @ zdot_err
        f[self.c_sl] += acc_d
        f -= zc[:, 2]
        if self.potential is not None:
            nabla = avoidance_gradients(x.reshape(n, 2), self.potential).reshape(-1)
            f += self.pot_gain * (self.phi @ nabla)

        w = self.phi_inv @ f
        w1 = w[0::2]
        w2 = w[1::2]
        b11 = c / self.mr - self.dr * s / self.jr
        b12 = c / self.mr + self.dr * s / self.jr
        b21 = s / self.mr + self.dr * c / self.jr
        b22 = s / self.mr - self.dr * c / self.jr
        tau_r = (b22 * w1 - b12 * w2) / self.det_b
        tau_l = (-b21 * w1 + b11 * w2) / self.det_b
        if self.torque_limit is not None:
            clipped_r = np.clip(tau_r, -self.torque_limit, self.torque_limit)
            clipped_l = np.clip(tau_l, -self.torque_limit, self.torque_limit)
            self.n_clipped += int(np.sum(clipped_r != tau_r) + np.sum(clipped_l != tau_l))
            tau_r, tau_l = clipped_r, clipped_l

        dydt = np.empty_like(y)
        dydt[self.sl_x] = v
        acc = dydt[self.sl_v]
        acc[0::2] = g[0::2] + b11 * tau_r + b12 * tau_l
        acc[1::2] = g[1::2] + b21 * tau_r + b22 * tau_l
        dydt[self.sl_th] = om
        dydt[self.sl_om] = self.spin_gain * (tau_r - tau_l)
        if extras:
            return dydt, (z, z_err, zdot_err, np.column_stack([tau_r, tau_l]), f)
        return dydt


def run_scenario(scenario: Scenario) -> TrajectoryLog:
    """Integrate the closed loop and record the trajectory log.

    Aborts with ``BarrierViolationError`` if the potential is enabled and a
    pair reaches the safety distance, and with ``IntegrationError`` on any
    non-finite state.
    """
    sim = scenario.sim
    lay = scenario.layout
    n = lay.n_robots
    dt = sim.dt
    n_steps = int(round(sim.horizon / dt))
    loop = _ClosedLoop(scenario)
    y = loop.pack(scenario.initial)

    log_idx = (
        np.arange(0, n_steps + 1, sim.log_every, dtype=int) if n_steps > 0 else np.array([], dtype=int)
    )
    if n_steps > 0 and log_idx[-1] != n_steps:
        log_idx = np.append(log_idx, n_steps)
    k = log_idx.size
    times = np.empty(k)
    positions = np.empty((k, n, 2))
    velocities = np.empty((k, n, 2))
    headings = np.empty((k, n))
    spins = np.empty((k, n))
    z_hist = np.empty((k, 2 * n))
    e_hist = np.empty((k, 2 * n))
    torques = np.empty((k, n, 2))
    min_d = np.empty(k)
    f_levels = np.empty((k, lay.m + 2))
    level_slices = lay.level_slices()

    next_log = 0
    step_fn = rk4_step if sim.integrator == "rk4" else euler_step
    for step in range(n_steps + 1):
        t = step * dt
        if next_log < k and log_idx[next_log] == step:
            try:
                dydt, (z, z_err, _, tau, f) = loop.rates(t, y, extras=True)
            except BarrierViolationError as exc:
                raise BarrierViolationError(exc.pair, exc.distance, time=t) from None
            if not np.all(np.isfinite(y)) or not np.all(np.isfinite(dydt)):
                raise IntegrationError(f"non-finite state at t = {t:.6g} s")
            i = next_log
            times[i] = t
            positions[i] = y[loop.sl_x].reshape(n, 2)
            velocities[i] = y[loop.sl_v].reshape(n, 2)
            headings[i] = y[loop.sl_th]
            spins[i] = y[loop.sl_om]
            z_hist[i] = z
            e_hist[i] = z_err
            torques[i] = tau
            min_d[i], _ = _min_separation(positions[i])
            for j, sl in enumerate(level_slices):
                f_levels[i, j] = np.linalg.norm(f[sl])
            loop.peak_torque = max(loop.peak_torque, float(np.abs(tau).max()))
            next_log += 1
        if step == n_steps:
            break
        try:
            y = step_fn(loop.rates, t, y, dt)
        except BarrierViolationError as exc:
            raise BarrierViolationError(exc.pair, exc.distance, time=t) from None

    return TrajectoryLog(
        layout=lay,
        times=times,
        positions=positions,
        velocities=velocities,
        headings=headings,
        spins=spins,
        z=z_hist,
        z_err=e_hist,
        torques=torques,
        min_distance=min_d,
        force_levels=f_levels,
        name=scenario.name,
        dt=dt,
        log_every=sim.log_every,
        potential_enabled=sim.potential_enabled,
        peak_torque=loop.peak_torque,
        n_clipped=loop.n_clipped,
    )


def integrate_error_system(
    gains: GainMatrices, z_err0, zdot_err0, dt: float, horizon: float
):
    """Directly integrate the stacked linear error system (the oracle).

    Returns (times, z_err history, zdot_err history); same fixed-step RK4
    scheme as the nonlinear loop so discretization effects match.
    """
    a_lin = error_system_matrix(gains)

    def f(_t, e):
        return a_lin @ e

    n2 = gains.kp.size
    e = np.concatenate([np.asarray(z_err0, float), np.asarray(zdot_err0, float)])
    n_steps = int(round(horizon / dt))
    times = np.arange(n_steps + 1) * dt
    hist = np.empty((n_steps + 1, 2 * n2))
    hist[0] = e
    for k in range(n_steps):
        e = rk4_step(f, times[k], e, dt)
        hist[k + 1] = e
    return times, hist[:, :n2], hist[:, n2:]


# ---------------------------------------------------------------------------
# log analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SettlingReport:
    """First times after which each level's error norm stays below threshold.

    ``times`` maps level names to a settling time or None (never settled
    through the horizon).  ``intra`` is the latest subgroup settling time.
    Ratios are None when a needed level never settled.
    """

    times: dict
    thresholds: dict
    tolerance: float
    intra: float | None
    ratio_inter_intra: float | None
    ratio_centroid_inter: float | None


def settling_times(
    log: TrajectoryLog, tolerance: float = 0.02, absolute: bool = False
) -> SettlingReport:
    """Per-level settling times from a complete log.

    The threshold is ``tolerance`` times the level's initial error norm
    (or ``tolerance`` itself with ``absolute=True``); a level settles at the
    first logged time after which its norm never exceeds the threshold.
    """
    if log.n_samples == 0:
        raise ConfigError("cannot compute settling times of an empty log")
    norms = log.error_norms()
    times = {}
    thresholds = {}
    for name, series in norms.items():
        thr = tolerance if absolute else tolerance * series[0]
        thresholds[name] = float(thr)
        above = series > thr
        if not above.any():
            times[name] = 0.0
        elif above[-1]:
            times[name] = None
        else:
            last = int(np.nonzero(above)[0][-1])
            times[name] = float(log.times[last + 1])
    group_times = [times[f"intra_{g + 1}"] for g in range(log.layout.m)]
    intra = None if any(v is None for v in group_times) else max(group_times)
    t_r = times.get("inter")
    t_c = times.get("centroid")

    def ratio(a, b):
        if a is None or b is None or b <= 0:
            return None
        return a / b

    return SettlingReport(
        times=times,
        thresholds=thresholds,
        tolerance=tolerance,
        intra=intra,
        ratio_inter_intra=ratio(t_r, intra),
        ratio_centroid_inter=ratio(t_c, t_r),
    )


@dataclass(frozen=True)
class MinDistanceReport:
    distance: float
    pair: tuple
    time: float


def min_pair_distance(log: TrajectoryLog) -> MinDistanceReport:
    """Minimum pairwise separation over the whole log, with provenance."""
    if log.n_samples == 0:
        raise ConfigError("cannot compute distances of an empty log")
    n = log.layout.n_robots
    if n < 2:
        return MinDistanceReport(np.inf, (0, 0), float(log.times[0]))
    iu, ju = np.triu_indices(n, k=1)
    diff = log.positions[:, iu, :] - log.positions[:, ju, :]
    dist = np.linalg.norm(diff, axis=2)  # (n_samples, n_pairs)
    flat = int(np.argmin(dist))
    row, col = np.unravel_index(flat, dist.shape)
    return MinDistanceReport(
        distance=float(dist[row, col]),
        pair=(int(iu[col]), int(ju[col])),
        time=float(log.times[row]),
    )
