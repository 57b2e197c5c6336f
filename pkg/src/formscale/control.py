"""Transformed-coordinate dynamics and multi-time-scale formation controllers.

In transformed coordinates the swarm obeys ``Zdd = P Zd + Q U + R`` with
``P = Phi A Phi^-1``, ``Q = Phi B`` and ``R = Phi C``.  The controller picks
the transformed force ``F = Q U`` per level (each subgroup's shape block,
the inter-group block, the centroid) as a PD law on that level's error plus
derivative cross-couplings, cancels the plant terms ``P Zd + R`` exactly,
and adds the desired-acceleration feedforward.  Wheel torques follow from
``U = B^-1 Phi^-1 F`` blockwise.

Time scales: proportional gains at each level are divided by the square of
that level's scale product and derivative gains by the product itself, so
with small scale parameters the closed loop is singularly perturbed and the
levels settle in a fixed fast-to-slow order (groups first, then the
inter-group shape, then the centroid).

In ``three-time-scale`` mode there are two scale parameters and every
subgroup shares the scale eps1*eps2.  In ``multi-time-scale`` mode there
are m+1 parameters and subgroup L (1-based) has scale
``prod(eps_k for k = 1 .. m+2-L)``; subgroup 1 is fastest.  The inter level
always has scale eps1 and the centroid is unscaled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cbt import CbtMatrix, GroupLayout
from .errors import ConfigError, ShapeMismatchError, SingularActuationError

__all__ = [
    "ControllerConfig",
    "ScaledGains",
    "GainMatrices",
    "DesiredFormation",
    "TransformedError",
    "ConstantTrajectory",
    "SinusoidTrajectory",
    "COUPLING_KEYS",
    "coupling",
    "scaled_gains",
    "gain_matrices",
    "transformed_dynamics_terms",
    "control_forces",
    "torques_from_forces",
    "closed_loop_error_rhs",
    "error_system_matrix",
    "companion_matrix",
    "boundary_layer_matrices",
]

THREE_TIME_SCALE = "three-time-scale"
MULTI_TIME_SCALE = "multi-time-scale"

#: Coupling-gain matrix names; "a_b" couples level a's force to level b's rate.
COUPLING_KEYS = (
    "intra_intra",
    "intra_inter",
    "intra_centroid",
    "inter_intra",
    "inter_centroid",
    "centroid_intra",
    "centroid_inter",
)

_SINGULAR_DET = 1e-12


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControllerConfig:
    """Base gains, scale parameters and coupling gains.

    ``intra_gains`` is one (kp, kd) pair applied to every subgroup, or one
    pair per subgroup.  Couplings may be scalars (filling an all-constant
    matrix of the right size; 1.0 reproduces the tightly coupled all-ones
    choice) or explicit matrices.  ``intra_intra`` defaults to 0 since the
    stacked three-time-scale law has no cross-group rate coupling.
    """

    mode: str = THREE_TIME_SCALE
    intra_gains: tuple = (1.0, 1.0)
    inter_gains: tuple = (1.0, 1.0)
    centroid_gains: tuple = (1.0, 1.0)
    epsilons: tuple = (0.1, 0.1)
    couplings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (THREE_TIME_SCALE, MULTI_TIME_SCALE):
            raise ConfigError(f"unknown controller mode {self.mode!r}")
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) < 2:
            raise ConfigError("need at least two scale parameters")
        for k, e in enumerate(eps):
            if not 0.0 < e <= 1.0:
                raise ConfigError(f"epsilons[{k}] = {e} must lie in (0, 1]")
        object.__setattr__(self, "epsilons", eps)
        for key in self.couplings:
            if key not in COUPLING_KEYS:
                raise ConfigError(
                    f"unknown coupling {key!r}; valid keys: {', '.join(COUPLING_KEYS)}"
                )
        for name in ("intra_gains", "inter_gains", "centroid_gains"):
            value = getattr(self, name)
            arr = np.asarray(value, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} contains non-finite entries")

    def intra_gain_pairs(self, layout: GroupLayout) -> tuple:
        """Normalize intra gains to one (kp, kd) pair per subgroup."""
        gains = np.asarray(self.intra_gains, dtype=float)
        if gains.shape == (2,):
            return ((float(gains[0]), float(gains[1])),) * layout.m
        if gains.shape == (layout.m, 2):
            return tuple((float(a), float(b)) for a, b in gains)
        raise ConfigError(
            f"intra_gains must be one (kp, kd) pair or {layout.m} pairs, "
            f"got shape {gains.shape}"
        )

    def scale_products(self, layout: GroupLayout) -> tuple:
        """Scale product sigma for each intra level, fastest group first."""
        m = layout.m
        if self.mode == THREE_TIME_SCALE:
            if len(self.epsilons) != 2:
                raise ConfigError(
                    "three-time-scale mode takes exactly two scale parameters, "
                    f"got {len(self.epsilons)}"
                )
            return (self.epsilons[0] * self.epsilons[1],) * m
        if len(self.epsilons) != m + 1:
            raise ConfigError(
                f"multi-time-scale mode with {m} subgroups takes {m + 1} scale "
                f"parameters, got {len(self.epsilons)}"
            )
        # Subgroup L (1-based) runs on the stretched time t / prod(eps_1..eps_{m+2-L}).
        return tuple(
            float(np.prod(self.epsilons[: m + 2 - (ell + 1)])) for ell in range(m)
        )


@dataclass(frozen=True)
class ScaledGains:
    """Effective (kp, kd) per level after time-scale division."""

    intra: tuple  # ((kp, kd), ...) per subgroup
    inter: tuple  # (kp, kd)
    centroid: tuple  # (kp, kd)
    intra_sigmas: tuple  # scale product per subgroup
    inter_sigma: float


def scaled_gains(config: ControllerConfig, layout: GroupLayout) -> ScaledGains:
    """Divide base gains by their level's scale products.

    Intra level L: kp/sigma_L^2 and kd/sigma_L; inter level: kp/eps1^2 and
    kd/eps1; centroid gains are used as-is.
    """
    sigmas = config.scale_products(layout)
    base = config.intra_gain_pairs(layout)
    intra = tuple(
        (kp / sigma**2, kd / sigma) for (kp, kd), sigma in zip(base, sigmas)
    )
    e1 = config.epsilons[0]
    kr1, kr2 = (float(g) for g in config.inter_gains)
    kc1, kc2 = (float(g) for g in config.centroid_gains)
    return ScaledGains(
        intra=intra,
        inter=(kr1 / e1**2, kr2 / e1),
        centroid=(kc1, kc2),
        intra_sigmas=sigmas,
        inter_sigma=e1,
    )


def _coupling_matrix(value, shape, key) -> np.ndarray:
    if np.isscalar(value):
        return np.full(shape, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"coupling {key!r} must have shape {shape}, got {arr.shape}")
    return arr


def coupling(config: ControllerConfig, key: str, shape) -> np.ndarray:
    """Resolve one coupling-gain matrix to its full shape.

    Scalars fill a constant matrix; ``intra_intra`` defaults to zero, every
    other coupling to the all-ones choice.
    """
    if key not in COUPLING_KEYS:
        raise ConfigError(f"unknown coupling {key!r}")
    value = config.couplings.get(key, 0.0 if key == "intra_intra" else 1.0)
    return _coupling_matrix(value, tuple(shape), key)


@dataclass(frozen=True)
class GainMatrices:
    """Stacked closed-loop gain structure over the whole transformed vector.

    The closed-loop error dynamics are ``zdd_e = -diag(kp) z_e - KD zd_e``
    (plus any potential term), where ``kp`` collects the scaled proportional
    gains per coordinate and ``KD`` holds the scaled derivative gains on the
    diagonal and the coupling matrices off it.  ``pot_gain`` carries the
    per-coordinate potential scaling 1/sigma_level.
    """

    kp: np.ndarray  # (2N,), proportional gains (diagonal)
    kd: np.ndarray  # (2N, 2N), derivative gains with couplings
    pot_gain: np.ndarray  # (2N,)
    scaled: ScaledGains
    layout: GroupLayout


def gain_matrices(config: ControllerConfig, layout: GroupLayout) -> GainMatrices:
    """Assemble the stacked gain structure for a layout."""
    sg = scaled_gains(config, layout)
    n2 = 2 * layout.n_robots
    kp = np.zeros(n2)
    kd = np.zeros((n2, n2))
    pot_gain = np.zeros(n2)

    level_slices = layout.level_slices()
    intra_slices = level_slices[: layout.m]
    inter_sl = layout.inter_slice
    cen_sl = layout.centroid_slice

    for g, sl in enumerate(intra_slices):
        k1, k2 = sg.intra[g]
        kp[sl] = k1
        kd[sl, sl.start : sl.stop] += np.eye(sl.stop - sl.start) * k2
        pot_gain[sl] = 1.0 / sg.intra_sigmas[g]
    kr1, kr2 = sg.inter
    kp[inter_sl] = kr1
    n_r = inter_sl.stop - inter_sl.start
    kd[inter_sl, inter_sl.start : inter_sl.stop] += np.eye(n_r) * kr2
    pot_gain[inter_sl] = 1.0 / sg.inter_sigma
    kc1, kc2 = sg.centroid
    kp[cen_sl] = kc1
    kd[cen_sl, cen_sl.start : cen_sl.stop] += np.eye(2) * kc2
    pot_gain[cen_sl] = 1.0

    def put(key, rows, cols):
        shape = (rows.stop - rows.start, cols.stop - cols.start)
        kd[rows, cols.start : cols.stop] += coupling(config, key, shape)

    for gi, sli in enumerate(intra_slices):
        for gj, slj in enumerate(intra_slices):
            if gi != gj:
                put("intra_intra", sli, slj)
        put("intra_inter", sli, inter_sl)
        put("intra_centroid", sli, cen_sl)
    for gj, slj in enumerate(intra_slices):
        put("inter_intra", inter_sl, slj)
        put("centroid_intra", cen_sl, slj)
    put("inter_centroid", inter_sl, cen_sl)
    put("centroid_inter", cen_sl, inter_sl)

    return GainMatrices(kp=kp, kd=kd, pot_gain=pot_gain, scaled=sg, layout=layout)


# ---------------------------------------------------------------------------
# desired formation
# ---------------------------------------------------------------------------


class ConstantTrajectory:
    """Centroid held at a fixed point."""

    def __init__(self, point=(0.0, 0.0)):
        self.point = np.asarray(point, dtype=float)

    def evaluate(self, t):
        return self.point.copy(), np.zeros(2), np.zeros(2)


class SinusoidTrajectory:
    """Constant drift in x with a sinusoidal sweep in y."""

    def __init__(self, speed_x=1.0, amplitude=30.0, frequency=0.1, origin=(0.0, 0.0)):
        self.speed_x = float(speed_x)
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.origin = np.asarray(origin, dtype=float)

    def evaluate(self, t):
        w = self.frequency
        pos = self.origin + np.array(
            [self.speed_x * t, self.amplitude * np.sin(w * t)]
        )
        vel = np.array([self.speed_x, self.amplitude * w * np.cos(w * t)])
        acc = np.array([0.0, -self.amplitude * w**2 * np.sin(w * t)])
        return pos, vel, acc


class DesiredFormation:
    """Constant shape targets per level plus the centroid trajectory.

    Parameters
    ----------
    layout : GroupLayout
    intra : sequence of (rho_i - 1, 2) arrays
        Desired shape vectors per subgroup.
    inter : (m - 1, 2) array
        Desired inter-group shape vectors (may be empty for m = 1).
    trajectory : object with ``evaluate(t) -> (pos, vel, acc)``
    """

    def __init__(self, layout: GroupLayout, intra, inter, trajectory):
        self.layout = layout
        self.trajectory = trajectory
        self.intra = tuple(np.asarray(v, dtype=float) for v in intra)
        if len(self.intra) != layout.m:
            raise ConfigError(
                f"expected {layout.m} intra shape blocks, got {len(self.intra)}"
            )
        for g, vec in enumerate(self.intra):
            want = (layout.sizes[g] - 1, 2)
            if vec.shape != want:
                raise ConfigError(
                    f"intra shape block {g} must have shape {want}, got {vec.shape}"
                )
        self.inter = np.asarray(inter, dtype=float).reshape(-1, 2)
        if self.inter.shape != (layout.n_inter, 2):
            raise ConfigError(
                f"inter shape block must have shape ({layout.n_inter}, 2), "
                f"got {self.inter.shape}"
            )
        static = np.zeros(2 * layout.n_robots)
        for g in range(layout.m):
            static[layout.intra_slice(g)] = self.intra[g].reshape(-1)
        static[layout.inter_slice] = self.inter.reshape(-1)
        self._static = static

    def desired(self, t):
        """(z_d, zd_d, zdd_d) at time t, each a 2N vector."""
        pos, vel, acc = self.trajectory.evaluate(t)
        sl = self.layout.centroid_slice
        z_d = self._static.copy()
        z_d[sl] = pos
        zd_d = np.zeros_like(z_d)
        zd_d[sl] = vel
        zdd_d = np.zeros_like(z_d)
        zdd_d[sl] = acc
        return z_d, zd_d, zdd_d


@dataclass
class TransformedError:
    """Per-level tracking errors in transformed coordinates."""

    z: np.ndarray  # (2N,), Z - Z_d
    zdot: np.ndarray  # (2N,), Zd - Zd_d
    layout: GroupLayout

    @classmethod
    def from_state(cls, cbt: CbtMatrix, positions, velocities, formation, t):
        x = np.asarray(positions, dtype=float).reshape(-1)
        v = np.asarray(velocities, dtype=float).reshape(-1)
        z_d, zd_d, _ = formation.desired(t)
        return cls(
            z=cbt.matrix @ x - z_d, zdot=cbt.matrix @ v - zd_d, layout=cbt.layout
        )

    def level_norms(self) -> dict:
        """Position-error norm per level name."""
        return {
            name: float(np.linalg.norm(self.z[sl]))
            for name, sl in zip(self.layout.level_names(), self.layout.level_slices())
        }


# ---------------------------------------------------------------------------
# controller operations
# ---------------------------------------------------------------------------


def transformed_dynamics_terms(cbt: CbtMatrix, big_a, c_stack):
    """(P, R) of the transformed dynamics: P = Phi A Phi^-1, R = Phi C."""
    big_a = np.asarray(big_a, dtype=float)
    c_stack = np.asarray(c_stack, dtype=float)
    n2 = 2 * cbt.n_robots
    if big_a.shape != (n2, n2) or c_stack.shape != (n2,):
        raise ShapeMismatchError(
            f"expected ({n2}, {n2}) matrix and ({n2},) vector, got "
            f"{big_a.shape} and {c_stack.shape}"
        )
    return cbt.matrix @ big_a @ cbt.inverse, cbt.matrix @ c_stack


def control_forces(
    error: TransformedError,
    p_matrix,
    r_vec,
    formation: DesiredFormation,
    t: float,
    gains: GainMatrices,
    f_pot=None,
) -> np.ndarray:
    """Transformed control force F with plant cancellation and feedforward.

    ``F = -kp z_e - KD zd_e + zdd_d - P zd - R + pot_gain * f_pot`` where
    ``zd`` is the full transformed rate.  The desired-acceleration
    feedforward is applied exactly once.  The potential term enters with the
    sign that makes its stacked Cartesian pullback repulsive.
    """
    _, zd_d, zdd_d = formation.desired(t)
    zdot_full = error.zdot + zd_d
    f = -gains.kp * error.z - gains.kd @ error.zdot + zdd_d
    f -= np.asarray(p_matrix) @ zdot_full + np.asarray(r_vec)
    if f_pot is not None:
        f += gains.pot_gain * np.asarray(f_pot, dtype=float)
    return f


def torques_from_forces(f, cbt: CbtMatrix, b_blocks) -> np.ndarray:
    """Wheel torques realizing a transformed force: U = B^-1 Phi^-1 F.

    ``b_blocks`` holds the per-robot torque maps as an (N, 2, 2) array; each
    2x2 block is inverted analytically.  Raises ``SingularActuationError``
    naming the robot whose block determinant falls below 1e-12.
    """
    f = np.asarray(f, dtype=float)
    b = np.asarray(b_blocks, dtype=float)
    n = cbt.n_robots
    if f.shape != (2 * n,):
        raise ShapeMismatchError(f"expected force vector of length {2 * n}")
    if b.shape != (n, 2, 2):
        raise ShapeMismatchError(f"expected ({n}, 2, 2) torque-map blocks")
    w = (cbt.inverse @ f).reshape(n, 2)
    det = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
    bad = np.abs(det) < _SINGULAR_DET
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularActuationError(
            f"torque map of robot {i} is singular (|det| = {abs(det[i]):.3e})"
        )
    tau = np.empty_like(w)
    tau[:, 0] = (b[:, 1, 1] * w[:, 0] - b[:, 0, 1] * w[:, 1]) / det
    tau[:, 1] = (-b[:, 1, 0] * w[:, 0] + b[:, 0, 0] * w[:, 1]) / det
    return tau


def closed_loop_error_rhs(
    error: TransformedError, gains: GainMatrices, f_pot=None
) -> np.ndarray:
    """Error accelerations of the closed loop: the linear oracle's RHS."""
    out = -gains.kp * error.z - gains.kd @ error.zdot
    if f_pot is not None:
        out += gains.pot_gain * np.asarray(f_pot, dtype=float)
    return out


def error_system_matrix(gains: GainMatrices) -> np.ndarray:
    """State matrix of the stacked linear error system [z_e; zd_e]."""
    n2 = gains.kp.size
    top = np.hstack([np.zeros((n2, n2)), np.eye(n2)])
    bottom = np.hstack([-np.diag(gains.kp), -gains.kd])
    return np.vstack([top, bottom])


def companion_matrix(kp: float, kd: float, n_coords: int) -> np.ndarray:
    """Companion-form block [[0, I], [-kp I, -kd I]] over n_coords coordinates."""
    eye = np.eye(n_coords)
    zero = np.zeros((n_coords, n_coords))
    return np.block([[zero, eye], [-kp * eye, -kd * eye]])


def boundary_layer_matrices(config: ControllerConfig, layout: GroupLayout) -> dict:
    """Companion matrices of each level's boundary layer (base gains).

    Returns per-subgroup matrices, the stacked intra matrix used by the
    three-time-scale analysis, the inter matrix and the centroid matrix.
    """
    base = config.intra_gain_pairs(layout)
    out = {}
    for g, (kp, kd) in enumerate(base):
        out[f"intra_{g + 1}"] = companion_matrix(kp, kd, 2 * (layout.sizes[g] - 1))
    blocks = [out[f"intra_{g + 1}"] for g in range(layout.m)]
    n_s = 2 * layout.n_intra
    stacked = np.zeros((2 * n_s, 2 * n_s))
    stacked[:n_s, n_s:] = np.eye(n_s)
    row = 0
    for g, (kp, kd) in enumerate(base):
        k = 2 * (layout.sizes[g] - 1)
        stacked[n_s + row : n_s + row + k, row : row + k] = -kp * np.eye(k)
        stacked[n_s + row : n_s + row + k, n_s + row : n_s + row + k] = -kd * np.eye(k)
        row += k
    out["intra_stacked"] = stacked
    kr1, kr2 = (float(g) for g in config.inter_gains)
    kc1, kc2 = (float(g) for g in config.centroid_gains)
    if layout.n_inter > 0:
        out["inter"] = companion_matrix(kr1, kr2, 2 * layout.n_inter)
    out["centroid"] = companion_matrix(kc1, kc2, 2)
    return out
