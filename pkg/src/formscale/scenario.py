"""Scenario files: JSON schema, validation and bundled setups.

A scenario file is a single JSON document with the sections ``layout``,
``robot``, ``controller``, ``formation``, ``initial``, ``potential`` and
``sim`` (plus an optional ``name`` and free-text ``notes``).  Unknown keys
are rejected everywhere so typos cannot silently fall back to defaults.

Desired shapes may be given as explicit shape vectors or through the
``equilateral`` generator, which places three robots (or three subgroup
centroids) on an equilateral triangle of the requested side and computes
the shape vectors through the coordinate transformation itself.
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path

import numpy as np

from .cbt import GroupLayout, shape_coefficients
from .control import (
    ConstantTrajectory,
    ControllerConfig,
    DesiredFormation,
    SinusoidTrajectory,
)
from .dynamics import RobotParams, SwarmState
from .errors import ConfigError
from .potential import PotentialParams
from .sim import Scenario, SimConfig

__all__ = [
    "equilateral_vertices",
    "shape_vectors_from_points",
    "scenario_from_dict",
    "load_scenario",
    "bundled_scenario_path",
    "list_bundled_scenarios",
]


def equilateral_vertices(side: float) -> np.ndarray:
    """Vertices of a zero-centroid equilateral triangle of given side.

    Ordered bottom-right, bottom-left, top, so the first shape vector points
    along -x and the second along +y.
    """
    if side <= 0:
        raise ConfigError(f"triangle side must be positive, got {side}")
    h = side * np.sqrt(3.0) / 2.0
    return np.array(
        [[side / 2.0, -h / 3.0], [-side / 2.0, -h / 3.0], [0.0, 2.0 * h / 3.0]]
    )


def shape_vectors_from_points(points) -> np.ndarray:
    """Shape vectors of a point set under the Jacobi construction."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return shape_coefficients(pts.shape[0]) @ pts


def _check_keys(section: dict, allowed, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object, got {type(section).__name__}")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in {where}; allowed: {sorted(allowed)}"
        )


def _get(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return section[key]


def _build_trajectory(spec: dict):
    _check_keys(
        spec,
        ("type", "speed_x", "amplitude", "frequency", "origin", "point"),
        "formation.trajectory",
    )
    kind = _get(spec, "type", "formation.trajectory")
    if kind == "constant":
        return ConstantTrajectory(point=spec.get("point", (0.0, 0.0)))
    if kind == "sinusoid":
        return SinusoidTrajectory(
            speed_x=spec.get("speed_x", 1.0),
            amplitude=spec.get("amplitude", 30.0),
            frequency=spec.get("frequency", 0.1),
            origin=spec.get("origin", (0.0, 0.0)),
        )
    raise ConfigError(
        f"formation.trajectory.type must be 'constant' or 'sinusoid', got {kind!r}"
    )


def _shape_block(spec: dict, n_points: int, where: str) -> np.ndarray:
    """Resolve one shape-vector block from a generator or explicit vectors."""
    _check_keys(spec, ("generator", "side", "vectors"), where)
    if "vectors" in spec:
        vecs = np.asarray(spec["vectors"], dtype=float)
        if vecs.shape != (n_points - 1, 2):
            raise ConfigError(
                f"{where}.vectors must have shape ({n_points - 1}, 2), got {vecs.shape}"
            )
        return vecs
    gen = _get(spec, "generator", where)
    if gen != "equilateral":
        raise ConfigError(f"{where}.generator must be 'equilateral', got {gen!r}")
    if n_points != 3:
        raise ConfigError(
            f"{where}: the equilateral generator needs exactly 3 points, "
            f"this block has {n_points}"
        )
    side = float(_get(spec, "side", where))
    return shape_vectors_from_points(equilateral_vertices(side))


def _build_formation(spec: dict, layout: GroupLayout) -> DesiredFormation:
    _check_keys(spec, ("intra", "inter", "trajectory"), "formation")
    intra_spec = _get(spec, "intra", "formation")
    if isinstance(intra_spec, list):
        if len(intra_spec) != layout.m:
            raise ConfigError(
                f"formation.intra must list {layout.m} blocks, got {len(intra_spec)}"
            )
        intra = [
            _shape_block(blk, layout.sizes[g], f"formation.intra[{g}]")
            for g, blk in enumerate(intra_spec)
        ]
    else:
        intra = [
            _shape_block(intra_spec, layout.sizes[g], "formation.intra")
            for g in range(layout.m)
        ]
    if layout.m > 1:
        inter = _shape_block(_get(spec, "inter", "formation"), layout.m, "formation.inter")
    else:
        if "inter" in spec and spec["inter"] not in (None, [], {}):
            raise ConfigError("formation.inter is not applicable for a single group")
        inter = np.zeros((0, 2))
    trajectory = _build_trajectory(_get(spec, "trajectory", "formation"))
    return DesiredFormation(layout, intra=intra, inter=inter, trajectory=trajectory)


def scenario_from_dict(data: dict, name: str | None = None) -> Scenario:
    """Validate a scenario document and assemble the runtime objects."""
    _check_keys(
        data,
        ("name", "notes", "layout", "robot", "controller", "formation", "initial",
         "potential", "sim"),
        "scenario",
    )
    layout_spec = _get(data, "layout", "scenario")
    _check_keys(layout_spec, ("sizes",), "layout")
    layout = GroupLayout(_get(layout_spec, "sizes", "layout"))

    robot_spec = data.get("robot", {})
    _check_keys(
        robot_spec,
        ("mass", "inertia", "com_offset", "half_wheel_base", "wheel_radius"),
        "robot",
    )
    params = RobotParams(**robot_spec)

    ctrl_spec = data.get("controller", {})
    _check_keys(
        ctrl_spec,
        ("mode", "intra_gains", "inter_gains", "centroid_gains", "epsilons", "couplings"),
        "controller",
    )
    kwargs = dict(ctrl_spec)
    for key in ("intra_gains", "inter_gains", "centroid_gains", "epsilons"):
        if key in kwargs:
            kwargs[key] = tuple(
                tuple(v) if isinstance(v, (list, tuple)) else v for v in kwargs[key]
            )
    controller = ControllerConfig(**kwargs)

    formation = _build_formation(_get(data, "formation", "scenario"), layout)

    sim_spec = dict(data.get("sim", {}))
    _check_keys(
        sim_spec,
        ("dt", "horizon", "integrator", "settling_tolerance", "log_every",
         "torque_limit", "seed"),
        "sim",
    )

    init_spec = _get(data, "initial", "scenario")
    _check_keys(init_spec, ("positions", "headings", "velocities"), "initial")
    pos_spec = _get(init_spec, "positions", "initial")
    if isinstance(pos_spec, dict):
        # seed-driven initializer: robots drawn uniformly from a box
        _check_keys(pos_spec, ("random_box",), "initial.positions")
        box = np.asarray(_get(pos_spec, "random_box", "initial.positions"), dtype=float)
        if box.shape != (4,):
            raise ConfigError(
                "initial.positions.random_box must be [xmin, xmax, ymin, ymax]"
            )
        if sim_spec.get("seed") is None:
            raise ConfigError(
                "initial.positions.random_box requires sim.seed to keep runs "
                "reproducible"
            )
        rng = np.random.default_rng(int(sim_spec["seed"]))
        positions = np.column_stack(
            [
                rng.uniform(box[0], box[1], size=layout.n_robots),
                rng.uniform(box[2], box[3], size=layout.n_robots),
            ]
        )
    else:
        positions = np.asarray(pos_spec, dtype=float)
    if positions.shape != (layout.n_robots, 2):
        raise ConfigError(
            f"initial.positions must have shape ({layout.n_robots}, 2), "
            f"got {positions.shape}"
        )
    headings = np.asarray(init_spec.get("headings", 0.0), dtype=float)
    state = SwarmState.at_rest(positions, headings=headings)
    if "velocities" in init_spec and init_spec["velocities"] not in (None, "rest"):
        vel = np.asarray(init_spec["velocities"], dtype=float)
        if vel.shape != (layout.n_robots, 2):
            raise ConfigError(
                f"initial.velocities must have shape ({layout.n_robots}, 2), "
                f"got {vel.shape}"
            )
        state.velocities = vel

    pot_spec = data.get("potential", {})
    _check_keys(pot_spec, ("enabled", "sensing_radius", "safe_distance"), "potential")
    pot_spec = dict(pot_spec)
    pot_enabled = bool(pot_spec.pop("enabled", False))
    potential = PotentialParams(**pot_spec)

    sim = SimConfig(potential_enabled=pot_enabled, **sim_spec)

    return Scenario(
        name=name or data.get("name", "scenario"),
        layout=layout,
        params=params,
        controller=controller,
        formation=formation,
        initial=state,
        potential=potential,
        sim=sim,
        notes=str(data.get("notes", "")),
    )


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    root = importlib.resources.files("formscale") / "scenarios"
    path = root / f"{name}.json"
    if not path.is_file():
        raise ConfigError(
            f"no bundled scenario named {name!r}; available: "
            f"{', '.join(list_bundled_scenarios())}"
        )
    return Path(str(path))


def list_bundled_scenarios() -> list:
    root = importlib.resources.files("formscale") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario from a JSON file path or a bundled scenario name."""
    path = Path(path_or_name)
    if not path.is_file():
        candidate = str(path_or_name)
        if "/" not in candidate and not candidate.endswith(".json"):
            path = bundled_scenario_path(candidate)
        else:
            raise ConfigError(f"scenario file not found: {path_or_name}")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"scenario file {path} must contain a JSON object")
    return scenario_from_dict(data)
