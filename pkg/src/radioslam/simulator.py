"""Synthetic radio-SLAM worlds: APs, trajectories, drifting odometry, scans.

Everything is derived from one master seed through named SeedSequence spawn
keys, so a dataset is a pure function of its configuration:

    (0,)        world layout
    (1, robot)  odometry noise of one robot
    (2, robot)  scan noise of one robot
    (3,)        frozen spatial shadowing field
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .fingerprint import ApObservation, RawScan
from .se2 import compose_increments, Pose2, relative_increments


def derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream addressed by a spawn key under one master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


@dataclass(frozen=True)
class Ap:
    x: float
    y: float
    tx_power_dbm: float  # RSS at the reference distance


@dataclass(frozen=True)
class World:
    """Rectangular arena [0, width] x [0, height] with fixed APs."""

    width: float
    height: float
    aps: tuple[Ap, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"degenerate extent {self.width} x {self.height}")
        if not self.aps:
            raise ConfigError("world needs at least one AP")
        for ap in self.aps:
            if not (0 <= ap.x <= self.width and 0 <= ap.y <= self.height):
                raise ConfigError(f"AP outside extent: {ap}")

    def ap_positions(self) -> np.ndarray:
        return np.array([[ap.x, ap.y] for ap in self.aps])

    def ap_tx_powers(self) -> np.ndarray:
        return np.array([ap.tx_power_dbm for ap in self.aps])

    def ap_ids(self) -> list[str]:
        return [f"ap{k:03d}" for k in range(len(self.aps))]


@dataclass(frozen=True)
class PropagationParams:
    path_loss_exponent: float = 2.5
    ref_distance_m: float = 1.0
    shadowing_sigma_dbm: float = 4.0
    detection_floor_dbm: float = -90.0
    miss_prob: float = 0.1

    def __post_init__(self):
        if self.path_loss_exponent <= 0 or self.ref_distance_m <= 0:
            raise ConfigError("path_loss_exponent and ref_distance_m must be > 0")
        if self.shadowing_sigma_dbm < 0:
            raise ConfigError("shadowing_sigma_dbm must be >= 0")
        if not 0 <= self.miss_prob < 1:
            raise ConfigError("miss_prob must lie in [0, 1)")


@dataclass(frozen=True)
class OdometryNoise:
    """Generative odometry error model (fractions of per-step motion)."""

    # Defaults sized so composed odometry over a ~1500 m route drifts
    # 5-60 m at the end (checked over seeds 0-9).
    trans_per_m: float = 0.05  # sd of translation noise per meter travelled
    trans_bias_per_m: float = 0.02  # deterministic scale error
    rot_per_rad: float = 0.05  # sd of rotation noise per radian turned
    rot_per_m: float = 0.006  # sd of heading noise per meter travelled

    def __post_init__(self):
        if min(self.trans_per_m, self.trans_bias_per_m, self.rot_per_rad, self.rot_per_m) < 0:
            raise ConfigError(f"odometry noise terms must be >= 0: {self}")


class ShadowingField:
    """Frozen location-dependent RSS offsets, one grid per AP.

    Samples are bilinear in position, so the distortion is spatially smooth
    yet time invariant: revisiting a place reproduces the same offset.
    """

    def __init__(self, world: World, sigma_dbm: float, cell_m: float, seed):
        if sigma_dbm < 0 or cell_m <= 0:
            raise ConfigError("shadowing field needs sigma >= 0 and cell > 0")
        rng = np.random.default_rng(seed)
        self.cell_m = cell_m
        nx = int(math.ceil(world.width / cell_m)) + 2
        ny = int(math.ceil(world.height / cell_m)) + 2
        self.grid = rng.normal(0.0, sigma_dbm, size=(len(world.aps), ny, nx))

    def sample(self, xy: np.ndarray) -> np.ndarray:
        """Offsets (n_aps,) for one position, or (m, n_aps) for m positions."""
        xy = np.asarray(xy, dtype=float)
        single = xy.ndim == 1
        pts = xy.reshape(-1, 2)
        gx = np.clip(pts[:, 0] / self.cell_m, 0, self.grid.shape[2] - 1.001)
        gy = np.clip(pts[:, 1] / self.cell_m, 0, self.grid.shape[1] - 1.001)
        x0 = gx.astype(int)
        y0 = gy.astype(int)
        fx = gx - x0
        fy = gy - y0
        g = self.grid
        val = (
            g[:, y0, x0] * (1 - fx) * (1 - fy)
            + g[:, y0, x0 + 1] * fx * (1 - fy)
            + g[:, y0 + 1, x0] * (1 - fx) * fy
            + g[:, y0 + 1, x0 + 1] * fx * fy
        ).T
        return val[0] if single else val


def generate_world(extent: tuple[float, float], n_aps: int, seed) -> World:
    """Uniformly scattered APs with tx power drawn in [-45, -30] dBm at 1 m."""
    if n_aps < 1:
        raise ConfigError(f"n_aps must be >= 1, got {n_aps}")
    width, height = float(extent[0]), float(extent[1])
    if width <= 0 or height <= 0:
        raise ConfigError(f"degenerate extent {extent}")
    rng = np.random.default_rng(
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    )
    pos = rng.uniform([0.0, 0.0], [width, height], size=(n_aps, 2))
    tx = rng.uniform(-45.0, -30.0, size=n_aps)
    aps = tuple(Ap(float(p[0]), float(p[1]), float(t)) for p, t in zip(pos, tx))
    return World(width=width, height=height, aps=aps)


def simulate_trajectory(
    route: np.ndarray, speed: float = 0.4, dt: float = 2.0
) -> np.ndarray:
    """Constant-speed piecewise-linear traversal sampled every dt seconds.

    Heading points along the current segment; the pose at a waypoint uses the
    heading of the segment being entered. Returns an (N, 3) array including
    both endpoints when the total length is a multiple of speed*dt.
    """
    route = np.asarray(route, dtype=float).reshape(-1, 2)
    if len(route) < 2:
        raise ConfigError("route needs at least 2 waypoints")
    if speed <= 0 or dt <= 0:
        raise ConfigError("speed and dt must be positive")
    seg = np.diff(route, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 0
    if not np.any(keep):
        raise ConfigError("route has zero total length")
    starts = route[:-1][keep]
    seg = seg[keep]
    seg_len = seg_len[keep]
    heading = np.arctan2(seg[:, 1], seg[:, 0])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]

    n_steps = int(math.floor(total / (speed * dt) + 1e-9))
    s = np.minimum(np.arange(n_steps + 1) * (speed * dt), total)
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[k]) / seg_len[k]
    poses = np.empty((len(s), 3))
    poses[:, 0] = starts[k, 0] + frac * seg[k, 0]
    poses[:, 1] = starts[k, 1] + frac * seg[k, 1]
    poses[:, 2] = heading[k]
    return poses


def simulate_odometry(gt: np.ndarray, noise: OdometryNoise, seed) -> np.ndarray:
    """Noisy per-step increments in the previous pose's frame, (N-1, 3).

    Each true increment is scaled by (1 + trans_bias_per_m) and perturbed by
    zero-mean Gaussians whose sd grows with step translation and rotation.
    Composing the result from the true start yields a drifting trajectory.
    """
    gt = np.asarray(gt, dtype=float)
    if len(gt) < 2:
        raise DataError("simulate_odometry needs at least 2 poses")
    true_inc = relative_increments(gt)
    rng = np.random.default_rng(
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    )
    g = rng.standard_normal(true_inc.shape)
    trans = np.hypot(true_inc[:, 0], true_inc[:, 1])
    sigma_xy = noise.trans_per_m * trans
    sigma_th = noise.rot_per_rad * np.abs(true_inc[:, 2]) + noise.rot_per_m * trans
    out = np.empty_like(true_inc)
    scale = 1.0 + noise.trans_bias_per_m
    out[:, 0] = true_inc[:, 0] * scale + g[:, 0] * sigma_xy
    out[:, 1] = true_inc[:, 1] * scale + g[:, 1] * sigma_xy
    out[:, 2] = true_inc[:, 2] + g[:, 2] * sigma_th
    return out


def mean_rss(world: World, prop: PropagationParams, xy: np.ndarray) -> np.ndarray:
    """Expected RSS of every AP at positions xy: (n_aps,) or (m, n_aps)."""
    xy = np.asarray(xy, dtype=float)
    single = xy.ndim == 1
    pts = xy.reshape(-1, 2)
    d = np.hypot(
        pts[:, None, 0] - world.ap_positions()[None, :, 0],
        pts[:, None, 1] - world.ap_positions()[None, :, 1],
    )
    d = np.maximum(d, prop.ref_distance_m)
    rss = world.ap_tx_powers()[None, :] - 10.0 * prop.path_loss_exponent * np.log10(
        d / prop.ref_distance_m
    )
    return rss[0] if single else rss


def simulate_scan(
    pose,
    world: World,
    prop: PropagationParams,
    device_count: int,
    epochs: int,
    seed,
    robot_id: int = 0,
    t0: float = 0.0,
    epoch_dt: float = 2.0,
    shadowing_field: ShadowingField | None = None,
) -> list[RawScan]:
    """Scans of all devices over several epochs at one pose.

    An AP enters a scan iff its instantaneous RSS clears the detection floor
    and an independent Bernoulli(1 - miss_prob) succeeds. One RawScan is
    emitted per (epoch, device), possibly with zero observations.
    """
    if device_count < 1 or epochs < 1:
        raise ConfigError("device_count and epochs must be >= 1")
    if isinstance(pose, Pose2):
        xy = np.array([pose.x, pose.y])
    else:
        xy = np.asarray(pose, dtype=float)[:2]
    rng = np.random.default_rng(
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    )
    mean = mean_rss(world, prop, xy)
    if shadowing_field is not None:
        mean = mean + shadowing_field.sample(xy)
    n_aps = len(world.aps)
    gauss = rng.standard_normal((epochs, device_count, n_aps))
    miss = rng.random((epochs, device_count, n_aps))
    ids = world.ap_ids()
    scans = []
    for e in range(epochs):
        for v in range(device_count):
            rss = mean + gauss[e, v] * prop.shadowing_sigma_dbm
            detected = (rss >= prop.detection_floor_dbm) & (miss[e, v] >= prop.miss_prob)
            obs = tuple(
                ApObservation(ids[a], float(rss[a])) for a in np.flatnonzero(detected)
            )
            scans.append(
                RawScan(
                    robot_id=robot_id,
                    device_id=v,
                    timestamp=t0 + e * epoch_dt,
                    observations=obs,
                )
            )
    return scans


def simulate_scans_along(
    poses: np.ndarray,
    times: np.ndarray,
    world: World,
    prop: PropagationParams,
    device_count: int,
    seed,
    robot_id: int = 0,
    shadowing_field: ShadowingField | None = None,
) -> list[RawScan]:
    """One scan per (epoch, device) along a trajectory; vectorized draws."""
    poses = np.asarray(poses, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(poses) != len(times):
        raise DataError("poses and times must align")
    rng = np.random.default_rng(
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    )
    mean = mean_rss(world, prop, poses[:, :2])  # (E, n_aps)
    if shadowing_field is not None:
        mean = mean + shadowing_field.sample(poses[:, :2])
    n_aps = len(world.aps)
    epochs = len(poses)
    gauss = rng.standard_normal((epochs, device_count, n_aps))
    miss = rng.random((epochs, device_count, n_aps))
    rss = mean[:, None, :] + gauss * prop.shadowing_sigma_dbm
    detected = (rss >= prop.detection_floor_dbm) & (miss >= prop.miss_prob)
    ids = world.ap_ids()
    scans = []
    for e in range(epochs):
        for v in range(device_count):
            obs = tuple(
                ApObservation(ids[a], float(rss[e, v, a]))
                for a in np.flatnonzero(detected[e, v])
            )
            scans.append(
                RawScan(
                    robot_id=robot_id,
                    device_id=v,
                    timestamp=float(times[e]),
                    observations=obs,
                )
            )
    return scans


def lawnmower_route(
    width: float, height: float, margin: float, rows: int, laps: int = 1,
    transpose: bool = False, reverse: bool = False,
) -> np.ndarray:
    """Boustrophedon coverage of the arena, repeated laps times.

    With transpose=True the sweep runs along the y axis instead; reverse=True
    starts from the far corner. Repeated laps revisit identical rows, which is
    what gives fingerprint loop closures something to find.
    """
    if rows < 2 or laps < 1:
        raise ConfigError("lawnmower_route needs rows >= 2 and laps >= 1")
    w, h = (height, width) if transpose else (width, height)
    ys = np.linspace(margin, h - margin, rows)
    pts = []
    for k, y in enumerate(ys):
        x0, x1 = (margin, w - margin) if k % 2 == 0 else (w - margin, margin)
        pts.append((x0, y))
        pts.append((x1, y))
    pts = np.array(pts)
    lap = pts[:, ::-1] if transpose else pts
    if reverse:
        lap = lap[::-1]
    route = [lap]
    for _ in range(laps - 1):
        # Return leg to the lap start, then the lap again.
        route.append(lap[-2::-1])
        route.append(lap[1:])
    return np.concatenate(route, axis=0)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to generate one multi-robot dataset from a seed."""

    seed: int = 0
    n_robots: int = 2
    extent: tuple[float, float] = (100.0, 50.0)
    n_aps: int = 40
    speed_mps: float = 0.4
    scan_hz: float = 0.5
    device_count: int = 5
    route_spacing_m: float = 10.0
    route_margin_m: float = 5.0
    route_laps: int = 2
    prop: PropagationParams = field(default_factory=PropagationParams)
    odom_noise: OdometryNoise = field(default_factory=OdometryNoise)
    spatial_shadowing_sigma_dbm: float = 0.0
    spatial_shadowing_cell_m: float = 10.0

    def __post_init__(self):
        if self.n_robots < 1:
            raise ConfigError("n_robots must be >= 1")
        if self.speed_mps <= 0 or self.scan_hz <= 0:
            raise ConfigError("speed_mps and scan_hz must be positive")
        if self.device_count < 1:
            raise ConfigError("device_count must be >= 1")

    @property
    def epoch_dt(self) -> float:
        return 1.0 / self.scan_hz


@dataclass(frozen=True)
class RobotSim:
    """Ground truth and sensing of one simulated robot."""

    robot: int
    times: np.ndarray  # (E,) scan epoch timestamps
    gt: np.ndarray  # (E, 3) ground-truth poses at epochs
    odom_increments: np.ndarray  # (E-1, 3)
    scans: tuple[RawScan, ...]

    def odometry(self) -> np.ndarray:
        """Odometry trajectory composed from the true start pose, (E, 3)."""
        return compose_increments(Pose2.from_array(self.gt[0]), self.odom_increments)


@dataclass(frozen=True)
class SimDataset:
    world: World
    config: SimulationConfig
    robots: tuple[RobotSim, ...]


def default_routes(cfg: SimulationConfig) -> list[np.ndarray]:
    """Interlocking coverage routes, one per robot.

    Even robots sweep horizontally, odd robots vertically, alternating start
    corners, so different robots cross each other's paths repeatedly. Row
    counts derive from route_spacing_m so both orientations travel a similar
    distance.
    """
    routes = []
    for r in range(cfg.n_robots):
        transpose = r % 2 == 1
        span = (cfg.extent[0] if transpose else cfg.extent[1]) - 2 * cfg.route_margin_m
        rows = max(2, round(span / cfg.route_spacing_m) + 1)
        routes.append(
            lawnmower_route(
                cfg.extent[0],
                cfg.extent[1],
                margin=cfg.route_margin_m,
                rows=rows,
                laps=cfg.route_laps,
                transpose=transpose,
                reverse=(r // 2) % 2 == 1,
            )
        )
    return routes


def generate_dataset(cfg: SimulationConfig) -> SimDataset:
    """World + per-robot trajectories, odometry and scans, all from cfg.seed."""
    world = generate_world(cfg.extent, cfg.n_aps, np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    shadowing_field = None
    if cfg.spatial_shadowing_sigma_dbm > 0:
        shadowing_field = ShadowingField(
            world,
            cfg.spatial_shadowing_sigma_dbm,
            cfg.spatial_shadowing_cell_m,
            np.random.SeedSequence(cfg.seed, spawn_key=(3,)),
        )
    robots = []
    for r, route in enumerate(default_routes(cfg)):
        gt = simulate_trajectory(route, speed=cfg.speed_mps, dt=cfg.epoch_dt)
        times = np.arange(len(gt)) * cfg.epoch_dt
        odom = simulate_odometry(
            gt, cfg.odom_noise, np.random.SeedSequence(cfg.seed, spawn_key=(1, r))
        )
        scans = simulate_scans_along(
            gt,
            times,
            world,
            cfg.prop,
            cfg.device_count,
            np.random.SeedSequence(cfg.seed, spawn_key=(2, r)),
            robot_id=r,
            shadowing_field=shadowing_field,
        )
        robots.append(
            RobotSim(
                robot=r,
                times=times,
                gt=gt,
                odom_increments=odom,
                scans=tuple(scans),
            )
        )
    return SimDataset(world=world, config=cfg, robots=tuple(robots))
