"""Bit-exact file formats for datasets, models, graphs and results.

All floats are serialized with repr (shortest round-trip decimal), so a
write/read cycle reproduces the exact values and rerunning a seeded pipeline
reproduces byte-identical files. No writer embeds timestamps or hostnames.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict

import numpy as np

from .constraints import Distance, NodeId, PosePrior, RelativePose
from .errors import DataError
from .fingerprint import ApObservation, Fingerprint, RawScan
from .pose_graph import PoseGraphProblem
from .simulator import Ap, OdometryNoise, PropagationParams, SimulationConfig, World

SCANS_NAME = "robot{r}_scans.jsonl"
GT_NAME = "robot{r}_gt.csv"
ODOM_NAME = "robot{r}_odom.csv"
FINGERPRINTS_NAME = "robot{r}_fingerprints.jsonl"
WORLD_NAME = "world.json"
SIMCONFIG_NAME = "simconfig.json"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_text(path, text: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(text)


def write_json(path, obj) -> None:
    with open(path, "w", newline="") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}") from exc


# -- scans ------------------------------------------------------------------

def scan_to_obj(scan: RawScan) -> dict:
    return {
        "robot": scan.robot_id,
        "device": scan.device_id,
        "t": scan.timestamp,
        "obs": [[o.ap_id, o.rss] for o in scan.observations],
    }


def scan_from_obj(obj: dict) -> RawScan:
    try:
        return RawScan(
            robot_id=int(obj["robot"]),
            device_id=int(obj["device"]),
            timestamp=float(obj["t"]),
            observations=tuple(
                ApObservation(str(ap), float(rss)) for ap, rss in obj["obs"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed scan record {obj!r}: {exc}") from exc


def write_scans_jsonl(path, scans) -> None:
    buf = io.StringIO()
    for scan in scans:
        json.dump(scan_to_obj(scan), buf, separators=(",", ":"))
        buf.write("\n")
    write_text(path, buf.getvalue())


def read_scans_jsonl(path) -> list[RawScan]:
    scans = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON: {exc}") from exc
            scans.append(scan_from_obj(obj))
    return scans


# -- fingerprints -----------------------------------------------------------

def fingerprint_to_obj(fp: Fingerprint) -> dict:
    return {
        "robot": fp.robot_id,
        "index": fp.index,
        "t": fp.timestamp,
        "entries": {ap: [m, r] for ap, (m, r) in fp.entries.items()},
        "scan_count": fp.scan_count,
    }


def fingerprint_from_obj(obj: dict) -> Fingerprint:
    try:
        return Fingerprint(
            robot_id=int(obj["robot"]),
            index=int(obj["index"]),
            timestamp=float(obj["t"]),
            entries={
                str(ap): (float(m), float(r)) for ap, (m, r) in obj["entries"].items()
            },
            scan_count=int(obj["scan_count"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed fingerprint record: {exc}") from exc


def write_fingerprints_jsonl(path, fingerprints) -> None:
    buf = io.StringIO()
    for fp in fingerprints:
        json.dump(fingerprint_to_obj(fp), buf, separators=(",", ":"))
        buf.write("\n")
    write_text(path, buf.getvalue())


def read_fingerprints_jsonl(path) -> list[Fingerprint]:
    out = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON: {exc}") from exc
            out.append(fingerprint_from_obj(obj))
    return out


# -- trajectories -----------------------------------------------------------

def write_pose_csv(path, times, poses) -> None:
    """`t,x,y,theta` rows; used for ground truth and estimates alike."""
    poses = np.asarray(poses, dtype=float)
    buf = io.StringIO()
    buf.write("t,x,y,theta\n")
    for t, row in zip(times, poses):
        buf.write(f"{_fmt(t)},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")
    write_text(path, buf.getvalue())


def read_pose_csv(path) -> tuple[np.ndarray, np.ndarray]:
    times = []
    poses = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["t", "x", "y", "theta"]:
            raise DataError(f"{path}: expected header t,x,y,theta, got {header}")
        for row in reader:
            try:
                times.append(float(row[0]))
                poses.append((float(row[1]), float(row[2]), float(row[3])))
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad row {row!r}: {exc}") from exc
    return np.array(times), np.array(poses, dtype=float).reshape(-1, 3)


def write_odometry_csv(path, times, increments) -> None:
    """`t,dx,dy,dtheta` rows; t is the timestamp of the step's end pose."""
    increments = np.asarray(increments, dtype=float)
    buf = io.StringIO()
    buf.write("t,dx,dy,dtheta\n")
    for t, row in zip(times, increments):
        buf.write(f"{_fmt(t)},{_fmt(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")
    write_text(path, buf.getvalue())


def read_odometry_csv(path) -> tuple[np.ndarray, np.ndarray]:
    times = []
    incs = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["t", "dx", "dy", "dtheta"]:
            raise DataError(f"{path}: expected header t,dx,dy,dtheta, got {header}")
        for row in reader:
            try:
                times.append(float(row[0]))
                incs.append((float(row[1]), float(row[2]), float(row[3])))
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad row {row!r}: {exc}") from exc
    return np.array(times), np.array(incs, dtype=float).reshape(-1, 3)


def write_estimate_csv(path, rows) -> None:
    """`robot,node,t,x,y,theta` rows for the optimized trajectory."""
    buf = io.StringIO()
    buf.write("robot,node,t,x,y,theta\n")
    for robot, node, t, x, y, theta in rows:
        buf.write(
            f"{robot},{node},{_fmt(t)},{_fmt(x)},{_fmt(y)},{_fmt(theta)}\n"
        )
    write_text(path, buf.getvalue())


def read_estimate_csv(path) -> list[tuple[int, int, float, float, float, float]]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["robot", "node", "t", "x", "y", "theta"]:
            raise DataError(f"{path}: unexpected estimate header {header}")
        for row in reader:
            try:
                out.append(
                    (
                        int(row[0]),
                        int(row[1]),
                        float(row[2]),
                        float(row[3]),
                        float(row[4]),
                        float(row[5]),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad row {row!r}: {exc}") from exc
    return out


# -- world and dataset directories ------------------------------------------

def world_to_obj(world: World) -> dict:
    return {
        "width": world.width,
        "height": world.height,
        "aps": [{"x": ap.x, "y": ap.y, "tx": ap.tx_power_dbm} for ap in world.aps],
    }


def world_from_obj(obj: dict) -> World:
    try:
        return World(
            width=float(obj["width"]),
            height=float(obj["height"]),
            aps=tuple(
                Ap(float(a["x"]), float(a["y"]), float(a["tx"])) for a in obj["aps"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed world JSON: {exc}") from exc


def write_world_json(path, world: World) -> None:
    write_json(path, world_to_obj(world))


def read_world_json(path) -> World:
    return world_from_obj(read_json(path))


def write_simconfig_json(path, cfg: SimulationConfig) -> None:
    write_json(path, asdict(cfg))


def read_simconfig_json(path) -> SimulationConfig:
    obj = read_json(path)
    try:
        obj["prop"] = PropagationParams(**obj["prop"])
        obj["odom_noise"] = OdometryNoise(**obj["odom_noise"])
        obj["extent"] = tuple(obj["extent"])
        return SimulationConfig(**obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed simulation config: {exc}") from exc


def dataset_robot_ids(directory) -> list[int]:
    """Robot ids present in a dataset directory, by scan file names."""
    ids = []
    for name in sorted(os.listdir(directory)):
        if name.startswith("robot") and name.endswith("_scans.jsonl"):
            ids.append(int(name[len("robot"):-len("_scans.jsonl")]))
    if not ids:
        raise DataError(f"no robot*_scans.jsonl files under {directory}")
    return sorted(ids)


# -- pose-graph text format ---------------------------------------------------

def _info_upper(info: np.ndarray) -> list[float]:
    return [info[0, 0], info[0, 1], info[0, 2], info[1, 1], info[1, 2], info[2, 2]]


def _info_from_upper(v: list[float]) -> np.ndarray:
    i11, i12, i13, i22, i23, i33 = v
    return np.array([[i11, i12, i13], [i12, i22, i23], [i13, i23, i33]])


def write_graph(path, problem: PoseGraphProblem, poses: np.ndarray | None = None) -> None:
    """Pose-graph text format: node map comments, vertices, then edges.

    `# node <id> <robot> <t>` comments preserve the (robot, t) identity of
    each integer vertex id so a reload reconstructs the same problem; foreign
    readers can ignore them and still see standard VERTEX_SE2/EDGE_SE2 lines.
    """
    poses = problem.initial if poses is None else np.asarray(poses, dtype=float)
    if poses.shape != problem.initial.shape:
        raise DataError("poses array does not match the problem's node count")
    index = {node: k for k, node in enumerate(problem.nodes)}
    buf = io.StringIO()
    for k, node in enumerate(problem.nodes):
        buf.write(f"# node {k} {node.robot} {node.t}\n")
    if problem.distance_huber_delta_m is not None:
        buf.write(f"# huber {_fmt(problem.distance_huber_delta_m)}\n")
    for k, node in enumerate(problem.nodes):
        x, y, theta = poses[k]
        buf.write(f"VERTEX_SE2 {k} {_fmt(x)} {_fmt(y)} {_fmt(theta)}\n")
    for node in sorted(problem.fixed):
        buf.write(f"FIX {index[node]}\n")
    for c in problem.constraints:
        if isinstance(c, PosePrior):
            vals = " ".join(_fmt(v) for v in (*c.z, *_info_upper(c.info)))
            buf.write(f"PRIOR_SE2 {index[c.i]} {vals}\n")
        elif isinstance(c, RelativePose):
            vals = " ".join(_fmt(v) for v in (*c.z, *_info_upper(c.info)))
            buf.write(f"EDGE_SE2 {index[c.i]} {index[c.j]} {vals}\n")
        elif isinstance(c, Distance):
            buf.write(
                f"EDGE_RANGE {index[c.i]} {index[c.j]} {_fmt(c.d)} {_fmt(c.w)}\n"
            )
        else:
            raise DataError(f"cannot serialize constraint {c!r}")
    write_text(path, buf.getvalue())


def read_graph(path) -> PoseGraphProblem:
    """Parse the pose-graph text format back into a problem.

    Vertex values become the problem's initial poses. Files without node-map
    comments get NodeId(robot=0, t=vertex id).
    """
    node_map: dict[int, NodeId] = {}
    vertices: dict[int, tuple[float, float, float]] = {}
    fixed_ids: list[int] = []
    constraints = []
    huber = None

    def node_of(k: int) -> NodeId:
        return node_map.get(k, NodeId(0, k))

    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "#":
                    if len(parts) >= 5 and parts[1] == "node":
                        node_map[int(parts[2])] = NodeId(int(parts[3]), int(parts[4]))
                    elif len(parts) >= 3 and parts[1] == "huber":
                        huber = float(parts[2])
                    continue
                tag = parts[0]
                if tag == "VERTEX_SE2":
                    vertices[int(parts[1])] = (
                        float(parts[2]),
                        float(parts[3]),
                        float(parts[4]),
                    )
                elif tag == "FIX":
                    fixed_ids.append(int(parts[1]))
                elif tag == "PRIOR_SE2":
                    constraints.append(
                        (
                            "prior",
                            int(parts[1]),
                            None,
                            tuple(float(p) for p in parts[2:5]),
                            [float(p) for p in parts[5:11]],
                        )
                    )
                elif tag == "EDGE_SE2":
                    constraints.append(
                        (
                            "rel",
                            int(parts[1]),
                            int(parts[2]),
                            tuple(float(p) for p in parts[3:6]),
                            [float(p) for p in parts[6:12]],
                        )
                    )
                elif tag == "EDGE_RANGE":
                    constraints.append(
                        (
                            "range",
                            int(parts[1]),
                            int(parts[2]),
                            (float(parts[3]),),
                            [float(parts[4])],
                        )
                    )
                else:
                    raise DataError(f"{path}:{line_no}: unknown record {tag!r}")
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}:{line_no}: bad line {line!r}: {exc}") from exc

    if not vertices:
        raise DataError(f"{path}: graph has no vertices")
    ids = sorted(vertices)
    nodes = tuple(node_of(k) for k in ids)
    initial = np.array([vertices[k] for k in ids], dtype=float)

    built = []
    for kind, i, j, z, info in constraints:
        if kind == "prior":
            built.append(PosePrior(i=node_of(i), z=z, info=_info_from_upper(info)))
        elif kind == "rel":
            built.append(
                RelativePose(
                    i=node_of(i), j=node_of(j), z=z, info=_info_from_upper(info)
                )
            )
        else:
            built.append(Distance(i=node_of(i), j=node_of(j), d=z[0], w=info[0]))
    return PoseGraphProblem(
        nodes=nodes,
        initial=initial,
        constraints=tuple(built),
        fixed=frozenset(node_of(k) for k in fixed_ids),
        distance_huber_delta_m=huber,
    )


# -- sweep results ------------------------------------------------------------

SWEEP_HEADER = "measure,nu_s,nu_p,mean_err,rmse,max_err,converged"


def write_sweep_csv(path, cells) -> None:
    """cells: iterable of (measure, nu_s, nu_p, mean_err, rmse, max_err, converged)."""
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    for measure, nu_s, nu_p, mean_err, rmse, max_err, converged in cells:
        buf.write(
            f"{measure},{_fmt(nu_s)},{_fmt(nu_p)},{_fmt(mean_err)},"
            f"{_fmt(rmse)},{_fmt(max_err)},{int(bool(converged))}\n"
        )
    write_text(path, buf.getvalue())


def read_sweep_csv(path) -> list[tuple]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SWEEP_HEADER.split(","):
            raise DataError(f"{path}: unexpected sweep header {header}")
        for row in reader:
            try:
                out.append(
                    (
                        row[0],
                        float(row[1]),
                        float(row[2]),
                        float(row[3]),
                        float(row[4]),
                        float(row[5]),
                        bool(int(row[6])),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}: bad row {row!r}: {exc}") from exc
    return out


def write_dataset(directory, dataset) -> None:
    """Write a simulated dataset as the standard file layout."""
    os.makedirs(directory, exist_ok=True)
    write_world_json(os.path.join(directory, WORLD_NAME), dataset.world)
    write_simconfig_json(os.path.join(directory, SIMCONFIG_NAME), dataset.config)
    for robot in dataset.robots:
        r = robot.robot
        write_pose_csv(
            os.path.join(directory, GT_NAME.format(r=r)), robot.times, robot.gt
        )
        write_odometry_csv(
            os.path.join(directory, ODOM_NAME.format(r=r)),
            robot.times[1:],
            robot.odom_increments,
        )
        write_scans_jsonl(
            os.path.join(directory, SCANS_NAME.format(r=r)), robot.scans
        )
