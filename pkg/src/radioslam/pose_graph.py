"""SE(2) pose-graph back end: errors, analytic Jacobians, sparse LM solver.

The state is one (x, y, theta) block per node. Updates are additive with
angle normalization after every accepted step. Normal equations are
assembled sparsely from batched per-edge Jacobians and solved with a sparse
LU factorization; everything is single-threaded and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constraints import Constraint, Distance, NodeId, PosePrior, RelativePose
from .errors import ConfigError, DataError
from .se2 import normalize_angle, normalize_angles

# Distance edges with nearly coincident endpoints have no usable direction;
# below this separation the solver substitutes the fixed unit direction (1, 0).
DEGENERATE_EPS = 1e-6
# Marquardt damping scales max(diag(H), this floor); the floor keeps variables
# that no constraint observes (e.g. theta under a lone distance edge) inert
# instead of making the system singular.
DIAG_FLOOR = 1e-8
LAMBDA_MAX = 1e10


@dataclass(frozen=True)
class LmOptions:
    max_iterations: int = 100
    lambda_init: float = 1e-4
    lambda_factor: float = 10.0
    chi2_rel_tol: float = 1e-9
    step_tol: float = 1e-9

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ConfigError("max_iterations must be positive")
        if min(self.lambda_init, self.chi2_rel_tol, self.step_tol) <= 0:
            raise ConfigError("LM tolerances and lambda_init must be positive")
        if self.lambda_factor <= 1:
            raise ConfigError("lambda_factor must exceed 1")


@dataclass(frozen=True)
class OptimizeReport:
    iterations: int
    initial_chi2: float
    final_chi2: float
    converged: bool
    reason: str  # step_tol | chi2_rel_tol | max_iterations | lambda_overflow
    lambda_final: float


@dataclass(frozen=True)
class PoseGraphProblem:
    nodes: tuple[NodeId, ...]
    initial: np.ndarray  # (N, 3)
    constraints: tuple[Constraint, ...]
    fixed: frozenset[NodeId] = frozenset()
    distance_huber_delta_m: float | None = None

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=float)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if len(set(self.nodes)) != len(self.nodes):
            raise DataError("duplicate node ids in problem")
        if initial.shape != (len(self.nodes), 3):
            raise DataError(
                f"initial must be ({len(self.nodes)}, 3), got {initial.shape}"
            )
        index = {node: k for k, node in enumerate(self.nodes)}
        object.__setattr__(self, "_index", index)
        for c in self.constraints:
            refs = (c.i, c.j) if not isinstance(c, PosePrior) else (c.i,)
            for node in refs:
                if node not in index:
                    raise DataError(f"constraint references unknown node {node}")
        for node in self.fixed:
            if node not in index:
                raise DataError(f"fixed node {node} is not in the problem")
        gauge_fixed = bool(self.fixed) or any(
            isinstance(c, PosePrior) for c in self.constraints
        )
        if not gauge_fixed:
            raise DataError("problem has no prior and no fixed node; gauge is free")

    def index(self, node: NodeId) -> int:
        return self._index[node]

    def __len__(self) -> int:
        return len(self.nodes)


def relative_pose_error(x_i, x_j, z) -> np.ndarray:
    """Residual of a relative-pose edge: measured z vs the z implied by x_i, x_j."""
    xi, yi, thi = float(x_i[0]), float(x_i[1]), float(x_i[2])
    xj, yj, thj = float(x_j[0]), float(x_j[1]), float(x_j[2])
    zx, zy, zth = float(z[0]), float(z[1]), float(z[2])
    c, s = math.cos(thi), math.sin(thi)
    dx = xj - xi
    dy = yj - yi
    w0 = (c * dx + s * dy) - zx
    w1 = (-s * dx + c * dy) - zy
    cz, sz = math.cos(zth), math.sin(zth)
    return np.array(
        [
            cz * w0 + sz * w1,
            -sz * w0 + cz * w1,
            normalize_angle(thj - thi - zth),
        ]
    )


def distance_error(x_i, x_j, d: float) -> float:
    """Residual of a scalar distance edge; orientation does not enter."""
    return math.hypot(float(x_j[0]) - float(x_i[0]), float(x_j[1]) - float(x_i[1])) - d


def prior_error(x_i, z) -> np.ndarray:
    return np.array(
        [
            float(x_i[0]) - float(z[0]),
            float(x_i[1]) - float(z[1]),
            normalize_angle(float(x_i[2]) - float(z[2])),
        ]
    )


def edge_jacobians(constraint, x_i, x_j) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians of a binary edge's error w.r.t. its two endpoints."""
    if isinstance(constraint, RelativePose):
        thi = float(x_i[2])
        zth = float(constraint.z[2])
        ci, si = math.cos(thi), math.sin(thi)
        cz, sz = math.cos(zth), math.sin(zth)
        rit = np.array([[ci, si], [-si, ci]])
        rzt = np.array([[cz, sz], [-sz, cz]])
        a = rzt @ rit
        dp = np.array([float(x_j[0]) - float(x_i[0]), float(x_j[1]) - float(x_i[1])])
        s_rit = np.array([[-si, ci], [-ci, -si]])  # d(Ri^T)/dtheta
        col = rzt @ (s_rit @ dp)
        j_i = np.zeros((3, 3))
        j_i[:2, :2] = -a
        j_i[:2, 2] = col
        j_i[2, 2] = -1.0
        j_j = np.zeros((3, 3))
        j_j[:2, :2] = a
        j_j[2, 2] = 1.0
        return j_i, j_j
    if isinstance(constraint, Distance):
        dx = float(x_j[0]) - float(x_i[0])
        dy = float(x_j[1]) - float(x_i[1])
        norm = math.hypot(dx, dy)
        if norm < DEGENERATE_EPS:
            ux, uy = 1.0, 0.0
        else:
            ux, uy = dx / norm, dy / norm
        j_i = np.array([[-ux, -uy, 0.0]])
        j_j = np.array([[ux, uy, 0.0]])
        return j_i, j_j
    raise DataError(f"no binary jacobian for constraint type {type(constraint)}")


class _Batched:
    """Dense per-family arrays plus precomputed sparse index patterns."""

    def __init__(self, problem: PoseGraphProblem):
        idx = problem._index
        rel = [c for c in problem.constraints if isinstance(c, RelativePose)]
        dist = [c for c in problem.constraints if isinstance(c, Distance)]
        pri = [c for c in problem.constraints if isinstance(c, PosePrior)]

        self.n_nodes = len(problem.nodes)
        self.rel_i = np.array([idx[c.i] for c in rel], dtype=int)
        self.rel_j = np.array([idx[c.j] for c in rel], dtype=int)
        self.rel_z = (
            np.array([c.z for c in rel], dtype=float).reshape(-1, 3)
        )
        self.rel_info = (
            np.array([c.info for c in rel], dtype=float).reshape(-1, 3, 3)
        )
        self.dist_i = np.array([idx[c.i] for c in dist], dtype=int)
        self.dist_j = np.array([idx[c.j] for c in dist], dtype=int)
        self.dist_d = np.array([c.d for c in dist], dtype=float)
        self.dist_w = np.array([c.w for c in dist], dtype=float)
        self.pri_i = np.array([idx[c.i] for c in pri], dtype=int)
        self.pri_z = (
            np.array([c.z for c in pri], dtype=float).reshape(-1, 3)
        )
        self.pri_info = (
            np.array([c.info for c in pri], dtype=float).reshape(-1, 3, 3)
        )
        self.huber = problem.distance_huber_delta_m

        # Free-variable layout: fixed nodes keep their pose and contribute no
        # columns. var_of[node] is the variable block or -1.
        self.var_of = np.full(self.n_nodes, -1, dtype=int)
        free = [k for k, node in enumerate(problem.nodes) if node not in problem.fixed]
        for slot, k in enumerate(free):
            self.var_of[k] = slot
        self.n_free = len(free)

        self.rel_pat = self._block_pattern(self.rel_i, self.rel_j)
        self.dist_pat = self._block_pattern(self.dist_i, self.dist_j)
        self.pri_pat = self._block_pattern(self.pri_i, None)

    def _block_pattern(self, nodes_i, nodes_j):
        """Static COO indices for (rows x 6) or (rows x 3) edge blocks.

        Returns (state_cols, rows_flat, cols_flat, hmask, gmask) where
        state_cols is (M, B) state-vector columns with -1 for fixed nodes.
        """
        if nodes_j is None:
            blocks = np.asarray(nodes_i)[:, None]  # (M, 1) node per column block
        else:
            blocks = np.stack([np.asarray(nodes_i), np.asarray(nodes_j)], axis=1)
        m = blocks.shape[0]
        width = blocks.shape[1] * 3
        var = self.var_of[blocks]  # (M, nblk), -1 where fixed
        cols = (var[:, :, None] * 3 + np.arange(3)[None, None, :]).reshape(m, width)
        cols[var.repeat(3, axis=1) < 0] = -1
        rows_flat = np.repeat(cols[:, :, None], width, axis=2).reshape(-1)
        cols_flat = np.repeat(cols[:, None, :], width, axis=1).reshape(-1)
        hmask = (rows_flat >= 0) & (cols_flat >= 0)
        gmask = cols.reshape(-1) >= 0
        return cols, rows_flat[hmask], cols_flat[hmask], hmask, gmask

    def rel_residuals(self, x: np.ndarray) -> np.ndarray:
        pi = x[self.rel_i]
        pj = x[self.rel_j]
        c = np.cos(pi[:, 2])
        s = np.sin(pi[:, 2])
        dx = pj[:, 0] - pi[:, 0]
        dy = pj[:, 1] - pi[:, 1]
        w0 = (c * dx + s * dy) - self.rel_z[:, 0]
        w1 = (-s * dx + c * dy) - self.rel_z[:, 1]
        cz = np.cos(self.rel_z[:, 2])
        sz = np.sin(self.rel_z[:, 2])
        e = np.empty((len(self.rel_i), 3))
        e[:, 0] = cz * w0 + sz * w1
        e[:, 1] = -sz * w0 + cz * w1
        e[:, 2] = normalize_angles(pj[:, 2] - pi[:, 2] - self.rel_z[:, 2])
        return e

    def dist_residuals(self, x: np.ndarray) -> np.ndarray:
        dx = x[self.dist_j, 0] - x[self.dist_i, 0]
        dy = x[self.dist_j, 1] - x[self.dist_i, 1]
        return np.hypot(dx, dy) - self.dist_d

    def pri_residuals(self, x: np.ndarray) -> np.ndarray:
        p = x[self.pri_i]
        e = np.empty((len(self.pri_i), 3))
        e[:, 0] = p[:, 0] - self.pri_z[:, 0]
        e[:, 1] = p[:, 1] - self.pri_z[:, 1]
        e[:, 2] = normalize_angles(p[:, 2] - self.pri_z[:, 2])
        return e

    def _dist_weights(self, e: np.ndarray) -> np.ndarray:
        if self.huber is None or len(e) == 0:
            return self.dist_w
        scale = np.minimum(1.0, self.huber / np.maximum(np.abs(e), 1e-300))
        return self.dist_w * scale

    def objective(self, x: np.ndarray) -> float:
        total = 0.0
        if len(self.rel_i):
            e = self.rel_residuals(x)
            total += float(
                np.einsum("mi,mij,mj->", e, self.rel_info, e, optimize=False)
            )
        if len(self.pri_i):
            e = self.pri_residuals(x)
            total += float(
                np.einsum("mi,mij,mj->", e, self.pri_info, e, optimize=False)
            )
        if len(self.dist_i):
            e = self.dist_residuals(x)
            if self.huber is None:
                total += float(np.dot(self.dist_w, e * e))
            else:
                ae = np.abs(e)
                quad = ae <= self.huber
                rho = np.where(
                    quad, e * e, 2.0 * self.huber * ae - self.huber**2
                )
                total += float(np.dot(self.dist_w, rho))
        return total

    def rel_jacobian_blocks(self, x: np.ndarray) -> np.ndarray:
        m = len(self.rel_i)
        pi = x[self.rel_i]
        pj = x[self.rel_j]
        ci = np.cos(pi[:, 2])
        si = np.sin(pi[:, 2])
        cz = np.cos(self.rel_z[:, 2])
        sz = np.sin(self.rel_z[:, 2])
        # a = Rz^T Ri^T, written out elementwise
        a00 = cz * ci - sz * si
        a01 = cz * si + sz * ci
        a10 = -sz * ci - cz * si
        a11 = -sz * si + cz * ci
        dx = pj[:, 0] - pi[:, 0]
        dy = pj[:, 1] - pi[:, 1]
        # q = S Ri^T dp with S = [[0, 1], [-1, 0]]
        q0 = -si * dx + ci * dy
        q1 = -ci * dx - si * dy
        col0 = cz * q0 + sz * q1
        col1 = -sz * q0 + cz * q1
        j = np.zeros((m, 3, 6))
        j[:, 0, 0] = -a00
        j[:, 0, 1] = -a01
        j[:, 1, 0] = -a10
        j[:, 1, 1] = -a11
        j[:, 0, 2] = col0
        j[:, 1, 2] = col1
        j[:, 2, 2] = -1.0
        j[:, 0, 3] = a00
        j[:, 0, 4] = a01
        j[:, 1, 3] = a10
        j[:, 1, 4] = a11
        j[:, 2, 5] = 1.0
        return j

    def dist_jacobian_blocks(self, x: np.ndarray) -> np.ndarray:
        m = len(self.dist_i)
        dx = x[self.dist_j, 0] - x[self.dist_i, 0]
        dy = x[self.dist_j, 1] - x[self.dist_i, 1]
        norm = np.hypot(dx, dy)
        bad = norm < DEGENERATE_EPS
        safe = np.where(bad, 1.0, norm)
        ux = np.where(bad, 1.0, dx / safe)
        uy = np.where(bad, 0.0, dy / safe)
        j = np.zeros((m, 1, 6))
        j[:, 0, 0] = -ux
        j[:, 0, 1] = -uy
        j[:, 0, 3] = ux
        j[:, 0, 4] = uy
        return j

    def normal_equations(self, x: np.ndarray) -> tuple[sp.csc_matrix, np.ndarray]:
        """Assemble H = J^T O J and g = J^T O e over free variables."""
        dim = 3 * self.n_free
        g = np.zeros(dim)
        rows_parts = []
        cols_parts = []
        vals_parts = []

        def accumulate(jblocks, info, e, pattern):
            cols, rflat, cflat, hmask, gmask = pattern
            h = np.einsum("mki,mkl,mlj->mij", jblocks, info, jblocks, optimize=False)
            gblk = np.einsum("mki,mkl,ml->mi", jblocks, info, e, optimize=False)
            rows_parts.append(rflat)
            cols_parts.append(cflat)
            vals_parts.append(h.reshape(-1)[hmask])
            flat_cols = cols.reshape(-1)
            np.add.at(g, flat_cols[gmask], gblk.reshape(-1)[gmask])

        if len(self.rel_i):
            e = self.rel_residuals(x)
            accumulate(self.rel_jacobian_blocks(x), self.rel_info, e, self.rel_pat)
        if len(self.pri_i):
            e = self.pri_residuals(x)
            m = len(self.pri_i)
            jblocks = np.broadcast_to(np.eye(3), (m, 3, 3)).copy().reshape(m, 3, 3)
            accumulate(jblocks, self.pri_info, e, self.pri_pat)
        if len(self.dist_i):
            e = self.dist_residuals(x)
            w = self._dist_weights(e)
            info = w.reshape(-1, 1, 1)
            accumulate(
                self.dist_jacobian_blocks(x), info, e.reshape(-1, 1), self.dist_pat
            )

        if rows_parts:
            rows = np.concatenate(rows_parts)
            cols = np.concatenate(cols_parts)
            vals = np.concatenate(vals_parts)
        else:
            rows = cols = np.zeros(0, dtype=int)
            vals = np.zeros(0)
        h = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsc()
        return h, g


def total_chi2(problem: PoseGraphProblem, poses: np.ndarray) -> float:
    """Sum of e^T O e over all constraints (scalar w e^2 for distance edges)."""
    batched = _Batched(
        PoseGraphProblem(
            nodes=problem.nodes,
            initial=problem.initial,
            constraints=problem.constraints,
            fixed=problem.fixed,
            distance_huber_delta_m=None,
        )
    )
    return batched.objective(np.asarray(poses, dtype=float))


def optimize(
    problem: PoseGraphProblem, options: LmOptions | None = None
) -> tuple[np.ndarray, OptimizeReport]:
    """Levenberg-Marquardt minimization of the stacked weighted least squares.

    Returns the optimized (N, 3) pose array (fixed nodes keep their initial
    pose) and a report. Accepted steps never increase the objective; when the
    problem's Huber width is set, the objective is the robustified one.
    """
    options = options if options is not None else LmOptions()
    batched = _Batched(problem)
    x = np.array(problem.initial, dtype=float)
    chi2 = batched.objective(x)
    initial_chi2 = chi2
    lam = options.lambda_init
    iterations = 0
    converged = False
    reason = "max_iterations"

    free_rows = np.flatnonzero(batched.var_of >= 0)

    for it in range(1, options.max_iterations + 1):
        iterations = it
        h, g = batched.normal_equations(x)
        diag = np.maximum(h.diagonal(), DIAG_FLOOR)
        accepted = False
        while True:
            damped = (h + sp.diags(lam * diag)).tocsc()
            try:
                delta = spla.splu(damped).solve(-g)
                solve_ok = bool(np.all(np.isfinite(delta)))
            except RuntimeError:
                solve_ok = False
            if solve_ok:
                if float(np.linalg.norm(delta)) < options.step_tol:
                    converged = True
                    reason = "step_tol"
                    break
                x_new = x.copy()
                steps = delta.reshape(-1, 3)
                x_new[free_rows, 0] += steps[:, 0]
                x_new[free_rows, 1] += steps[:, 1]
                x_new[free_rows, 2] = normalize_angles(
                    x_new[free_rows, 2] + steps[:, 2]
                )
                chi2_new = batched.objective(x_new)
                if chi2_new <= chi2:
                    accepted = True
                    break
            lam *= options.lambda_factor
            if lam > LAMBDA_MAX:
                return x, OptimizeReport(
                    iterations=iterations,
                    initial_chi2=initial_chi2,
                    final_chi2=chi2,
                    converged=False,
                    reason="lambda_overflow",
                    lambda_final=lam,
                )
        if converged:
            break
        if accepted:
            drop = chi2 - chi2_new
            x = x_new
            chi2 = chi2_new
            lam = max(lam / options.lambda_factor, 1e-12)
            if drop < options.chi2_rel_tol * max(chi2, 1e-300):
                converged = True
                reason = "chi2_rel_tol"
                break

    return x, OptimizeReport(
        iterations=iterations,
        initial_chi2=initial_chi2,
        final_chi2=chi2,
        converged=converged,
        reason=reason if converged else "max_iterations",
        lambda_final=lam,
    )
