"""Exact discretized path action and its finest-level quadratic models.

Two quadratic approximations are provided:

* ``linearized`` -- linearize the drift about an expansion path, freeze the
  metric at the origin and replace the potential by its quadratic form.
  Coefficients are affine in absolute coordinates.
* ``taylor`` -- second-order Taylor expansion of the exact discretized
  action about the expansion path.  Coefficients act on displacements from
  that path; the :class:`QuadraticLevelAction` carries the path as its
  ``offset`` so downstream code never needs to know which variant built it.

Both produce the same block-tridiagonal structure: per-node precision
blocks ``G``, nearest-neighbour couplings, and linear terms ``K``.  The
cross coupling for the node pair ``(s, s+1)`` is stored once, as the matrix
``C`` of the bilinear term ``e_s . C e_{s+1}``; the per-node views
``H_plus`` / ``H_minus`` used by the marginalization recursion are derived
from it (``H_minus`` of node ``l`` is the transpose of the pair matrix of
``(l-1, l)``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ModelEvaluationError, NotPositiveDefiniteError
from .grid import TimeGrid
from .meanpath import LinearizedDrift, MeanTrajectory
from .models import ModelSpec


# ---------------------------------------------------------------------------
# Exact action


def _node_values(model: ModelSpec, func, paths):
    """Evaluate a model function at every node of a batch of paths."""
    if model.vectorized:
        return np.asarray(func(paths), dtype=float)
    flat = paths.reshape(-1, paths.shape[-1])
    vals = [np.asarray(func(s), dtype=float) for s in flat]
    out = np.stack(vals)
    return out.reshape(paths.shape[:-1] + out.shape[1:])


def exact_action_batch(paths, model: ModelSpec, grid: TimeGrid):
    """Exact action for a batch of paths with shape ``(..., M+1, d)``."""
    paths = np.asarray(paths, dtype=float)
    if paths.shape[-2] != grid.node_count or paths.shape[-1] != model.dimension:
        raise ValueError(
            f"paths must have shape (..., {grid.node_count}, {model.dimension})"
        )
    dt = grid.step_dt
    theta = _node_values(model, model.drift, paths)
    disp_rate = (paths[..., 1:, :] - paths[..., :-1, :]) / dt
    residual = disp_rate - 0.5 * (theta[..., 1:, :] + theta[..., :-1, :])
    if model.constant_metric:
        g0 = np.asarray(model.metric(np.zeros(model.dimension)), dtype=float)
        per_node = np.einsum("...ni,ij,...nj->...n", residual, g0, residual)
    else:
        g = _node_values(model, model.metric, paths)
        h = 0.5 * (g[..., 1:, :, :] + g[..., :-1, :, :])
        per_node = np.einsum("...ni,...nij,...nj->...n", residual, h, residual)
    if not model.zero_potential:
        per_node = per_node + _node_values(
            model, model.potential, paths[..., 1:, :]
        )
    value = grid.prefactor_tau * dt * np.sum(per_node, axis=-1)
    if not np.all(np.isfinite(value)):
        bad = ~np.isfinite(per_node)
        node = int(np.argmax(np.any(bad, axis=tuple(range(bad.ndim - 1))))) + 1
        raise ModelEvaluationError(
            f"exact action non-finite; first bad contribution at node {node}"
        )
    return value


def exact_action(path, model: ModelSpec, grid: TimeGrid) -> float:
    """Exact discretized action of one path (nodes ``0..M``)."""
    path = np.asarray(path, dtype=float)
    return float(exact_action_batch(path[None], model, grid)[0])


# ---------------------------------------------------------------------------
# Quadratic level actions


@dataclass(frozen=True)
class QuadraticLevelAction:
    """Quadratic form over the nodes still random at one level.

    ``interior_nodes`` lists every interior node active at this level (all
    multiples of the level spacing); ``sampled_mask`` marks the subset that
    is conditionally sampled (and later integrated out) at this level.
    ``H_plus``/``H_minus`` are aligned with the sampled subset and couple a
    sampled node to its right/left active neighbour.  The endpoint carries
    its own block; ``end_origin_coupling`` (level 0 only) couples it to the
    fixed initial node.  All coordinates are displacements from ``offset``.
    """

    level: int
    levels_total: int
    dimension: int
    offset: np.ndarray  # (M+1, d)
    interior_nodes: np.ndarray  # (n_act,) sorted node indices
    G_interior: np.ndarray  # (n_act, d, d)
    K_interior: np.ndarray  # (n_act, d)
    sampled_mask: np.ndarray  # (n_act,) bool
    H_plus: np.ndarray  # (n_samp, d, d)
    H_minus: np.ndarray  # (n_samp, d, d)
    G_end: np.ndarray  # (d, d)
    K_end: np.ndarray  # (d,)
    end_origin_coupling: Optional[np.ndarray] = None  # (d, d), level 0 only
    cross: Optional[np.ndarray] = None  # (M, d, d), finest level only

    @property
    def spacing(self) -> int:
        return 2 ** (self.levels_total - self.level) if self.level >= 1 else 0

    @property
    def sampled_nodes(self):
        return self.interior_nodes[self.sampled_mask]

    @property
    def survivor_nodes(self):
        return self.interior_nodes[~self.sampled_mask]

    def _pos(self, node):
        idx = np.searchsorted(self.interior_nodes, node)
        if idx >= len(self.interior_nodes) or self.interior_nodes[idx] != node:
            raise KeyError(f"node {node} is not active at level {self.level}")
        return idx

    def G_at(self, node):
        if node == 2**self.levels_total:
            return self.G_end
        return self.G_interior[self._pos(node)]

    def K_at(self, node):
        if node == 2**self.levels_total:
            return self.K_end
        return self.K_interior[self._pos(node)]

    def coefficients_at(self, node):
        """(G, H_plus, H_minus, K) of a node sampled at this level."""
        idx = self._pos(node)
        if not self.sampled_mask[idx]:
            raise KeyError(f"node {node} is not sampled at level {self.level}")
        samp_idx = int(np.count_nonzero(self.sampled_mask[: idx + 1]) - 1)
        return (
            self.G_interior[idx],
            self.H_plus[samp_idx],
            self.H_minus[samp_idx],
            self.K_interior[idx],
        )


def _symmetrize(mats):
    return 0.5 * (mats + np.swapaxes(mats, -1, -2))


def _check_positive_definite(action: QuadraticLevelAction):
    for idx, node in enumerate(action.interior_nodes):
        try:
            np.linalg.cholesky(action.G_interior[idx])
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(action.level, int(node), str(exc)) from None
    try:
        np.linalg.cholesky(action.G_end)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            action.level, 2**action.levels_total, str(exc)
        ) from None


def _finest_level_from_blocks(
    G_interior, K_interior, cross, G_end, K_end, offset, grid: TimeGrid
) -> QuadraticLevelAction:
    """Assemble the finest level from interior blocks and pair couplings."""
    m = grid.levels
    final = grid.final_node
    d = G_interior.shape[-1]
    interior = np.arange(1, final)
    sampled_mask = interior % 2 == 1
    odd = interior[sampled_mask]
    H_plus = cross[odd]  # pair (l, l+1) as seen from l
    H_minus = np.swapaxes(cross[odd - 1], -1, -2)  # pair (l-1, l) as seen from l
    action = QuadraticLevelAction(
        level=m,
        levels_total=m,
        dimension=d,
        offset=np.asarray(offset, dtype=float),
        interior_nodes=interior,
        G_interior=_symmetrize(G_interior),
        K_interior=K_interior,
        sampled_mask=sampled_mask,
        H_plus=H_plus,
        H_minus=H_minus,
        G_end=_symmetrize(G_end),
        K_end=K_end,
        cross=cross,
    )
    _check_positive_definite(action)
    return action


def linearized_coefficients(
    model: ModelSpec, lin: LinearizedDrift, grid: TimeGrid
) -> QuadraticLevelAction:
    """Finest-level quadratic action from drift linearization.

    The metric is frozen at the origin and the potential replaced by the
    model's quadratic form.  The potential weight at the endpoint follows
    the exact action's right-endpoint rule so that the approximation stays
    exact (up to a constant) whenever the exact action itself is quadratic.
    """
    d = model.dimension
    dt = grid.step_dt
    tau = grid.prefactor_tau
    final = grid.final_node
    if lin.jacobians.shape[0] != grid.node_count:
        raise ValueError("linearized drift does not match the grid")

    g0 = np.asarray(model.metric(np.zeros(d)), dtype=float)
    phi = model.quad_potential
    eye = np.eye(d)
    A = lin.jacobians
    affine = lin.affine_mid

    # Per-interval coefficient matrices of the residual in (left, right) node
    # values: residual_s = left_coef[s] @ x_s + right_coef[s] @ x_{s+1} + const.
    left_coef = -(eye / dt + 0.5 * A[:-1])  # (M, d, d)
    right_coef = eye / dt - 0.5 * A[1:]  # (M, d, d)

    scale = 2.0 * tau * dt
    cross = scale * np.einsum("sba,bc,scd->sad", left_coef, g0, right_coef)
    quad_left = scale * np.einsum("sba,bc,scd->sad", left_coef, g0, left_coef)
    quad_right = scale * np.einsum("sba,bc,scd->sad", right_coef, g0, right_coef)

    G_interior = quad_left[1:] + quad_right[:-1] + scale * phi
    G_end = quad_right[final - 1] + scale * phi

    lin_left = scale * np.einsum("sba,bc,sc->sa", left_coef, g0, affine)
    lin_right = scale * np.einsum("sba,bc,sc->sa", right_coef, g0, affine)
    K_interior = -(lin_left[1:] + lin_right[:-1])
    K_end = -lin_right[final - 1]

    offset = np.zeros((grid.node_count, d))
    return _finest_level_from_blocks(
        G_interior, K_interior, cross, G_end, K_end, offset, grid
    )


@dataclass(frozen=True)
class TaylorTensors:
    """Per-node ingredients of the second-order action expansion."""

    residual: np.ndarray  # (M, d), entry n-1 is T(n)
    h: np.ndarray  # (M, d, d), averaged metric per summand
    G_plus: np.ndarray  # (M+1, d, d)
    G_minus: np.ndarray  # (M+1, d, d)
    metric_grad: np.ndarray  # (M+1, d, d, d)
    drift_hess: np.ndarray  # (M+1, d, d, d)
    metric_hess: np.ndarray  # (M+1, d, d, d, d)
    potential_grad: np.ndarray  # (M+1, d)
    potential_hess: np.ndarray  # (M+1, d, d)


@dataclass(frozen=True)
class TaylorExpansion:
    """Finest-level coefficients plus the expansion-point data."""

    coefficients: QuadraticLevelAction
    reference_value: float  # exact action at the expansion path
    gradient: np.ndarray  # (M, d), d(action)/d(node n), n = 1..M
    tensors: TaylorTensors


def taylor_coefficients(
    model: ModelSpec, trajectory: MeanTrajectory, grid: TimeGrid
) -> TaylorExpansion:
    """Second-order expansion of the exact action about a trajectory.

    Returns the level coefficients in displacement coordinates (the
    trajectory is stored as the offset), together with the exact action and
    its gradient at the expansion path.  For an exactly quadratic action the
    expansion reproduces the action identically, which is what makes every
    finest-level proposal acceptable in that case.
    """
    d = model.dimension
    dt = grid.step_dt
    alpha = grid.prefactor_tau * dt
    final = grid.final_node
    xs = np.asarray(trajectory.states, dtype=float)
    if xs.shape != (grid.node_count, d):
        raise ValueError("trajectory does not match the grid")

    theta = _node_values(model, model.drift, xs)
    jac = np.stack(
        [np.asarray(model.drift_jacobian(x), dtype=float) for x in xs]
    )
    g = np.stack([np.asarray(model.metric(x), dtype=float) for x in xs])
    R = np.stack([np.asarray(model.metric_gradient(x), dtype=float) for x in xs])
    V = np.stack([np.asarray(model.drift_hessian(x), dtype=float) for x in xs])
    U = np.stack([np.asarray(model.metric_hessian(x), dtype=float) for x in xs])
    psi_grad = np.stack(
        [np.asarray(model.potential_gradient(x), dtype=float) for x in xs]
    )
    psi_hess = np.stack(
        [np.asarray(model.potential_hessian(x), dtype=float) for x in xs]
    )

    eye = np.eye(d)
    Gp = 2.0 * eye / dt - jac  # (M+1, d, d)
    Gm = -2.0 * eye / dt - jac
    T = (xs[1:] - xs[:-1]) / dt - 0.5 * (theta[1:] + theta[:-1])  # (M, d)
    h = 0.5 * (g[1:] + g[:-1])  # (M, d, d)
    w = np.einsum("nij,nj->ni", h, T)  # (M, d)

    def quad_R(Rn, Ta):
        return 0.5 * np.einsum("nikl,nk,nl->ni", Rn, Ta, Ta)

    def cross_GR(Gx, Rn, Ta):
        return 0.5 * np.einsum("nki,njkl,nl->nij", Gx, Rn, Ta)

    # Own-summand pieces at nodes 1..M (summand n seen from node n).
    own_grad = (
        np.einsum("nki,nk->ni", Gp[1:], w)
        + quad_R(R[1:], T)
        + psi_grad[1:]
    )
    Q_own = cross_GR(Gp[1:], R[1:], T)
    own_D = (
        -np.einsum("nkij,nk->nij", V[1:], w)
        + Q_own
        + np.swapaxes(Q_own, -1, -2)
        + 0.5 * np.einsum("nki,nkl,nlj->nij", Gp[1:], h, Gp[1:])
        + 0.5 * np.einsum("nijkl,nk,nl->nij", U[1:], T, T)
        + psi_hess[1:]
    )

    # Next-summand pieces at nodes 1..M-1 (summand n+1 seen from node n).
    nxt_grad = np.einsum("nki,nk->ni", Gm[1:final], w[1:]) + quad_R(
        R[1:final], T[1:]
    )
    Q_nxt = cross_GR(Gm[1:final], R[1:final], T[1:])
    nxt_D = (
        -np.einsum("nkij,nk->nij", V[1:final], w[1:])
        + Q_nxt
        + np.swapaxes(Q_nxt, -1, -2)
        + 0.5 * np.einsum("nki,nkl,nlj->nij", Gm[1:final], h[1:], Gm[1:final])
        + 0.5 * np.einsum("nijkl,nk,nl->nij", U[1:final], T[1:], T[1:])
    )

    gradient = alpha * own_grad
    gradient[: final - 1] += alpha * nxt_grad
    hess_diag = alpha * own_D
    hess_diag[: final - 1] += alpha * nxt_D

    # Off-diagonal Hessian blocks: pair (s, s+1), s = 0..M-1.
    cross = alpha * (
        cross_GR(Gm[:final], R[1:], T)
        + 0.5 * np.einsum("ski,skl,slj->sij", Gm[:final], h, Gp[1:])
        + 0.5 * np.einsum("sikl,skj,sl->sij", R[:final], Gp[1:], T)
    )

    coeffs = _finest_level_from_blocks(
        G_interior=hess_diag[: final - 1],
        K_interior=gradient[: final - 1],
        cross=cross,
        G_end=hess_diag[final - 1],
        K_end=gradient[final - 1],
        offset=xs.copy(),
        grid=grid,
    )
    reference = float(exact_action_batch(xs[None], model, grid)[0])
    tensors = TaylorTensors(
        residual=T,
        h=h,
        G_plus=Gp,
        G_minus=Gm,
        metric_grad=R,
        drift_hess=V,
        metric_hess=U,
        potential_grad=psi_grad,
        potential_hess=psi_hess,
    )
    return TaylorExpansion(
        coefficients=coeffs,
        reference_value=reference,
        gradient=gradient,
        tensors=tensors,
    )


# ---------------------------------------------------------------------------
# Quadratic form evaluation (finest level)


def quadratic_action_batch(coeffs: QuadraticLevelAction, disp):
    """Finest-level quadratic form on displacement paths ``(B, M+1, d)``.

    Node 0 enters through the ``(0, 1)`` pair coupling only; its pure
    quadratic piece is a path-independent constant and is dropped, as are
    all other constants (only action differences matter downstream).
    """
    if coeffs.level != coeffs.levels_total:
        raise ValueError(
            f"quadratic action value requires the finest level "
            f"({coeffs.levels_total}), got level {coeffs.level}"
        )
    disp = np.asarray(disp, dtype=float)
    e_int = disp[:, coeffs.interior_nodes]
    value = 0.5 * np.einsum(
        "bni,nij,bnj->b", e_int, coeffs.G_interior, e_int
    ) + np.einsum("bni,ni->b", e_int, coeffs.K_interior)
    value += np.einsum("bsi,sij,bsj->b", disp[:, :-1], coeffs.cross, disp[:, 1:])
    e_end = disp[:, -1]
    value += 0.5 * np.einsum(
        "bi,ij,bj->b", e_end, coeffs.G_end, e_end
    ) + e_end @ coeffs.K_end
    return value


def quadratic_action_value(coeffs: QuadraticLevelAction, path) -> float:
    """Quadratic level action of one path in absolute coordinates."""
    path = np.asarray(path, dtype=float)
    disp = path - coeffs.offset
    return float(quadratic_action_batch(coeffs, disp[None])[0])
