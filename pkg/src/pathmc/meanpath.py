"""Mean trajectory integration and drift linearization about it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelEvaluationError
from .grid import TimeGrid
from .models import ModelSpec


@dataclass(frozen=True)
class MeanTrajectory:
    """Expansion path: states at nodes plus the interval midpoints."""

    states: np.ndarray  # (M+1, d)
    midpoint_states: np.ndarray  # (M, d), entry n is the state at t_{n+1/2}

    def __post_init__(self):
        if not np.all(np.isfinite(self.states)) or not np.all(
            np.isfinite(self.midpoint_states)
        ):
            raise ModelEvaluationError("mean trajectory contains non-finite values")


@dataclass(frozen=True)
class LinearizedDrift:
    """Node Jacobians and midpoint drift data of the linearized system.

    ``affine_mid[n]`` is the interval-constant part of the linearization:
    the midpoint drift minus the average of the two node-linear terms.  It
    vanishes identically when the expansion path is zero or piecewise
    linear under a linear drift.
    """

    jacobians: np.ndarray  # (M+1, d, d)
    drift_mid: np.ndarray  # (M, d), drift evaluated at midpoints
    affine_mid: np.ndarray  # (M, d)


def integrate_mean_path(
    model: ModelSpec, initial, grid: TimeGrid
) -> MeanTrajectory:
    """Integrate ``dx/dt = drift(x) - grad(mean_path_potential)(x) / 2``.

    Classical fourth-order Runge-Kutta with sub-steps of half the node
    spacing, so the midpoint states needed by the linearized action come
    out of the integration directly instead of being interpolated.
    """
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (model.dimension,):
        raise ValueError(
            f"initial condition must have shape ({model.dimension},), got {initial.shape}"
        )

    def rhs(x):
        return np.asarray(model.drift(x), dtype=float) - 0.5 * np.asarray(
            model.mean_path_potential_gradient(x), dtype=float
        )

    h = grid.step_dt / 2.0
    substeps = 2 * grid.final_node
    states = np.empty((substeps + 1, model.dimension))
    states[0] = initial
    x = initial
    for i in range(substeps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise ModelEvaluationError(
                f"mean path integration blew up near node {(i + 1) / 2:g} "
                "(reduce step_dt or change the initial condition)"
            )
        states[i + 1] = x
    return MeanTrajectory(states=states[0::2], midpoint_states=states[1::2])


def linearize_drift(model: ModelSpec, trajectory: MeanTrajectory) -> LinearizedDrift:
    """Evaluate drift Jacobians at the nodes and the drift at midpoints."""
    nodes = trajectory.states
    mids = trajectory.midpoint_states
    n_nodes = nodes.shape[0]
    d = model.dimension
    jac = np.empty((n_nodes, d, d))
    for n in range(n_nodes):
        jac[n] = np.asarray(model.drift_jacobian(nodes[n]), dtype=float)
    if model.vectorized:
        drift_mid = np.asarray(model.drift(mids), dtype=float)
    else:
        drift_mid = np.stack([np.asarray(model.drift(s), float) for s in mids])
    lin_avg = 0.5 * (
        np.einsum("nij,nj->ni", jac[1:], nodes[1:])
        + np.einsum("nij,nj->ni", jac[:-1], nodes[:-1])
    )
    return LinearizedDrift(
        jacobians=jac, drift_mid=drift_mid, affine_mid=drift_mid - lin_avg
    )
