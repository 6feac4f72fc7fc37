"""System interface: drift, metric, potentials and their derivatives.

A model is a bundle of pure functions of the slow-mode coordinate vector.
Derivatives are supplied analytically; :func:`validate_derivatives` checks
them against central finite differences so a wrong Jacobian or Hessian is
caught before it silently biases a sampling run.

Tensor index conventions (``d`` is the state dimension):

* ``drift_jacobian(x)[i, j]``   = d drift_i / d x_j
* ``drift_hessian(x)[k, i, j]`` = d^2 drift_k / d x_i d x_j
* ``metric_gradient(x)[i]``     = d metric / d x_i           (shape (d, d, d))
* ``metric_hessian(x)[i, j]``   = d^2 metric / d x_i d x_j   (shape (d, d, d, d))
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ModelEvaluationError

Array = np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of the sampled system.

    All callables must be pure; the sampler evaluates them concurrently.
    When ``vectorized`` is true they must accept arrays with leading batch
    dimensions (shape ``(..., d)``) and broadcast accordingly; this is what
    makes batched action evaluation cheap.

    ``quad_potential`` is the symmetric non-negative-definite matrix ``phi``
    used by the linearized action variant as the quadratic stand-in for the
    potential; ``mean_path_potential`` is the (separate) potential entering
    the mean-trajectory equation.
    """

    name: str
    dimension: int
    drift: Callable[[Array], Array]
    drift_jacobian: Callable[[Array], Array]
    drift_hessian: Callable[[Array], Array]
    metric: Callable[[Array], Array]
    metric_gradient: Callable[[Array], Array]
    metric_hessian: Callable[[Array], Array]
    potential: Callable[[Array], float]
    potential_gradient: Callable[[Array], Array]
    potential_hessian: Callable[[Array], Array]
    mean_path_potential: Callable[[Array], float]
    mean_path_potential_gradient: Callable[[Array], Array]
    quad_potential: Array
    vectorized: bool = False
    constant_metric: bool = False
    zero_potential: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError(f"model dimension must be >= 1, got {self.dimension}")
        phi = np.asarray(self.quad_potential, dtype=float)
        if phi.shape != (self.dimension, self.dimension):
            raise ConfigError(
                f"quad_potential must be ({self.dimension}, {self.dimension})"
            )
        if not np.allclose(phi, phi.T, atol=1e-12):
            raise ConfigError("quad_potential must be symmetric")
        if np.linalg.eigvalsh(phi).min() < -1e-10:
            raise ConfigError("quad_potential must be non-negative definite")
        object.__setattr__(self, "quad_potential", phi)


def _check_finite(value, func_name, point):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise ModelEvaluationError(
            f"{func_name} returned a non-finite value at probe point {point!r}"
        )
    return value


def _central(f, point, eps, name):
    """Central first differences of f along every coordinate; f may return
    a scalar or an array.  Output has the derivative axis first."""
    d = len(point)
    cols = []
    for i in range(d):
        step = np.zeros(d)
        step[i] = eps
        fp = _check_finite(f(point + step), name, point + step)
        fm = _check_finite(f(point - step), name, point - step)
        cols.append((fp - fm) / (2.0 * eps))
    return np.stack(cols, axis=0)


def _second_central(f, point, eps, name):
    """Second mixed central differences; derivative axes (i, j) come first."""
    d = len(point)
    out = None
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = eps
        for j in range(d):
            ej = np.zeros(d)
            ej[j] = eps
            fpp = _check_finite(f(point + ei + ej), name, point + ei + ej)
            fpm = _check_finite(f(point + ei - ej), name, point + ei - ej)
            fmp = _check_finite(f(point - ei + ej), name, point - ei + ej)
            fmm = _check_finite(f(point - ei - ej), name, point - ei - ej)
            block = (fpp - fpm - fmp + fmm) / (4.0 * eps * eps)
            if out is None:
                out = np.zeros((d, d) + np.shape(block))
            out[i, j] = block
    return out


def _max_rel_error(analytic, estimate):
    analytic = np.asarray(analytic, dtype=float)
    denom = np.maximum(np.abs(analytic), 1.0)
    return float(np.max(np.abs(analytic - estimate) / denom))


def validate_derivatives(model: ModelSpec, point, eps: float = 1e-5) -> dict:
    """Compare every supplied derivative with a finite-difference estimate.

    Returns a mapping from derivative name to the maximum relative deviation,
    where deviations are measured against ``max(|analytic|, 1)`` so exact
    zeros do not blow up the ratio.
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    point = np.asarray(point, dtype=float)

    report = {}

    jac_fd = _central(model.drift, point, eps, "drift")  # [j, i] = d drift_i/dx_j
    jac = _check_finite(model.drift_jacobian(point), "drift_jacobian", point)
    report["drift_jacobian"] = _max_rel_error(jac, np.moveaxis(jac_fd, 0, 1))

    hess_fd = _second_central(model.drift, point, eps, "drift")  # [i, j, k]
    hess = _check_finite(model.drift_hessian(point), "drift_hessian", point)
    report["drift_hessian"] = _max_rel_error(hess, np.moveaxis(hess_fd, 2, 0))

    mg_fd = _central(model.metric, point, eps, "metric")
    mg = _check_finite(model.metric_gradient(point), "metric_gradient", point)
    report["metric_gradient"] = _max_rel_error(mg, mg_fd)

    mh_fd = _second_central(model.metric, point, eps, "metric")
    mh = _check_finite(model.metric_hessian(point), "metric_hessian", point)
    report["metric_hessian"] = _max_rel_error(mh, mh_fd)

    pg_fd = _central(model.potential, point, eps, "potential")
    pg = _check_finite(model.potential_gradient(point), "potential_gradient", point)
    report["potential_gradient"] = _max_rel_error(pg, pg_fd)

    ph_fd = _second_central(model.potential, point, eps, "potential")
    ph = _check_finite(model.potential_hessian(point), "potential_hessian", point)
    report["potential_hessian"] = _max_rel_error(ph, ph_fd)

    return report


# ---------------------------------------------------------------------------
# Built-in models and the name registry


def _zero_vector(d):
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    return f


def _zero_tensor(d, extra):
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + extra)

    return f


def _zero_scalar(d):
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    return f


def _constant_matrix(mat):
    mat = np.asarray(mat, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(mat, x.shape[:-1] + mat.shape)

    return f


def quadratic_potential_functions(phi):
    """Value / gradient / Hessian callables for ``x -> x.T @ phi @ x``."""
    phi = np.asarray(phi, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, phi, x)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.einsum("ij,...j->...i", phi, x)

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * phi, x.shape[:-1] + phi.shape)

    return value, gradient, hessian


def free_particle_model(dimension: int) -> ModelSpec:
    """Zero drift, identity metric, zero potentials.

    The simplest closed-form check of the whole pipeline: every level of the
    coefficient ladder is known analytically.
    """
    d = int(dimension)
    if d < 1:
        raise ConfigError(f"model.dimension must be >= 1, got {dimension}")
    return ModelSpec(
        name="free_particle",
        dimension=d,
        drift=_zero_vector(d),
        drift_jacobian=_zero_tensor(d, (d, d)),
        drift_hessian=_zero_tensor(d, (d, d, d)),
        metric=_constant_matrix(np.eye(d)),
        metric_gradient=_zero_tensor(d, (d, d, d)),
        metric_hessian=_zero_tensor(d, (d, d, d, d)),
        potential=_zero_scalar(d),
        potential_gradient=_zero_vector(d),
        potential_hessian=_zero_tensor(d, (d, d)),
        mean_path_potential=_zero_scalar(d),
        mean_path_potential_gradient=_zero_vector(d),
        quad_potential=np.zeros((d, d)),
        vectorized=True,
        constant_metric=True,
        zero_potential=True,
    )


def linear_drift_model(
    drift_matrix, metric=None, quad_potential=None, name="linear"
) -> ModelSpec:
    """Linear drift ``x -> A @ x`` with constant metric and quadratic potential.

    The exact action of such a model is quadratic in the path, which makes it
    the reference case where the Gaussian level actions are exact.
    """
    A = np.asarray(drift_matrix, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d):
        raise ConfigError("drift_matrix must be square")
    g = np.eye(d) if metric is None else np.asarray(metric, dtype=float)
    phi = np.zeros((d, d)) if quad_potential is None else np.asarray(quad_potential)
    psi, psi_grad, psi_hess = quadratic_potential_functions(phi)

    def drift(x):
        x = np.asarray(x, dtype=float)
        return np.einsum("ij,...j->...i", A, x)

    return ModelSpec(
        name=name,
        dimension=d,
        drift=drift,
        drift_jacobian=_constant_matrix(A),
        drift_hessian=_zero_tensor(d, (d, d, d)),
        metric=_constant_matrix(g),
        metric_gradient=_zero_tensor(d, (d, d, d)),
        metric_hessian=_zero_tensor(d, (d, d, d, d)),
        potential=psi,
        potential_gradient=psi_grad,
        potential_hessian=psi_hess,
        mean_path_potential=psi,
        mean_path_potential_gradient=psi_grad,
        quad_potential=phi,
        vectorized=True,
        constant_metric=True,
        zero_potential=bool(np.all(phi == 0.0)),
    )


_REGISTRY: dict = {}


def register_model(name: str, builder: Callable[..., ModelSpec]):
    """Register a model factory under ``name`` for lookup by the CLI/config."""
    _REGISTRY[name] = builder


def build_model(name: str, **params) -> ModelSpec:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(f"unknown model {name!r} (known: {known})")
    return _REGISTRY[name](**params)


register_model("free_particle", lambda dimension: free_particle_model(dimension))
