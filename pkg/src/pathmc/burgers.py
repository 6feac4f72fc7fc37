"""Spectrally truncated Burgers system in real mode coordinates.

Retained complex Fourier modes ``z_1 .. z_K`` are packed into a real state
vector of length ``2K`` as ``(Re z_1, Im z_1, Re z_2, Im z_2, ...)``.
Negative modes follow from reality (``z_{-j} = conj(z_j)``), the mean mode
is zero, and modes beyond the cutoff are dropped (Galerkin truncation), so
the drift has the same dimension as the state.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .models import (
    ModelSpec,
    _constant_matrix,
    _zero_tensor,
    quadratic_potential_functions,
    register_model,
)


def _complex_modes(state, mode_count):
    """Pack the real state into z_{-K}..z_K (index j stored at j + K)."""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != 2 * mode_count:
        raise ConfigError(
            f"state dimension {state.shape[-1]} != 2 * mode_count ({2 * mode_count})"
        )
    z = state[..., 0::2] + 1j * state[..., 1::2]
    full = np.zeros(state.shape[:-1] + (2 * mode_count + 1,), dtype=complex)
    full[..., mode_count + 1 :] = z
    full[..., :mode_count] = np.conj(z[..., ::-1])
    return full


def burgers_drift(state, mode_count: int, full_spectrum: bool = False):
    """Quadratic convolution drift of the truncated system.

    For each retained wavenumber ``k`` the complex drift component is
    ``-(i k / 2) * sum_{k1 + k2 = k} z_{k1} z_{k2}`` over in-range nonzero
    summands.  ``full_spectrum=True`` additionally returns the components
    for ``k`` up to twice the cutoff; they are diagnostic only and never
    enter the action.
    """
    mode_count = int(mode_count)
    if mode_count < 1:
        raise ConfigError(f"mode_count must be >= 1, got {mode_count}")
    full = _complex_modes(state, mode_count)
    k_max = 2 * mode_count if full_spectrum else mode_count
    batch = full.shape[:-1]
    theta_c = np.zeros(batch + (k_max,), dtype=complex)
    for k in range(1, k_max + 1):
        acc = np.zeros(batch, dtype=complex)
        lo = max(-mode_count, k - mode_count)
        hi = min(mode_count, k + mode_count)
        for k1 in range(lo, hi + 1):
            k2 = k - k1
            if k1 == 0 or k2 == 0 or abs(k2) > mode_count:
                continue
            acc = acc + full[..., k1 + mode_count] * full[..., k2 + mode_count]
        theta_c[..., k - 1] = (-0.5j * k) * acc
    out = np.empty(batch + (2 * k_max,), dtype=float)
    out[..., 0::2] = theta_c.real
    out[..., 1::2] = theta_c.imag
    return out


def burgers_jacobian(mean_state, mode_count: int):
    """Jacobian of :func:`burgers_drift` at ``mean_state``.

    Built from the convolution matrix ``Z[k, l] = -i k z_{k-l}`` split into
    real and imaginary parts and folded onto the independent coordinates
    (real/imaginary pairs of the retained modes).
    """
    mode_count = int(mode_count)
    mean_state = np.asarray(mean_state, dtype=float)
    if mean_state.ndim != 1:
        raise ConfigError("mean_state must be a single state vector")
    full = _complex_modes(mean_state, mode_count)

    d = 2 * mode_count
    A = np.zeros((d, d))
    for k in range(1, mode_count + 1):
        for s in range(1, mode_count + 1):
            zp = full[k - s + mode_count] if abs(k - s) <= mode_count else 0.0
            zm = full[k + s + mode_count] if abs(k + s) <= mode_count else 0.0
            Zp = -1j * k * zp  # column for mode +s
            Zm = -1j * k * zm  # column for mode -s
            Xp, Yp = Zp.real, Zp.imag
            Xm, Ym = Zm.real, Zm.imag
            A[2 * k - 2, 2 * s - 2] = Xp + Xm  # d Re/d b_s
            A[2 * k - 2, 2 * s - 1] = Ym - Yp  # d Re/d c_s
            A[2 * k - 1, 2 * s - 2] = Yp + Ym  # d Im/d b_s
            A[2 * k - 1, 2 * s - 1] = Xp - Xm  # d Im/d c_s
    return A


def burgers_drift_hessian(mode_count: int):
    """Constant second-derivative tensor of the quadratic drift."""
    d = 2 * mode_count
    V = np.zeros((d, d, d))
    for j in range(d):
        unit = np.zeros(d)
        unit[j] = 1.0
        V[:, :, j] = burgers_jacobian(unit, mode_count)
    return V


def burgers_model(mode_count: int, phi_diag=None) -> ModelSpec:
    """Truncated Burgers model with identity metric.

    ``phi_diag`` sets the diagonal of the quadratic potential matrix (a
    scalar broadcasts); it doubles as the potential itself so the exact and
    approximate actions penalize amplitude consistently.
    """
    mode_count = int(mode_count)
    if mode_count < 1:
        raise ConfigError(f"burgers.mode_count must be >= 1, got {mode_count}")
    d = 2 * mode_count
    if phi_diag is None:
        phi = np.zeros((d, d))
    else:
        diag = np.asarray(phi_diag, dtype=float)
        if diag.ndim == 0:
            diag = np.full(d, float(diag))
        if diag.shape != (d,):
            raise ConfigError(f"model.phi_diag must be a scalar or {d} values")
        if np.any(diag < 0):
            raise ConfigError("model.phi_diag entries must be >= 0")
        phi = np.diag(diag)
    psi, psi_grad, psi_hess = quadratic_potential_functions(phi)
    V = burgers_drift_hessian(mode_count)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return burgers_jacobian(x, mode_count)
        flat = x.reshape(-1, d)
        stacked = np.stack([burgers_jacobian(s, mode_count) for s in flat])
        return stacked.reshape(x.shape[:-1] + (d, d))

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(V, x.shape[:-1] + V.shape)

    return ModelSpec(
        name="burgers",
        dimension=d,
        drift=lambda x: burgers_drift(x, mode_count),
        drift_jacobian=jacobian,
        drift_hessian=hessian,
        metric=_constant_matrix(np.eye(d)),
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


register_model(
    "burgers",
    lambda mode_count, phi_diag=None: burgers_model(mode_count, phi_diag),
)
