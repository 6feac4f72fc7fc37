"""Pure NumPy implementations of the sampling hot kernels.

These are the reference implementations; the compiled extension in
``pathmc._speedups`` mirrors them exactly (same draw consumption order,
same arithmetic up to floating-point summation order).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

_LOG2PI = math.log(2.0 * math.pi)

BACKEND = "numpy"


def fill_paths(
    mean_end,
    chol_end,
    logdet_end,
    node_idx,
    left_idx,
    right_idx,
    chol_flat,
    Hp_flat,
    Hm_flat,
    K_flat,
    logdet_flat,
    z_end,
    z_flat,
    disp,
    logq,
):
    """Fill a batch of displacement paths coarse-to-fine, in place.

    ``disp[:, 0]`` (and ``disp[:, -1]`` when the endpoint is pinned, in
    which case ``z_end`` is None) must be prefilled by the caller; ``logq``
    starts at zero and accumulates the log proposal density.
    """
    d = disp.shape[2]
    if z_end is not None:
        noise = solve_triangular(chol_end, z_end.T, lower=True, trans="T").T
        disp[:, -1] = mean_end[None, :] + noise
        logq += 0.5 * logdet_end - 0.5 * d * _LOG2PI - 0.5 * np.sum(z_end**2, axis=1)
    for j in range(len(node_idx)):
        right = disp[:, right_idx[j]]
        left = disp[:, left_idx[j]]
        c = right @ Hp_flat[j].T + left @ Hm_flat[j].T + K_flat[j]
        mean = -cho_solve((chol_flat[j], True), c.T).T
        noise = solve_triangular(chol_flat[j], z_flat[:, j].T, lower=True, trans="T").T
        disp[:, node_idx[j]] = mean + noise
        logq += (
            0.5 * logdet_flat[j]
            - 0.5 * d * _LOG2PI
            - 0.5 * np.sum(z_flat[:, j] ** 2, axis=1)
        )


def quad_action(disp, interior_nodes, G_int, K_int, cross, G_end, K_end):
    """Finest-level quadratic form on a batch of displacement paths."""
    e_int = disp[:, interior_nodes]
    value = 0.5 * np.einsum("bni,nij,bnj->b", e_int, G_int, e_int)
    value += np.einsum("bni,ni->b", e_int, K_int)
    value += np.einsum("bsi,sij,bsj->b", disp[:, :-1], cross, disp[:, 1:])
    e_end = disp[:, -1]
    value += 0.5 * np.einsum("bi,ij,bj->b", e_end, G_end, e_end)
    value += e_end @ K_end
    return value


def metropolis_scan(delta, logu, cur_delta):
    """Sequential accept/reject over a chunk of independence proposals.

    ``delta[i]`` is (approximate - exact) action of proposal ``i``.  Returns
    ``src`` with ``src[i] = i`` when proposal ``i`` was accepted and ``-1``
    when the pre-chunk current state is retained, the index of the state
    current after the chunk (or ``-1``), the updated ``cur_delta`` and the
    number of acceptances.  Non-finite deltas never accept.
    """
    n = len(delta)
    src = np.empty(n, dtype=np.int64)
    cur_src = -1
    accepted = 0
    for i in range(n):
        if logu[i] < delta[i] - cur_delta:
            cur_src = i
            cur_delta = delta[i]
            accepted += 1
        src[i] = cur_src
    return src, cur_src, cur_delta, accepted
