"""Coarse-graining of the quadratic level action by Gaussian marginalization.

Each coarsening integrates out the nodes sampled at a level.  Because the
precision structure is block tridiagonal with every other node integrated,
the integrals are independent and each produces three Schur-complement
style corrections: to the two neighbouring precision blocks, to their
linear terms, and a new coupling between the neighbours themselves.  The
new coupling is recorded on whichever neighbour is integrated at the next
coarser level, with the orientation that makes the coarser Gaussian the
exact marginal (the two possible assignments differ by a transpose).

Node 0 is fixed, so couplings to it never produce precision corrections;
they survive as couplings (ending, at level 0, in the endpoint-to-origin
matrix) which keeps the whole ladder independent of the initial condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np
from scipy.linalg import cho_solve

from .action import QuadraticLevelAction, _symmetrize, _check_positive_definite
from .errors import NotPositiveDefiniteError


def coarsen_level(action: QuadraticLevelAction) -> QuadraticLevelAction:
    """Integrate out the sampled nodes of ``action`` (level ``k`` -> ``k-1``)."""
    k = action.level
    if k < 1:
        raise ValueError("cannot coarsen below level 0")
    m = action.levels_total
    final = 2**m
    delta = action.spacing
    d = action.dimension

    newG = {}
    newK = {}
    for idx, node in enumerate(action.interior_nodes):
        if not action.sampled_mask[idx]:
            newG[int(node)] = action.G_interior[idx].copy()
            newK[int(node)] = action.K_interior[idx].copy()
    G_end = action.G_end.copy()
    K_end = action.K_end.copy()
    end_origin = None

    newHp = {}
    newHm = {}

    sampled = action.sampled_nodes
    samp_pos = np.flatnonzero(action.sampled_mask)
    for j, node in enumerate(sampled):
        node = int(node)
        G_l = action.G_interior[samp_pos[j]]
        K_l = action.K_interior[samp_pos[j]]
        Hp_l = action.H_plus[j]
        Hm_l = action.H_minus[j]
        try:
            chol = np.linalg.cholesky(G_l)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(k, node, str(exc)) from None
        X = cho_solve((chol, True), Hp_l)
        Y = cho_solve((chol, True), Hm_l)
        z = cho_solve((chol, True), K_l)

        left = node - delta
        right = node + delta
        if right == final:
            G_end -= Hp_l.T @ X
            K_end -= Hp_l.T @ z
        else:
            newG[right] -= Hp_l.T @ X
            newK[right] -= Hp_l.T @ z
        if left != 0:
            newG[left] -= Hm_l.T @ Y
            newK[left] -= Hm_l.T @ z

        # New coupling between the two neighbours, oriented left-to-right.
        pair = -Hm_l.T @ X
        if left == 0 and right == final:
            end_origin = pair.T
        elif left == 0:
            newHm[right] = pair.T
        elif right == final:
            newHp[left] = pair
        elif (right // (2 * delta)) % 2 == 1:
            newHm[right] = pair.T
        else:
            newHp[left] = pair

    interior = np.array(sorted(newG), dtype=np.int64)
    n_act = len(interior)
    G_interior = np.empty((n_act, d, d))
    K_interior = np.empty((n_act, d))
    for i, node in enumerate(interior):
        G_interior[i] = newG[int(node)]
        K_interior[i] = newK[int(node)]
    sampled_mask = (interior // (2 * delta)) % 2 == 1
    next_sampled = interior[sampled_mask]
    assert set(newHp) == set(int(n) for n in next_sampled)
    assert set(newHm) == set(int(n) for n in next_sampled)
    H_plus = np.stack([newHp[int(n)] for n in next_sampled]) if len(
        next_sampled
    ) else np.empty((0, d, d))
    H_minus = np.stack([newHm[int(n)] for n in next_sampled]) if len(
        next_sampled
    ) else np.empty((0, d, d))

    coarse = QuadraticLevelAction(
        level=k - 1,
        levels_total=m,
        dimension=d,
        offset=action.offset,
        interior_nodes=interior,
        G_interior=_symmetrize(G_interior),
        K_interior=K_interior,
        sampled_mask=sampled_mask,
        H_plus=H_plus,
        H_minus=H_minus,
        G_end=_symmetrize(G_end),
        K_end=K_end,
        end_origin_coupling=end_origin,
    )
    _check_positive_definite(coarse)
    return coarse


@dataclass(frozen=True)
class Ladder:
    """All level actions from finest (``m``) down to endpoint-only (0)."""

    by_level: tuple  # by_level[k] is the QuadraticLevelAction at level k

    @property
    def levels_total(self) -> int:
        return len(self.by_level) - 1

    @property
    def finest(self) -> QuadraticLevelAction:
        return self.by_level[-1]

    @property
    def coarsest(self) -> QuadraticLevelAction:
        return self.by_level[0]

    def endpoint_gaussian(self, initial_condition):
        """Endpoint precision and combined linear term for a start value.

        The level-0 endpoint density is ``exp(-x.G.x/2 - x.k)`` in
        displacement coordinates, with ``k`` combining the stored linear
        term and the coupling to the fixed initial node.
        """
        base = self.coarsest
        v0 = np.asarray(initial_condition, dtype=float) - base.offset[0]
        k_eff = base.K_end.copy()
        if base.end_origin_coupling is not None:
            k_eff += base.end_origin_coupling @ v0
        return base.G_end, k_eff

    def condition_numbers(self):
        """Worst-case condition number of the precision blocks per level."""
        out = {}
        for act in self.by_level:
            conds = [np.linalg.cond(act.G_end)]
            conds.extend(np.linalg.cond(G) for G in act.G_interior)
            out[act.level] = float(max(conds))
        return out


def build_ladder(finest: QuadraticLevelAction) -> Ladder:
    """Repeatedly coarsen from the finest level down to level 0."""
    if finest.level != finest.levels_total:
        raise ValueError("build_ladder expects the finest-level action")
    levels = [finest]
    while levels[-1].level > 0:
        levels.append(coarsen_level(levels[-1]))
    return Ladder(by_level=tuple(reversed(levels)))


def _write_matrix(stream: TextIO, level, node, kind, mat):
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    stream.write(f"# level={level} node={node} d={mat.shape[-1]} kind={kind}\n")
    for row in mat:
        stream.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def dump_ladder(ladder: Ladder, stream: TextIO):
    """Write every stored matrix/vector of the ladder for offline inspection."""
    final = 2**ladder.levels_total
    for act in reversed(ladder.by_level):
        samp = set(int(n) for n in act.sampled_nodes)
        samp_idx = {int(n): i for i, n in enumerate(act.sampled_nodes)}
        for i, node in enumerate(act.interior_nodes):
            node = int(node)
            _write_matrix(stream, act.level, node, "G", act.G_interior[i])
            _write_matrix(stream, act.level, node, "K", act.K_interior[i])
            if node in samp:
                j = samp_idx[node]
                _write_matrix(stream, act.level, node, "H+", act.H_plus[j])
                _write_matrix(stream, act.level, node, "H-", act.H_minus[j])
        _write_matrix(stream, act.level, final, "G", act.G_end)
        _write_matrix(stream, act.level, final, "K", act.K_end)
        if act.end_origin_coupling is not None:
            _write_matrix(stream, act.level, final, "E", act.end_origin_coupling)
