"""Complementarity cone geometry module.

C^l = {(a, b) ∈ ℝ^l × ℝ^l : a ≥ 0, b ≥ 0, aᵀb = 0} is a product of l copies
of C¹, so every operation here works componentwise.

Sign tests snap any value with |v| ≤ tol to zero and then apply the exact
rules, which keeps S ⇒ M ⇒ C ⇒ W true for every tolerance.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ocpecx.models.errors import InfeasiblePointError

LABELS = ("fail", "W", "C", "M", "S")

FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class IndexSets:
    """Index classification at one point (0-based indices)."""

    i_minus: Tuple[int, ...]
    i_zero: Tuple[int, ...]
    i_plus0: Tuple[int, ...]
    i_00: Tuple[int, ...]
    i_0plus: Tuple[int, ...]
    tol_act: float

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {
            "i_minus": list(self.i_minus),
            "i_zero": list(self.i_zero),
            "i_plus0": list(self.i_plus0),
            "i_00": list(self.i_00),
            "i_0plus": list(self.i_0plus),
            "tol_act": self.tol_act,
        }


@dataclass(frozen=True)
class SignClass:
    """W/C/M/S flags of one multiplier pair."""

    w: bool
    c: bool
    m: bool
    s: bool

    @property
    def label(self) -> str:
        """Return the strongest stationarity letter.

        Example:
            >>> sign_class(-1.0, 0.0, 1e-8).label
            'M'
        """
        for flag, letter in ((self.s, "S"), (self.m, "M"), (self.c, "C")):
            if flag:
                return letter
        return "W"


def _snap(v, tol):
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) <= tol, 0.0, v)


def pair_distance(a, b) -> np.ndarray:
    """Return the distance of each pair (a_i, b_i) to C¹.

    Example:
        >>> pair_distance([1e-4, -2.0, 3.0], [1e-4, 0.0, 0.0]).tolist()
        [0.0001, 2.0, 0.0]
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    (pa, pb), _ = project_C(a, b)
    return np.hypot(a - pa, b - pb)


def classify_indices(g_val, G_val, H_val, tol, tol_feas=None) -> IndexSets:
    """Return the index sets of g and of the complementarity pairs.

    A pair is rejected once its distance to C¹ exceeds max(tol, tol_feas).
    Pairs with both values above tol but inside that distance join the set
    of their smaller value.

    Example:
        >>> s = classify_indices([], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1e-8)
        >>> s.i_plus0, s.i_00, s.i_0plus
        ((0,), (1,), (2,))
        >>> s = classify_indices([], [5e-7, 2.0], [2.0, 5e-7], 1e-8, FEASIBILITY_TOL)
        >>> s.i_plus0, s.i_00, s.i_0plus
        ((1,), (), (0,))
        >>> classify_indices([], [-1.0], [0.0], 1e-8)
        Traceback (most recent call last):
        ...
        ocpecx.models.errors.InfeasiblePointError: pair 0 outside C^l: G=-1, H=0
    """
    g_val = np.asarray(g_val, dtype=float).reshape(-1)
    G_val = np.asarray(G_val, dtype=float).reshape(-1)
    H_val = np.asarray(H_val, dtype=float).reshape(-1)
    limit = max(tol, tol if tol_feas is None else tol_feas)
    distance = pair_distance(G_val, H_val)
    for i, (a, b) in enumerate(zip(G_val, H_val)):
        if distance[i] > limit:
            raise InfeasiblePointError(f"pair {i} outside C^l: G={a:g}, H={b:g}", max_residual=float(distance[i]))
    small_G = np.abs(G_val) <= tol
    small_H = np.abs(H_val) <= tol
    both = ~small_G & ~small_H
    small_G |= both & (G_val <= H_val)
    small_H |= both & (H_val < G_val)
    active = g_val >= -tol
    return IndexSets(
        i_minus=tuple(int(i) for i in np.flatnonzero(~active)),
        i_zero=tuple(int(i) for i in np.flatnonzero(active)),
        i_plus0=tuple(int(i) for i in np.flatnonzero(~small_G & small_H)),
        i_00=tuple(int(i) for i in np.flatnonzero(small_G & small_H)),
        i_0plus=tuple(int(i) for i in np.flatnonzero(small_G & ~small_H)),
        tol_act=float(tol),
    )


def in_limiting_normal_cone(a, b, alpha, beta, tol) -> bool:
    """Return True when (alpha, beta) ∈ N^L_{C^l}(a, b).

    Example:
        >>> in_limiting_normal_cone([0.0], [0.0], [-1.0], [-1.0], 1e-9)
        True
        >>> in_limiting_normal_cone([0.0], [0.0], [1.0], [1.0], 1e-9)
        False
        >>> in_limiting_normal_cone([1.0], [0.0], [0.0], [7.0], 1e-9)
        True
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if np.any(a < -tol) or np.any(b < -tol) or np.any((a > tol) & (b > tol)):
        raise InfeasiblePointError("point outside C^l", max_residual=project_C(a, b)[1])
    alpha = _snap(np.reshape(alpha, -1), tol)
    beta = _snap(np.reshape(beta, -1), tol)
    ok_a = (a <= tol) | (alpha == 0.0)
    ok_b = (b <= tol) | (beta == 0.0)
    both = (a <= tol) & (b <= tol)
    ok_both = ~both | ((alpha < 0.0) & (beta < 0.0)) | (alpha * beta == 0.0)
    return bool(np.all(ok_a & ok_b & ok_both))


def project_C(a, b):
    """Return the nearest point of C^l and the distance to it.

    Example:
        >>> (pa, pb), dist = project_C([1.0], [1.0])
        >>> pa.tolist(), pb.tolist(), dist
        ([1.0], [0.0], 1.0)
        >>> round(project_C([-1.0], [-1.0])[1] ** 2, 12)
        2.0
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    ap, bp = np.maximum(a, 0.0), np.maximum(b, 0.0)
    zero = np.zeros_like(a)
    candidates = [(ap, zero), (zero, bp), (zero, zero)]
    dists = np.array([(a - ca) ** 2 + (b - cb) ** 2 for ca, cb in candidates])
    best = np.argmin(dists, axis=0)
    pa = np.choose(best, [ca for ca, _ in candidates])
    pb = np.choose(best, [cb for _, cb in candidates])
    return (pa, pb), float(np.sqrt(np.sum(np.min(dists, axis=0))))


def sign_class(mu, nu, tol) -> SignClass:
    """Return the W/C/M/S flags of the pair (mu, nu).

    Example:
        >>> sign_class(1.0, 1.0, 1e-8)
        SignClass(w=True, c=True, m=True, s=True)
        >>> sign_class(-1.0, -1.0, 1e-8)
        SignClass(w=True, c=True, m=False, s=False)
    """
    mu = float(_snap(mu, tol))
    nu = float(_snap(nu, tol))
    product = mu * nu
    return SignClass(
        w=True,
        c=product >= 0.0,
        m=(mu > 0.0 and nu > 0.0) or product == 0.0,
        s=mu >= 0.0 and nu >= 0.0,
    )


def weakest(labels) -> str:
    """Return the weakest label of a collection (S when empty).

    Example:
        >>> weakest(["S", "M", "S"])
        'M'
    """
    return min(labels, key=LABELS.index, default="S")
