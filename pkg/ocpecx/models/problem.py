"""Problem module.

An OCPEC instance bundles the dynamics φ, the running cost F, the endpoint
cost f, the constraint maps g ≤ 0, h = 0 and the complementarity pair
0 ≤ G ⊥ H ≥ 0, a control box U, endpoint boxes E and a Weierstrass radius R.

Every (t, x, u) oracle is batched: it takes `t` of shape (K,), `x` of shape
(K, n) and `u` of shape (K, m) and returns an `Evaluation` with the values and
the exact Jacobians with respect to x, u and t.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from ocpecx.models.errors import (
    DimensionError,
    ProblemFileError,
    UnknownProblemError,
)
from ocpecx.models.qp import FREE, NONNEG, NONPOS, ZERO

log = logging.getLogger(__name__)

FD_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Batched oracle output: value (K, k), dx (K, k, n), du (K, k, m), dt (K, k)."""

    value: np.ndarray
    dx: np.ndarray
    du: np.ndarray
    dt: np.ndarray


@dataclass(frozen=True, eq=False)
class EndpointEvaluation:
    """Endpoint cost value with its gradients in x(t0) and x(t1)."""

    value: float
    d0: np.ndarray
    d1: np.ndarray


Oracle = Callable[[np.ndarray, np.ndarray, np.ndarray], Evaluation]
EndpointOracle = Callable[[np.ndarray, np.ndarray], EndpointEvaluation]


def batch(t, x, u):
    """Return (t, x, u) as float arrays of shapes (K,), (K, n), (K, m)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float).reshape(t.shape[0], -1)
    u = np.asarray(u, dtype=float).reshape(t.shape[0], -1)
    return t, x, u


class AffineOracle:
    """Oracle (t, x, u) ↦ Mx·x + Mu·u + offset."""

    def __init__(self, mx, mu, offset) -> None:
        """Build an affine oracle."""
        self.mx = np.atleast_2d(np.asarray(mx, dtype=float))
        self.mu = np.atleast_2d(np.asarray(mu, dtype=float))
        self.offset = np.asarray(offset, dtype=float).reshape(-1)

    @classmethod
    def empty(cls, n, m):
        """Return the oracle of an empty constraint family."""
        return cls(np.zeros((0, n)), np.zeros((0, m)), np.zeros(0))

    def __call__(self, t, x, u) -> Evaluation:
        t, x, u = batch(t, x, u)
        K, k = t.shape[0], self.offset.shape[0]
        value = x @ self.mx.T + u @ self.mu.T + self.offset
        dx = np.broadcast_to(self.mx, (K,) + self.mx.shape).copy()
        du = np.broadcast_to(self.mu, (K,) + self.mu.shape).copy()
        return Evaluation(value.reshape(K, k), dx, du, np.zeros((K, k)))


class TargetCost:
    """Endpoint cost ½ Σ wᵢ (x(t1)ᵢ − Tᵢ)²."""

    def __init__(self, target, weights=None) -> None:
        """Build a target cost."""
        self.target = np.asarray(target, dtype=float).reshape(-1)
        self.weights = np.ones_like(self.target) if weights is None else np.asarray(weights, dtype=float)

    def __call__(self, x0, x1) -> EndpointEvaluation:
        diff = np.asarray(x1, dtype=float) - self.target
        return EndpointEvaluation(
            float(0.5 * np.sum(self.weights * diff**2)),
            np.zeros_like(diff),
            self.weights * diff,
        )


@dataclass(frozen=True, eq=False)
class Box:
    """Componentwise box [lo, hi] with possibly infinite bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if np.shape(self.lo) != np.shape(self.hi):
            raise DimensionError("box", np.shape(self.lo), np.shape(self.hi))
        if np.any(np.asarray(self.lo) > np.asarray(self.hi)):
            raise ProblemFileError("box", "lower bound above upper bound")

    @classmethod
    def free(cls, dim):
        """Return ℝ^dim as a box."""
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def fixed(cls, value):
        """Return the singleton box {value}."""
        value = np.asarray(value, dtype=float).reshape(-1)
        return cls(value.copy(), value.copy())

    @property
    def dim(self) -> int:
        """Return the box dimension."""
        return int(np.shape(self.lo)[0])

    @property
    def is_free(self) -> bool:
        """Return True when every component is unbounded."""
        return bool(np.all(np.isneginf(self.lo)) and np.all(np.isposinf(self.hi)))

    @property
    def has_free_component(self) -> bool:
        """Return True when some component is unbounded on both sides."""
        return bool(np.any(np.isneginf(self.lo) & np.isposinf(self.hi)))

    def contains(self, v, tol=0.0) -> bool:
        """Return True when v lies in the box up to tol.

        Example:
            >>> Box(np.array([-np.inf]), np.array([0.0])).contains([1e-9], tol=1e-8)
            True
        """
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))

    def clip(self, v) -> np.ndarray:
        """Return the projection of v onto the box."""
        return np.clip(v, self.lo, self.hi)

    def anchor(self) -> np.ndarray:
        """Return the point of the box closest to the origin."""
        return self.clip(np.zeros(self.dim))

    def normal_codes(self, v, tol) -> np.ndarray:
        """Return the sign code of each normal-cone component at v.

        Fixed components have a free normal, components at a lower (upper)
        bound a nonpositive (nonnegative) one, and interior components none.

        Example:
            >>> box = Box(np.array([0.0, -np.inf, 1.0]), np.array([1.0, np.inf, 1.0]))
            >>> box.normal_codes(np.array([0.0, 3.0, 1.0]), 1e-8).tolist()
            [-1, 2, 0]
        """
        v = np.asarray(v, dtype=float)
        at_lo = np.isfinite(self.lo) & (v <= self.lo + tol)
        at_hi = np.isfinite(self.hi) & (v >= self.hi - tol)
        return np.select(
            [at_lo & at_hi, at_lo, at_hi],
            [FREE, NONPOS, NONNEG],
            ZERO,
        ).astype(int)

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {"lo": [float(v) for v in self.lo], "hi": [float(v) for v in self.hi]}


@dataclass(frozen=True, eq=False)
class Endpoint:
    """Endpoint set E = E0 × E1 given as two boxes."""

    initial: Box
    final: Box

    @classmethod
    def fixed_initial(cls, x0):
        """Return fixed x(t0), free x(t1)."""
        box = Box.fixed(x0)
        return cls(box, Box.free(box.dim))

    @classmethod
    def box_initial(cls, lo, hi):
        """Return x(t0) in [lo, hi], free x(t1)."""
        box = Box(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        return cls(box, Box.free(box.dim))

    @classmethod
    def fixed_both(cls, x0, x1):
        """Return fixed x(t0) and x(t1)."""
        return cls(Box.fixed(x0), Box.fixed(x1))

    @property
    def has_free_component(self) -> bool:
        """Return True when some endpoint component is free."""
        return self.initial.has_free_component or self.final.has_free_component

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {"initial": self.initial.to_dict(), "final": self.final.to_dict()}


@dataclass(frozen=True, eq=False)
class LinearData:
    """Matrices of a linear complementarity system instance."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    C: np.ndarray
    D: np.ndarray
    q: np.ndarray
    T: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class OcpecProblem:
    """OCPEC instance; immutable after construction."""

    name: str
    t0: float
    t1: float
    n: int
    m: int
    l: int  # noqa: E741
    l1: int
    l2: int
    dynamics: Oracle
    running_cost: Oracle
    endpoint_cost: EndpointOracle
    g: Oracle
    h: Oracle
    G: Oracle
    H: Oracle
    control_set: Box
    endpoint: Endpoint
    radius: float = np.inf
    affine: bool = False
    linear: Optional[LinearData] = None

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ProblemFileError("t1", "horizon must satisfy t0 < t1")
        if not self.radius > 0:
            raise ProblemFileError("radius", "Weierstrass radius must be positive")
        if self.control_set.dim != self.m:
            raise DimensionError("U", (self.m,), (self.control_set.dim,))
        for field, box in (("E0", self.endpoint.initial), ("E1", self.endpoint.final)):
            if box.dim != self.n:
                raise DimensionError(field, (self.n,), (box.dim,))

    @property
    def oracles(self) -> Dict[str, Oracle]:
        """Return the (t, x, u) oracles by name with their output sizes."""
        return {
            "dynamics": self.dynamics,
            "running_cost": self.running_cost,
            "g": self.g,
            "h": self.h,
            "G": self.G,
            "H": self.H,
        }

    @property
    def sizes(self) -> Dict[str, int]:
        """Return the declared output size of each oracle."""
        return {"dynamics": self.n, "running_cost": 1, "g": self.l1, "h": self.l2, "G": self.l, "H": self.l}

    def check_dimensions(self, t=None, x=None, u=None):
        """Evaluate every oracle once and compare shapes with the declared sizes."""
        t = np.array([self.t0]) if t is None else t
        x = np.zeros((1, self.n)) if x is None else x
        u = np.zeros((1, self.m)) if u is None else u
        for name, oracle in self.oracles.items():
            ev = oracle(t, x, u)
            k = self.sizes[name]
            expected = {"value": (1, k), "dx": (1, k, self.n), "du": (1, k, self.m), "dt": (1, k)}
            for part, shape in expected.items():
                actual = getattr(ev, part).shape
                if actual != shape:
                    raise DimensionError(f"{name}.{part}", shape, actual)
        end = self.endpoint_cost(np.zeros(self.n), np.zeros(self.n))
        if end.d0.shape != (self.n,) or end.d1.shape != (self.n,):
            raise DimensionError("endpoint_cost", (self.n,), end.d1.shape)


class Psi:
    """Ψ = gᵀλ + hᵀυ − Gᵀμ − Hᵀν with its (x, u)-gradient."""

    def __init__(self, problem: OcpecProblem) -> None:
        """Build Ψ for a problem."""
        self.problem = problem

    def __call__(self, t, x, u, lam_g, lam_h, lam_G, lam_H):
        """Return Ψ values (K,), x-gradients (K, n) and u-gradients (K, m).

        Example:
            >>> psi = Psi(counterexample())
            >>> value, dx, du = psi([0.5], [[0.3]], [[-0.2]], [[]], [[]], [[2.0]], [[1.0]])
            >>> round(float(value[0]), 12), dx.tolist(), round(float(du[0, 0]), 12)
            (-0.66, [[-1.0]], 1.6)
        """
        p = self.problem
        t, x, u = batch(t, x, u)
        K = t.shape[0]
        value = np.zeros(K)
        dx = np.zeros((K, p.n))
        du = np.zeros((K, p.m))
        families = ((p.g, lam_g, 1.0), (p.h, lam_h, 1.0), (p.G, lam_G, -1.0), (p.H, lam_H, -1.0))
        for oracle, weights, sign in families:
            weights = np.asarray(weights, dtype=float).reshape(K, -1)
            if weights.shape[1] == 0:
                continue
            ev = oracle(t, x, u)
            value += sign * np.einsum("ki,ki->k", ev.value, weights)
            dx += sign * np.einsum("kij,ki->kj", ev.dx, weights)
            du += sign * np.einsum("kij,ki->kj", ev.du, weights)
        return value, dx, du


# builtin instances


def _counterexample_dynamics(t, x, u) -> Evaluation:
    t, x, u = batch(t, x, u)
    K = t.shape[0]
    return Evaluation(u.copy(), np.zeros((K, 1, 1)), np.ones((K, 1, 1)), np.zeros((K, 1)))


def _counterexample_G(t, x, u) -> Evaluation:
    t, x, u = batch(t, x, u)
    K = t.shape[0]
    return Evaluation(-u, np.zeros((K, 1, 1)), -np.ones((K, 1, 1)), np.zeros((K, 1)))


def _counterexample_H(t, x, u) -> Evaluation:
    t, x, u = batch(t, x, u)
    K = t.shape[0]
    return Evaluation(x - u**2, np.ones((K, 1, 1)), (-2.0 * u).reshape(K, 1, 1), np.zeros((K, 1)))


def _final_state_cost(x0, x1) -> EndpointEvaluation:
    return EndpointEvaluation(float(np.asarray(x1)[0]), np.zeros(1), np.ones(1))


def counterexample(t0=0.0, t1=1.0) -> OcpecProblem:
    """Return min x(t1) s.t. ẋ = u, 0 ≤ −u ⊥ x − u² ≥ 0, x(t0) ≤ 0.

    Example:
        >>> p = counterexample()
        >>> p.n, p.m, p.l, p.l1, p.l2
        (1, 1, 1, 0, 0)
        >>> p.H([0.5], [[0.3]], [[-0.2]]).du.ravel().tolist()
        [0.4]
    """
    return OcpecProblem(
        name="counterexample",
        t0=float(t0),
        t1=float(t1),
        n=1,
        m=1,
        l=1,
        l1=0,
        l2=0,
        dynamics=_counterexample_dynamics,
        running_cost=AffineOracle(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1)),
        endpoint_cost=_final_state_cost,
        g=AffineOracle.empty(1, 1),
        h=AffineOracle.empty(1, 1),
        G=_counterexample_G,
        H=_counterexample_H,
        control_set=Box.free(1),
        endpoint=Endpoint.box_initial([-np.inf], [0.0]),
    )


def linear_lcs(
    A=((0.0,),),
    B=((1.0,),),
    c=(-1.0,),
    C=((1.0,),),
    D=((1.0,),),
    q=(0.0,),
    T=None,
    x0=(1.0,),
    endpoint=None,
    control_set=None,
    weights=None,
    t0=0.0,
    t1=1.0,
    radius=np.inf,
    name="linear_lcs",
) -> OcpecProblem:
    """Return ẋ = Ax + Bu + c, 0 ≤ u ⊥ Cx + Du + q ≥ 0, min ½‖x(t1) − T‖².

    The defaults are the scalar instance A=0, B=1, c=−1, C=D=1, q=0, x0=1.

    Example:
        >>> p = linear_lcs()
        >>> p.dynamics([0.0], [[2.0]], [[0.5]]).value.tolist()
        [[-0.5]]
        >>> p.H([0.0], [[2.0]], [[0.5]]).value.tolist()
        [[2.5]]
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    c = np.asarray(c, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    l = q.shape[0]  # noqa: E741
    D = np.atleast_2d(np.asarray(D, dtype=float))
    m = D.shape[1]
    B = np.asarray(B, dtype=float).reshape(n, -1) if np.size(B) else np.zeros((n, m))
    C = np.asarray(C, dtype=float).reshape(l, -1) if np.size(C) else np.zeros((l, n))
    T = np.zeros(n) if T is None else np.asarray(T, dtype=float).reshape(-1)
    expected = {"A": (n, n), "B": (n, m), "c": (n,), "C": (l, n), "D": (l, m), "T": (n,)}
    for field, matrix in zip("ABcCDT", (A, B, c, C, D, T)):
        if matrix.shape != expected[field]:
            raise DimensionError(field, expected[field], matrix.shape)
    if l != m:
        raise DimensionError("q", (m,), (l,))
    if endpoint is None:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (n,):
            raise DimensionError("x0", (n,), x0.shape)
        endpoint = Endpoint.fixed_initial(x0)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    return OcpecProblem(
        name=name,
        t0=float(t0),
        t1=float(t1),
        n=n,
        m=m,
        l=l,
        l1=0,
        l2=0,
        dynamics=AffineOracle(A, B, c),
        running_cost=AffineOracle(np.zeros((1, n)), np.zeros((1, m)), np.zeros(1)),
        endpoint_cost=TargetCost(T, weights),
        g=AffineOracle.empty(n, m),
        h=AffineOracle.empty(n, m),
        G=AffineOracle(np.zeros((m, n)), np.eye(m), np.zeros(m)),
        H=AffineOracle(C, D, q),
        control_set=Box.free(m) if control_set is None else control_set,
        endpoint=endpoint,
        radius=float(radius),
        affine=True,
        linear=LinearData(A, B, c, C, D, q, T, weights),
    )


BUILTINS = {"counterexample": counterexample, "linear_lcs": linear_lcs}


def builtin(name, **params) -> OcpecProblem:
    """Return a builtin instance by name.

    Example:
        >>> builtin("counterexample").name
        'counterexample'
        >>> builtin("bogus")
        Traceback (most recent call last):
        ...
        ocpecx.models.errors.UnknownProblemError: unknown builtin problem 'bogus'
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownProblemError(f"unknown builtin problem {name!r}") from None
    return factory(**params)


# autonomization


class _AutonomousOracle:
    """Oracle of the augmented state (x, σ) reading time from σ."""

    def __init__(self, oracle, append_one=False) -> None:
        self.oracle = oracle
        self.append_one = append_one

    def __call__(self, t, x, u) -> Evaluation:
        t, x, u = batch(t, x, u)
        ev = self.oracle(x[:, -1], x[:, :-1], u)
        value = ev.value
        dx = np.concatenate([ev.dx, ev.dt[:, :, None]], axis=2)
        du = ev.du
        if self.append_one:
            K = t.shape[0]
            value = np.concatenate([value, np.ones((K, 1))], axis=1)
            dx = np.concatenate([dx, np.zeros((K, 1, dx.shape[2]))], axis=1)
            du = np.concatenate([du, np.zeros((K, 1, du.shape[2]))], axis=1)
        return Evaluation(value, dx, du, np.zeros(value.shape))


class _AutonomousEndpointCost:
    def __init__(self, cost) -> None:
        self.cost = cost

    def __call__(self, x0, x1) -> EndpointEvaluation:
        ev = self.cost(np.asarray(x0)[:-1], np.asarray(x1)[:-1])
        return EndpointEvaluation(ev.value, np.append(ev.d0, 0.0), np.append(ev.d1, 0.0))


def _augmented_endpoint(p: OcpecProblem) -> Endpoint:
    initial = Box(np.append(p.endpoint.initial.lo, p.t0), np.append(p.endpoint.initial.hi, p.t0))
    final = Box(np.append(p.endpoint.final.lo, -np.inf), np.append(p.endpoint.final.hi, np.inf))
    return Endpoint(initial, final)


def autonomize(p: OcpecProblem) -> OcpecProblem:
    """Append the clock state σ with σ̇ = 1, σ(t0) = t0.

    Linear instances stay linear (σ enters affinely).

    Example:
        >>> a = autonomize(counterexample())
        >>> a.n, a.dynamics([0.0], [[0.0, 0.0]], [[0.5]]).value.tolist()
        (2, [[0.5, 1.0]])
        >>> a.dynamics([0.0], [[0.0, 0.0]], [[0.5]]).dx[0, :, 1].tolist()
        [0.0, 0.0]
    """
    endpoint = _augmented_endpoint(p)
    if p.linear is not None:
        d = p.linear
        n = p.n
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = d.A
        return linear_lcs(
            A=A,
            B=np.vstack([d.B, np.zeros((1, p.m))]),
            c=np.append(d.c, 1.0),
            C=np.hstack([d.C, np.zeros((p.l, 1))]),
            D=d.D,
            q=d.q,
            T=np.append(d.T, 0.0),
            endpoint=endpoint,
            control_set=p.control_set,
            weights=np.append(d.weights, 0.0),
            t0=p.t0,
            t1=p.t1,
            radius=p.radius,
            name=f"autonomous:{p.name}",
        )
    return OcpecProblem(
        name=f"autonomous:{p.name}",
        t0=p.t0,
        t1=p.t1,
        n=p.n + 1,
        m=p.m,
        l=p.l,
        l1=p.l1,
        l2=p.l2,
        dynamics=_AutonomousOracle(p.dynamics, append_one=True),
        running_cost=_AutonomousOracle(p.running_cost),
        endpoint_cost=_AutonomousEndpointCost(p.endpoint_cost),
        g=_AutonomousOracle(p.g),
        h=_AutonomousOracle(p.h),
        G=_AutonomousOracle(p.G),
        H=_AutonomousOracle(p.H),
        control_set=p.control_set,
        endpoint=endpoint,
        radius=p.radius,
        affine=p.affine,
    )


# problem files


def _number(value, field) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "+inf", "-inf"):
        return -np.inf if value.startswith("-") else np.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(field, f"expected a number, got {value!r}")
    return float(value)


def _array(value, field, ndim) -> np.ndarray:
    try:
        if ndim == 1:
            return np.array([_number(v, field) for v in value], dtype=float)
        rows = [[_number(v, field) for v in row] for row in value]
    except TypeError:
        raise ProblemFileError(field, "expected a list") from None
    if len({len(row) for row in rows}) > 1:
        raise ProblemFileError(field, "ragged matrix rows")
    return np.array(rows, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0)


def _box(value, field) -> Box:
    if not isinstance(value, dict) or "lo" not in value or "hi" not in value:
        raise ProblemFileError(field, "expected an object with lo and hi")
    return Box(_array(value["lo"], f"{field}.lo", 1), _array(value["hi"], f"{field}.hi", 1))


def _linear_from_dict(data) -> OcpecProblem:
    for field in "ABcCDq":
        if field not in data:
            raise ProblemFileError(field, "missing field")
    matrices = {f: _array(data[f], f, 2) for f in "ABCD"}
    vectors = {f: _array(data[f], f, 1) for f in "cq"}
    n = vectors["c"].shape[0]
    l = vectors["q"].shape[0]  # noqa: E741
    m = int(data.get("m", matrices["D"].shape[1]))
    expected = {"A": (n, n), "B": (n, m), "C": (l, n), "D": (l, m)}
    for field in "ABCD":
        if matrices[field].shape != expected[field]:
            raise DimensionError(field, expected[field], matrices[field].shape)
    T = _array(data["T"], "T", 1) if "T" in data else np.zeros(n)
    if "x0" in data:
        x0 = _array(data["x0"], "x0", 1)
        if x0.shape != (n,):
            raise DimensionError("x0", (n,), x0.shape)
        initial = Box.fixed(x0)
    elif "E0" in data:
        initial = _box(data["E0"], "E0")
    else:
        raise ProblemFileError("x0", "either x0 or E0 is required")
    final = Box.fixed(_array(data["x1"], "x1", 1)) if "x1" in data else Box.free(n)
    control_set = _box(data["U"], "U") if "U" in data else None
    return linear_lcs(
        A=matrices["A"],
        B=matrices["B"],
        c=vectors["c"],
        C=matrices["C"],
        D=matrices["D"],
        q=vectors["q"],
        T=T,
        endpoint=Endpoint(initial, final),
        control_set=control_set,
        t0=_number(data.get("t0", 0.0), "t0"),
        t1=_number(data.get("t1", 1.0), "t1"),
        radius=_number(data.get("radius", "inf"), "radius"),
        name=str(data.get("name", "linear_lcs")),
    )


def problem_from_dict(data) -> OcpecProblem:
    """Build an instance from a parsed problem file."""
    if not isinstance(data, dict):
        raise ProblemFileError("kind", "problem file must hold a JSON object")
    kind = data.get("kind")
    if not isinstance(kind, str):
        raise ProblemFileError("kind", "missing kind")
    if kind.startswith("builtin:"):
        params = {key: _number(data[key], key) for key in ("t0", "t1") if key in data}
        return builtin(kind.split(":", 1)[1], **params)
    if kind == "linear_lcs":
        return _linear_from_dict(data)
    raise UnknownProblemError(f"unknown problem kind {kind!r}")


def load_problem(path) -> OcpecProblem:
    """Load a problem file, or a builtin given as `builtin:<name>`."""
    if str(path).startswith("builtin:"):
        return builtin(str(path).split(":", 1)[1])
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ProblemFileError("path", f"no such file {path}") from None
    except IsADirectoryError:
        raise ProblemFileError("path", f"{path} is a directory") from None
    except UnicodeDecodeError as error:
        raise ProblemFileError("encoding", f"{path} is not UTF-8 text: {error.reason}") from None
    except OSError as error:
        raise ProblemFileError("path", f"cannot read {path}: {error.strerror}") from None
    except json.JSONDecodeError as error:
        raise ProblemFileError("json", f"line {error.lineno}: {error.msg}") from None
    problem = problem_from_dict(data)
    log.info("loaded problem %s from %s", problem.name, path)
    return problem


# derivative audit


def _central_differences(oracle, t, x, u, step):
    K = t.shape[0]
    base = oracle(t, x, u).value
    k = base.shape[1]
    dx = np.zeros((K, k, x.shape[1]))
    du = np.zeros((K, k, u.shape[1]))
    dt = np.zeros((K, k))
    for j in range(x.shape[1]):
        e = np.zeros_like(x)
        e[:, j] = step * (1.0 + np.abs(x[:, j]))
        dx[:, :, j] = (oracle(t, x + e, u).value - oracle(t, x - e, u).value) / (2 * e[:, j, None])
    for j in range(u.shape[1]):
        e = np.zeros_like(u)
        e[:, j] = step * (1.0 + np.abs(u[:, j]))
        du[:, :, j] = (oracle(t, x, u + e).value - oracle(t, x, u - e).value) / (2 * e[:, j, None])
    e = step * (1.0 + np.abs(t))
    dt[:] = (oracle(t + e, x, u).value - oracle(t - e, x, u).value) / (2 * e[:, None])
    return dx, du, dt


def _relative_error(exact, approx) -> float:
    if exact.size == 0:
        return 0.0
    return float(np.max(np.abs(exact - approx) / (1.0 + np.abs(exact))))


def audit_derivatives(problem: OcpecProblem, points=100, seed=0, step=FD_STEP) -> Dict[str, float]:
    """Return the worst relative Jacobian error per oracle against central differences.

    Example:
        >>> errors = audit_derivatives(counterexample(), points=10)
        >>> max(errors.values()) <= 1e-6
        True
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(problem.t0, problem.t1, points)
    x = rng.standard_normal((points, problem.n))
    u = rng.standard_normal((points, problem.m))
    errors = {}
    for name, oracle in problem.oracles.items():
        ev = oracle(t, x, u)
        dx, du, dt = _central_differences(oracle, t, x, u, step)
        errors[name] = max(
            _relative_error(ev.dx, dx),
            _relative_error(ev.du, du),
            _relative_error(ev.dt, dt),
        )
    worst = 0.0
    for x0, x1 in zip(x, rng.standard_normal((points, problem.n))):
        ev = problem.endpoint_cost(x0, x1)
        for j in range(problem.n):
            for point, grad, shift in ((x0, ev.d0, 0), (x1, ev.d1, 1)):
                e = np.zeros(problem.n)
                e[j] = step * (1.0 + abs(point[j]))
                plus = problem.endpoint_cost(*((x0 + e, x1) if shift == 0 else (x0, x1 + e))).value
                minus = problem.endpoint_cost(*((x0 - e, x1) if shift == 0 else (x0, x1 - e))).value
                approx = (plus - minus) / (2 * e[j])
                worst = max(worst, abs(grad[j] - approx) / (1.0 + abs(grad[j])))
    errors["endpoint_cost"] = float(worst)
    log.debug("derivative audit of %s: %s", problem.name, errors)
    return errors
