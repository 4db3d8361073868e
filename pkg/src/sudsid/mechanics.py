"""Shape-underactuated dissipative systems: connection, metric and force balance.

Every system is described at a shape ``r`` by three things:

* Pfaffian blocks ``omega_g`` (group_dim x group_dim) and ``omega_r``
  (group_dim x n) with ``omega_g @ ghat + omega_r @ rdot = 0``;
* a symmetric positive definite shape metric ``M`` so that the drag
  wrench on the shape coordinates, at the body velocity fixed by the
  constraint, is ``tau = -M @ rdot``;
* a set of springs and dampers on the passive coordinates.

Shape vectors are always held in the system's physical coordinate order
(joint 0, joint 1, ...).  The actuated/passive split is a pair of index
tuples carried by the system, and the ``*_aa`` / ``*_ap`` blocks are
extracted with them.

Sign convention for passive elements: ``passive_force`` returns the
generalized force the spring/damper applies to the coordinate, so a
stretched spring gives ``f_o = -k (r_p - r_rest)``.  Quasi-static balance
on a passive coordinate is ``tau_p + f = 0``, which gives

    (M_pp - F_pp) rdot_p = f_o - (M_pa - F_pa) rdot_a.

With ``F = -d`` on the passive diagonal, ``M_pp - F_pp = M_pp + diag(d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonDissipative, SingularConstraint
from .geometry import BodyVelocity

# condition number of omega_g above which the constraint is treated as singular
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class Dimensions:
    n_a: int
    n_p: int
    group_dim: int

    def __post_init__(self):
        if self.group_dim not in (1, 3):
            raise ConfigError(f"group_dim must be 1 or 3, got {self.group_dim}")
        if self.n_a < 0 or self.n_p < 0 or self.n_a + self.n_p == 0:
            raise ConfigError(f"invalid shape dimensions n_a={self.n_a}, n_p={self.n_p}")

    @property
    def n(self) -> int:
        return self.n_a + self.n_p

    @property
    def n_out(self) -> int:
        """Length of the (ghat, rdot_p) output vector."""
        return self.group_dim + self.n_p


@dataclass(frozen=True)
class ShapeState:
    r_a: np.ndarray
    r_p: np.ndarray
    rdot_a: np.ndarray = None
    rdot_p: np.ndarray = None

    def __post_init__(self):
        r_a = np.atleast_1d(np.asarray(self.r_a, dtype=float))
        r_p = np.atleast_1d(np.asarray(self.r_p, dtype=float))
        rdot_a = np.zeros_like(r_a) if self.rdot_a is None else np.atleast_1d(np.asarray(self.rdot_a, dtype=float))
        rdot_p = np.zeros_like(r_p) if self.rdot_p is None else np.atleast_1d(np.asarray(self.rdot_p, dtype=float))
        if rdot_a.shape != r_a.shape or rdot_p.shape != r_p.shape:
            raise ConfigError("shape velocities must match shape block sizes")
        for arr in (r_a, r_p, rdot_a, rdot_p):
            if not np.all(np.isfinite(arr)):
                raise ConfigError("ShapeState entries must be finite")
        object.__setattr__(self, "r_a", r_a)
        object.__setattr__(self, "r_p", r_p)
        object.__setattr__(self, "rdot_a", rdot_a)
        object.__setattr__(self, "rdot_p", rdot_p)


@dataclass(frozen=True)
class PassiveElementSet:
    k: np.ndarray
    r_rest: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        k, r_rest, d = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (self.k, self.r_rest, self.d))
        if not (k.shape == r_rest.shape == d.shape):
            raise ConfigError("k, r_rest and d must have the same length")
        if np.any(k < 0) or np.any(d < 0):
            raise ConfigError("spring and damper constants must be non-negative")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "r_rest", r_rest)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.k)


@dataclass(frozen=True)
class SwimmerParams:
    variant: str
    L: float = 1.0
    l: float = 0.5
    c: float = 1.0
    ratio: float = 2.0
    passive: PassiveElementSet = None
    actuated: tuple = (0,)
    n_links: int = 3

    VARIANTS = ("linear_passive", "pushmepullyou", "purcell3", "purcell9", "link_chain")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {self.VARIANTS}")
        if not (self.L > 0 and self.c > 0 and self.l > 0):
            raise ConfigError("L, l and c must be positive")
        if not self.ratio >= 1:
            raise ConfigError("lateral-to-longitudinal drag ratio must be >= 1")
        if self.passive is None:
            object.__setattr__(self, "passive", PassiveElementSet([], [], []))
        object.__setattr__(self, "actuated", tuple(int(i) for i in self.actuated))


@dataclass(frozen=True)
class ConnectionEval:
    A: np.ndarray
    omega_g: np.ndarray
    omega_r: np.ndarray


@dataclass(frozen=True)
class ShapeMetric:
    M: np.ndarray
    actuated: tuple
    passive: tuple

    def _block(self, rows, cols):
        return self.M[np.ix_(rows, cols)]

    @property
    def M_aa(self):
        return self._block(self.actuated, self.actuated)

    @property
    def M_ap(self):
        return self._block(self.actuated, self.passive)

    @property
    def M_pa(self):
        return self._block(self.passive, self.actuated)

    @property
    def M_pp(self):
        return self._block(self.passive, self.passive)


@dataclass(frozen=True)
class SudsVelocity:
    ghat: BodyVelocity
    rdot_p: np.ndarray
    C_tilde: np.ndarray
    B: np.ndarray
    ghat_vec: np.ndarray = field(repr=False, default=None)

    @property
    def output(self) -> np.ndarray:
        """Stacked (ghat, rdot_p) vector."""
        return np.concatenate([self.ghat_vec, self.rdot_p])


class SudsSystem:
    """Base class; subclasses implement ``_evaluate`` on a physical-order shape vector.

    ``_evaluate(r)`` returns ``(omega_g, omega_r, M)``.
    """

    variant = "abstract"

    def __init__(self, params: SwimmerParams, n: int, group_dim: int):
        self.params = params
        actuated = tuple(sorted(params.actuated))
        if len(set(actuated)) != len(actuated) or any(i < 0 or i >= n for i in actuated):
            raise ConfigError(f"actuated indices {params.actuated} invalid for {n} shape coordinates")
        self.actuated = actuated
        self.passive = tuple(i for i in range(n) if i not in actuated)
        if len(params.passive) != len(self.passive):
            raise ConfigError(
                f"{len(self.passive)} passive coordinates but {len(params.passive)} spring entries")
        self.dims = Dimensions(len(self.actuated), len(self.passive), group_dim)
        self.elements = params.passive
        self.metadata = {"variant": params.variant}

    # -- subclass hooks --------------------------------------------------
    def _evaluate(self, r: np.ndarray):
        raise NotImplementedError

    def check_shape(self, r: np.ndarray) -> None:
        """Raise ConfigError if r is outside the model's valid shape range."""

    # -- helpers ---------------------------------------------------------
    def full(self, state: ShapeState) -> np.ndarray:
        if state.r_a.size != self.dims.n_a or state.r_p.size != self.dims.n_p:
            raise ConfigError(
                f"state has ({state.r_a.size}, {state.r_p.size}) coordinates, "
                f"system expects ({self.dims.n_a}, {self.dims.n_p})")
        r = np.empty(self.dims.n)
        r[list(self.actuated)] = state.r_a
        r[list(self.passive)] = state.r_p
        return r

    def full_velocity(self, state: ShapeState) -> np.ndarray:
        v = np.empty(self.dims.n)
        v[list(self.actuated)] = state.rdot_a
        v[list(self.passive)] = state.rdot_p
        return v

    def state(self, r, rdot=None) -> ShapeState:
        """Split physical-order vectors into a ShapeState."""
        r = np.asarray(r, dtype=float)
        rdot = np.zeros_like(r) if rdot is None else np.asarray(rdot, dtype=float)
        a, p = list(self.actuated), list(self.passive)
        return ShapeState(r[a], r[p], rdot[a], rdot[p])

    def rest_shape(self, r_a) -> np.ndarray:
        """Physical-order shape with the given actuated values and springs at rest."""
        r = np.empty(self.dims.n)
        r[list(self.actuated)] = r_a
        r[list(self.passive)] = self.elements.r_rest
        return r

    def evaluate(self, state: ShapeState):
        r = self.full(state)
        self.check_shape(r)
        return self._evaluate(r)

    def __repr__(self):
        return f"{type(self).__name__}(variant={self.params.variant!r}, dims={self.dims})"


# ---------------------------------------------------------------------------
# operations

def _connection_from(omega_g, omega_r, state=None) -> ConnectionEval:
    cond = np.linalg.cond(omega_g)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularConstraint(f"omega_g is singular (cond={cond:.3g})", state=state)
    A = -np.linalg.solve(omega_g, omega_r)
    return ConnectionEval(A, omega_g, omega_r)


def connection(system: SudsSystem, r: ShapeState) -> ConnectionEval:
    omega_g, omega_r, _ = system.evaluate(r)
    return _connection_from(omega_g, omega_r, state=r)


def shape_metric(system: SudsSystem, r: ShapeState) -> ShapeMetric:
    omega_g, omega_r, M = system.evaluate(r)
    _connection_from(omega_g, omega_r, state=r)
    return ShapeMetric(M, system.actuated, system.passive)


def passive_force(elements: PassiveElementSet, r: ShapeState, system: SudsSystem = None):
    """Spring offset ``f_o`` and damping matrix ``F`` acting on the shape coordinates.

    Without a system the result covers the passive block only (length n_p);
    with one, it is embedded in the full physical-order n-vector.
    """
    f_p = -elements.k * (r.r_p - elements.r_rest)
    F_p = -np.diag(elements.d)
    if system is None:
        return f_p, F_p
    n = system.dims.n
    f_o = np.zeros(n)
    F = np.zeros((n, n))
    p = list(system.passive)
    f_o[p] = f_p
    F[np.ix_(p, p)] = F_p
    return f_o, F


def _solve(system: SudsSystem, r: ShapeState):
    omega_g, omega_r, M = system.evaluate(r)
    conn = _connection_from(omega_g, omega_r, state=r)
    f_o, F = passive_force(system.elements, r, system)
    a, p = list(system.actuated), list(system.passive)
    n_a, n_p = system.dims.n_a, system.dims.n_p
    A_a, A_p = conn.A[:, a], conn.A[:, p]

    if n_p:
        S = M[np.ix_(p, p)] - F[np.ix_(p, p)]
        try:
            chol = np.linalg.cholesky(0.5 * (S + S.T))
        except np.linalg.LinAlgError:
            raise NonDissipative(f"M_pp + damping is not positive definite at r={system.full(r)}")
        coupling = M[np.ix_(p, a)] - F[np.ix_(p, a)]
        rhs = np.column_stack([f_o[p], -coupling])
        sol = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        c_p, B_p = sol[:, 0], sol[:, 1:]
    else:
        c_p, B_p = np.zeros(0), np.zeros((0, n_a))

    C_tilde = np.concatenate([A_p @ c_p, c_p])
    B = np.vstack([A_a + A_p @ B_p, B_p])
    return conn, M, C_tilde, B


def suds_velocity(system: SudsSystem, r: ShapeState, rdot_a) -> SudsVelocity:
    """Body velocity and passive shape velocity produced by actuated velocity rdot_a."""
    rdot_a = np.atleast_1d(np.asarray(rdot_a, dtype=float))
    if rdot_a.size != system.dims.n_a:
        raise ConfigError(f"rdot_a has {rdot_a.size} entries, expected {system.dims.n_a}")
    _, _, C_tilde, B = _solve(system, r)
    out = C_tilde + B @ rdot_a
    gd = system.dims.group_dim
    return SudsVelocity(
        ghat=BodyVelocity.from_vector(out[:gd], gd),
        rdot_p=out[gd:],
        C_tilde=C_tilde,
        B=B,
        ghat_vec=out[:gd],
    )


def actuated_torque(system: SudsSystem, r: ShapeState, rdot_a) -> np.ndarray:
    """tau_a = -M_ap rdot_p - M_aa rdot_a, with rdot_p from the passive balance."""
    rdot_a = np.atleast_1d(np.asarray(rdot_a, dtype=float))
    vel = suds_velocity(system, r, rdot_a)
    metric = shape_metric(system, r)
    return -metric.M_ap @ vel.rdot_p - metric.M_aa @ rdot_a


def passive_resistance(system: SudsSystem, r: ShapeState) -> np.ndarray:
    """The matrix M_pp + F_p (damping counted as positive resistance) that the passive solve inverts."""
    M = shape_metric(system, r)
    return M.M_pp + np.diag(system.elements.d)


def drag_wrench_schur(K: np.ndarray, group_dim: int):
    """Split a generalized drag matrix on (g, r) into Pfaffian blocks and the reduced metric."""
    K_gg = K[:group_dim, :group_dim]
    K_gr = K[:group_dim, group_dim:]
    K_rr = K[group_dim:, group_dim:]
    M = K_rr - K_gr.T @ np.linalg.solve(K_gg, K_gr)
    return K_gg, K_gr, 0.5 * (M + M.T)


def random_states(system: SudsSystem, rng: np.random.Generator, count: int,
                  spread: float = 1.0) -> Sequence[ShapeState]:
    """Sample shapes around the system's working range (used by property checks)."""
    lo, hi = system.shape_bounds(spread)
    out = []
    for _ in range(count):
        r = rng.uniform(lo, hi)
        out.append(system.state(r))
    return out
