"""The four viscous swimmers and their closed-form reference solves."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SingularConstraint
from .mechanics import (
    PassiveElementSet, ShapeState, SudsSystem, SwimmerParams, drag_wrench_schur,
)

PMPY_RATIO = 2.0


class LinearPassiveSwimmer(SudsSystem):
    """T-shaped paddle tied to a payload by a spring-damper, moving along x.

    Shape coordinates: ``r[0]`` is the spring length r_1, ``r[1]`` the paddle
    width r_2.  Drag elements (coefficient ``c`` per unit length):

    * payload face of length ``l`` moving at ``xdot``;
    * paddle face of length ``r_2`` moving at ``xdot + rdot_1 - rdot_2``;
    * the paddle bar sliding along its own axis while it extends, which
      dissipates ``c r_2 rdot_2**2 / 12`` and exerts no net force along x.

    The first two reproduce the scalar Pfaffian constraint exactly.  The
    third only adds to ``M_aa``; without it the metric is singular along
    ``rdot_1 = rdot_2``.
    """

    variant = "linear_passive"

    def __init__(self, params: SwimmerParams):
        super().__init__(params, n=2, group_dim=1)
        self.metadata.update(body_frame="payload", coordinates=["r1_spring", "r2_paddle"])

    def check_shape(self, r):
        if not 0.0 < r[1] < self.params.L:
            raise ConfigError(f"paddle width r2={r[1]:.6g} outside (0, L={self.params.L})")

    def shape_bounds(self, spread=1.0):
        L, rest = self.params.L, self.elements.r_rest[0]
        return (np.array([rest - 0.5 * spread, 0.02 * L]),
                np.array([rest + 0.5 * spread, 0.98 * L]))

    def drag_matrix(self, r):
        c, l = self.params.c, self.params.l
        r2 = r[1]
        payload = np.array([1.0, 0.0, 0.0])
        paddle = np.array([1.0, 1.0, -1.0])
        K = c * l * np.outer(payload, payload) + c * r2 * np.outer(paddle, paddle)
        K[2, 2] += c * r2 / 12.0
        return K

    def _evaluate(self, r):
        return drag_wrench_schur(self.drag_matrix(r), 1)


class Pushmepullyou(SudsSystem):
    """Two symmetric link pairs on a central body, moving along x.

    ``r[0]`` opens the left pair (passive, sprung), ``r[1]`` the right pair.
    The Pfaffian row and the joint torque rows follow the closed-form
    model: with ``alpha = 1/(1/2 + c1^2 + 2 s1^2 + c2^2 + 2 s2^2)``,

        omega_g = c / alpha,   omega_r = c L [s1, -s2]

    and each joint resists its own rotation with ``c L^3 (2 - 1/12)``.  The
    joint rows couple to ``xdot`` with sign opposite to the Pfaffian row, so
    eliminating ``xdot`` gives ``M = K_rr + omega_r^T omega_r * 2L / omega_g``,
    which is symmetric positive definite.
    """

    variant = "pushmepullyou"

    def __init__(self, params: SwimmerParams):
        if params.ratio != PMPY_RATIO:
            raise ConfigError("the pushmepullyou model is only defined for drag ratio 2")
        super().__init__(params, n=2, group_dim=1)
        self.metadata.update(body_frame="central body", coordinates=["r1_left", "r2_right"])

    def shape_bounds(self, spread=1.0):
        lo = math.pi / 2 - spread * (math.pi / 2 - 0.1)
        hi = math.pi / 2 + spread * (math.pi / 2 - 0.1)
        return np.array([lo, lo]), np.array([hi, hi])

    @staticmethod
    def alpha(r):
        s1, s2 = math.sin(r[0]), math.sin(r[1])
        c1, c2 = math.cos(r[0]), math.cos(r[1])
        return 1.0 / (0.5 + c1 * c1 + 2 * s1 * s1 + c2 * c2 + 2 * s2 * s2)

    def joint_drag(self):
        return self.params.c * self.params.L ** 3 * (2.0 - 1.0 / 12.0)

    def _evaluate(self, r):
        L, c = self.params.L, self.params.c
        alpha = self.alpha(r)
        omega_g = np.array([[c / alpha]])
        omega_r = c * L * np.array([[math.sin(r[0]), -math.sin(r[1])]])
        M = self.joint_drag() * np.eye(2) + 2 * L * omega_r.T @ omega_r / omega_g[0, 0]
        return omega_g, omega_r, M


class LinkChain(SudsSystem):
    """Planar chain of equal rigid links in resistive-force-theory drag.

    Link ``j`` has length ``L``; joint ``k`` sits between links ``k`` and
    ``k+1`` with angle ``r[k] = theta[k+1] - theta[k]``.  The body frame is
    the middle link's center and axis.  Per link, in link coordinates:
    longitudinal drag ``c L``, lateral ``ratio c L`` and rotational
    ``ratio c L^3 / 12`` about the link center.
    """

    variant = "link_chain"

    def __init__(self, params: SwimmerParams, n_links: int):
        if n_links < 2:
            raise ConfigError(f"a link chain needs at least 2 links, got {n_links}")
        super().__init__(params, n=n_links - 1, group_dim=3)
        self.n_links = n_links
        self.middle = (n_links - 1) // 2
        self.metadata.update(
            body_frame=f"center of link {self.middle} (0-based)",
            n_links=n_links,
            coordinates=[f"joint{k}" for k in range(n_links - 1)],
        )
        c, ratio, L = params.c, params.ratio, params.L
        self._link_drag = np.diag([c * L, ratio * c * L, ratio * c * L ** 3 / 12.0])

    def shape_bounds(self, spread=1.0):
        n = self.dims.n
        return -2.0 * spread * np.ones(n), 2.0 * spread * np.ones(n)

    def kinematics(self, r):
        """Link angles, link centers and their shape derivatives in the body frame.

        Returns ``theta`` (N,), ``dtheta`` (N, n), ``p`` (N, 2), ``dp`` (N, 2, n).
        """
        N, m, L = self.n_links, self.middle, self.params.L
        n = N - 1
        theta = np.zeros(N)
        dtheta = np.zeros((N, n))
        for j in range(m + 1, N):
            theta[j] = theta[j - 1] + r[j - 1]
            dtheta[j] = dtheta[j - 1]
            dtheta[j, j - 1] += 1.0
        for j in range(m - 1, -1, -1):
            theta[j] = theta[j + 1] - r[j]
            dtheta[j] = dtheta[j + 1]
            dtheta[j, j] -= 1.0
        e = np.column_stack([np.cos(theta), np.sin(theta)])
        e_perp = np.column_stack([-e[:, 1], e[:, 0]])
        p = np.zeros((N, 2))
        dp = np.zeros((N, 2, n))
        half = 0.5 * L
        for j in range(m + 1, N):
            p[j] = p[j - 1] + half * (e[j - 1] + e[j])
            dp[j] = dp[j - 1] + half * (np.outer(e_perp[j - 1], dtheta[j - 1]) + np.outer(e_perp[j], dtheta[j]))
        for j in range(m - 1, -1, -1):
            p[j] = p[j + 1] - half * (e[j + 1] + e[j])
            dp[j] = dp[j + 1] - half * (np.outer(e_perp[j + 1], dtheta[j + 1]) + np.outer(e_perp[j], dtheta[j]))
        return theta, dtheta, p, dp

    def link_jacobians(self, r):
        """Per-link map from (vx, vy, omega, rdot) to (longitudinal, lateral, angular) link velocity."""
        theta, dtheta, p, dp = self.kinematics(r)
        N, n = self.n_links, self.n_links - 1
        J = np.zeros((N, 3, 3 + n))
        cos, sin = np.cos(theta), np.sin(theta)
        for j in range(N):
            T = np.zeros((2, 3 + n))
            T[0, 0] = T[1, 1] = 1.0
            T[0, 2], T[1, 2] = -p[j, 1], p[j, 0]
            T[:, 3:] = dp[j]
            J[j, 0] = cos[j] * T[0] + sin[j] * T[1]
            J[j, 1] = -sin[j] * T[0] + cos[j] * T[1]
            J[j, 2, 2] = 1.0
            J[j, 2, 3:] = dtheta[j]
        return J

    def drag_matrix(self, r):
        J = self.link_jacobians(r)
        return np.einsum("jai,ab,jbk->ik", J, self._link_drag, J)

    def _evaluate(self, r):
        return drag_wrench_schur(self.drag_matrix(r), 3)


def build_link_chain(n_links: int, params: SwimmerParams) -> LinkChain:
    return LinkChain(params, n_links)


def build_system(params: SwimmerParams) -> SudsSystem:
    if params.variant == "linear_passive":
        return LinearPassiveSwimmer(params)
    if params.variant == "pushmepullyou":
        return Pushmepullyou(params)
    if params.variant == "purcell3":
        return build_link_chain(3, params)
    if params.variant == "purcell9":
        return build_link_chain(9, params)
    return build_link_chain(params.n_links, params)


# ---------------------------------------------------------------------------
# presets and config files

def _elements(k, r_rest, d=None):
    k = list(k)
    return PassiveElementSet(k, list(r_rest), [0.0] * len(k) if d is None else list(d))


PRESETS = {
    "linear_passive": dict(variant="linear_passive", L=2.0, l=0.5, c=1.0, ratio=2.0,
                           k=[1.0], r_rest=[1.0], d=[0.0], actuated=[1]),
    "pushmepullyou": dict(variant="pushmepullyou", L=1.0, c=1.0, ratio=2.0,
                          k=[10.0], r_rest=[math.pi / 2], d=[0.0], actuated=[1]),
    "purcell3": dict(variant="purcell3", L=1.0, c=1.0, ratio=2.0, n_links=3,
                     k=[2.0], r_rest=[0.0], d=[0.0], actuated=[0]),
    "purcell9": dict(variant="purcell9", L=1.0, c=1.0, ratio=2.0, n_links=9,
                     k=[20.0, 15.0, 10.0, 5.0], r_rest=[0.0] * 4, d=[0.0] * 4,
                     actuated=[0, 1, 2, 3]),
}

SYSTEM_KEYS = ("variant", "L", "l", "c", "ratio", "k", "r_rest", "d", "actuated", "n_links")


def params_from_dict(cfg: dict) -> SwimmerParams:
    """Build SwimmerParams from a config mapping, filling gaps from the variant's preset."""
    if "variant" not in cfg:
        raise ConfigError("system config needs a 'variant' key")
    base = dict(PRESETS.get(cfg["variant"], {}))
    base.update({k: v for k, v in cfg.items() if k in SYSTEM_KEYS})
    try:
        passive = _elements(base.get("k", []), base.get("r_rest", []), base.get("d"))
        n_links = int(base.get("n_links", {"purcell3": 3, "purcell9": 9}.get(base["variant"], 3)))
        return SwimmerParams(
            variant=base["variant"], L=float(base.get("L", 1.0)), l=float(base.get("l", 0.5)),
            c=float(base.get("c", 1.0)), ratio=float(base.get("ratio", 2.0)),
            passive=passive, actuated=tuple(base.get("actuated", (0,))), n_links=n_links,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad system config: {exc}") from exc


def params_to_dict(params: SwimmerParams) -> dict:
    out = dict(variant=params.variant, L=params.L, l=params.l, c=params.c, ratio=params.ratio,
               k=params.passive.k.tolist(), r_rest=params.passive.r_rest.tolist(),
               d=params.passive.d.tolist(), actuated=list(params.actuated))
    if params.variant in ("purcell3", "purcell9", "link_chain"):
        out["n_links"] = params.n_links
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def load_system(path_or_cfg) -> SudsSystem:
    cfg = path_or_cfg if isinstance(path_or_cfg, dict) else load_config(path_or_cfg)
    return build_system(params_from_dict(cfg))


def preset_system(variant: str, **overrides) -> SudsSystem:
    cfg = dict(PRESETS[variant])
    cfg.update(overrides)
    return build_system(params_from_dict(cfg))


# ---------------------------------------------------------------------------
# closed-form reference solves

def linear_passive_swimmer_solve(params: SwimmerParams, r: ShapeState, rdot_2: float):
    """Solve the stacked 3x3 system for (xdot, omega_w, rdot_1).

    ``r`` carries ``r_a = [r_2]`` and ``r_p = [r_1]``.  ``omega_w`` is the
    external force the fluid exerts on the whole swimmer.
    """
    c, l = params.c, params.l
    k, l_k, d = params.passive.k[0], params.passive.r_rest[0], params.passive.d[0]
    r1, r2 = float(r.r_p[0]), float(r.r_a[0])
    if not 0.0 < r2 < params.L:
        raise ConfigError(f"paddle width r2={r2:.6g} outside (0, L={params.L})")
    lhs = np.array([
        [c * l + c * r2, 0.0, c * r2],
        [c * l, -1.0, -d],
        [c * r2, -1.0, d + c * r2],
    ])
    spring = k * (r1 - l_k)
    rhs = np.array([c * r2, 0.0, c * r2]) * rdot_2 + np.array([0.0, spring, -spring])
    if np.linalg.cond(lhs) > 1e12:
        raise SingularConstraint("linear swimmer system matrix is singular", state=r)
    xdot, omega_w, rdot_1 = np.linalg.solve(lhs, rhs)
    return float(xdot), float(omega_w), float(rdot_1)


class PushmepullyouDiagnostics(NamedTuple):
    alpha: float
    gamma1: float
    gamma2: float
    s: tuple
    c: tuple


class PushmepullyouSolution(NamedTuple):
    xdot: float
    rdot_1: float
    diagnostics: PushmepullyouDiagnostics


def pushmepullyou_solve(params: SwimmerParams, r: ShapeState, rdot_2: float) -> PushmepullyouSolution:
    """Solve the 2x2 stacked Pfaffian / passive-torque system for (xdot, rdot_1).

    ``r`` carries ``r_a = [r_2]`` and ``r_p = [r_1]``.
    """
    L, cd = params.L, params.c
    k, r_k, d = params.passive.k[0], params.passive.r_rest[0], params.passive.d[0]
    r1, r2 = float(r.r_p[0]), float(r.r_a[0])
    s1, s2, c1, c2 = math.sin(r1), math.sin(r2), math.cos(r1), math.cos(r2)
    alpha = 1.0 / (0.5 + c1 * c1 + 2 * s1 * s1 + c2 * c2 + 2 * s2 * s2)
    gamma1 = 2 * L ** 2 * s1
    gamma2 = -2 * L ** 3 + L ** 3 / 12.0
    lhs = np.array([
        [1.0 / alpha, L * s1],
        [cd * gamma1, cd * gamma2 - d],
    ])
    rhs = np.array([L * s2, 0.0]) * rdot_2 + np.array([0.0, k * (r1 - r_k)])
    if np.linalg.cond(lhs) > 1e12:
        raise SingularConstraint("pushmepullyou system matrix is singular", state=r)
    xdot, rdot_1 = np.linalg.solve(lhs, rhs)
    diag = PushmepullyouDiagnostics(alpha, gamma1, gamma2, (s1, s2), (c1, c2))
    return PushmepullyouSolution(float(xdot), float(rdot_1), diag)
