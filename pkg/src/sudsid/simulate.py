"""Noise-driven gait trials.

Each actuated joint follows ``r_ref(t) + delta(t)`` where ``r_ref`` is a
sinusoid and ``delta`` is an Ornstein-Uhlenbeck deviation.  Per step of
length ``dt``:

1. the recorded sample uses ``rdot_a = rdot_ref - lambda * delta`` (the
   OU drift, without the white-noise increment);
2. passive shape and the pose increment are integrated with RK4, with
   ``delta`` following its drift line inside the step;
3. the pose is advanced with the SE(2) exponential of the averaged twist;
4. ``delta`` receives its Euler-Maruyama update.

The noise therefore enters through the position channel only, and the
recorded ``rdot_a`` is the exact derivative of ``r_a`` inside each step.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SingularConstraint
from .geometry import BodyVelocity, GroupElement, exp_step, log
from .mechanics import ShapeState, SudsSystem, suds_velocity
from .swimmers import params_to_dict


@dataclass(frozen=True)
class GaitSpec:
    """Per-joint waveform ``offset + amplitude * sin(freq * (t - lag))``."""

    offset: tuple
    amplitude: tuple
    freq: float = 2 * math.pi
    lag: tuple = None

    def __post_init__(self):
        offset = tuple(float(v) for v in np.atleast_1d(self.offset))
        amplitude = tuple(float(v) for v in np.atleast_1d(self.amplitude))
        lag = (0.0,) * len(offset) if self.lag is None else tuple(float(v) for v in np.atleast_1d(self.lag))
        if not (len(offset) == len(amplitude) == len(lag)):
            raise ConfigError("gait offset, amplitude and lag must have equal length")
        if not self.freq > 0:
            raise ConfigError(f"gait frequency must be positive, got {self.freq}")
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "lag", lag)
        object.__setattr__(self, "freq", float(self.freq))

    @property
    def period(self) -> float:
        return 2 * math.pi / self.freq

    def __len__(self):
        return len(self.offset)


@dataclass(frozen=True)
class NoiseSpec:
    attraction_rate: float = 5.0
    sigma: tuple = (0.0,)
    seed: int = 0

    def __post_init__(self):
        sigma = tuple(float(v) for v in np.atleast_1d(self.sigma))
        if not self.attraction_rate > 0:
            raise ConfigError("OU attraction rate must be positive")
        if any(s < 0 for s in sigma):
            raise ConfigError("OU diffusion must be non-negative")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "attraction_rate", float(self.attraction_rate))
        object.__setattr__(self, "seed", int(self.seed))

    def sigma_vector(self, n_a: int) -> np.ndarray:
        s = np.asarray(self.sigma, dtype=float)
        if s.size == 1:
            return np.full(n_a, s[0])
        if s.size != n_a:
            raise ConfigError(f"noise sigma has {s.size} entries, system has {n_a} actuated joints")
        return s


PRESET_GAITS = {
    "linear_passive": GaitSpec(offset=(1.0,), amplitude=(-0.5,)),
    "pushmepullyou": GaitSpec(offset=(math.pi / 2,), amplitude=(math.pi / 3,)),
    "purcell3": GaitSpec(offset=(0.0,), amplitude=(1.4,)),
    "purcell9": GaitSpec(offset=(0.0,) * 4, amplitude=(1.4,) * 4,
                         lag=tuple(i * math.pi / 4 for i in range(1, 5))),
}

# stationary OU std as a fraction of the gait amplitude
DEFAULT_NOISE_FRACTION = 0.075
DEFAULT_ATTRACTION = 5.0


def default_noise(gait: GaitSpec, attraction_rate=DEFAULT_ATTRACTION, fraction=DEFAULT_NOISE_FRACTION,
                  seed=0) -> NoiseSpec:
    """OU noise whose stationary std, sigma / sqrt(2 lambda), is a fixed fraction of amplitude."""
    amp = np.abs(np.asarray(gait.amplitude))
    sigma = fraction * amp * math.sqrt(2 * attraction_rate)
    return NoiseSpec(attraction_rate, tuple(sigma), seed)


def reference(spec: GaitSpec, t: float):
    """Reference actuated shape and its time derivative at time t."""
    off, amp, lag = (np.asarray(v) for v in (spec.offset, spec.amplitude, spec.lag))
    arg = spec.freq * (t - lag)
    return off + amp * np.sin(arg), amp * spec.freq * np.cos(arg)


def ou_step(delta_a, dt: float, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """One Euler-Maruyama step of d(delta) = -lambda delta dt + sigma dW."""
    if not dt > 0:
        raise ConfigError("dt must be positive")
    delta_a = np.asarray(delta_a, dtype=float)
    sigma = noise.sigma_vector(delta_a.size)
    out = delta_a - noise.attraction_rate * delta_a * dt
    if np.any(sigma > 0):
        out = out + sigma * math.sqrt(dt) * rng.standard_normal(delta_a.size)
    return out


@dataclass
class Trajectory:
    t: np.ndarray
    g: np.ndarray          # (m, 3) x, y, heading
    ghat: np.ndarray       # (m, group_dim)
    r: np.ndarray          # (m, n) physical coordinate order
    rdot: np.ndarray       # (m, n)
    r_ref: np.ndarray      # (m, n_a)
    rdot_ref: np.ndarray   # (m, n_a)
    metadata: dict = field(default_factory=dict)

    @property
    def n_records(self) -> int:
        return len(self.t)

    @property
    def actuated(self):
        return list(self.metadata["actuated"])

    @property
    def passive(self):
        return list(self.metadata["passive"])

    @property
    def group_dim(self) -> int:
        return int(self.metadata["group_dim"])

    @property
    def r_a(self):
        return self.r[:, self.actuated]

    @property
    def r_p(self):
        return self.r[:, self.passive]

    @property
    def rdot_a(self):
        return self.rdot[:, self.actuated]

    @property
    def rdot_p(self):
        return self.rdot[:, self.passive]

    @property
    def outputs(self) -> np.ndarray:
        """Regression targets (ghat, rdot_p) stacked per sample."""
        return np.hstack([self.ghat, self.rdot_p])

    def columns(self):
        gd = self.group_dim
        n = self.r.shape[1]
        ghat_names = ["ghat.vx"] if gd == 1 else ["ghat.vx", "ghat.vy", "ghat.omega"]
        return (["t", "g.x", "g.y", "g.theta"] + ghat_names
                + [f"r.{i}" for i in range(n)] + [f"rdot.{i}" for i in range(n)]
                + [f"rref.{i}" for i in self.actuated] + [f"rdotref.{i}" for i in self.actuated])

    def as_matrix(self) -> np.ndarray:
        return np.hstack([self.t[:, None], self.g, self.ghat, self.r, self.rdot, self.r_ref, self.rdot_ref])


def _rk4_step(rhs, t, y, dt, k1=None):
    k1 = rhs(t, y) if k1 is None else k1
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_trial(system: SudsSystem, gait: GaitSpec, noise: NoiseSpec, n_cycles: int,
                   samples_per_cycle: int = 100, warmup_cycles: int = 2,
                   g0: GroupElement = None, rng: np.random.Generator = None,
                   r_p0=None) -> Trajectory:
    """Run one noisy gait trial and record ``n_cycles * samples_per_cycle`` samples."""
    dims = system.dims
    if len(gait) != dims.n_a:
        raise ConfigError(f"gait drives {len(gait)} joints, system has {dims.n_a} actuated")
    if n_cycles < 1 or samples_per_cycle < 4 or warmup_cycles < 0:
        raise ConfigError("need n_cycles >= 1, samples_per_cycle >= 4, warmup_cycles >= 0")
    rng = np.random.default_rng(noise.seed) if rng is None else rng
    lam = noise.attraction_rate
    dt = gait.period / samples_per_cycle
    n_skip = warmup_cycles * samples_per_cycle
    m = n_cycles * samples_per_cycle
    gd, n_p = dims.group_dim, dims.n_p

    g = GroupElement() if g0 is None else g0
    r_p = np.array(system.elements.r_rest if r_p0 is None else r_p0, dtype=float)
    delta = np.zeros(dims.n_a)

    rec_t = np.empty(m)
    rec_g = np.empty((m, 3))
    rec_ghat = np.empty((m, gd))
    rec_r = np.empty((m, dims.n))
    rec_rdot = np.empty((m, dims.n))
    rec_rref = np.empty((m, dims.n_a))
    rec_rdref = np.empty((m, dims.n_a))

    a_idx, p_idx = list(system.actuated), list(system.passive)

    def solve(tau, r_a, r_p_, rdot_a):
        try:
            return suds_velocity(system, ShapeState(r_a, r_p_), rdot_a)
        except SingularConstraint as exc:
            raise SingularConstraint(f"{exc} at t={tau:.6g}", state={"t": tau, "r_a": r_a.tolist(),
                                                                     "r_p": r_p_.tolist()}) from exc

    for k in range(n_skip + m):
        t = k * dt
        r_ref, rdot_ref = reference(gait, t)
        drift = -lam * delta
        r_a = r_ref + delta
        rdot_a = rdot_ref + drift
        vel = solve(t, r_a, r_p, rdot_a)

        if k >= n_skip:
            i = k - n_skip
            rec_t[i] = t
            rec_g[i] = (g.x, g.y, g.heading)
            rec_ghat[i] = vel.ghat_vec
            rec_r[i, a_idx], rec_r[i, p_idx] = r_a, r_p
            rec_rdot[i, a_idx], rec_rdot[i, p_idx] = rdot_a, vel.rdot_p
            rec_rref[i], rec_rdref[i] = r_ref, rdot_ref

        # y = (r_p, local pose increment h) with h(t) = identity
        def rhs(tau, y, delta=delta, drift=drift, t0=t):
            ref, dref = reference(gait, tau)
            v = solve(tau, ref + delta + drift * (tau - t0), y[:n_p], dref + drift)
            return np.concatenate([v.rdot_p, _pose_rate(y[n_p:], v.ghat_vec, gd)])

        y0 = np.concatenate([r_p, np.zeros(3 if gd == 3 else 1)])
        k1 = np.concatenate([vel.rdot_p, _pose_rate(y0[n_p:], vel.ghat_vec, gd)])
        y1 = _rk4_step(rhs, t, y0, dt, k1)
        r_p = y1[:n_p]
        h = y1[n_p:]
        h_elem = GroupElement(h[0], 0.0, 0.0) if gd == 1 else GroupElement(*h)
        twist = log(h_elem)
        g = exp_step(g, BodyVelocity(twist.vx / dt, twist.vy / dt, twist.omega_z / dt), dt)
        delta = ou_step(delta, dt, noise, rng)

    metadata = {
        "system": params_to_dict(system.params),
        "system_info": system.metadata,
        "gait": asdict(gait),
        "noise": asdict(noise),
        "dt": dt,
        "samples_per_cycle": samples_per_cycle,
        "n_cycles": n_cycles,
        "warmup_cycles": warmup_cycles,
        "n_records": m,
        "group_dim": gd,
        "actuated": a_idx,
        "passive": p_idx,
        "rdot_a_convention": "rdot_ref - lambda*delta (OU drift only; noise enters through r_a)",
        "final_g": [g.x, g.y, g.heading],
        "final_r_p": r_p.tolist(),
        "final_t": (n_skip + m) * dt,
    }
    return Trajectory(rec_t, rec_g, rec_ghat, rec_r, rec_rdot, rec_rref, rec_rdref, metadata)


def _pose_rate(h, ghat, gd):
    if gd == 1:
        return ghat[:1].copy()
    c, s = math.cos(h[2]), math.sin(h[2])
    return np.array([c * ghat[0] - s * ghat[1], s * ghat[0] + c * ghat[1], ghat[2]])


# ---------------------------------------------------------------------------
# serialization

class TrajectoryFormatError(ConfigError):
    """Trajectory CSV or sidecar metadata could not be parsed."""


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def metadata_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_trajectory(traj: Trajectory, path) -> Path:
    """Write ``path`` (CSV, 17 significant digits) and its ``.json`` metadata sidecar."""
    path = Path(path)
    lines = [",".join(traj.columns())]
    for row in traj.as_matrix():
        lines.append(",".join(format(v, ".17g") for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    _atomic_write(metadata_path(path), json.dumps(traj.metadata, indent=2, sort_keys=True) + "\n")
    return path


def read_metadata(path) -> dict:
    try:
        return json.loads(metadata_path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TrajectoryFormatError(f"cannot read metadata for {path}: {exc}") from exc


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    meta = read_metadata(path)
    try:
        text = path.read_text().splitlines()
    except OSError as exc:
        raise TrajectoryFormatError(f"cannot read {path}: {exc}") from exc
    if not text:
        raise TrajectoryFormatError(f"{path} is empty")
    header = text[0].split(",")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise TrajectoryFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: {exc}") from exc
    if len(rows) != meta.get("n_records", len(rows)):
        raise TrajectoryFormatError(f"{path}: {len(rows)} records, metadata says {meta['n_records']}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    gd = int(meta["group_dim"])
    n = len(meta["actuated"]) + len(meta["passive"])
    n_a = len(meta["actuated"])
    widths = [1, 3, gd, n, n, n_a, n_a]
    if sum(widths) != len(header):
        raise TrajectoryFormatError(f"{path}: header has {len(header)} columns, metadata implies {sum(widths)}")
    parts = np.split(data, np.cumsum(widths)[:-1], axis=1)
    return Trajectory(parts[0][:, 0], *parts[1:], metadata=meta)
