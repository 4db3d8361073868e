"""Phase estimation, Fourier nominal gaits and deviation coordinates.

The phase estimator is a two-step map fitted once and then applied to any
trial of the same gait:

1. protophase: angle in the plane of the first two principal components of
   the mean-subtracted shape series, each score scaled to unit variance.
   When the orbit is nearly flat (second score std below ``FLAT_RATIO`` of
   the first) the second score is mostly noise, so the angle of the
   analytic signal of the first score is used instead;
2. uniformization: the protophase density is expanded in a truncated Fourier
   series and integrated, which is a smooth version of mapping protophase
   through its empirical cumulative distribution.

Keeping the fitted transform around matters: training and test trials must
share one phase origin, otherwise the nominal gait is evaluated at the wrong
point of the cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateOscillation, IllConditioned

TWO_PI = 2 * math.pi
DEGENERACY_RATIO = 1e-10
MAX_COND = 1e8
DEFAULT_ORDER = 7
FLAT_RATIO = 0.1


def analytic_signal(x):
    """FFT analytic signal ``x + i H[x]`` of a real series."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    h = np.zeros(m)
    h[0] = 1.0
    if m % 2 == 0:
        h[m // 2] = 1.0
        h[1:m // 2] = 2.0
    else:
        h[1:(m + 1) // 2] = 2.0
    return np.fft.ifft(np.fft.fft(x) * h)


def _fourier_basis(phi, K):
    """Columns [1, cos phi, sin phi, ..., cos K phi, sin K phi]."""
    phi = np.asarray(phi, dtype=float)
    k = np.arange(1, K + 1)
    arg = np.multiply.outer(phi, k)
    out = np.empty(phi.shape + (2 * K + 1,))
    out[..., 0] = 1.0
    out[..., 1::2] = np.cos(arg)
    out[..., 2::2] = np.sin(arg)
    return out


def _fourier_basis_dphi(phi, K):
    phi = np.asarray(phi, dtype=float)
    k = np.arange(1, K + 1)
    arg = np.multiply.outer(phi, k)
    out = np.zeros(phi.shape + (2 * K + 1,))
    out[..., 1::2] = -k * np.sin(arg)
    out[..., 2::2] = k * np.cos(arg)
    return out


@dataclass(frozen=True)
class PhaseEstimator:
    """Fitted protophase-to-phase transform.

    ``mean`` and ``axes`` (2, n) define the principal plane, ``scale`` the
    score normalization, ``orientation`` is +1 or -1 so that phase increases
    in time, and ``harmonics`` holds the complex coefficients S_k of the
    protophase distribution for k = 1..N.  ``mode`` is ``"plane"`` or
    ``"analytic"`` (flat orbits).
    """

    mean: np.ndarray
    axes: np.ndarray
    scale: np.ndarray
    orientation: int
    harmonics: np.ndarray
    mode: str = "plane"

    @classmethod
    def fit(cls, shapes, n_harmonics: int = 10) -> "PhaseEstimator":
        X = np.asarray(shapes, dtype=float)
        if X.ndim != 2 or X.shape[0] < 8:
            raise ConfigError("phase estimation needs a (samples, coordinates) array with >= 8 rows")
        if X.shape[1] < 2:
            raise DegenerateOscillation("a single shape coordinate has no planar embedding")
        mean = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
        var = s ** 2
        if var[0] == 0 or var[1] < DEGENERACY_RATIO * var[0]:
            raise DegenerateOscillation(
                f"second principal variance {var[1]:.3g} below {DEGENERACY_RATIO:g} of first {var[0]:.3g}")
        axes = vt[:2].copy()
        # deterministic sign: largest-magnitude entry of each axis positive;
        # with two coordinates the plane is kept right-handed instead, so
        # orientation means counterclockwise in (r[0], r[1])
        for i in range(2):
            if axes[i, np.argmax(np.abs(axes[i]))] < 0:
                axes[i] = -axes[i]
        if X.shape[1] == 2 and np.linalg.det(axes) < 0:
            axes[1] = -axes[1]
        scale = s[:2] / math.sqrt(X.shape[0])
        mode = "analytic" if scale[1] < FLAT_RATIO * scale[0] else "plane"
        raw = cls(mean, axes, scale, 1, np.zeros(0, dtype=complex), mode)
        theta = raw.protophase(X)
        orientation = 1 if theta[-1] >= theta[0] else -1
        theta = orientation * theta
        k = np.arange(1, n_harmonics + 1)
        harmonics = np.exp(-1j * np.multiply.outer(theta, k)).mean(axis=0)
        return cls(mean, axes, scale, orientation, harmonics, mode)

    def protophase(self, shapes) -> np.ndarray:
        """Unwrapped angle in the normalized principal plane, before orientation is applied."""
        z = (np.asarray(shapes, dtype=float) - self.mean) @ self.axes.T / self.scale
        if self.mode == "analytic":
            return np.unwrap(np.angle(analytic_signal(z[:, 0])))
        return np.unwrap(np.arctan2(z[:, 1], z[:, 0]))

    def transform(self, shapes) -> np.ndarray:
        theta = self.orientation * self.protophase(shapes)
        if self.harmonics.size == 0:
            return theta
        k = np.arange(1, self.harmonics.size + 1)
        e = np.exp(1j * np.multiply.outer(theta, k)) - 1.0
        return theta + 2.0 * np.real(e @ (self.harmonics / (1j * k)))

    def to_dict(self) -> dict:
        return dict(mean=self.mean.tolist(), axes=self.axes.tolist(), scale=self.scale.tolist(),
                    orientation=self.orientation, mode=self.mode,
                    harmonics_re=self.harmonics.real.tolist(), harmonics_im=self.harmonics.imag.tolist())

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseEstimator":
        return cls(np.asarray(d["mean"], float), np.asarray(d["axes"], float),
                   np.asarray(d["scale"], float), int(d["orientation"]),
                   np.asarray(d["harmonics_re"], float) + 1j * np.asarray(d["harmonics_im"], float),
                   d.get("mode", "plane"))


@dataclass(frozen=True)
class PhaseSeries:
    """Unwrapped phase per sample and the mean angular rate (rad/s, or rad/sample without dt)."""

    phi: np.ndarray
    rate: float
    orientation: int = 1
    estimator: PhaseEstimator = None

    def __len__(self):
        return len(self.phi)

    @property
    def winding(self) -> float:
        """Phase advance over the record duration in cycles, counting the last sample's interval."""
        m = len(self.phi)
        return (self.phi[-1] - self.phi[0]) * m / ((m - 1) * TWO_PI)


def estimate_phase(shapes, dt: float = None, estimator: PhaseEstimator = None,
                   n_harmonics: int = 10) -> PhaseSeries:
    """Phase of every sample of a shape time series.

    Without ``estimator`` a new one is fitted to ``shapes``; pass the
    training trial's estimator to phase held-out data consistently.
    """
    X = np.asarray(shapes, dtype=float)
    est = PhaseEstimator.fit(X, n_harmonics) if estimator is None else estimator
    phi = est.transform(X)
    rate = (phi[-1] - phi[0]) / (len(phi) - 1)
    if dt is not None:
        rate /= dt
    return PhaseSeries(phi, float(rate), est.orientation, est)


@dataclass(frozen=True)
class NominalGait:
    """Fourier series in phase for shape, body velocity and passive velocity.

    Coefficient tables have shape (2K + 1, channels) with rows ordered
    [a0, a1, b1, ..., aK, bK] for ``a0 + sum a_k cos k phi + b_k sin k phi``.
    """

    order: int
    frequency: float
    coef_r: np.ndarray
    coef_ghat: np.ndarray
    coef_rdot_p: np.ndarray
    actuated: tuple
    passive: tuple
    estimator: PhaseEstimator = None
    residual_rms: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.coef_r.shape[1]

    @property
    def group_dim(self) -> int:
        return self.coef_ghat.shape[1]

    def theta(self, phi) -> np.ndarray:
        return _fourier_basis(phi, self.order) @ self.coef_r

    def dtheta_dphi(self, phi) -> np.ndarray:
        return _fourier_basis_dphi(phi, self.order) @ self.coef_r

    def theta_dot(self, phi) -> np.ndarray:
        return self.frequency * self.dtheta_dphi(phi)

    def ghat(self, phi) -> np.ndarray:
        return _fourier_basis(phi, self.order) @ self.coef_ghat

    def rdot_p(self, phi) -> np.ndarray:
        return _fourier_basis(phi, self.order) @ self.coef_rdot_p

    def outputs(self, phi) -> np.ndarray:
        """Template prediction of the stacked targets (ghat, rdot_p)."""
        B = _fourier_basis(phi, self.order)
        return np.concatenate([B @ self.coef_ghat, B @ self.coef_rdot_p], axis=-1)

    def to_dict(self) -> dict:
        return dict(
            order=self.order, frequency=self.frequency,
            coef_r=self.coef_r.tolist(), coef_ghat=self.coef_ghat.tolist(),
            coef_rdot_p=self.coef_rdot_p.tolist(),
            actuated=list(self.actuated), passive=list(self.passive),
            estimator=None if self.estimator is None else self.estimator.to_dict(),
            residual_rms=self.residual_rms,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "NominalGait":
        try:
            K = int(d["order"])
            coef = {k: np.asarray(d[k], dtype=float).reshape(2 * K + 1, -1)
                    for k in ("coef_r", "coef_ghat", "coef_rdot_p")}
            est = d.get("estimator")
            return cls(K, float(d["frequency"]), coef["coef_r"], coef["coef_ghat"], coef["coef_rdot_p"],
                       tuple(d["actuated"]), tuple(d["passive"]),
                       None if est is None else PhaseEstimator.from_dict(est),
                       dict(d.get("residual_rms", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad nominal gait record: {exc}") from exc


def _lstsq(B, Y):
    coef, *_ = np.linalg.lstsq(B, Y, rcond=None)
    return coef


def fit_nominal(traj, phases: PhaseSeries, K: int = DEFAULT_ORDER) -> NominalGait:
    """Least-squares Fourier fit of r, ghat and rdot_p against phase."""
    if not 1 <= K <= 15:
        raise ConfigError(f"Fourier order must be in 1..15, got {K}")
    phi = np.asarray(phases.phi)
    if len(phi) != traj.n_records:
        raise ConfigError(f"{len(phi)} phases for {traj.n_records} samples")
    cycles = (phi[-1] - phi[0]) / TWO_PI
    if cycles < 5:
        raise ConfigError(f"nominal fit needs >= 5 cycles, data spans {cycles:.2f}")
    B = _fourier_basis(phi, K)
    cond = np.linalg.cond(B)
    if not cond < MAX_COND:
        raise IllConditioned(f"Fourier design matrix condition number {cond:.3g} exceeds {MAX_COND:g}")
    rdot_p = traj.rdot_p
    coef_r, coef_g, coef_p = (_lstsq(B, Y) for Y in (traj.r, traj.ghat, rdot_p))

    def rms(Y, C):
        return np.sqrt(np.mean((B @ C - Y) ** 2, axis=0)).tolist()

    residual = {"r": rms(traj.r, coef_r), "ghat": rms(traj.ghat, coef_g), "rdot_p": rms(rdot_p, coef_p)}
    return NominalGait(K, float(phases.rate), coef_r, coef_g, coef_p,
                       tuple(traj.actuated), tuple(traj.passive), phases.estimator, residual)


def shape_velocity(traj) -> np.ndarray:
    """Recorded shape velocity, or centered differences in time when none is stored."""
    rdot = getattr(traj, "rdot", None)
    if rdot is not None and np.all(np.isfinite(rdot)):
        return rdot
    return np.gradient(traj.r, traj.t, axis=0)


@dataclass(frozen=True)
class DeviationSample:
    phi: float
    delta: np.ndarray
    delta_dot: np.ndarray
    delta_dot_a: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class DeviationSet:
    """Deviation coordinates of a whole trial, stored column-wise.

    Behaves as a sequence of DeviationSample.
    """

    phi: np.ndarray
    delta: np.ndarray
    delta_dot: np.ndarray
    targets: np.ndarray
    actuated: tuple
    passive: tuple
    group_dim: int

    def __len__(self):
        return len(self.phi)

    def __getitem__(self, i) -> DeviationSample:
        return DeviationSample(float(self.phi[i]), self.delta[i], self.delta_dot[i],
                               self.delta_dot[i, list(self.actuated)], self.targets[i])

    @property
    def n(self) -> int:
        return self.delta.shape[1]

    @property
    def n_a(self) -> int:
        return len(self.actuated)

    @property
    def n_out(self) -> int:
        return self.targets.shape[1]

    @property
    def delta_dot_a(self) -> np.ndarray:
        return self.delta_dot[:, list(self.actuated)]

    def take(self, idx) -> "DeviationSet":
        return DeviationSet(self.phi[idx], self.delta[idx], self.delta_dot[idx], self.targets[idx],
                            self.actuated, self.passive, self.group_dim)


def deviations(traj, nominal: NominalGait, phases) -> DeviationSet:
    """delta = r - theta(phi), delta_dot = rdot - theta_dot(phi), targets (ghat, rdot_p)."""
    phi = np.asarray(getattr(phases, "phi", phases), dtype=float)
    if len(phi) != traj.n_records:
        raise ConfigError(f"{len(phi)} phases for {traj.n_records} samples")
    if traj.r.shape[1] != nominal.n or traj.group_dim != nominal.group_dim:
        raise ConfigError("trajectory dimensions do not match the nominal gait")
    delta = traj.r - nominal.theta(phi)
    delta_dot = shape_velocity(traj) - nominal.theta_dot(phi)
    return DeviationSet(phi, delta, delta_dot, traj.outputs, tuple(traj.actuated), tuple(traj.passive),
                        traj.group_dim)
