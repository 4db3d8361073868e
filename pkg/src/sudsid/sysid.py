"""Per-phase affine regression of (ghat, rdot_p) on deviation coordinates.

At each of ``n_bins`` phase centers a weighted ridge least-squares problem

    (ghat, rdot_p) ~ C + C_r delta + B delta_dot_a + B_r (delta x delta_dot_a)

is solved over all samples with wrapped-Gaussian weights in phase, with
penalty ``ridge * |beta|^2``.  Models
are scored against the phase-only template with

    Gamma = 1 - sum|D - y| / sum|T - y|.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateTemplate, InsufficientCoverage
from .phase import DeviationSet, NominalGait, TWO_PI
from .simulate import _atomic_write

RANK_FACTOR = 1e3


def feature_count(n: int, n_a: int) -> int:
    return 1 + n + n_a + n * n_a


def build_regressors(delta, delta_dot_a) -> np.ndarray:
    """Features [1, delta, delta_dot_a, vec(delta outer delta_dot_a)].

    Accepts single vectors or stacked rows; the outer-product block is
    row-major in (delta index, delta_dot_a index).
    """
    delta = np.asarray(delta, dtype=float)
    dda = np.asarray(delta_dot_a, dtype=float)
    single = delta.ndim == 1
    delta, dda = np.atleast_2d(delta), np.atleast_2d(dda)
    if len(delta) != len(dda):
        raise ConfigError("delta and delta_dot_a have different sample counts")
    m = len(delta)
    outer = (delta[:, :, None] * dda[:, None, :]).reshape(m, -1)
    X = np.hstack([np.ones((m, 1)), delta, dda, outer])
    return X[0] if single else X


def wrap(phi):
    return (np.asarray(phi) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class FitConfig:
    n_bins: int = 64
    bandwidth: float = TWO_PI / 16
    ridge: float = 1e-8
    # minimum effective sample count per bin, as a multiple of the feature count
    coverage: float = 3.0
    # shift targets along the template to the bin center before regressing
    align_targets: bool = True

    def __post_init__(self):
        if self.n_bins < 2:
            raise ConfigError("need at least 2 phase bins")
        if not self.bandwidth > 0:
            raise ConfigError("kernel bandwidth must be positive")
        if not self.ridge >= 0:
            raise ConfigError("ridge must be non-negative")


@dataclass
class BinDiagnostics:
    weight_mass: np.ndarray        # sum of weights per bin
    effective_samples: np.ndarray  # (sum w)^2 / sum w^2
    residual_rms: np.ndarray       # weighted residual RMS per bin and output
    rank_deficient: np.ndarray     # bool per bin: smallest singular value below RANK_FACTOR * ridge * largest
    weak_columns: list             # per bin, feature columns whose weighted norm is below that floor


@dataclass
class SudsModel:
    """Per-bin coefficients ``coef`` of shape (n_bins, n_features, n_out)."""

    centers: np.ndarray
    coef: np.ndarray
    n: int
    actuated: tuple
    group_dim: int
    config: FitConfig
    diagnostics: BinDiagnostics
    nominal: NominalGait = None

    @property
    def n_a(self) -> int:
        return len(self.actuated)

    @property
    def n_features(self) -> int:
        return self.coef.shape[1]

    @property
    def n_out(self) -> int:
        return self.coef.shape[2]

    def _block(self, lo, hi):
        return np.swapaxes(self.coef[:, lo:hi, :], 1, 2)

    @property
    def C(self):
        return self.coef[:, 0, :]

    @property
    def C_r(self):
        return self._block(1, 1 + self.n)

    @property
    def B(self):
        return self._block(1 + self.n, 1 + self.n + self.n_a)

    @property
    def B_r(self):
        return self._block(1 + self.n + self.n_a, self.n_features)

    def coefficients_at(self, phi) -> np.ndarray:
        """Periodic linear interpolation of coefficients between bin centers."""
        phi = np.asarray(phi, dtype=float)
        N = len(self.centers)
        pos = np.mod(phi, TWO_PI) / (TWO_PI / N)
        i0 = np.floor(pos).astype(int) % N
        frac = (pos - np.floor(pos))[..., None, None]
        return (1 - frac) * self.coef[i0] + frac * self.coef[(i0 + 1) % N]

    def to_dict(self) -> dict:
        d = self.diagnostics
        return dict(
            centers=self.centers.tolist(), coef=self.coef.tolist(), n=self.n,
            actuated=list(self.actuated), group_dim=self.group_dim,
            n_features=self.n_features, config=asdict(self.config),
            diagnostics=dict(weight_mass=d.weight_mass.tolist(),
                             effective_samples=d.effective_samples.tolist(),
                             residual_rms=d.residual_rms.tolist(),
                             rank_deficient=d.rank_deficient.tolist(),
                             weak_columns=d.weak_columns),
            nominal=None if self.nominal is None else self.nominal.to_dict(),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "SudsModel":
        try:
            dg = d["diagnostics"]
            diag = BinDiagnostics(np.asarray(dg["weight_mass"], float), np.asarray(dg["effective_samples"], float),
                                  np.asarray(dg["residual_rms"], float), np.asarray(dg["rank_deficient"], bool),
                                  [list(w) for w in dg["weak_columns"]])
            nominal = d.get("nominal")
            model = cls(np.asarray(d["centers"], float), np.asarray(d["coef"], float), int(d["n"]),
                        tuple(d["actuated"]), int(d["group_dim"]), FitConfig(**d["config"]), diag,
                        None if nominal is None else NominalGait.from_dict(nominal))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model record: {exc}") from exc
        if model.coef.ndim != 3 or model.n_features != feature_count(model.n, model.n_a):
            raise ConfigError("model coefficient table does not match its dimensions")
        return model

    def save(self, path) -> Path:
        path = Path(path)
        _atomic_write(path, json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "SudsModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read model {path}: {exc}") from exc


def _kernel_weights(phi, centers, h):
    return np.exp(-wrap(np.subtract.outer(centers, phi)) ** 2 / (2 * h * h))


def fit(dataset: DeviationSet, config: FitConfig = None, nominal: NominalGait = None) -> SudsModel:
    """Fit the per-bin affine model by kernel-weighted ridge regression."""
    config = FitConfig() if config is None else config
    X = build_regressors(dataset.delta, dataset.delta_dot_a)
    Y = np.asarray(dataset.targets, dtype=float)
    phi = np.asarray(dataset.phi, dtype=float)
    p, n_out = X.shape[1], Y.shape[1]
    N = config.n_bins
    centers = TWO_PI * np.arange(N) / N

    W = _kernel_weights(phi, centers, config.bandwidth)
    mass = W.sum(axis=1)
    ess = mass ** 2 / np.maximum((W ** 2).sum(axis=1), np.finfo(float).tiny)
    short = np.flatnonzero(ess < config.coverage * p)
    if short.size:
        raise InsufficientCoverage(
            f"{short.size} of {N} bins have fewer than {config.coverage:g}x{p} effective samples "
            f"(min {ess.min():.1f})", bins=tuple(int(b) for b in short))

    use_template = config.align_targets and nominal is not None
    if use_template:
        T_samples = nominal.outputs(phi)
        T_centers = nominal.outputs(centers)

    coef = np.empty((N, p, n_out))
    resid = np.empty((N, n_out))
    rank_def = np.zeros(N, dtype=bool)
    weak = []
    for b in range(N):
        w = W[b]
        sw = np.sqrt(w)[:, None]
        Yb = Y - T_samples + T_centers[b] if use_template else Y
        U, s, Vt = np.linalg.svd(sw * X, full_matrices=False)
        lam = config.ridge
        gain = s / (s ** 2 + lam) if lam > 0 else np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
        coef[b] = Vt.T @ (gain[:, None] * (U.T @ (sw * Yb)))
        r = X @ coef[b] - Yb
        resid[b] = np.sqrt((w[:, None] * r ** 2).sum(axis=0) / mass[b])
        floor = RANK_FACTOR * max(config.ridge, np.finfo(float).eps) * s[0]
        rank_def[b] = s[-1] < floor
        weak.append([int(j) for j in np.flatnonzero(np.linalg.norm(sw * X, axis=0) < floor)])
    if not np.all(np.isfinite(coef)):
        raise ConfigError("non-finite coefficients after fitting")
    diag = BinDiagnostics(mass, ess, resid, rank_def, weak)
    return SudsModel(centers, coef, dataset.n, tuple(dataset.actuated), dataset.group_dim, config, diag, nominal)


def predict(model: SudsModel, phi, delta, delta_dot_a):
    """Data-driven prediction (ghat_D, rdot_D); accepts single samples or stacked rows."""
    X = build_regressors(delta, delta_dot_a)
    C = model.coefficients_at(phi)
    Y = np.einsum("...f,...fo->...o", X, C)
    return Y[..., :model.group_dim], Y[..., model.group_dim:]


def template_predict(nominal: NominalGait, phi):
    """Phase-only prediction (ghat_T, rdot_T)."""
    Y = nominal.outputs(phi)
    gd = nominal.group_dim
    return Y[..., :gd], Y[..., gd:]


def gamma(err_data, err_template) -> float:
    """1 - sum|err_data| / sum|err_template|; raises DegenerateTemplate on a zero denominator."""
    num = float(np.sum(np.abs(err_data)))
    den = float(np.sum(np.abs(err_template)))
    if den == 0.0:
        raise DegenerateTemplate("template error sum is zero; Gamma is undefined")
    return 1.0 - num / den


def _gamma_or_none(d, t):
    try:
        return gamma(d, t)
    except DegenerateTemplate:
        return None


@dataclass
class EvaluationReport:
    gamma_ghat: float
    gamma_rdot: float
    gamma_ghat_components: list
    gamma_rdot_components: list
    m: int
    phi: np.ndarray
    truth: np.ndarray
    data_driven: np.ndarray
    template: np.ndarray
    group_dim: int
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return dict(gamma_ghat=self.gamma_ghat, gamma_rdot=self.gamma_rdot,
                    gamma_ghat_components=self.gamma_ghat_components,
                    gamma_rdot_components=self.gamma_rdot_components, m=self.m,
                    sum_abs_error_data=np.abs(self.data_driven - self.truth).sum(axis=0).tolist(),
                    sum_abs_error_template=np.abs(self.template - self.truth).sum(axis=0).tolist(),
                    **self.extra)

    def output_names(self):
        gd = self.group_dim
        g = ["ghat.vx"] if gd == 1 else ["ghat.vx", "ghat.vy", "ghat.omega"]
        return g + [f"rdot_p.{i}" for i in range(self.truth.shape[1] - gd)]

    def write(self, json_path, csv_path=None):
        _atomic_write(Path(json_path), json.dumps(self.summary(), indent=2) + "\n")
        if csv_path is not None:
            names = self.output_names()
            header = ["phi"] + [f"{k}.{s}" for s in ("truth", "D", "T") for k in names]
            rows = np.hstack([self.phi[:, None], self.truth, self.data_driven, self.template])
            lines = [",".join(header)] + [",".join(format(v, ".17g") for v in row) for row in rows]
            _atomic_write(Path(csv_path), "\n".join(lines) + "\n")


def score(truth, data_driven, template, group_dim: int, phi=None) -> EvaluationReport:
    """Gamma per output group and per component from stacked (ghat, rdot_p) series."""
    truth, D, T = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (truth, data_driven, template))
    if not truth.shape == D.shape == T.shape:
        raise ConfigError("truth, data-driven and template series must have the same shape")
    gd = group_dim
    eD, eT = D - truth, T - truth
    g = gamma(eD[:, :gd], eT[:, :gd])
    r = gamma(eD[:, gd:], eT[:, gd:]) if truth.shape[1] > gd else None
    comps = [_gamma_or_none(eD[:, j], eT[:, j]) for j in range(truth.shape[1])]
    phi = np.zeros(len(truth)) if phi is None else np.asarray(phi, dtype=float)
    return EvaluationReport(g, r, comps[:gd], comps[gd:], len(truth), phi, truth, D, T, gd)


def evaluate(model: SudsModel, nominal: NominalGait, test: DeviationSet) -> EvaluationReport:
    """Score the data-driven model against the phase-only template on held-out samples."""
    if test.n != model.n or tuple(test.actuated) != tuple(model.actuated) or test.group_dim != model.group_dim:
        raise ConfigError("test data dimensions do not match the model")
    if nominal.n != model.n or nominal.group_dim != model.group_dim:
        raise ConfigError("nominal gait dimensions do not match the model")
    gD, rD = predict(model, test.phi, test.delta, test.delta_dot_a)
    gT, rT = template_predict(nominal, test.phi)
    return score(test.targets, np.hstack([gD, rD]), np.hstack([gT, rT]), model.group_dim, test.phi)


def planted_dataset(n: int, n_a: int, group_dim: int = 1, n_bins: int = 64, cycles: int = 200,
                    sigma_out: float = 0.0, rng: np.random.Generator = None, delta_scale: float = 0.3,
                    velocity_scale: float = 1.0):
    """Samples drawn exactly from a known per-bin affine model.

    Every sample sits on a bin center, with ``cycles`` samples per bin.
    Ground-truth coefficients vary smoothly with phase.  Returns the
    dataset and the true coefficient table (n_bins, n_features, n_out).
    Fit it with a bandwidth well below the bin spacing so bins decouple.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n_p = n - n_a
    n_out = group_dim + n_p
    p = feature_count(n, n_a)
    centers = TWO_PI * np.arange(n_bins) / n_bins
    base = rng.normal(size=(3, p, n_out))
    truth = (base[0] + np.cos(centers)[:, None, None] * base[1]
             + 0.5 * np.sin(2 * centers)[:, None, None] * base[2])
    idx = np.tile(np.arange(n_bins), cycles)
    phi = centers[idx] + TWO_PI * np.repeat(np.arange(cycles), n_bins)
    m = len(phi)
    delta = delta_scale * rng.normal(size=(m, n))
    delta_dot = velocity_scale * rng.normal(size=(m, n))
    actuated = tuple(range(n_a))
    X = build_regressors(delta, delta_dot[:, :n_a])
    Y = np.einsum("mf,mfo->mo", X, truth[idx]) + sigma_out * rng.normal(size=(m, n_out))
    data = DeviationSet(phi, delta, delta_dot, Y, actuated, tuple(range(n_a, n)), group_dim)
    return data, truth
