"""Dichotomized Gaussian resampling of binary preference matrices.

A latent standard normal vector ``Z`` with correlation ``lam`` is
thresholded so that requirement ``i`` is preferred iff ``Z_i > gamma_i``.
Fitting matches the column means exactly and the pairwise second moments
up to attainability.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .bvn import bivariate_normal_cdf
from .identify import PreferenceMatrix

__all__ = ["DichotomizedGaussianModel", "bivariate_normal_cdf", "fit", "sample",
           "implied_covariance"]

log = logging.getLogger(__name__)

LAMBDA_EPS = 1e-9
BISECTION_ITERS = 60
BISECTION_TOL = 1e-8
BLOCK_ROWS = 1 << 16


@dataclass(frozen=True)
class DichotomizedGaussianModel:
    """Fitted latent model.

    ``gamma[i]`` is ``None`` for a constant column, whose value is kept in
    ``constant_columns``.  ``lam`` is a PSD correlation matrix; rows and
    columns of constant requirements are those of the identity.
    """

    gamma: list
    lam: np.ndarray
    constant_columns: dict = field(default_factory=dict)
    means: np.ndarray | None = None
    residuals: np.ndarray | None = None
    repair_norm: float = 0.0

    @property
    def n(self) -> int:
        return len(self.gamma)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.shape != (self.n, self.n):
            raise ValueError("lambda must be n x n")
        if not np.allclose(lam, lam.T) or not np.allclose(np.diag(lam), 1.0):
            raise ValueError("lambda must be symmetric with unit diagonal")
        object.__setattr__(self, "lam", lam)

    def to_json(self) -> dict:
        return {
            "gamma": [None if g is None else float(g) for g in self.gamma],
            "lambda": self.lam.tolist(),
            "constant_columns": {str(i): int(v) for i, v in sorted(self.constant_columns.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DichotomizedGaussianModel":
        return cls(
            gamma=[None if g is None else float(g) for g in doc["gamma"]],
            lam=np.array(doc["lambda"], dtype=float),
            constant_columns={int(i): int(v) for i, v in doc.get("constant_columns", {}).items()},
        )


def _upper_orthant(gi, gj, lam):
    """P(Z_i > gi, Z_j > gj) = Phi2(-gi, -gj; lam)."""
    return bivariate_normal_cdf(-gi, -gj, lam)


def _solve_lambdas(gi, gj, target):
    """Vectorised bisection of the upper-orthant probability in lambda."""
    lo = np.full(gi.shape, -1.0 + LAMBDA_EPS)
    hi = np.full(gi.shape, 1.0 - LAMBDA_EPS)
    p_lo = _upper_orthant(gi, gj, lo)
    p_hi = _upper_orthant(gi, gj, hi)
    # unattainable targets clamp to the nearest bracket end
    clamped = np.clip(target, p_lo, p_hi)
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        below = _upper_orthant(gi, gj, mid) < clamped
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < BISECTION_TOL):
            break
    lam = 0.5 * (lo + hi)
    lam = np.where(clamped <= p_lo, lo, np.where(clamped >= p_hi, hi, lam))
    return lam, target - clamped


def _nearest_correlation(lam):
    w, v = np.linalg.eigh(lam)
    if w.min() >= 0:
        return lam, 0.0
    fixed = (v * np.clip(w, 0.0, None)) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    fixed = (fixed + fixed.T) / 2.0
    np.fill_diagonal(fixed, 1.0)
    return fixed, float(np.linalg.norm(fixed - lam))


def fit(prefs: PreferenceMatrix) -> DichotomizedGaussianModel:
    """Fit thresholds and latent correlations to a preference matrix.

    Pairwise targets use the population (``ddof=0``) covariance, so the
    target joint probability is the observed co-preference frequency.
    """
    x = prefs.cells.astype(float)
    if prefs.users < 2:
        raise ValueError("fitting needs at least two users")
    n = prefs.n
    mu = x.mean(axis=0)
    constant = {i: int(mu[i]) for i in range(n) if mu[i] in (0.0, 1.0)}
    if constant:
        log.warning("constant preference columns %s are sampled as constants", sorted(constant))
    gamma = [None if i in constant else float(ndtri(1.0 - mu[i])) for i in range(n)]

    lam = np.eye(n)
    residuals = np.zeros((n, n))
    live = [i for i in range(n) if i not in constant]
    if len(live) >= 2:
        cov = np.cov(x[:, live], rowvar=False, ddof=0)
        iu, ju = np.triu_indices(len(live), k=1)
        g = np.array([gamma[i] for i in live])
        m = mu[live]
        target = m[iu] * m[ju] + cov[iu, ju]
        solved, resid = _solve_lambdas(g[iu], g[ju], target)
        sub = np.eye(len(live))
        sub[iu, ju] = sub[ju, iu] = solved
        idx = np.array(live)
        lam[np.ix_(idx, idx)] = sub
        residuals[idx[iu], idx[ju]] = residuals[idx[ju], idx[iu]] = resid
        if np.any(resid != 0):
            log.warning("%d pairwise covariances are unattainable; max residual %.3g",
                        int(np.count_nonzero(resid)), float(np.abs(resid).max()))
    lam, repair = _nearest_correlation(lam)
    if repair > 0:
        log.info("latent correlation repaired to PSD (Frobenius change %.3g)", repair)
    return DichotomizedGaussianModel(gamma, lam, constant, mu, residuals, repair)


def _factor(lam):
    w, v = np.linalg.eigh(lam)
    if w.min() < -1e-8:
        raise RuntimeError("latent correlation matrix is not positive semidefinite")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample(model: DichotomizedGaussianModel, m: int, seed: int) -> PreferenceMatrix:
    """Draw ``m`` synthetic users.

    Rows are generated in fixed-size blocks, each from its own child of
    ``SeedSequence(seed)``, so output depends only on ``(model, m, seed)``.
    """
    if m < 1:
        raise ValueError("sample size must be at least 1")
    n = model.n
    factor = _factor(model.lam)
    thresholds = np.array([np.inf if g is None else g for g in model.gamma])
    n_blocks = -(-m // BLOCK_ROWS)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    out = np.empty((m, n), dtype=np.int8)
    for b, child in enumerate(children):
        start = b * BLOCK_ROWS
        rows = min(BLOCK_ROWS, m - start)
        z = np.random.default_rng(child).standard_normal((rows, n)) @ factor.T
        out[start:start + rows] = z > thresholds
    for i, v in model.constant_columns.items():
        out[:, i] = v
    return PreferenceMatrix(out)


def implied_covariance(model: DichotomizedGaussianModel) -> np.ndarray:
    """Bernoulli covariance the model reproduces; constant columns get zero rows."""
    n = model.n
    live = np.array([g is not None for g in model.gamma])
    g = np.array([0.0 if v is None else v for v in model.gamma])
    mu = np.where(live, ndtr(-g), 0.0)
    iu, ju = np.nonzero(np.outer(live, live))
    cov = np.zeros((n, n))
    joint = _upper_orthant(g[iu], g[ju], model.lam[iu, ju])
    cov[iu, ju] = joint - mu[iu] * mu[ju]
    return cov
