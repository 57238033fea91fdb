"""Closed-form Bayesian linear regression on latent features.

Targets for one output dimension get an isotropic Gaussian prior
w ~ N(0, g I) over the last-layer weights and a heteroscedastic Gaussian
likelihood with per-row noise variances supplied by the network's
variance head.  The posterior is Gaussian with

    A   = (1/g) I + Z^T diag(1/sigma^2) Z        (precision)
    w_N = A^{-1} Z^T diag(1/sigma^2) y

and everything downstream (predictive variance, weight sampling) is
computed through the Cholesky factor of A, never an explicit inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .nn import (VARIANCE_FLOOR, GaussianPrediction, MlpModel, forward,
                 gaussian_nll)

# 13 logarithmic points, 1e-4 .. 1e2, two per decade
DEFAULT_G_GRID = tuple(float(g) for g in np.logspace(-4, 2, 13))

_JITTER_START = 1e-9
_JITTER_LIMIT = 1e-3


class FactorizationError(RuntimeError):
    """Cholesky failed even after the jitter ladder."""


@dataclass(frozen=True)
class BlrPosterior:
    """Posterior over last-layer weights for one output dimension.

    precision_cholesky is the lower factor L with L L^T = A; the
    posterior covariance V_N = A^{-1} is never materialized.
    """

    prior_variance: float
    mean_weights: np.ndarray
    precision_cholesky: np.ndarray
    latent_dim: int


@dataclass(frozen=True)
class GridSearchResult:
    chosen_g: float
    grid: tuple[float, ...]
    validation_nll_per_g: tuple[float, ...]


def _chol_with_jitter(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Jitter starts at 1e-9 * trace(A)/h and grows tenfold up to
    1e-3 * trace(A)/h before giving up.
    """
    h = a.shape[0]
    try:
        return cholesky(a, lower=True)
    except LinAlgError:
        pass
    base = float(np.trace(a)) / h
    scale = _JITTER_START
    while scale <= _JITTER_LIMIT:
        try:
            return cholesky(a + (scale * base) * np.eye(h), lower=True)
        except LinAlgError:
            scale *= 10.0
    cond = float(np.linalg.cond(a))
    raise FactorizationError(
        f"precision matrix not factorizable after jitter up to "
        f"{_JITTER_LIMIT * base:.3e} (condition estimate {cond:.3e})")


def fit_blr(latents: np.ndarray, targets: np.ndarray,
            noise_variances: np.ndarray, g: float) -> BlrPosterior:
    """Posterior from latents Z (N x h), targets y (N,) and noise variances (N,).

    N = 0 is legal and recovers the prior exactly.  All noise variances
    must be strictly positive; g is the prior variance.
    """
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError("latents must be a 2-D array (rows x latent_dim)")
    y = np.asarray(targets, dtype=np.float64).ravel()
    s2 = np.asarray(noise_variances, dtype=np.float64).ravel()
    n, h = z.shape
    if y.shape[0] != n or s2.shape[0] != n:
        raise ValueError("latents, targets and noise_variances disagree on row count")
    if g <= 0:
        raise ValueError("prior variance g must be positive")
    if np.any(s2 <= 0):
        raise ValueError("noise variances must be strictly positive")

    zw = z / s2[:, None]
    a = np.eye(h) / g + z.T @ zw
    b = zw.T @ y
    factor = _chol_with_jitter(a)
    w = cho_solve((factor, True), b)
    w.setflags(write=False)
    factor.setflags(write=False)
    return BlrPosterior(prior_variance=float(g), mean_weights=w,
                        precision_cholesky=factor, latent_dim=h)


def epistemic_variance(posterior: BlrPosterior, z: np.ndarray) -> np.ndarray:
    """z^T V_N z through one triangular solve: ||L^{-1} z||^2."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    zt = np.atleast_2d(z).T
    if zt.shape[0] != posterior.latent_dim:
        raise ValueError(f"latent dimension {zt.shape[0]} does not match "
                         f"posterior latent_dim {posterior.latent_dim}")
    t = solve_triangular(posterior.precision_cholesky, zt, lower=True)
    out = np.einsum("ij,ij->j", t, t)
    return float(out[0]) if single else out


def predict_blr(posterior: BlrPosterior, z: np.ndarray,
                aleatoric_variance) -> GaussianPrediction:
    """Posterior predictive N(z^T w_N, sigma^2(x) + z^T V_N z).

    z may be a single latent (h,) or a batch (n, h); aleatoric_variance
    follows (scalar or (n,)).
    """
    z = np.asarray(z, dtype=np.float64)
    s2 = np.asarray(aleatoric_variance, dtype=np.float64)
    if np.any(s2 <= 0):
        raise ValueError("aleatoric variance must be positive")
    epi = epistemic_variance(posterior, z)
    mean = z @ posterior.mean_weights
    return GaussianPrediction(
        mean=np.reshape(mean, (-1, 1)) if z.ndim == 2 else np.atleast_1d(mean),
        aleatoric_variance=np.reshape(np.broadcast_to(s2, np.shape(mean)), (-1, 1))
        if z.ndim == 2 else np.atleast_1d(s2),
        epistemic_variance=np.reshape(epi, (-1, 1)) if z.ndim == 2
        else np.atleast_1d(epi))


def sample_weights(posterior: BlrPosterior, seed: int, count: int) -> np.ndarray:
    """Draw `count` posterior weight vectors w ~ N(w_N, V_N); shape (count, h).

    Uses w = w_N + L^{-T} xi with xi standard normal, so the draws share
    the fit's Cholesky factor.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((posterior.latent_dim, count))
    shift = solve_triangular(posterior.precision_cholesky, xi,
                             lower=True, trans="T")
    return posterior.mean_weights[None, :] + shift.T


def fit_deep_blr(model: MlpModel, train_x: np.ndarray, train_y: np.ndarray,
                 g: float) -> list[BlrPosterior]:
    """One posterior per output dimension on the model's latents.

    Latents and per-row aleatoric variances come from a dropout-free
    forward pass; output dimensions are treated independently.
    """
    x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    y = np.asarray(train_y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[1] != model.architecture.output_dim:
        raise ValueError(f"targets have {y.shape[1]} columns, model expects "
                         f"{model.architecture.output_dim}")
    latents, pred = forward(model, x)
    return [fit_blr(latents, y[:, d], pred.aleatoric_variance[:, d], g)
            for d in range(model.architecture.output_dim)]


def predict_deep_blr(model: MlpModel, posteriors: list[BlrPosterior],
                     x: np.ndarray) -> GaussianPrediction:
    """Predictive distribution over all output dimensions for a batch (n, p)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = model.architecture.output_dim
    if len(posteriors) != d:
        raise ValueError(f"expected {d} posteriors, got {len(posteriors)}")
    latents, pred = forward(model, x)
    mean = np.column_stack([latents @ posteriors[k].mean_weights for k in range(d)])
    epi = np.column_stack([epistemic_variance(posteriors[k], latents)
                           for k in range(d)])
    return GaussianPrediction(mean=mean,
                              aleatoric_variance=pred.aleatoric_variance,
                              epistemic_variance=epi)


def _validation_split(n: int, validation_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_fit = int(np.ceil((1.0 - validation_fraction) * n))
    return perm[:n_fit], perm[n_fit:]


def select_prior_variance(model: MlpModel, train_x: np.ndarray,
                          train_y: np.ndarray,
                          grid=DEFAULT_G_GRID, *,
                          validation_fraction: float = 0.1,
                          seed: int = 0) -> GridSearchResult:
    """Grid-search g by mean predictive NLL on a held-out slice.

    The network is fixed; only the closed-form refit varies with g, so
    the latent design matrices are computed once.  Failed factorizations
    record +inf instead of aborting.  Ties go to the smallest g; one g is
    chosen jointly across output dimensions.
    """
    grid = tuple(sorted(float(g) for g in grid))
    if not grid:
        raise ValueError("grid must be non-empty")
    x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    y = np.asarray(train_y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    fit_idx, val_idx = _validation_split(x.shape[0], validation_fraction, seed)
    if val_idx.size == 0:
        raise ValueError("validation slice is empty; need more training rows")

    d = model.architecture.output_dim
    z_fit, pred_fit = forward(model, x[fit_idx])
    z_val, pred_val = forward(model, x[val_idx])
    h = z_fit.shape[1]
    y_fit, y_val = y[fit_idx], y[val_idx]

    # g-independent pieces, one set per output dimension
    grams, rhs = [], []
    for k in range(d):
        zw = z_fit / pred_fit.aleatoric_variance[:, k][:, None]
        grams.append(z_fit.T @ zw)
        rhs.append(zw.T @ y_fit[:, k])

    nlls = []
    eye = np.eye(h)
    for g in grid:
        total = 0.0
        try:
            for k in range(d):
                factor = _chol_with_jitter(eye / g + grams[k])
                w = cho_solve((factor, True), rhs[k])
                t = solve_triangular(factor, z_val.T, lower=True)
                epi = np.einsum("ij,ij->j", t, t)
                var = np.maximum(pred_val.aleatoric_variance[:, k] + epi,
                                 VARIANCE_FLOOR)
                resid = z_val @ w - y_val[:, k]
                total += float(np.mean(0.5 * np.log(2.0 * np.pi * var)
                                       + resid ** 2 / (2.0 * var)))
        except FactorizationError:
            total = np.inf
        nlls.append(total)
    best = int(np.argmin(nlls))   # first minimum = smallest g on the sorted grid
    return GridSearchResult(chosen_g=grid[best], grid=grid,
                            validation_nll_per_g=tuple(nlls))


def fit_deep_blr_with_grid(model: MlpModel, train_x: np.ndarray,
                           train_y: np.ndarray, grid=DEFAULT_G_GRID, *,
                           seed: int = 0):
    """Select g on a 90/10 slice, then refit on the full training set.

    Returns (posteriors, GridSearchResult).
    """
    result = select_prior_variance(model, train_x, train_y, grid, seed=seed)
    return fit_deep_blr(model, train_x, train_y, result.chosen_g), result
