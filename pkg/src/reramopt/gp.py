"""Gaussian-process surrogates over joint (design, fidelity) inputs.

One model per objective. The kernel is a product of squared exponentials
over the design coordinates (ARD) and the fidelity coordinate, which is
simply an ARD squared-exponential kernel on the concatenated input
u = [x, z]. Targets are standardized internally; hyperparameters maximize
the log marginal likelihood with a multi-start L-BFGS search over log
parameters. Posterior function draws use a random-Fourier-feature
expansion of the kernel followed by Bayesian linear regression on the
feature weights; the weight posterior is sampled exactly through
Matheron's update so only n x n factorizations are ever needed.

A fitted model is immutable: posterior() and sample_function() may be
called concurrently, fit() builds a fresh model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GpConfig:
    lengthscale_bounds: tuple[float, float] = (0.05, 2.0)
    signal_var_bounds: tuple[float, float] = (0.05, 20.0)
    noise_var_bounds: tuple[float, float] = (1e-6, 1e-1)  # relative to var(y)=1
    n_restarts: int = 5
    max_opt_iter: int = 60


@dataclass(frozen=True)
class GpParams:
    signal_var: float
    lengthscales: tuple[float, ...]  # design dims then fidelity dim
    noise_var: float


@dataclass(frozen=True)
class CfGpModel:
    """Fitted GP over (x, z) with cached Cholesky factorization."""

    xz: np.ndarray  # (n, d+1)
    y: np.ndarray  # raw targets
    y_mean: float
    y_std: float
    params: GpParams
    chol: np.ndarray
    alpha: np.ndarray  # (K + sigma_n^2 I)^-1 y_standardized
    lml: float
    jitter: float

    @property
    def n_design_dims(self) -> int:
        return self.xz.shape[1] - 1


def _pairwise_sq(u: np.ndarray, v: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    a = u / lengthscales
    b = v / lengthscales
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(sq, 0.0)


def _kernel(u: np.ndarray, v: np.ndarray, params: GpParams) -> np.ndarray:
    ls = np.asarray(params.lengthscales)
    return params.signal_var * np.exp(-0.5 * _pairwise_sq(u, v, ls))


def _chol_with_jitter(k_noisy: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = 0.0
    scale = float(np.mean(np.diag(k_noisy)))
    for _ in range(8):
        try:
            return cholesky(k_noisy + jitter * np.eye(len(k_noisy)), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-10 * scale)
    raise np.linalg.LinAlgError("kernel matrix not positive definite even with jitter")


def _lml_and_grad(log_theta: np.ndarray, xz: np.ndarray, y: np.ndarray):
    """Negative LML and gradient w.r.t. log(signal_var, lengthscales, noise_var)."""
    n, dims = xz.shape
    signal_var = math.exp(log_theta[0])
    ls = np.exp(log_theta[1 : 1 + dims])
    noise_var = math.exp(log_theta[-1])

    scaled = xz / ls
    sq = _pairwise_sq(xz, xz, ls)
    k = signal_var * np.exp(-0.5 * sq)
    k_noisy = k + noise_var * np.eye(n)
    try:
        low = cholesky(k_noisy, lower=True)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros_like(log_theta)
    alpha = cho_solve((low, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.log(np.diag(low)).sum()) - 0.5 * n * _LOG_2PI

    k_inv = cho_solve((low, True), np.eye(n))
    tmp = np.outer(alpha, alpha) - k_inv
    grad = np.empty_like(log_theta)
    grad[0] = 0.5 * float(np.sum(tmp * k))
    for i in range(dims):
        diff_sq = (scaled[:, i][:, None] - scaled[:, i][None, :]) ** 2
        grad[1 + i] = 0.5 * float(np.sum(tmp * (k * diff_sq)))
    grad[-1] = 0.5 * noise_var * float(np.trace(tmp))
    return -lml, -grad


def fit(
    x: np.ndarray,
    z: np.ndarray,
    y: np.ndarray,
    config: GpConfig = GpConfig(),
    optimize: bool = True,
    init_params: GpParams | None = None,
    seed: int = 0,
) -> CfGpModel:
    """Fit the surrogate on (x_i, z_i, y_i) triples.

    Targets are standardized to zero mean / unit variance internally (a
    constant target keeps std 1 and drives the signal variance to its
    lower bound, so degenerate data still fits). The search runs
    ``n_restarts`` L-BFGS starts: the provided/default parameters first,
    then deterministic log-uniform draws within the bounds.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1, 1)
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(z) or len(x) != len(y):
        raise ValueError("x, z, y must have matching lengths")
    if len(y) < 2:
        raise ValueError("need at least 2 observations to fit")
    xz = np.hstack([x, z])
    dims = xz.shape[1]

    y_mean = float(y.mean())
    y_sd = float(y.std())
    y_std = y_sd if y_sd > 0.0 else 1.0
    ys = (y - y_mean) / y_std

    if init_params is None:
        init_params = GpParams(1.0, (0.5,) * dims, 1e-2)
    bounds_lo = np.array(
        [config.signal_var_bounds[0]]
        + [config.lengthscale_bounds[0]] * dims
        + [config.noise_var_bounds[0]]
    )
    bounds_hi = np.array(
        [config.signal_var_bounds[1]]
        + [config.lengthscale_bounds[1]] * dims
        + [config.noise_var_bounds[1]]
    )
    theta0 = np.log(
        np.clip(
            np.array([init_params.signal_var, *init_params.lengthscales, init_params.noise_var]),
            bounds_lo,
            bounds_hi,
        )
    )
    log_bounds = list(zip(np.log(bounds_lo), np.log(bounds_hi)))

    if optimize:
        starts = [theta0]
        rng = np.random.default_rng(seed)
        for _ in range(max(0, config.n_restarts - 1)):
            u = rng.random(dims + 2)
            starts.append(np.log(bounds_lo) + u * (np.log(bounds_hi) - np.log(bounds_lo)))
        best_theta, best_val = None, np.inf
        for start in starts:
            res = minimize(
                _lml_and_grad,
                start,
                args=(xz, ys),
                jac=True,
                method="L-BFGS-B",
                bounds=log_bounds,
                options={"maxiter": config.max_opt_iter},
            )
            if res.fun < best_val:
                best_val, best_theta = res.fun, res.x
        theta = best_theta
    else:
        theta = theta0

    signal_var = math.exp(theta[0])
    lengthscales = tuple(np.exp(theta[1 : 1 + dims]))
    noise_var = math.exp(theta[-1])
    params = GpParams(signal_var, lengthscales, noise_var)

    k_noisy = _kernel(xz, xz, params) + noise_var * np.eye(len(xz))
    low, jitter = _chol_with_jitter(k_noisy)
    alpha = cho_solve((low, True), ys)
    lml = -0.5 * float(ys @ alpha) - float(np.log(np.diag(low)).sum()) - 0.5 * len(ys) * _LOG_2PI
    return CfGpModel(
        xz=xz,
        y=y,
        y_mean=y_mean,
        y_std=y_std,
        params=params,
        chol=low,
        alpha=alpha,
        lml=lml,
        jitter=jitter,
    )


def posterior(model: CfGpModel, x: np.ndarray, z) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std of the latent function at (x, z), batched.

    ``x`` is (m, d) or (d,); ``z`` is a scalar or (m,). Values are returned
    on the raw target scale; the variance is clamped at 0 before the root.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z_arr = np.broadcast_to(np.asarray(z, dtype=float), (len(x),)).reshape(-1, 1)
    q = np.hstack([x, z_arr])
    k_star = _kernel(q, model.xz, model.params)
    mean = k_star @ model.alpha
    v = solve_triangular(model.chol, k_star.T, lower=True)
    var = model.params.signal_var - np.sum(v * v, axis=0)
    var = np.maximum(var, 0.0)
    return model.y_mean + model.y_std * mean, model.y_std * np.sqrt(var)


@dataclass(frozen=True)
class SampledFunction:
    """One analytic draw of the highest-fidelity function g(., z*=1)."""

    freqs: np.ndarray  # (m, d+1) spectral frequencies
    phases: np.ndarray  # (m,)
    weights: np.ndarray  # (m,)
    feature_scale: float
    y_mean: float
    y_std: float
    z_star: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.hstack([x, np.full((len(x), 1), self.z_star)])
        phi = self.feature_scale * np.cos(u @ self.freqs.T + self.phases)
        return self.y_mean + self.y_std * (phi @ self.weights)


def sample_function(model: CfGpModel, seed: int, n_features: int = 500) -> SampledFunction:
    """Draw one posterior function, evaluable anywhere at z = z* = 1.

    The kernel is approximated with ``n_features`` random Fourier features
    and the Gaussian weight posterior of the resulting Bayesian linear
    regression is sampled exactly (Matheron's update), so the draw costs
    one n x n factorization regardless of the feature count.
    """
    rng = np.random.default_rng(seed)
    params = model.params
    m = n_features
    ls = np.asarray(params.lengthscales)
    freqs = rng.standard_normal((m, len(ls))) / ls
    phases = rng.uniform(0.0, 2.0 * np.pi, m)
    scale = math.sqrt(2.0 * params.signal_var / m)

    phi = scale * np.cos(model.xz @ freqs.T + phases)  # (n, m)
    ys = (model.y - model.y_mean) / model.y_std
    sigma2 = params.noise_var

    w0 = rng.standard_normal(m)
    eps = rng.standard_normal(len(ys)) * math.sqrt(sigma2)
    gram = phi @ phi.T + sigma2 * np.eye(len(ys))
    low, _ = _chol_with_jitter(gram)
    resid = ys - phi @ w0 - eps
    weights = w0 + phi.T @ cho_solve((low, True), resid)

    return SampledFunction(
        freqs=freqs,
        phases=phases,
        weights=weights,
        feature_scale=scale,
        y_mean=model.y_mean,
        y_std=model.y_std,
    )
