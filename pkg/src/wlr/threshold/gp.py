"""Probit Gaussian-process classifier with a Laplace posterior.

Inputs live in normalised Cartesian displacement space ``(x/Lx, z/Lz)``.
Mode finding and prediction follow the usual Newton scheme with
``B = I + W^1/2 K W^1/2`` (Rasmussen & Williams, algorithms 3.1 and 3.2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import log_ndtr

from ..errors import SingularKernel

DEFAULT_LENGTHSCALES = (0.3, 0.3)
DEFAULT_VARIANCE = 4.0
LENGTHSCALE_BOUNDS = (0.05, 2.0)
VARIANCE_BOUNDS = (0.25, 4.0)

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Limits:
    """Half-widths of the displacement search box in mm."""

    lx: float = 15.0
    lz: float = 15.0

    def __post_init__(self):
        if not (self.lx > 0 and self.lz > 0):
            raise ValueError("limits must be positive")

    @classmethod
    def parse(cls, text: str) -> "Limits":
        lx, lz = (float(v) for v in text.split(","))
        return cls(lx, lz)


@dataclass(frozen=True)
class TrialRecord:
    x_err_mm: float
    z_err_mm: float
    correct: bool
    subject: str = ""
    condition: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.x_err_mm) and np.isfinite(self.z_err_mm)):
            raise ValueError("trial displacement must be finite")


def se_kernel(A: np.ndarray, B: np.ndarray, lengthscales, variance: float) -> np.ndarray:
    ls = np.asarray(lengthscales, dtype=float)
    a = A / ls
    b = B / ls
    sq = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
    return variance * np.exp(-0.5 * np.maximum(sq, 0.0))


def _probit_terms(f, y):
    """log p(y|f), its gradient and the negative Hessian diagonal W."""
    z = y * f
    logcdf = log_ndtr(z)
    ratio = np.exp(-0.5 * z * z - _LOG_SQRT_2PI - logcdf)
    grad = y * ratio
    W = ratio * (ratio + z)
    return logcdf, grad, W


@dataclass
class GPModel:
    """Fitted latent posterior. Immutable in practice once returned by fit_gp."""

    lengthscales: np.ndarray
    variance: float
    X: np.ndarray
    y: np.ndarray
    limits: Limits = field(default_factory=Limits)
    f_hat: np.ndarray | None = None
    grad: np.ndarray | None = None
    sqrt_w: np.ndarray | None = None
    chol_b: np.ndarray | None = None
    log_marginal: float = 0.0

    @property
    def n(self) -> int:
        return len(self.y)

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Latent posterior mean and variance at normalised points ``(k, 2)``."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.n == 0:
            return np.zeros(len(Xq)), np.full(len(Xq), float(self.variance))
        Ks = se_kernel(self.X, Xq, self.lengthscales, self.variance)
        mu = Ks.T @ self.grad
        v = linalg.solve_triangular(self.chol_b, self.sqrt_w[:, None] * Ks, lower=True, check_finite=False)
        var = self.variance - np.sum(v * v, axis=0)
        return mu, np.maximum(var, 0.0)


def _laplace(K: np.ndarray, y: np.ndarray, f0=None, max_iter: int = 100, tol: float = 1e-9):
    n = len(y)
    f = np.zeros(n) if f0 is None else f0.copy()
    a = np.zeros(n)
    psi_old = -np.inf
    for _ in range(max_iter):
        logp, grad, W = _probit_terms(f, y)
        sw = np.sqrt(W)
        B = np.eye(n) + sw[:, None] * K * sw[None, :]
        try:
            L = linalg.cholesky(B, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularKernel("B matrix is not positive definite") from exc
        b = W * f + grad
        c = linalg.cho_solve((L, True), sw * (K @ b), check_finite=False)
        a_new = b - sw * c
        f_new = K @ a_new
        psi = -0.5 * a_new @ f_new + np.sum(log_ndtr(y * f_new))
        # damp the step if the objective went down (rare for the log-concave probit)
        step = 1.0
        while psi < psi_old - 1e-12 and step > 1e-4:
            step *= 0.5
            a_try = a + step * (a_new - a)
            f_try = K @ a_try
            psi = -0.5 * a_try @ f_try + np.sum(log_ndtr(y * f_try))
            a_new, f_new = a_try, f_try
        a, f = a_new, f_new
        if abs(psi - psi_old) < tol * max(1.0, abs(psi)):
            psi_old = psi
            break
        psi_old = psi
    logp, grad, W = _probit_terms(f, y)
    sw = np.sqrt(W)
    B = np.eye(n) + sw[:, None] * K * sw[None, :]
    L = linalg.cholesky(B, lower=True, check_finite=False)
    log_q = -0.5 * a @ f + np.sum(logp) - np.sum(np.log(np.diag(L)))
    return f, grad, sw, L, float(log_q)


def _jittered_kernel(X, lengthscales, variance):
    K = se_kernel(X, X, lengthscales, variance)
    n = len(X)
    for jitter in (1e-8, 1e-6, 1e-4, 1e-2):
        Kj = K + jitter * variance * np.eye(n)
        try:
            np.linalg.cholesky(Kj)
            return Kj
        except np.linalg.LinAlgError:
            continue
    raise SingularKernel("kernel matrix not factorisable even with jitter")


def _third_derivative(f, y):
    z = y * f
    r = np.exp(-0.5 * z * z - _LOG_SQRT_2PI - log_ndtr(z))
    return y * (r * (2.0 * r + z) * (z + r) - r)


def neg_log_marginal(theta, X, y, f0=None):
    """Negative Laplace log marginal likelihood and its gradient.

    ``theta`` is ``log([lengthscale_x, lengthscale_z, variance])``.
    """
    ls, var = np.exp(theta[:2]), float(np.exp(theta[2]))
    K = _jittered_kernel(X, ls, var)
    f, grad, sw, L, log_q = _laplace(K, y, f0)
    a = grad
    # R = W^1/2 B^-1 W^1/2
    R = sw[:, None] * linalg.cho_solve((L, True), np.diag(sw), check_finite=False)
    C = linalg.solve_triangular(L, sw[:, None] * K, lower=True, check_finite=False)
    # implicit term through the mode: d(-1/2 log B)/df_i = +1/2 Sigma_ii d3logp_i
    s2 = 0.5 * (np.diag(K) - np.sum(C * C, axis=0)) * _third_derivative(f, y)
    diff2 = [(X[:, k][:, None] - X[:, k][None, :]) ** 2 / ls[k] ** 2 for k in range(2)]
    Kbase = se_kernel(X, X, ls, var)
    derivs = [Kbase * diff2[0], Kbase * diff2[1], K]
    g = np.empty(3)
    for j, Cj in enumerate(derivs):
        s1 = 0.5 * a @ Cj @ a - 0.5 * np.sum(R * Cj)
        b = Cj @ grad
        s3 = b - K @ (R @ b)
        g[j] = s1 + s2 @ s3
    return -log_q, -g, f


def _fit_fixed(X, y, lengthscales, variance, limits, f0=None) -> GPModel:
    K = _jittered_kernel(X, lengthscales, variance)
    f, grad, sw, L, log_q = _laplace(K, y, f0)
    return GPModel(
        lengthscales=np.asarray(lengthscales, dtype=float),
        variance=float(variance),
        X=X,
        y=y,
        limits=limits,
        f_hat=f,
        grad=grad,
        sqrt_w=sw,
        chol_b=L,
        log_marginal=log_q,
    )


def trials_to_arrays(trials: Sequence[TrialRecord], limits: Limits) -> tuple[np.ndarray, np.ndarray]:
    """Normalised inputs and +/-1 labels."""
    if len(trials) == 0:
        return np.zeros((0, 2)), np.zeros(0)
    X = np.array([[t.x_err_mm / limits.lx, t.z_err_mm / limits.lz] for t in trials])
    y = np.array([1.0 if t.correct else -1.0 for t in trials])
    return X, y


def fit_gp_arrays(
    X: np.ndarray,
    y: np.ndarray,
    limits: Limits = Limits(),
    lengthscales=DEFAULT_LENGTHSCALES,
    variance: float = DEFAULT_VARIANCE,
    optimize_hypers: bool = True,
    n_restarts: int = 2,
    seed: int = 0,
) -> GPModel:
    """Fit from normalised arrays; see :func:`fit_gp`."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        return GPModel(np.asarray(lengthscales, float), float(variance), X, y, limits)
    # canonical order: the fit must not depend on trial presentation order
    order = np.lexsort((y, X[:, 1], X[:, 0]))
    X, y = X[order], y[order]
    if not optimize_hypers:
        return _fit_fixed(X, y, lengthscales, variance, limits)

    lo = np.log([LENGTHSCALE_BOUNDS[0]] * 2 + [VARIANCE_BOUNDS[0]])
    hi = np.log([LENGTHSCALE_BOUNDS[1]] * 2 + [VARIANCE_BOUNDS[1]])
    warm = {"f": None}

    def objective(theta):
        try:
            val, grad, f = neg_log_marginal(theta, X, y, warm["f"])
        except SingularKernel:
            return np.inf, np.zeros(3)
        warm["f"] = f
        return val, grad

    start0 = np.clip(np.log([*lengthscales, variance]), lo, hi)
    rng = np.random.default_rng(seed)
    starts = [start0] + [rng.uniform(lo, hi) for _ in range(n_restarts)]
    best_theta, best_val = None, np.inf
    for s in starts:
        try:
            res = optimize.minimize(objective, s, jac=True, method="L-BFGS-B",
                                    bounds=list(zip(lo, hi)), options={"maxiter": 60})
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    if best_theta is None:
        # optimiser failure: keep the defaults
        return _fit_fixed(X, y, DEFAULT_LENGTHSCALES, DEFAULT_VARIANCE, limits)
    return _fit_fixed(X, y, np.exp(best_theta[:2]), float(np.exp(best_theta[2])), limits)


def fit_gp(
    trials: Sequence[TrialRecord],
    limits: Limits = Limits(),
    lengthscales=DEFAULT_LENGTHSCALES,
    variance: float = DEFAULT_VARIANCE,
    optimize_hypers: bool = True,
    n_restarts: int = 2,
    seed: int = 0,
) -> GPModel:
    """Fit a probit GP to 2IFC trials.

    Hyperparameters (two lengthscales and the signal variance) maximise the
    Laplace marginal likelihood inside fixed bounds, starting from the given
    values plus ``n_restarts`` seeded random starts. The result depends only
    on the trial set and ``seed``.
    """
    X, y = trials_to_arrays(trials, limits)
    return fit_gp_arrays(X, y, limits, lengthscales, variance, optimize_hypers, n_restarts, seed)
