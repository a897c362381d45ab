"""Kernels, least-squares and kernel ridge regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist, pdist


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.sigma > 0:
            raise ValueError(f"rbf bandwidth must be positive, got {self.sigma}")

    def __call__(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        if self.kind == "linear":
            return A @ B.T
        return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * self.sigma**2))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


def median_sigma(X, max_samples: int = 1000) -> float:
    """Median pairwise distance over an evenly spaced subsample of rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] > max_samples:
        X = X[np.linspace(0, X.shape[0] - 1, max_samples).astype(np.int64)]
    d = pdist(X)
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


@dataclass
class LinearModel:
    w: np.ndarray  # feature weights followed by the intercept

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ self.w[:-1] + self.w[-1]

    def arrays(self) -> dict:
        return {"w": self.w}


def train_lr(X, y, jitter: float = 1e-10) -> LinearModel:
    """Least squares with an intercept via the normal equations.

    When the Gram matrix is singular (or nearly so) a ridge of
    ``jitter * trace / dim`` is added until the factorization succeeds.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"bad shapes: X {X.shape}, y {y.shape}")
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    G = A.T @ A
    rhs = A.T @ y
    scale = max(np.trace(G) / G.shape[0], 1e-300)
    ridge = 0.0
    for _ in range(30):
        try:
            factor = scipy.linalg.cho_factor(G + ridge * np.eye(G.shape[0]))
            rcond = _rcond(factor)
            if rcond > 1e-13:
                w = scipy.linalg.cho_solve(factor, rhs)
                return LinearModel(w=w)
        except np.linalg.LinAlgError:
            pass
        ridge = jitter * scale if ridge == 0.0 else ridge * 10
    raise SolverError("normal equations stayed singular after jitter")


def _rcond(factor) -> float:
    diag = np.abs(np.diag(factor[0]))
    return float((diag.min() / diag.max()) ** 2) if diag.max() > 0 else 0.0


@dataclass
class KrrModel:
    alpha: np.ndarray
    support: np.ndarray
    lam: float
    kernel: Kernel
    offset: float = 0.0

    def predict(self, X) -> np.ndarray:
        return self.kernel(X, self.support) @ self.alpha + self.offset

    def arrays(self) -> dict:
        return {"alpha": self.alpha, "support": self.support}


def train_krr(X, y, lam: float, kernel: Kernel | None = None, center: bool = False) -> KrrModel:
    """Solve ``(K + lam I) alpha = y`` by Cholesky with one refinement step.

    ``center`` subtracts the mean of ``y`` first and adds it back at
    prediction time.
    """
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    kernel = kernel or Kernel()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    offset = float(y.mean()) if center else 0.0
    target = y - offset
    A = kernel(X, X)
    A[np.diag_indices_from(A)] += lam
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            f"K + lam*I is not positive definite (lam={lam}, kernel={kernel.to_dict()}); "
            "check the kernel bandwidth or raise lam"
        ) from exc
    alpha = scipy.linalg.cho_solve(factor, target)
    alpha += scipy.linalg.cho_solve(factor, target - A @ alpha)
    return KrrModel(alpha=alpha, support=X.copy(), lam=lam, kernel=kernel, offset=offset)
