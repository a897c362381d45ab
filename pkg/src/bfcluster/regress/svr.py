"""epsilon-SVR trained by sequential minimal optimization on the dual.

The dual is written over ``2m`` box-constrained variables ``a = [alpha,
alpha*]`` with labels ``s = [+1.., -1..]``::

    min  0.5 a' Q a + p' a    s.t.  s' a = 0,  0 <= a <= C
    Q_ij = s_i s_j K(i mod m, j mod m),  p = [eps - y, eps + y]

Each step updates the maximal violating pair and stops once the violation
drops below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Kernel


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float, iterations: int):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations


@dataclass
class SmoResult:
    alpha: np.ndarray
    alpha_star: np.ndarray
    rho: float
    objective: float
    gap: float
    iterations: int

    @property
    def coef(self) -> np.ndarray:
        return self.alpha - self.alpha_star


def solve_svr_dual(K, y, epsilon: float, C: float, tol: float = 1e-3, max_iter: int | None = None) -> SmoResult:
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    m = y.shape[0]
    if epsilon < 0 or not C > 0:
        raise ValueError(f"need epsilon >= 0 and C > 0, got epsilon={epsilon}, C={C}")
    if max_iter is None:
        max_iter = max(100_000, 100 * m)

    s = np.concatenate([np.ones(m), -np.ones(m)])
    a = np.zeros(2 * m)
    G = np.concatenate([epsilon - y, epsilon + y])
    pos = s > 0
    kdiag = np.diag(K)

    gap = np.inf
    it = 0
    while True:
        yG = -s * G
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        i = int(np.argmax(np.where(up, yG, -np.inf)))
        j = int(np.argmin(np.where(low, yG, np.inf)))
        gap = float(yG[i] - yG[j]) if up[i] and low[j] else 0.0
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO stopped after {it} iterations with violation {gap:.3g} > {tol}", gap=gap, iterations=it
            )
        it += 1
        ii, jj = i % m, j % m
        eta = kdiag[ii] + kdiag[jj] - 2.0 * K[ii, jj]
        t = gap / max(eta, 1e-12)
        cap_i = C - a[i] if pos[i] else a[i]
        cap_j = a[j] if pos[j] else C - a[j]
        t = min(t, cap_i, cap_j)
        a[i] += s[i] * t
        a[j] -= s[j] * t
        # land exactly on the box when the step was clipped
        if t == cap_i:
            a[i] = C if pos[i] else 0.0
        if t == cap_j:
            a[j] = 0.0 if pos[j] else C
        diff = K[ii] - K[jj]
        G += t * s * np.concatenate([diff, diff])

    rho = _rho(a, s, G, C)
    alpha, alpha_star = a[:m].copy(), a[m:].copy()
    beta = alpha - alpha_star
    objective = float(0.5 * beta @ K @ beta + epsilon * a.sum() - y @ beta)
    return SmoResult(alpha=alpha, alpha_star=alpha_star, rho=rho, objective=objective, gap=gap, iterations=it)


def _rho(a, s, G, C) -> float:
    yG = s * G
    upper = a >= C
    lower = a <= 0
    free = ~(upper | lower)
    if free.any():
        return float(yG[free].mean())
    pos = s > 0
    ub_mask = (upper & ~pos) | (lower & pos)
    lb_mask = (upper & pos) | (lower & ~pos)
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub) or not np.isfinite(lb):
        return float(ub if np.isfinite(ub) else lb)
    return float((ub + lb) / 2)


def dual_objective(K, y, beta, epsilon: float) -> float:
    """Dual objective in the combined variable ``beta = alpha - alpha*``."""
    beta = np.asarray(beta, dtype=np.float64)
    return float(0.5 * beta @ K @ beta - np.asarray(y) @ beta + epsilon * np.abs(beta).sum())


@dataclass
class SvrModel:
    coef: np.ndarray
    bias: float
    epsilon: float
    C: float
    kernel: Kernel
    support: np.ndarray
    offset: float = 0.0

    def predict(self, X) -> np.ndarray:
        return self.kernel(X, self.support) @ self.coef + self.bias + self.offset

    def arrays(self) -> dict:
        return {"coef": self.coef, "support": self.support}


def train_svr(X, y, epsilon: float, C: float, kernel: Kernel | None = None, center: bool = False,
              tol: float = 1e-3, max_iter: int | None = None) -> SvrModel:
    kernel = kernel or Kernel()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    offset = float(y.mean()) if center else 0.0
    res = solve_svr_dual(kernel(X, X), y - offset, epsilon, C, tol=tol, max_iter=max_iter)
    keep = res.coef != 0
    return SvrModel(
        coef=res.coef[keep],
        bias=-res.rho,
        epsilon=epsilon,
        C=C,
        kernel=kernel,
        support=X[keep].copy(),
        offset=offset,
    )
