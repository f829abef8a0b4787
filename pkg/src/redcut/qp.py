"""Quadratic programs over the probability simplex.

Minimizes ``0.5 a'Qa - s'a`` subject to ``a >= 0, sum(a) = 1`` with projected
gradient descent (Barzilai-Borwein steps, Armijo backtracking) and an
equality-constrained polish on the detected support. Every iterate is
feasible and the objective never increases, so the solver is also usable on
mildly indefinite ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError

ZERO_TOL = 1e-8
DEFAULT_TOL = 1e-7
_ARMIJO = 1e-4
_STEP_MIN, _STEP_MAX = 1e-12, 1e12


@dataclass
class SimplexSolution:
    alpha: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    support: np.ndarray
    shift: float = 0.0
    info: dict = field(default_factory=dict)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{a : a >= 0, sum(a) = 1}`` (sort-based, exact)."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    w = np.maximum(v - tau, 0.0)
    total = w.sum()
    if total <= 0.0:
        w = np.zeros(n)
        w[int(np.argmax(v))] = 1.0
        return w
    return w / total


def kkt_residual(alpha: np.ndarray, grad: np.ndarray, zero_tol: float = ZERO_TOL) -> float:
    """First-order optimality gap on the simplex.

    With ``lam = min(grad[support])`` this is the largest of
    ``grad_i - lam`` over the support and ``lam - grad_i`` off it (when
    positive).
    """
    on = alpha > zero_tol
    if not np.any(on):
        on = alpha >= alpha.max()
    lam = grad[on].min()
    r_on = np.max(np.abs(grad[on] - lam))
    off = ~on
    r_off = np.max(lam - grad[off]) if np.any(off) else 0.0
    return float(max(r_on, r_off, 0.0))


def _check_inputs(Q, s):
    Q = np.asarray(Q, dtype=float)
    s = np.asarray(s, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DataError(f"Q must be square, got shape {Q.shape}")
    if s.shape != (Q.shape[0],):
        raise DataError(f"s has shape {s.shape}, expected ({Q.shape[0]},)")
    if Q.shape[0] == 0:
        raise DataError("empty problem")
    asym = np.max(np.abs(Q - Q.T))
    if asym > 1e-8:
        raise DataError(f"Q is not symmetric (max asymmetry {asym:.3g})")
    return Q, s


def _polish(Q, s, qs, ss, support):
    """Solve the KKT system restricted to ``support``; None if infeasible."""
    S = np.flatnonzero(support)
    k = S.size
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = qs * Q[np.ix_(S, S)]
    A[:k, k] = -1.0
    A[k, :k] = 1.0
    b = np.append(ss * s[S], 1.0)
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    a_s = x[:k]
    if not np.all(np.isfinite(a_s)) or np.any(a_s < -1e-12):
        return None
    a_s = np.maximum(a_s, 0.0)
    total = a_s.sum()
    if total <= 0.0:
        return None
    out = np.zeros(Q.shape[0])
    out[S] = a_s / total
    return out


def _run(Q, s, qs, ss, tol, max_iter, zero_tol, callback):
    m = s.size

    def value(a, qa):
        return 0.5 * qs * float(a @ qa) - ss * float(s @ a)

    a = np.full(m, 1.0 / m)
    qa = Q @ a
    f = value(a, qa)
    g = qs * qa - ss * s
    res = kkt_residual(a, g, zero_tol)
    step = 1.0
    last_support = None
    it = 0
    if callback is not None:
        callback(0, a, f)
    slack = 4 * np.finfo(float).eps

    while res > tol and it < max_iter:
        it += 1
        support = a > zero_tol
        if last_support is None or not np.array_equal(support, last_support):
            last_support = support
            cand = _polish(Q, s, qs, ss, support)
            if cand is not None:
                qc = Q @ cand
                fc = value(cand, qc)
                gc = qs * qc - ss * s
                rc = kkt_residual(cand, gc, zero_tol)
                if fc <= f + slack * (abs(f) + 1.0) and rc < res:
                    a, qa, f, g, res = cand, qc, fc, gc, rc
                    if callback is not None:
                        callback(it, a, f)
                    continue

        t = step
        while True:
            y = project_simplex(a - t * g)
            d = y - a
            qy = Q @ y
            fy = value(y, qy)
            if fy <= f + _ARMIJO * float(g @ d) or t <= _STEP_MIN:
                break
            t *= 0.5
        if not fy <= f:
            # no progress possible at machine precision
            break
        gy = qs * qy - ss * s
        sk, yk = d, gy - g
        sy = float(sk @ yk)
        step = float(sk @ sk) / sy if sy > 0 else _STEP_MAX
        step = min(max(step, _STEP_MIN), _STEP_MAX)
        a, qa, f, g = y, qy, fy, gy
        res = kkt_residual(a, g, zero_tol)
        if callback is not None:
            callback(it, a, f)
    return a, f, res, it


def _finish(a, f, res, it, zero_tol, shift=0.0):
    a = np.maximum(a, 0.0)
    a = a / a.sum()
    return SimplexSolution(
        alpha=a,
        objective=float(f),
        kkt_residual=float(res),
        iterations=it,
        support=np.flatnonzero(a > zero_tol),
        shift=shift,
    )


def _min_eigenvalue(Q: np.ndarray) -> float:
    if Q.shape[0] <= 1500:
        return float(np.linalg.eigvalsh(Q)[0])
    from scipy.sparse.linalg import eigsh

    return float(eigsh(Q, k=1, which="SA", return_eigenvectors=False)[0])


def _solve(Q, s, qs, ss, tol, max_iter, zero_tol, callback):
    if tol <= 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    Q, s = _check_inputs(Q, s)
    m = s.size
    if max_iter is None:
        max_iter = 50 * m + 1000
    if m == 1:
        a = np.ones(1)
        f = 0.5 * qs * Q[0, 0] - ss * s[0]
        return SimplexSolution(a, float(f), 0.0, 0, np.array([0]))

    a, f, res, it = _run(Q, s, qs, ss, tol, max_iter, zero_tol, callback)
    if res <= tol:
        return _finish(a, f, res, it, zero_tol)

    lam_min = _min_eigenvalue(qs * Q)
    if lam_min < 0:
        shift = -lam_min + 1e-10
        Qs = Q + (shift / qs if qs != 0 else 0.0) * np.eye(m)
        a2, f2, res2, it2 = _run(Qs, s, qs, ss, tol, max_iter, zero_tol, callback)
        if res2 <= tol:
            sol = _finish(a2, f2, res2, it + it2, zero_tol, shift=shift)
            sol.info["unshifted_objective"] = float(
                0.5 * qs * sol.alpha @ Q @ sol.alpha - ss * s @ sol.alpha
            )
            return sol
        if res2 < res:
            a, res, it = a2, res2, it + it2
    raise ConvergenceError(
        f"simplex QP did not reach KKT residual {tol:g} in {max_iter} iterations "
        f"(best residual {res:.3g})",
        alpha=np.maximum(a, 0.0) / np.maximum(a, 0.0).sum(),
        residual=res,
        iterations=it,
    )


def solve_simplex_qp(
    Q,
    s,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    zero_tol: float = ZERO_TOL,
    callback: Optional[Callable] = None,
) -> SimplexSolution:
    """Minimize ``0.5 a'Qa - s'a`` over the probability simplex.

    Parameters
    ----------
    Q : (M, M) array
        Symmetric matrix; small negative eigenvalues are tolerated.
    s : (M,) array
        Linear term.
    tol : float
        Required KKT residual (see :func:`kkt_residual`).
    max_iter : int, optional
        Defaults to ``50 M + 1000``.
    callback : callable, optional
        Called as ``callback(iteration, alpha, objective)`` after every
        accepted iterate.

    Raises
    ------
    ConvergenceError
        If the residual target is missed. If ``Q`` is indefinite a second
        attempt is made on ``Q + delta I`` first; a successful shifted solve
        reports ``delta`` in ``SimplexSolution.shift``.
    """
    return _solve(Q, s, 1.0, 1.0, tol, max_iter, zero_tol, callback)


def solve_theta_qp(
    Q,
    s,
    theta: float,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    zero_tol: float = ZERO_TOL,
    callback: Optional[Callable] = None,
) -> SimplexSolution:
    """Minimize ``0.5 (1 - theta) a'Qa - theta s'a`` over the simplex without rescaling inputs."""
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0, 1], got {theta}")
    return _solve(Q, s, 1.0 - theta, theta, tol, max_iter, zero_tol, callback)


def rank_by_alpha(alpha, s, zero_tol: float = ZERO_TOL) -> list:
    """Order indices by weight, then relevance, then index.

    Weights at or below ``zero_tol`` count as zero, so all of them come after
    every positive weight and are ordered by ``s`` among themselves.
    """
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    if alpha.shape != s.shape:
        raise DataError("alpha and s must have the same length")
    a = np.where(alpha > zero_tol, alpha, 0.0)
    idx = np.arange(alpha.size)
    return np.lexsort((idx, -s, -a)).tolist()
