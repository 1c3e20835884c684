"""Information projection of Q_sigma onto the local polytope.

For fixed sigma, minimizing U(sigma, pi) over local theories is the same as
maximizing the mixture log-likelihood ``sum_c w_c log (M pi)_c`` where
``w = sigma * Q`` over (setting, outcome) cells and ``M`` is the 0/1 matrix
sending deterministic theories to cells.  The directional-derivative vector

    S(v) = sum_c w_c M[c, v] / (M pi)_c

satisfies ``pi . S = 1``, and pi is optimal iff ``S(v) <= 1`` everywhere with
equality on the support of pi.  The solver below is Frank-Wolfe with away
steps over the vertices, with exact line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergence import joint_weights, objective
from .proofs import LocalTheory, NonlocalityProof, SettingDistribution, incidence

DEFAULT_TOL = 1e-9
MAX_ITER = 10**6
LINE_SEARCH_ITER = 80
LN2 = math.log(2.0)


@dataclass(frozen=True)
class ProjectionResult:
    value: float
    pi_star: LocalTheory
    kkt_residual: float
    iterations: int
    converged: bool = True


class ProjectionNotConverged(RuntimeError):
    def __init__(self, result: ProjectionResult):
        super().__init__(
            f"projection stopped after {result.iterations} iterations "
            f"with KKT residual {result.kkt_residual:.3e}"
        )
        self.result = result


@dataclass
class _Problem:
    """Cells with positive weight only; the rest never affect the objective."""

    M: np.ndarray
    w: np.ndarray
    q: np.ndarray

    @classmethod
    def build(cls, proof: NonlocalityProof, sigma: SettingDistribution) -> _Problem:
        w = joint_weights(proof, sigma)
        keep = w > 0
        M = incidence(proof.scenario).matrix[keep]
        return cls(np.ascontiguousarray(M), w[keep], proof.cells[keep])

    def value_bits(self, P: np.ndarray) -> float:
        if np.any(P <= 0):
            return math.inf
        return float(self.w @ np.log2(self.q / P))


def _line_search(w, P, D, gamma_max):
    """Maximize sum w log(P + g D) over g in [0, gamma_max].

    The derivative is strictly decreasing, so its root is bracketed and
    found by Newton steps that fall back to bisection.
    """

    def slope(g):
        R = P + g * D
        if np.any(R <= 0):
            return -math.inf, -math.inf
        t = w * D / R
        return float(t.sum()), float(-(t * D / R).sum())

    d_hi, _ = slope(gamma_max)
    if d_hi >= 0:
        return gamma_max
    lo, hi = 0.0, gamma_max
    g = 0.0
    d, dd = slope(g)
    d0 = d
    # every point evaluated below gamma_max has a finite slope, hence P > 0
    best, best_abs = 0.0, abs(d)
    for _ in range(LINE_SEARCH_ITER):
        if d > 0:
            lo = g
        else:
            hi = g
        if abs(d) < best_abs:
            best, best_abs = g, abs(d)
        if hi - lo <= 1e-17 * max(1.0, hi) or abs(d) <= 1e-14 * d0:
            break
        step = g - d / dd if dd < 0 else math.nan
        g = step if lo < step < hi else 0.5 * (lo + hi)
        d, dd = slope(g)
    return best


def _kkt_residual(S: np.ndarray, x: np.ndarray) -> float:
    support = x > 0
    return float(max(S.max() - 1.0, np.max(np.abs(S[support] - 1.0))))


def _face_newton(M, w, x, P, support):
    """Newton direction for the log-likelihood restricted to the support face.

    Returns a direction summing to zero over the support (zero elsewhere), or
    None when it is not an ascent direction.  The Hessian is singular whenever
    several theories induce the same tables, so the step is a least-squares one.
    """
    MF = M[:, support]
    r = w / P
    grad = MF.T @ r
    H = (MF * (r / P)[:, None]).T @ MF
    n = len(support)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = H
    kkt[:n, n] = kkt[n, :n] = 1.0
    rhs = np.concatenate([grad - 1.0, [0.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=1e-13)[0]
    dx = np.zeros_like(x)
    dx[support] = sol[:n] - sol[:n].mean()
    if not grad @ dx[support] > 0:
        return None
    return dx


def _solve(prob: _Problem, x: np.ndarray, tol: float, max_iter: int):
    M, w = prob.M, prob.w
    x = x.copy()
    P = M @ x
    it = 0
    residual = math.inf
    stalled = False
    while True:
        S = M.T @ (w / P)
        residual = _kkt_residual(S, x)
        if residual <= tol or it >= max_iter:
            break
        it += 1
        j = int(np.argmax(S))
        support = np.flatnonzero(x > 0)
        k = int(support[np.argmin(S[support])])
        fw_gap, away_gap = S[j] - 1.0, 1.0 - S[k]
        dx = None
        if x[j] > 0 and len(support) > 1 and not stalled:
            # no vertex outside the support improves: polish on the face
            dx = _face_newton(M, w, x, P, support)
        stalled = False
        if dx is not None:
            ratios = np.where(dx < 0, -x / np.where(dx < 0, dx, -1.0), np.inf)
            blocking = int(np.argmin(ratios))
            gmax = float(ratios[blocking])
            D = M @ dx
            gamma = _line_search(w, P, D, gmax)
            x += gamma * dx
            if gamma >= gmax * (1.0 - 1e-12):
                x[blocking] = 0.0
            elif gamma == 0.0:
                stalled = True
        elif fw_gap >= away_gap:
            D = M[:, j] - P
            gamma = _line_search(w, P, D, 1.0)
            x *= 1.0 - gamma
            x[j] += gamma
        else:
            if x[k] >= 1.0:
                break
            gmax = x[k] / (1.0 - x[k])
            D = P - M[:, k]
            gamma = _line_search(w, P, D, gmax)
            x *= 1.0 + gamma
            x[k] -= gamma
            if gamma == gmax:
                x[k] = 0.0
        x[x < 0] = 0.0
        if it % 64 == 0 or dx is not None:
            x /= x.sum()
            P = M @ x
        else:
            P = P + gamma * D
    return x, P, residual, it


def project(
    proof: NonlocalityProof,
    sigma: SettingDistribution,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
    start: LocalTheory | None = None,
) -> ProjectionResult:
    """Minimize U(sigma, pi) over local theories pi."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    sc = proof.scenario
    prob = _Problem.build(proof, sigma)
    x0 = (start or LocalTheory.uniform(sc)).weights
    if prob.value_bits(prob.M @ x0) == math.inf:
        raise ValueError("start theory gives infinite divergence")
    x, P, residual, it = _solve(prob, np.array(x0), tol, max_iter)
    pi = LocalTheory(sc, x / x.sum())
    result = ProjectionResult(
        value=max(objective(proof, sigma, pi), 0.0),
        pi_star=pi,
        kkt_residual=residual,
        iterations=it,
        converged=residual <= tol,
    )
    if not result.converged:
        raise ProjectionNotConverged(result)
    return result


@dataclass(frozen=True)
class KKTReport:
    """Per-vertex directional sums S(v) and the optimality residual."""

    s_values: np.ndarray
    residual: float
    absolutely_continuous: bool

    @property
    def optimal(self) -> bool:
        return self.residual == 0.0


def kkt_check(proof: NonlocalityProof, sigma: SettingDistribution, pi: LocalTheory) -> KKTReport:
    prob = _Problem.build(proof, sigma)
    P = prob.M @ pi.weights
    ok = bool(np.all(P > 0))
    S = prob.M.T @ (prob.w / np.where(P > 0, P, 1.0))
    # a vertex touching a cell that pi rules out has an infinite sum
    S[prob.M[P <= 0].any(axis=0)] = math.inf
    return KKTReport(S, _kkt_residual(S, pi.weights), ok)
