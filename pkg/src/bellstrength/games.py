"""Strength of a nonlocality proof as the value of a two-player game.

The experimenter picks a setting distribution sigma, nature answers with the
local theory pi closest to Q_sigma.  U(sigma) = min_pi U(sigma, pi) is concave
in sigma, and at the inner optimum pi* the vector of per-setting divergences
g_s = D(Q_s || P_s;pi*) is a supergradient (U(sigma, pi*) is linear in sigma).
Both outer maximizations below are conditional-gradient ascents that use it.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .divergence import per_setting_divergence
from .projection import DEFAULT_TOL, ProjectionResult, kkt_check, project
from .proofs import LocalTheory, NonlocalityProof, SettingDistribution, _outer, incidence

log = logging.getLogger(__name__)

OUTER_TOL = 1e-10
SCREEN_TOL = 1e-4
MAX_OUTER_ITER = 5000
UNCORRELATED_STARTS = 32
DEFAULT_SEED = 0x5EED_B311
CROSSCHECK_TOL = 1e-6
MODES = ("uniform", "uncorrelated", "correlated")


@dataclass(frozen=True)
class StrengthResult:
    mode: str
    strength_bits: float
    sigma_star: SettingDistribution
    pi_star: LocalTheory
    kkt_residual: float
    # max first-order gain still available to the experimenter (0 for uniform)
    outer_gap: float = 0.0
    crosscheck_gap: float | None = None
    converged: bool = True


class StrengthNotConverged(RuntimeError):
    def __init__(self, result: StrengthResult, reason: str):
        super().__init__(f"{result.mode} strength did not converge: {reason}")
        self.result = result


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BELLSTRENGTH_THREADS", "1")))
    except ValueError:
        return 1


class _Oracle:
    """U(sigma) and its supergradient, warm-starting each projection."""

    def __init__(self, proof: NonlocalityProof, tol: float):
        self.proof = proof
        self.tol = tol
        self.last: LocalTheory | None = None
        self.calls = 0

    def __call__(self, probs: np.ndarray):
        sc = self.proof.scenario
        sigma = SettingDistribution.general(sc, probs)
        self.calls += 1
        try:
            r = project(self.proof, sigma, self.tol, start=self.last)
        except ValueError:
            # warm start has a zero where newly weighted settings need mass
            r = project(self.proof, sigma, self.tol)
        self.last = r.pi_star
        g = per_setting_divergence(self.proof, r.pi_star)
        return float(sigma.probs @ np.where(sigma.probs > 0, g, 0.0)), g, r


def _slope(g, D) -> float:
    """g . D, skipping zero components of D (g may be +inf off the support)."""
    nz = D != 0
    return float(g[nz] @ D[nz])


def _line_search(oracle, s, D, gmax, slope0, rel=1e-3, max_eval=60):
    """Approximately maximize the concave map t -> U(s + t D) on [0, gmax].

    Uses the slope g(t) . D: a full step if it is still nonnegative at gmax,
    otherwise Illinois regula falsi on the slope, stopping once it has shrunk
    to ``rel`` times its initial size.
    """
    hi_eval = oracle(s + gmax * D)
    d_hi = _slope(hi_eval[1], D)
    if d_hi >= 0:
        return gmax, hi_eval
    lo, hi, d_lo = 0.0, gmax, slope0
    best = (gmax, hi_eval)
    side = 0
    for _ in range(max_eval):
        if math.isfinite(d_lo) and math.isfinite(d_hi) and hi - lo > 1e-14 * gmax:
            t = hi - d_hi * (hi - lo) / (d_hi - d_lo)
            if not lo < t < hi:
                t = 0.5 * (lo + hi)
        else:
            t = 0.5 * (lo + hi)
        ev = oracle(s + t * D)
        if ev[0] > best[1][0]:
            best = (t, ev)
        d = _slope(ev[1], D)
        if d > 0:
            lo, d_lo = t, d
            if side == 1:
                d_hi *= 0.5
            side = 1
        elif d < 0:
            hi, d_hi = t, d
            if side == -1:
                d_lo *= 0.5
            side = -1
        if abs(d) <= rel * slope0 or hi - lo <= 1e-14 * gmax:
            break
    return best


def _afw_direction(x, h, value):
    """Frank-Wolfe or away direction for maximizing over a simplex.

    ``h`` is a supergradient with x . h = value.  Returns (d, gamma_max,
    away_index or None, fw_gap).
    """
    j = int(np.argmax(h))
    support = np.flatnonzero(x > 0)
    k = int(support[np.argmin(h[support])])
    fw_gap = float(h[j] - value)
    away_gap = float(value - h[k])
    if fw_gap >= away_gap or x[k] >= 1.0:
        d = -x.copy()
        d[j] += 1.0
        return d, 1.0, None, fw_gap
    d = x.copy()
    d[k] -= 1.0
    return d, x[k] / (1.0 - x[k]), k, fw_gap


def _clean(x):
    x = np.where(x < 1e-15, 0.0, x)
    return x / x.sum()


# --------------------------------------------------------------- strengths


def strength_uniform(proof: NonlocalityProof, tol: float = DEFAULT_TOL) -> StrengthResult:
    sigma = SettingDistribution.uniform(proof.scenario)
    r = project(proof, sigma, tol)
    return StrengthResult("uniform", r.value, sigma, r.pi_star, r.kkt_residual)


def _ascend_correlated(oracle: _Oracle, s: np.ndarray, tol: float, max_iter: int):
    value, g, r = oracle(s)
    gap = math.inf
    for _ in range(max_iter):
        d, gmax, k, gap = _afw_direction(s, np.where(np.isfinite(g), g, 1e300), value)
        if gap <= tol:
            break
        slope0 = _slope(g, d)
        gamma, (value, g, r) = _line_search(oracle, s, d, gmax, slope0)
        s = s + gamma * d
        if k is not None and gamma >= gmax:
            s[k] = 0.0
        s = _clean(s)
    return s, value, g, r, gap


def strength_correlated(
    proof: NonlocalityProof,
    tol: float = OUTER_TOL,
    max_iter: int = MAX_OUTER_ITER,
    crosscheck: bool = True,
    strict: bool = False,
) -> StrengthResult:
    """Maximize U(sigma) over all joint setting distributions.

    The returned ``outer_gap`` is max_s g_s - U(sigma*); max_s g_s is itself an
    upper bound on the value.  With ``crosscheck`` the dual min-max problem is
    solved independently and ``crosscheck_gap`` is the difference of the two.
    """
    sc = proof.scenario
    oracle = _Oracle(proof, DEFAULT_TOL * 1e-1)
    s0 = np.full(sc.n_settings, 1.0 / sc.n_settings)
    s, value, g, r, gap = _ascend_correlated(oracle, s0, tol, max_iter)
    log.debug("correlated ascent: %d projections, gap %.3e", oracle.calls, gap)
    cross = None
    if crosscheck:
        cross = abs(minimax_value(proof).value - value)
    converged = gap <= tol and (cross is None or cross <= CROSSCHECK_TOL)
    res = StrengthResult(
        "correlated",
        max(value, 0.0),
        SettingDistribution.general(sc, s),
        r.pi_star,
        r.kkt_residual,
        outer_gap=gap,
        crosscheck_gap=cross,
        converged=converged,
    )
    if strict and not converged:
        raise StrengthNotConverged(res, f"outer gap {gap:.3e}, crosscheck gap {cross}")
    return res


def _block_supergradient(g, margs, j, shape):
    grid = g.reshape(shape)
    for i in reversed(range(len(shape))):
        if i != j:
            grid = np.tensordot(grid, margs[i], axes=([i], [0]))
    return grid


def _ascend_product(oracle: _Oracle, margs: list, tol: float, max_sweeps: int):
    shape = tuple(len(m) for m in margs)
    value, g, r = oracle(_outer(margs))
    gap = math.inf
    for _ in range(max_sweeps):
        gap = 0.0
        for j in range(len(margs)):
            h = _block_supergradient(np.where(np.isfinite(g), g, 1e300), margs, j, shape)
            d, gmax, k, bgap = _afw_direction(margs[j], h, value)
            gap = max(gap, bgap)
            if bgap <= tol:
                continue
            dm = list(margs)
            dm[j] = d
            D = _outer(dm)
            slope0 = _slope(g, D)
            s = _outer(margs)
            gamma, (value, g, r) = _line_search(oracle, s, D, gmax, slope0)
            m = margs[j] + gamma * d
            if k is not None and gamma >= gmax:
                m[k] = 0.0
            margs[j] = _clean(m)
        if gap <= tol:
            break
    value, g, r = oracle(_outer(margs))
    return margs, value, r, gap


def _random_starts(scenario, count, seed):
    rng = np.random.default_rng(seed)
    starts = [[np.full(k, 1.0 / k) for k in scenario.settings_per_party]]
    for _ in range(count):
        starts.append([rng.dirichlet(np.ones(k)) for k in scenario.settings_per_party])
    return starts


def strength_uncorrelated(
    proof: NonlocalityProof,
    starts: int = UNCORRELATED_STARTS,
    seed: int = DEFAULT_SEED,
    tol: float = OUTER_TOL,
    screen_tol: float = SCREEN_TOL,
    max_sweeps: int = 2000,
) -> StrengthResult:
    """Maximize U(sigma) over product setting distributions.

    The domain is not convex, so block ascent (one party's marginal at a
    time, each block a concave problem) is run from the uniform start plus
    ``starts`` seeded random ones at a loose tolerance; the best is refined.
    ``outer_gap`` is the largest per-party first-order gain left, which
    certifies stationarity, not global optimality.
    """
    sc = proof.scenario

    def run(m0, t):
        # screening only has to find the right basin
        oracle = _Oracle(proof, DEFAULT_TOL * (1e-1 if t == tol else 1e2))
        return _ascend_product(oracle, [np.array(m) for m in m0], t, max_sweeps)

    candidates = _random_starts(sc, starts, seed)
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        screened = list(pool.map(lambda m0: run(m0, screen_tol), candidates))
    values = np.array([v for _, v, _, _ in screened])
    # first start (canonical order) within a hair of the best value
    best = int(np.flatnonzero(values >= values.max() - 1e-9)[0])
    margs, value, r, gap = run(screened[best][0], tol)
    sigma = SettingDistribution.product(sc, margs)
    return StrengthResult(
        "uncorrelated",
        max(value, 0.0),
        sigma,
        r.pi_star,
        r.kkt_residual,
        outer_gap=gap,
        converged=gap <= tol,
    )


def strength(proof: NonlocalityProof, mode: str, **kw) -> StrengthResult:
    if mode == "uniform":
        return strength_uniform(proof, **kw)
    if mode == "uncorrelated":
        return strength_uncorrelated(proof, **kw)
    if mode == "correlated":
        return strength_correlated(proof, **kw)
    raise ValueError(f"mode must be one of {', '.join(MODES)}")


# ------------------------------------------------------------- dual side


@dataclass(frozen=True)
class MinimaxResult:
    value: float
    pi_star: LocalTheory
    per_setting: np.ndarray
    iterations: int
    converged: bool


def minimax_value(proof: NonlocalityProof, tol: float = 1e-12, max_iter: int = 2000) -> MinimaxResult:
    """min over pi of max_s D(Q_s || P_s;pi), the inf-sup value of the game.

    Solved in epigraph form with SLSQP.  The reported value is max_s D_s at
    the returned pi, so it is always a valid upper bound on the game value.
    """
    sc = proof.scenario
    inc = incidence(sc)
    M = inc.matrix
    q = proof.cells
    pos = q > 0
    Mp, qp = M[pos], q[pos]
    setting = inc.setting_of_cell[pos]
    S = np.zeros((sc.n_settings, len(qp)))
    S[setting, np.arange(len(qp))] = 1.0
    n = sc.n_vertices
    ln2 = math.log(2.0)

    def divs(z):
        P = np.maximum(Mp @ z[:n], 1e-300)
        return S @ (qp * np.log2(qp / P)), P

    def cons(z):
        return z[n] - divs(z)[0]

    def cons_jac(z):
        _, P = divs(z)
        J = np.empty((sc.n_settings, n + 1))
        J[:, :n] = (S * (qp / P)) @ Mp / ln2
        J[:, n] = 1.0
        return J

    pi0 = np.full(n, 1.0 / n)
    z0 = np.append(pi0, divs(np.append(pi0, 0.0))[0].max())
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = minimize(
        lambda z: z[n],
        z0,
        jac=lambda z: c,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n + [(0.0, None)],
        constraints=[
            {"type": "ineq", "fun": cons, "jac": cons_jac},
            {"type": "eq", "fun": lambda z: z[:n].sum() - 1.0, "jac": lambda z: np.append(np.ones(n), 0.0)},
        ],
        options={"ftol": tol, "maxiter": max_iter},
    )
    w = np.clip(res.x[:n], 0.0, None)
    pi = LocalTheory(sc, w / w.sum())
    per = per_setting_divergence(proof, pi)
    return MinimaxResult(float(per.max()), pi, per, int(res.nit), bool(res.success))


@dataclass(frozen=True)
class EqualizerReport:
    values: np.ndarray
    spread: float
    ok: bool


def equalizer_check(proof: NonlocalityProof, pi: LocalTheory, tol: float = 1e-9) -> EqualizerReport:
    """Is U(s, pi) the same for every joint setting s?"""
    v = per_setting_divergence(proof, pi)
    spread = float(v.max() - v.min()) if np.all(np.isfinite(v)) else math.inf
    return EqualizerReport(v, spread, spread <= tol)


@dataclass(frozen=True)
class SaddleReport:
    kkt_residual: float
    spread: float
    value: float
    ok: bool


def saddle_check(
    proof: NonlocalityProof, sigma: SettingDistribution, pi: LocalTheory, tol: float = 1e-9
) -> SaddleReport:
    """(sigma, pi) is a saddle point of the uncorrelated game iff pi solves the
    inner problem at sigma and pi is an equalizer."""
    if not proof.scenario.is_2x2:
        raise ValueError("saddle-point characterization applies to 2x2 scenarios only")
    if sigma.form == "general":
        margs = sigma.party_marginals()
        if np.max(np.abs(_outer(margs) - sigma.probs)) > 1e-12:
            raise ValueError("sigma is not a product distribution")
    k = kkt_check(proof, sigma, pi)
    eq = equalizer_check(proof, pi, tol)
    value = float(sigma.probs @ eq.values) if np.all(np.isfinite(eq.values)) else math.inf
    return SaddleReport(k.residual, eq.spread, value, k.residual <= tol and eq.ok)


def fact1_chain(results: dict[str, StrengthResult], tol: float = 1e-9) -> bool:
    """uniform <= uncorrelated <= correlated, within tol."""
    u, uc, c = (results[m].strength_bits for m in MODES)
    return u <= uc + tol and uc <= c + tol


__all__ = [
    "StrengthResult",
    "StrengthNotConverged",
    "MinimaxResult",
    "EqualizerReport",
    "SaddleReport",
    "strength_uniform",
    "strength_correlated",
    "strength_uncorrelated",
    "strength",
    "minimax_value",
    "equalizer_check",
    "saddle_check",
    "fact1_chain",
    "ProjectionResult",
]
