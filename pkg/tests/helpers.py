"""Shared fixtures-as-functions: cached strengths, random proofs, an
independent minimizer for the inner problem."""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import softmax

from bellstrength import games
from bellstrength.divergence import joint_weights
from bellstrength.proofs import LocalTheory, Scenario, SettingDistribution, incidence
from bellstrength.quantum import CATALOG_NAMES, PureState, catalog, proof_from_state

TWO_BY_TWO = ("bell", "bell-optimized", "chsh", "hardy")
LN2 = math.log(2.0)


@lru_cache(maxsize=None)
def proof(name):
    return catalog(name)


_compute_strength = games.strength
_STRENGTHS: dict = {}
# seconds spent computing each cached (name, mode) entry
STRENGTH_SECONDS: dict = {}


def strength(name, mode):
    key = (name, mode)
    if key not in _STRENGTHS:
        t = time.perf_counter()
        _STRENGTHS[key] = _compute_strength(proof(name), mode)
        STRENGTH_SECONDS[key] = time.perf_counter() - t
    return _STRENGTHS[key]


def random_unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_quantum_proof(rng, parties=2, settings=2, name="random"):
    state = PureState(random_unit(rng, 2**parties))
    bases = [[random_unit(rng, 2) for _ in range(settings)] for _ in range(parties)]
    return proof_from_state(state, bases, name)


def random_entangled_proof(rng, name="random"):
    """Two qubits, cos t|00> + sin t|11>, real measurement directions; these
    are usually, but not always, nonlocal."""
    t = rng.uniform(math.pi / 10, math.pi / 4)
    state = PureState(np.array([math.cos(t), 0, 0, math.sin(t)]))
    angles = rng.uniform(0, math.pi, size=(2, 2))
    bases = [[np.array([math.cos(a), math.sin(a)]) for a in row] for row in angles]
    return proof_from_state(state, bases, name)


def random_nonlocal_proof(rng, threshold=1e-3, name="random"):
    """random_entangled_proof, redrawn until the uniform-sigma divergence
    from the local polytope exceeds ``threshold``."""
    from bellstrength.projection import project

    while True:
        p = random_entangled_proof(rng, name)
        if project(p, uniform(p)).value > threshold:
            return p


def random_local_theory(rng, scenario, alpha=0.5):
    return LocalTheory(scenario, rng.dirichlet(np.full(scenario.n_vertices, alpha)))


def oracle_inner_min(p, sigma, samples=3000, polish=4, seed=0):
    """min over the vertex simplex of U(sigma, pi) by random search + polish.

    The best samples are polished by L-BFGS on softmax coordinates, so the
    constraint handling shares nothing with the package's solver.
    """
    rng = np.random.default_rng(seed)
    M = incidence(p.scenario).matrix
    w = joint_weights(p, sigma)
    keep = w > 0
    M, w, q = M[keep], w[keep], p.cells[keep]
    n = M.shape[1]

    def f(x):
        P = np.maximum(M @ x, 1e-300)
        return float(w @ np.log2(q / P))

    def f_grad(z):
        x = softmax(z)
        P = np.maximum(M @ x, 1e-300)
        g = -(M.T @ (w / P)) / LN2
        return float(w @ np.log2(q / P)), x * (g - x @ g)

    pts = np.vstack([np.full(n, 1.0 / n), rng.dirichlet(np.full(n, 0.3), samples), rng.dirichlet(np.ones(n), samples)])
    vals = np.array([f(x) for x in pts])
    best = math.inf
    for i in np.argsort(vals)[:polish]:
        z0 = np.log(np.maximum(pts[i], 1e-12))
        r = minimize(f_grad, z0, jac=True, method="L-BFGS-B", options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12})
        best = min(best, f(softmax(r.x)))
    return best


def two_by_two():
    return Scenario.uniform(2, 2, 2)


def uniform(p):
    return SettingDistribution.uniform(p.scenario)


