"""Kullback-Leibler divergence (in bits) and the game objective."""

from __future__ import annotations

import numpy as np

from .proofs import LocalTheory, NonlocalityProof, SettingDistribution, incidence


def _check_prob(v, name):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} is not a probability vector")
    return v


def kl(q, p) -> float:
    """D(q || p) in bits; +inf when q puts mass where p has none."""
    q = _check_prob(q, "q")
    p = _check_prob(p, "p")
    if q.shape != p.shape:
        raise ValueError("q and p have different lengths")
    return _kl_terms(q.ravel(), q.ravel(), p.ravel())


def _kl_terms(w, q, p) -> float:
    # sum of w * log2(q / p) over w > 0
    mask = w > 0
    if np.any(p[mask] <= 0):
        return float("inf")
    return float(np.sum(w[mask] * np.log2(q[mask] / p[mask])))


def joint_weights(proof: NonlocalityProof, sigma: SettingDistribution) -> np.ndarray:
    """sigma_s * Q_s(o) for every (setting, outcome) cell."""
    inc = incidence(proof.scenario)
    return sigma.probs[inc.setting_of_cell] * proof.cells


def objective(proof: NonlocalityProof, sigma: SettingDistribution, pi: LocalTheory) -> float:
    """U(sigma, pi): sigma-average of the per-setting divergences, in bits."""
    if sigma.scenario != proof.scenario or pi.scenario != proof.scenario:
        raise ValueError("proof, sigma and pi belong to different scenarios")
    return _kl_terms(joint_weights(proof, sigma), proof.cells, pi.cells)


def per_setting_divergence(proof: NonlocalityProof, pi: LocalTheory) -> np.ndarray:
    """D(Q_s || P_s;pi) for every joint setting s."""
    inc = incidence(proof.scenario)
    q, p = proof.cells, pi.cells
    return np.array(
        [_kl_terms(q[o : o + n], q[o : o + n], p[o : o + n]) for o, n in zip(inc.offsets, inc.sizes)]
    )


def confidence_depressing_factor(strength_bits: float, n: int) -> float:
    """log2 of the confidence depressing factor after ``n`` trials."""
    if strength_bits < 0 or n < 0:
        raise ValueError("strength and trial count must be nonnegative")
    return n * strength_bits
