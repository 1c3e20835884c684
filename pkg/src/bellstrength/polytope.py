"""The local polytope: Gamma-table decomposition, perfect local models on three
settings, and properness of a proof."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .projection import project
from .proofs import (
    NO_SIGNALLING_TOL,
    ConditionalTable,
    LocalTheory,
    NonlocalityProof,
    Scenario,
    SettingDistribution,
    _table_from_dict,
    incidence,
    scenario_from_dict,
)

PROPER_TOL = 1e-7
ZERO_TOL = 1e-13


class NotDecomposable(ValueError):
    """The tables are not a mixture of deterministic theories."""


@dataclass(frozen=True, eq=False)
class GammaTable:
    """Conditional tables on a subset of the joint settings."""

    scenario: Scenario
    tables: tuple[ConditionalTable, ...]

    def __post_init__(self):
        seen = [t.setting for t in self.tables]
        if len(set(seen)) != len(seen):
            raise ValueError("a setting appears twice")
        for st in seen:
            self.scenario.setting_index(st)

    @property
    def subset(self) -> list[tuple[int, ...]]:
        return [t.setting for t in self.tables]

    @classmethod
    def from_proof(cls, proof: NonlocalityProof, subset: Sequence[Sequence[int]]) -> GammaTable:
        return cls(proof.scenario, tuple(proof.table(tuple(s)) for s in subset))

    @classmethod
    def from_dict(cls, d: dict) -> GammaTable:
        sc = scenario_from_dict(d)
        return cls(sc, tuple(_table_from_dict(sc, t) for t in d["tables"]))

    @classmethod
    def load(cls, path: str | Path) -> GammaTable:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def signalling_violations(self, tol: float = NO_SIGNALLING_TOL) -> list[str]:
        """No-signalling restrictions between pairs of listed settings that fail."""
        k = self.scenario.parties
        out = []
        for i, a in enumerate(self.tables):
            for b in self.tables[i + 1 :]:
                for j in range(k):
                    if a.setting[j] != b.setting[j]:
                        continue
                    others = tuple(x for x in range(k) if x != j)
                    ma = a.probs.sum(axis=others)
                    mb = b.probs.sum(axis=others)
                    gap = float(np.max(np.abs(ma - mb)))
                    if gap > tol:
                        out.append(
                            f"party {j + 1} marginal differs between settings "
                            f"{_label(a.setting)} and {_label(b.setting)} by {gap:.3g}"
                        )
        return out


def _label(setting) -> str:
    return "(" + ",".join(str(s + 1) for s in setting) + ")"


@dataclass(frozen=True)
class Decomposition:
    theory: LocalTheory
    error: float
    steps: int


def decompose_gamma(gamma: GammaTable, tol: float = NO_SIGNALLING_TOL) -> Decomposition:
    """Write a no-signalling Gamma-table as a mixture of deterministic theories.

    Greedy peeling: take the smallest remaining positive entry, pick the first
    deterministic theory (canonical order) that hits it and only hits
    positive entries, and subtract that theory's table scaled by the entry.
    Each step zeroes at least one entry.  For three settings of a two-party,
    two-setting scenario a suitable theory always exists; elsewhere the
    peeling may get stuck, which raises ``NotDecomposable``.
    """
    bad = gamma.signalling_violations(tol)
    if bad:
        raise NotDecomposable("; ".join(bad))
    sc = gamma.scenario
    inc = incidence(sc)
    rows = [sc.setting_index(st) for st in gamma.subset]
    # hit[i, v]: entry of listed table i that vertex v lands in
    hit = np.stack([inc.cell[r] - inc.offsets[r] for r in rows])
    resid = [t.probs.ravel().astype(float).copy() for t in gamma.tables]
    weights = np.zeros(sc.n_vertices)
    steps = 0
    for _ in range(sum(r.size for r in resid) + 1):
        flat = np.concatenate(resid)
        positive = flat > ZERO_TOL
        if not positive.any():
            break
        eps = float(flat[positive].min())
        # (table, entry) of the first smallest positive entry
        pos = int(np.flatnonzero(positive & (flat == eps))[0])
        t = int(np.searchsorted(np.cumsum([r.size for r in resid]), pos, side="right"))
        e = pos - sum(r.size for r in resid[:t])
        ok = hit[t] == e
        for i, r in enumerate(resid):
            ok &= r[hit[i]] > ZERO_TOL
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            raise NotDecomposable(f"no deterministic theory fits the remaining mass at step {steps + 1}")
        v = int(cand[0])
        weights[v] += eps
        for i, r in enumerate(resid):
            r[hit[i, v]] -= eps
            if r[hit[i, v]] <= ZERO_TOL:
                r[hit[i, v]] = 0.0
        steps += 1
    total = weights.sum()
    theory = LocalTheory(sc, weights / total)
    return Decomposition(theory, reconstruction_error(gamma, theory), steps)


def reconstruction_error(gamma: GammaTable, theory: LocalTheory) -> float:
    return max(
        float(np.max(np.abs(theory.induced(t.setting).probs - t.probs))) for t in gamma.tables
    )


def perfect_lr_for_three_settings(proof: NonlocalityProof, excluded: Sequence[int]) -> LocalTheory:
    """A local theory reproducing ``proof`` exactly on every setting but one."""
    sc = proof.scenario
    if not sc.is_2x2:
        raise ValueError("needs a two-party scenario with two settings per party")
    excluded = tuple(excluded)
    sc.setting_index(excluded)
    subset = [st for st in sc.joint_settings() if st != excluded]
    return decompose_gamma(GammaTable.from_proof(proof, subset)).theory


@dataclass(frozen=True)
class ProperReport:
    proper: bool
    divergence: float
    theory: LocalTheory


def is_proper(proof: NonlocalityProof, tol: float = PROPER_TOL) -> ProperReport:
    """True iff no local theory reproduces the tables.

    Decided by the projection at uniform setting weights: the minimum is zero
    exactly when the tables lie in the local polytope.  ``theory`` is the
    minimizer, which explains the tables when the proof is not proper.
    """
    r = project(proof, SettingDistribution.uniform(proof.scenario))
    return ProperReport(r.value > tol, r.value, r.pi_star)
