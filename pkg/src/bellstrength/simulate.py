"""Monte Carlo trials and the log-likelihood-ratio evidence they carry."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .divergence import joint_weights
from .games import thread_count
from .proofs import LocalTheory, NonlocalityProof, SettingDistribution, incidence

BLOCK = 1 << 16
HISTORY_POINTS = 64


@dataclass(frozen=True)
class TrialRecord:
    setting: tuple[int, ...]
    outcomes: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """A run of trials stored as flat cell indices; iterates as TrialRecords."""

    proof: NonlocalityProof
    cells: np.ndarray

    def __len__(self) -> int:
        return int(self.cells.size)

    @property
    def settings(self) -> np.ndarray:
        return incidence(self.proof.scenario).setting_of_cell[self.cells]

    def __iter__(self) -> Iterator[TrialRecord]:
        sc = self.proof.scenario
        inc = incidence(sc)
        joint = sc.joint_settings()
        for c in self.cells:
            s = int(inc.setting_of_cell[c])
            local = np.unravel_index(int(c - inc.offsets[s]), sc.outcome_shape(joint[s]))
            yield TrialRecord(joint[s], tuple(int(x) for x in local))


def _sample_block(seed_seq: np.random.SeedSequence, p: np.ndarray, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    return rng.choice(p.size, size=n, p=p)


def simulate(proof: NonlocalityProof, sigma: SettingDistribution, n: int, seed: int) -> TrialBatch:
    """n i.i.d. trials: setting from sigma, outcomes from Q at that setting.

    Trials are drawn in fixed-size blocks, each from its own Philox stream
    spawned from ``seed``, so the result does not depend on the thread count.
    """
    if n < 0:
        raise ValueError("trial count must be nonnegative")
    p = joint_weights(proof, sigma)
    p = p / p.sum()
    sizes = [BLOCK] * (n // BLOCK) + ([n % BLOCK] if n % BLOCK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        blocks = list(pool.map(lambda a: _sample_block(a[0], p, a[1]), zip(seqs, sizes)))
    cells = np.concatenate(blocks) if blocks else np.zeros(0, dtype=np.int64)
    return TrialBatch(proof, cells)


@dataclass(frozen=True)
class EvidenceTrace:
    n: int
    total_llr_bits: float
    per_trial_mean: float
    std_llr_bits: float
    history: tuple[tuple[int, float], ...] = ()

    @property
    def standard_error(self) -> float:
        return self.std_llr_bits / math.sqrt(self.n) if self.n > 1 else math.inf

    @property
    def infinite(self) -> bool:
        return math.isinf(self.total_llr_bits)


def _cells_of(records, proof: NonlocalityProof) -> np.ndarray:
    if isinstance(records, TrialBatch):
        return records.cells
    sc = proof.scenario
    inc = incidence(sc)
    out = []
    for r in records:
        s = sc.setting_index(r.setting)
        out.append(inc.offsets[s] + np.ravel_multi_index(r.outcomes, sc.outcome_shape(r.setting)))
    return np.asarray(out, dtype=np.int64)


def evidence(
    records: TrialBatch | Iterable[TrialRecord],
    proof: NonlocalityProof,
    sigma: SettingDistribution,
    pi: LocalTheory,
    history_points: int = HISTORY_POINTS,
) -> EvidenceTrace:
    """Sum over trials of log2 Q_s(o) / P_s;pi(o).

    The setting probabilities are common to both hypotheses and cancel, so
    ``sigma`` only serves to validate the records.  Sums are exact-rounded
    (``math.fsum``).  An observed outcome that pi rules out gives +inf.
    """
    if not (proof.scenario == sigma.scenario == pi.scenario):
        raise ValueError("proof, sigma and pi belong to different scenarios")
    cells = _cells_of(records, proof)
    n = int(cells.size)
    if n == 0:
        return EvidenceTrace(0, 0.0, 0.0, 0.0)
    settings = incidence(proof.scenario).setting_of_cell[cells]
    if np.any(sigma.probs[settings] == 0):
        raise ValueError("records contain a setting sigma never chooses")
    q, p = proof.cells, pi.cells
    with np.errstate(divide="ignore", invalid="ignore"):
        llr_cell = np.where(q > 0, np.log2(q) - np.log2(p), np.nan)
    terms = llr_cell[cells]
    if np.any(np.isnan(terms)):
        raise ValueError("records contain an outcome the proof gives probability zero")
    if np.any(np.isinf(terms)):
        return EvidenceTrace(n, math.inf, math.inf, math.nan)
    total = math.fsum(terms)
    mean = total / n
    std = math.sqrt(math.fsum((terms - mean) ** 2) / (n - 1)) if n > 1 else 0.0
    marks = np.unique(np.linspace(1, n, min(history_points, n)).astype(int))
    csum = np.cumsum(terms)
    history = tuple((int(m), float(csum[m - 1])) for m in marks)
    return EvidenceTrace(n, total, mean, std, history)
