"""Born-rule tables for pure multi-qubit states and the six-proof catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .proofs import ConditionalTable, NonlocalityProof, Scenario

ROUNDOFF_ZERO = 1e-15
CATALOG_NAMES = ("bell", "bell-optimized", "chsh", "hardy", "mermin", "ghz")


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        n = a.size
        if a.ndim != 1 or n < 2 or n & (n - 1):
            raise ValueError("amplitudes must be a vector of length 2**k")
        if abs(np.vdot(a, a).real - 1.0) > 1e-12:
            raise ValueError("state is not normalized")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Two-outcome qubit measurement given by the vector of the "true" outcome.

    The "false" outcome is the orthogonal complement.  ``vectors`` is indexed by
    outcome, so ``vectors[1]`` is the true vector and ``vectors[0]`` the false one.
    """

    party: int
    setting: int
    true_vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.true_vector, dtype=complex)
        if v.shape != (2,):
            raise ValueError("qubit basis vectors have two components")
        if abs(np.vdot(v, v).real - 1.0) > 1e-12:
            raise ValueError("basis vector is not unit norm")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "true_vector", v)

    @property
    def vectors(self) -> np.ndarray:
        t = self.true_vector
        f = np.array([-np.conj(t[1]), np.conj(t[0])])
        return np.stack([f, t])


def rotated(phi: float) -> np.ndarray:
    return np.array([math.cos(phi), math.sin(phi)], dtype=complex)


def born_table(state: PureState, bases: Sequence[MeasurementBasis], scenario: Scenario | None = None) -> ConditionalTable:
    k = state.qubits
    if len(bases) != k:
        raise ValueError(f"{k}-qubit state needs {k} bases, got {len(bases)}")
    if scenario is not None and scenario.parties != k:
        raise ValueError("scenario and state disagree on the number of parties")
    amp = state.amplitudes.reshape((2,) * k)
    for j, b in enumerate(bases):
        # contract party j's axis with <v_o|; the new outcome axis goes last
        amp = np.tensordot(amp, b.vectors.conj(), axes=([0], [1]))
    probs = np.abs(amp) ** 2
    # exact zeros of the model come out as ~1e-33 after the trigonometry
    probs[probs < ROUNDOFF_ZERO] = 0.0
    setting = tuple(b.setting for b in bases)
    return ConditionalTable(setting, probs / probs.sum())


def proof_from_state(
    state: PureState, settings: Sequence[Sequence[np.ndarray]], name: str
) -> NonlocalityProof:
    """``settings[j][s]`` is the true vector of party ``j`` in setting ``s``."""
    scenario = Scenario(tuple((2,) * len(row) for row in settings))
    tables = []
    for st in scenario.joint_settings():
        bases = [MeasurementBasis(j, s, settings[j][s]) for j, s in enumerate(st)]
        tables.append(born_table(state, bases, scenario))
    return NonlocalityProof(scenario, tuple(tables), name)


def _bell_pair() -> PureState:
    return PureState(np.array([1, 0, 0, 1]) / math.sqrt(2))


def hardy_constants() -> tuple[float, float]:
    alpha = 0.5 * math.sqrt(2 + 2 * math.sqrt(-13 + 6 * math.sqrt(5)))
    return alpha, math.sqrt(1 - alpha**2)


def catalog(name: str) -> NonlocalityProof:
    pi = math.pi
    if name == "bell":
        return proof_from_state(
            _bell_pair(), [[rotated(0), rotated(pi / 8)], [rotated(pi / 8), rotated(pi / 4)]], name
        )
    if name == "bell-optimized":
        return proof_from_state(
            _bell_pair(), [[rotated(0), rotated(pi / 6)], [rotated(0), rotated(pi / 3)]], name
        )
    if name == "chsh":
        return proof_from_state(
            _bell_pair(), [[rotated(0), rotated(pi / 4)], [rotated(pi / 8), rotated(-pi / 8)]], name
        )
    if name == "hardy":
        a, b = hardy_constants()
        first = np.array([math.sqrt(b / (a + b)), math.sqrt(a / (a + b))])
        second = np.array([-math.sqrt(b**3 / (a**3 + b**3)), math.sqrt(a**3 / (a**3 + b**3))])
        state = PureState(np.array([a, 0, 0, -b]))
        return proof_from_state(state, [[first, second], [first, second]], name)
    if name == "mermin":
        vecs = [rotated(0), rotated(2 * pi / 3), rotated(4 * pi / 3)]
        return proof_from_state(_bell_pair(), [vecs, vecs], name)
    if name == "ghz":
        state = np.zeros(8)
        state[0] = state[7] = 1 / math.sqrt(2)
        vecs = [np.array([1, 1]) / math.sqrt(2), np.array([1, 1j]) / math.sqrt(2)]
        return proof_from_state(PureState(state), [vecs, vecs, vecs], name)
    raise KeyError(f"unknown proof {name!r}; choose from {', '.join(CATALOG_NAMES)}")


# ------------------------------------------------------------ inequalities


@dataclass(frozen=True)
class InequalityReport:
    inequality: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def violated(self) -> bool:
        return self.slack > 0


def _differ(proof: NonlocalityProof, a: int, b: int) -> float:
    p = proof.table((a, b)).probs
    return float(p[0, 1] + p[1, 0])


def chsh_inequality(proof: NonlocalityProof) -> InequalityReport:
    lhs = _differ(proof, 1, 1)
    rhs = _differ(proof, 0, 0) + _differ(proof, 0, 1) + _differ(proof, 1, 0)
    return InequalityReport("Pr(X2!=Y2) <= Pr(X1!=Y1) + Pr(X1!=Y2) + Pr(X2!=Y1)", lhs, rhs)


def bell_inequality(proof: NonlocalityProof) -> InequalityReport:
    lhs = _differ(proof, 0, 1)
    rhs = _differ(proof, 0, 0) + _differ(proof, 1, 0) + _differ(proof, 1, 1)
    return InequalityReport("Pr(X1!=Y2) <= Pr(X1!=Y1) + Pr(X2!=Y1) + Pr(X2!=Y2)", lhs, rhs)


def hardy_inequality(proof: NonlocalityProof) -> InequalityReport:
    lhs = proof.table((1, 1))[1, 1]
    rhs = proof.table((1, 0))[1, 0] + proof.table((0, 1))[0, 1] + proof.table((0, 0))[1, 1]
    return InequalityReport("Pr(X2&Y2) <= Pr(X2&!Y1) + Pr(!X1&Y2) + Pr(X1&Y1)", lhs, rhs)


def mermin_inequality(proof: NonlocalityProof) -> InequalityReport:
    rhs = 0.0
    for i in range(3):
        for j in range(3):
            d = _differ(proof, i, j)
            rhs += d if i == j else 0.5 * (1.0 - d)
    return InequalityReport("1 <= sum_i Pr(Xi!=Yi) + 1/2 sum_{i!=j} Pr(Xi=Yj)", 1.0, rhs)


def _odd_parity(proof: NonlocalityProof, setting) -> float:
    p = proof.table(setting).probs
    idx = np.indices(p.shape).sum(axis=0) % 2 == 1
    return float(p[idx].sum())


def ghz_inequality(proof: NonlocalityProof) -> InequalityReport:
    lhs = _odd_parity(proof, (0, 0, 0))
    rhs = sum(_odd_parity(proof, s) for s in [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
    return InequalityReport(
        "Pr(X1^Y1^Z1) <= Pr(X1^Y2^Z2) + Pr(X2^Y1^Z2) + Pr(X2^Y2^Z1)", lhs, rhs
    )


INEQUALITIES = {
    "bell": bell_inequality,
    "bell-optimized": bell_inequality,
    "chsh": chsh_inequality,
    "hardy": hardy_inequality,
    "mermin": mermin_inequality,
    "ghz": ghz_inequality,
}

_SHAPES = {
    "bell": (2, 2),
    "bell-optimized": (2, 2),
    "chsh": (2, 2),
    "hardy": (2, 2),
    "mermin": (3, 3),
    "ghz": (2, 2, 2),
}


def violation_report(proof: NonlocalityProof, family: str | None = None) -> InequalityReport:
    """Evaluate the Bell-type inequality of the proof's family.

    ``family`` defaults to the proof's name.
    """
    family = family or proof.name
    if family not in INEQUALITIES:
        raise KeyError(f"no inequality template for {family!r}")
    sc = proof.scenario
    binary = all(n == 2 for row in sc.outcomes_per_setting for n in row)
    if sc.settings_per_party != _SHAPES[family] or not binary:
        raise ValueError(f"{family} inequality does not apply to this scenario")
    return INEQUALITIES[family](proof)
