"""Scenarios, nonlocality proofs, local theories and setting distributions.

Conventions used throughout the package:

* Parties, settings and outcomes are 0-based integers.  For two-outcome
  measurements outcome ``1`` is "true" and ``0`` is "false".
* Joint settings are tuples ``(s_1, ..., s_k)`` and are flattened in
  row-major order (party 0 varies slowest).  For two parties with two
  settings each this gives ``(0,0), (0,1), (1,0), (1,1)``.
* A conditional table is an ndarray with one axis per party; the axis
  length for party ``j`` is the outcome count of party ``j`` at its setting.
* Deterministic theories are enumerated party-major, setting-major, as an
  odometer whose *last* (party, setting) digit turns fastest.  For the
  2x2x2 case the digits are ``(x1, x2, y1, y2)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

VERTEX_CAP = 2**24
NO_SIGNALLING_TOL = 1e-9
NORMALIZATION_TOL = 1e-12


class ScenarioTooLarge(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _normalized(probs, what: str, tol: float = NORMALIZATION_TOL) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if np.any(p < -tol):
        raise ValueError(f"{what} has negative entries")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{what} sums to {total!r}, not 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


@dataclass(frozen=True)
class Scenario:
    """Shape of a nonlocality experiment.

    ``outcomes_per_setting[j][s]`` is the number of outcomes party ``j``
    can observe in setting ``s``.
    """

    outcomes_per_setting: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        ops = tuple(tuple(int(n) for n in row) for row in self.outcomes_per_setting)
        object.__setattr__(self, "outcomes_per_setting", ops)
        if len(ops) < 1:
            raise ValueError("a scenario needs at least one party")
        for row in ops:
            if len(row) < 1:
                raise ValueError("every party needs at least one setting")
            if any(n < 1 for n in row):
                raise ValueError("every setting needs at least one outcome")

    @classmethod
    def uniform(cls, parties: int, settings: int, outcomes: int) -> Scenario:
        return cls(tuple((outcomes,) * settings for _ in range(parties)))

    @property
    def parties(self) -> int:
        return len(self.outcomes_per_setting)

    @property
    def settings_per_party(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.outcomes_per_setting)

    @property
    def n_settings(self) -> int:
        return math.prod(self.settings_per_party)

    @property
    def n_vertices(self) -> int:
        return math.prod(n for row in self.outcomes_per_setting for n in row)

    def joint_settings(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(n) for n in self.settings_per_party)))

    def setting_index(self, setting: Sequence[int]) -> int:
        setting = tuple(int(s) for s in setting)
        if len(setting) != self.parties:
            raise ValueError(f"setting {setting} does not have one entry per party")
        for s, n in zip(setting, self.settings_per_party):
            if not 0 <= s < n:
                raise ValueError(f"setting {setting} out of range")
        return int(np.ravel_multi_index(setting, self.settings_per_party))

    def outcome_shape(self, setting: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.outcomes_per_setting[j][s] for j, s in enumerate(setting))

    @property
    def is_2x2(self) -> bool:
        return self.parties == 2 and self.settings_per_party == (2, 2)


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    setting: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "setting", tuple(int(s) for s in self.setting))
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != len(self.setting):
            raise ValueError("table needs one axis per party")
        object.__setattr__(self, "probs", _frozen(_normalized(p, f"table {self.setting}")))

    def __getitem__(self, outcome: Sequence[int]) -> float:
        return float(self.probs[tuple(outcome)])

    def items(self):
        for outcome in itertools.product(*(range(n) for n in self.probs.shape)):
            yield outcome, float(self.probs[outcome])


@dataclass(frozen=True, eq=False)
class NonlocalityProof:
    scenario: Scenario
    tables: tuple[ConditionalTable, ...]
    name: str = "proof"

    def __post_init__(self):
        tables = tuple(self.tables)
        settings = self.scenario.joint_settings()
        if len(tables) != len(settings):
            raise ValueError(f"expected {len(settings)} tables, got {len(tables)}")
        by_setting = {t.setting: t for t in tables}
        if set(by_setting) != set(settings):
            raise ValueError("need exactly one table per joint setting")
        tables = tuple(by_setting[s] for s in settings)
        for t in tables:
            if t.probs.shape != self.scenario.outcome_shape(t.setting):
                raise ValueError(f"table {t.setting} has wrong outcome shape")
        object.__setattr__(self, "tables", tables)

    @classmethod
    def from_arrays(cls, scenario: Scenario, arrays: Iterable, name: str = "proof"):
        """Build a proof from tables given in canonical joint-setting order."""
        tables = [ConditionalTable(s, a) for s, a in zip(scenario.joint_settings(), arrays)]
        return cls(scenario, tuple(tables), name)

    def table(self, setting: Sequence[int]) -> ConditionalTable:
        return self.tables[self.scenario.setting_index(setting)]

    @cached_property
    def cells(self) -> np.ndarray:
        """All table entries concatenated in canonical (setting, outcome) order."""
        return np.concatenate([t.probs.ravel() for t in self.tables])


@dataclass(frozen=True)
class DeterministicTheory:
    """``assignment[j][s]`` is the outcome party ``j`` reports in setting ``s``."""

    assignment: tuple[tuple[int, ...], ...]

    def outcome(self, setting: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.assignment[j][s] for j, s in enumerate(setting))


def _check_cap(scenario: Scenario, cap: int):
    if scenario.n_vertices > cap:
        raise ScenarioTooLarge(
            f"{scenario.n_vertices} deterministic theories exceeds the cap of {cap}"
        )


@lru_cache(maxsize=64)
def _assignments(scenario: Scenario) -> np.ndarray:
    radices = [n for row in scenario.outcomes_per_setting for n in row]
    if not radices:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(radices).reshape(len(radices), -1).T
    grids.setflags(write=False)
    return grids


def enumerate_deterministic(scenario: Scenario, cap: int = VERTEX_CAP) -> list[DeterministicTheory]:
    _check_cap(scenario, cap)
    flat = _assignments(scenario)
    widths = scenario.settings_per_party
    splits = np.cumsum(widths)[:-1]
    out = []
    for row in flat:
        parts = np.split(row, splits)
        out.append(DeterministicTheory(tuple(tuple(int(x) for x in p) for p in parts)))
    return out


@dataclass(frozen=True)
class Incidence:
    """For every joint setting and vertex, the flattened cell the vertex lands in.

    ``cell[s, v]`` indexes into the concatenation of all conditional tables,
    i.e. into ``NonlocalityProof.cells``.
    """

    cell: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.sizes.sum())

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense 0/1 matrix mapping vertex weights to all conditional cells."""
        n_set, n_v = self.cell.shape
        m = np.zeros((self.n_cells, n_v))
        m[self.cell, np.broadcast_to(np.arange(n_v), self.cell.shape)] = 1.0
        m.setflags(write=False)
        return m

    @cached_property
    def setting_of_cell(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sizes)), self.sizes)


@lru_cache(maxsize=64)
def incidence(scenario: Scenario, cap: int = VERTEX_CAP) -> Incidence:
    _check_cap(scenario, cap)
    flat = _assignments(scenario)
    col0 = np.concatenate([[0], np.cumsum(scenario.settings_per_party)[:-1]])
    settings = scenario.joint_settings()
    cell = np.empty((len(settings), len(flat)), dtype=np.int64)
    sizes = np.empty(len(settings), dtype=np.int64)
    for i, st in enumerate(settings):
        shape = scenario.outcome_shape(st)
        cols = [col0[j] + s for j, s in enumerate(st)]
        cell[i] = np.ravel_multi_index(tuple(flat[:, c] for c in cols), shape)
        sizes[i] = math.prod(shape)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    cell += offsets[:, None]
    for a in (cell, sizes, offsets):
        a.setflags(write=False)
    return Incidence(cell, offsets, sizes)


@dataclass(frozen=True, eq=False)
class LocalTheory:
    scenario: Scenario
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.scenario.n_vertices,):
            raise ValueError(f"need {self.scenario.n_vertices} weights, got {w.shape}")
        object.__setattr__(self, "weights", _frozen(_normalized(w, "local theory", 1e-9)))

    @classmethod
    def uniform(cls, scenario: Scenario) -> LocalTheory:
        n = scenario.n_vertices
        return cls(scenario, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, scenario: Scenario, vertex: int) -> LocalTheory:
        w = np.zeros(scenario.n_vertices)
        w[vertex] = 1.0
        return cls(scenario, w)

    @cached_property
    def cells(self) -> np.ndarray:
        """Induced conditional probabilities for every (setting, outcome) cell."""
        return induced_cells(self.scenario, self.weights)

    def induced(self, setting: Sequence[int]) -> ConditionalTable:
        return induced_conditional(self, setting)

    def as_proof(self, name: str = "local") -> NonlocalityProof:
        inc = incidence(self.scenario)
        c = self.cells
        arrays = [
            c[o : o + n].reshape(self.scenario.outcome_shape(s))
            for o, n, s in zip(inc.offsets, inc.sizes, self.scenario.joint_settings())
        ]
        return NonlocalityProof.from_arrays(self.scenario, arrays, name)


def induced_cells(scenario: Scenario, weights: np.ndarray) -> np.ndarray:
    inc = incidence(scenario)
    return np.bincount(
        inc.cell.ravel(),
        weights=np.broadcast_to(weights, inc.cell.shape).ravel(),
        minlength=inc.n_cells,
    )


def induced_conditional(theory: LocalTheory, setting: Sequence[int], scenario: Scenario | None = None) -> ConditionalTable:
    scenario = scenario or theory.scenario
    if scenario != theory.scenario:
        raise ValueError("theory does not belong to this scenario")
    i = scenario.setting_index(setting)
    inc = incidence(scenario)
    shape = scenario.outcome_shape(tuple(setting))
    probs = np.bincount(inc.cell[i] - inc.offsets[i], weights=theory.weights, minlength=inc.sizes[i])
    return ConditionalTable(tuple(setting), probs.reshape(shape))


@dataclass(frozen=True, eq=False)
class SettingDistribution:
    scenario: Scenario
    probs: np.ndarray
    form: str = "general"
    marginals: tuple[np.ndarray, ...] | None = field(default=None)

    def __post_init__(self):
        if self.form not in ("uniform", "product", "general"):
            raise ValueError(f"unknown form {self.form!r}")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.scenario.n_settings,):
            raise ValueError(f"need {self.scenario.n_settings} setting probabilities")
        object.__setattr__(self, "probs", _frozen(_normalized(p, "setting distribution", 1e-9)))
        if self.form == "uniform" and np.ptp(self.probs) > NORMALIZATION_TOL:
            raise ValueError("uniform setting distribution has unequal entries")
        if self.form == "product":
            if self.marginals is None:
                raise ValueError("product form needs per-party marginals")
            margs = tuple(_frozen(m) for m in self.marginals)
            outer = _outer(margs)
            if np.max(np.abs(outer - self.probs)) > 1e-12:
                raise ValueError("probabilities are not the product of the marginals")
            object.__setattr__(self, "marginals", margs)

    @classmethod
    def uniform(cls, scenario: Scenario) -> SettingDistribution:
        n = scenario.n_settings
        margs = tuple(np.full(k, 1.0 / k) for k in scenario.settings_per_party)
        return cls(scenario, np.full(n, 1.0 / n), "uniform", margs)

    @classmethod
    def product(cls, scenario: Scenario, marginals: Sequence[Sequence[float]]) -> SettingDistribution:
        if len(marginals) != scenario.parties:
            raise ValueError("need one marginal per party")
        margs = []
        for m, k in zip(marginals, scenario.settings_per_party):
            if len(m) != k:
                raise ValueError("marginal length does not match the settings count")
            margs.append(_normalized(m, "marginal", 1e-9))
        return cls(scenario, _outer(margs), "product", tuple(margs))

    @classmethod
    def general(cls, scenario: Scenario, probs) -> SettingDistribution:
        return cls(scenario, np.asarray(probs, dtype=float), "general")

    def party_marginals(self) -> tuple[np.ndarray, ...]:
        """Per-party marginals recovered from the joint probabilities."""
        grid = self.probs.reshape(self.scenario.settings_per_party)
        k = self.scenario.parties
        return tuple(
            grid.sum(axis=tuple(a for a in range(k) if a != j)) for j in range(k)
        )

    @property
    def is_interior(self) -> bool:
        return bool(np.all(self.probs > 0))


def _outer(marginals) -> np.ndarray:
    out = np.ones(())
    for m in marginals:
        out = np.multiply.outer(out, np.asarray(m, dtype=float))
    return out.ravel()


def check_no_signalling(proof: NonlocalityProof, tol: float = NO_SIGNALLING_TOL) -> tuple[bool, float]:
    """Largest change in any party's outcome marginal across others' settings."""
    sc = proof.scenario
    k = sc.parties
    worst = 0.0
    for j in range(k):
        others = [a for a in range(k) if a != j]
        for s_j in range(sc.settings_per_party[j]):
            marginals = []
            for st in sc.joint_settings():
                if st[j] != s_j:
                    continue
                probs = proof.table(st).probs
                marginals.append(probs.sum(axis=tuple(others)) if others else probs)
            ref = marginals[0]
            for m in marginals[1:]:
                worst = max(worst, float(np.max(np.abs(m - ref))))
    return worst <= tol, worst


# ---------------------------------------------------------------- JSON I/O


def _outcome_key(outcome: Sequence[int]) -> str:
    return ",".join(str(o) for o in outcome)


def proof_to_dict(proof: NonlocalityProof) -> dict:
    sc = proof.scenario
    return {
        "name": proof.name,
        "parties": sc.parties,
        "settings_per_party": list(sc.settings_per_party),
        "outcomes_per_setting": [list(row) for row in sc.outcomes_per_setting],
        "tables": [
            {
                "setting": list(t.setting),
                "probs": {_outcome_key(o): p for o, p in t.items()},
            }
            for t in proof.tables
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    sc = Scenario(tuple(tuple(row) for row in d["outcomes_per_setting"]))
    if "parties" in d and d["parties"] != sc.parties:
        raise ValueError("'parties' disagrees with 'outcomes_per_setting'")
    if "settings_per_party" in d and tuple(d["settings_per_party"]) != sc.settings_per_party:
        raise ValueError("'settings_per_party' disagrees with 'outcomes_per_setting'")
    return sc


def _table_from_dict(sc: Scenario, t: dict) -> ConditionalTable:
    setting = tuple(t["setting"])
    shape = sc.outcome_shape(setting)
    probs = np.zeros(shape)
    for key, p in t["probs"].items():
        outcome = tuple(int(x) for x in key.split(","))
        probs[outcome] = float(p)
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"table {setting} sums to {total}")
    return ConditionalTable(setting, probs / total)


def proof_from_dict(d: dict) -> NonlocalityProof:
    sc = scenario_from_dict(d)
    tables = tuple(_table_from_dict(sc, t) for t in d["tables"])
    return NonlocalityProof(sc, tables, d.get("name", "proof"))


def dump_proof(proof: NonlocalityProof, path: str | Path | None = None) -> str:
    text = json.dumps(proof_to_dict(proof), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_proof(path: str | Path) -> NonlocalityProof:
    return proof_from_dict(json.loads(Path(path).read_text()))
