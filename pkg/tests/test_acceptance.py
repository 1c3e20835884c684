"""Acceptance criteria 1-8.

Each check returns (passed, detail).  Under pytest every criterion is one
test and the outcomes are repeated in a summary section at the end of the
run; ``python tests/test_acceptance.py`` prints the same lines directly.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import (  # noqa: E402
    STRENGTH_SECONDS,
    TWO_BY_TWO,
    oracle_inner_min,
    proof,
    random_local_theory,
    random_nonlocal_proof,
    strength,
    uniform,
)

from bellstrength import reference  # noqa: E402
from bellstrength.games import MODES, equalizer_check, fact1_chain, saddle_check  # noqa: E402
from bellstrength.polytope import perfect_lr_for_three_settings  # noqa: E402
from bellstrength.projection import kkt_check, project  # noqa: E402
from bellstrength.proofs import LocalTheory, Scenario, SettingDistribution  # noqa: E402
from bellstrength.quantum import CATALOG_NAMES, violation_report  # noqa: E402
from bellstrength.simulate import evidence, simulate  # noqa: E402

# CHSH equalizer: 1/8 on each of the eight theories satisfying three of
# X1=Y1, X1=Y2, X2=Y1, X2!=Y2; vertex v = 8*x1 + 4*x2 + 2*y1 + y2
CHSH_PI_TILDE = (0, 1, 4, 6, 9, 11, 14, 15)


def chsh_pi_tilde() -> LocalTheory:
    w = np.zeros(16)
    w[list(CHSH_PI_TILDE)] = 1 / 8
    return LocalTheory(Scenario.uniform(2, 2, 2), w)


def max_table_gap(p, theory, printed) -> float:
    return max(
        float(np.max(np.abs(theory.induced(st).probs - printed[i])))
        for i, st in enumerate(p.scenario.joint_settings())
    )


def check_1():
    worst = {m: 0.0 for m in MODES}
    for name in CATALOG_NAMES:
        for m, pub in zip(MODES, reference.STRENGTHS[name]):
            worst[m] = max(worst[m], abs(strength(name, m).strength_bits - pub))
    seconds = sum(STRENGTH_SECONDS.values())
    ok = all(worst[m] <= tol for m, tol in zip(MODES, reference.TABLE_TOL)) and seconds < 60
    detail = ", ".join(f"{m} max dev {worst[m]:.1e}" for m in MODES) + f"; {seconds:.1f}s"
    return ok, detail


def check_2():
    target = -math.log2(0.75)
    c = strength("ghz", "correlated").strength_bits
    u = strength("ghz", "uniform").strength_bits
    dc, du = abs(c - target), abs(u - target / 2)
    return dc <= 1e-9 and du <= 1e-9, f"correlated dev {dc:.1e}, uniform dev {du:.1e}"


def check_3():
    gaps = {
        n: max_table_gap(proof(n), strength(n, "uniform").pi_star, reference.BEST_UNIFORM[n])
        for n in ("chsh", "bell", "bell-optimized", "hardy", "mermin")
    }
    worst = max(gaps.values())
    return worst <= 1e-5, f"max entry deviation {worst:.1e} over {len(gaps)} tables"


def check_4():
    worst = 0.0
    for name in CATALOG_NAMES:
        for m in MODES:
            r = strength(name, m)
            worst = max(worst, kkt_check(proof(name), r.sigma_star, r.pi_star).residual)
    chsh = proof("chsh")
    eq = equalizer_check(chsh, chsh_pi_tilde())
    sd = saddle_check(chsh, uniform(chsh), chsh_pi_tilde())
    ok = worst <= 1e-8 and eq.spread <= 1e-9 and sd.ok
    return ok, f"max KKT residual {worst:.1e}; equalizer spread {eq.spread:.1e}; saddle {sd.ok}"


def check_5():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(25):
        p = random_nonlocal_proof(rng)
        s = SettingDistribution.general(p.scenario, rng.dirichlet(np.full(4, 4.0)))
        worst = max(worst, abs(project(p, s).value - oracle_inner_min(p, s, seed=i)))
    return worst <= 2e-4, f"max |project - oracle| {worst:.1e} over 25 proofs"


def _boundary_sigmas(rng):
    out = []
    for zero in range(4):
        for _ in range(2):
            w = rng.dirichlet(np.ones(4))
            w[zero] = 0.0
            out.append(w / w.sum())
    return out


def check_6():
    fact1 = all(fact1_chain({m: strength(n, m) for m in MODES}) for n in CATALOG_NAMES)
    rng = np.random.default_rng(11)
    boundary = 0.0
    for n in TWO_BY_TWO:
        p = proof(n)
        for w in _boundary_sigmas(rng):
            boundary = max(boundary, project(p, SettingDistribution.general(p.scenario, w)).value)
    lemma = 0.0
    for n in ("chsh", "hardy"):
        p = proof(n)
        for ex in p.scenario.joint_settings():
            pi = perfect_lr_for_three_settings(p, ex)
            for st in p.scenario.joint_settings():
                if st != ex:
                    lemma = max(lemma, float(np.max(np.abs(pi.induced(st).probs - p.table(st).probs))))
    spread = 0.0
    for n in CATALOG_NAMES:
        p = proof(n)
        sigma = uniform(p)
        cells = []
        for _ in range(5):
            start = LocalTheory(p.scenario, rng.dirichlet(np.ones(p.scenario.n_vertices)))
            cells.append(project(p, sigma, tol=1e-12, start=start).pi_star.cells)
        spread = max(spread, float(np.max(np.ptp(np.array(cells), axis=0))))
    ok = fact1 and boundary <= 1e-9 and lemma <= 1e-9 and spread <= 1e-7
    detail = (
        f"fact 1 {fact1}; boundary max {boundary:.1e}; three-setting error {lemma:.1e}; "
        f"marginal spread {spread:.1e}"
    )
    return ok, detail


def check_7():
    t = time.perf_counter()
    chsh = proof("chsh")
    tr = evidence(simulate(chsh, uniform(chsh), 10**5, seed=12345), chsh, uniform(chsh), chsh_pi_tilde())
    target = reference.STRENGTHS["chsh"][0]
    z_chsh = (tr.per_trial_mean - target) / tr.standard_error
    mermin = proof("mermin")
    r = strength("mermin", "uncorrelated")
    pi = project(mermin, r.sigma_star).pi_star
    n = reference.MERMIN_RUNS
    tm = evidence(simulate(mermin, r.sigma_star, n, seed=2024), mermin, r.sigma_star, pi)
    band = tm.std_llr_bits * math.sqrt(n)
    z_mermin = (tm.total_llr_bits - reference.MERMIN_RUNS_BITS) / band
    seconds = time.perf_counter() - t
    ok = abs(z_chsh) <= 3 and abs(z_mermin) <= 3 and seconds < 30
    detail = (
        f"CHSH mean {tr.per_trial_mean:.6f} ({z_chsh:+.2f} SE); "
        f"Mermin total {tm.total_llr_bits:.1f} bits ({z_mermin:+.2f} sd); {seconds:.1f}s"
    )
    return ok, detail


# (family, scenario) pairs for the locally generated proofs
_LOCAL_FAMILIES = [
    ("chsh", Scenario.uniform(2, 2, 2)),
    ("bell", Scenario.uniform(2, 2, 2)),
    ("hardy", Scenario.uniform(2, 2, 2)),
    ("mermin", Scenario.uniform(2, 3, 2)),
    ("ghz", Scenario.uniform(3, 2, 2)),
]


def check_8():
    quantum = min(violation_report(proof(n)).slack for n in CATALOG_NAMES)
    rng = np.random.default_rng(3)
    local = -math.inf
    for i in range(50):
        family, sc = _LOCAL_FAMILIES[i % len(_LOCAL_FAMILIES)]
        p = random_local_theory(rng, sc).as_proof()
        local = max(local, violation_report(p, family).slack)
    ok = quantum > 0 and local <= 1e-12
    return ok, f"min catalog slack {quantum:.4f}; max local slack {local:.2e} over 50 proofs"


CHECKS = {i: globals()[f"check_{i}"] for i in range(1, 9)}


@pytest.mark.parametrize("cid", sorted(CHECKS))
def test_acceptance_criterion(cid):
    from conftest import ACCEPTANCE

    ok, detail = CHECKS[cid]()
    ACCEPTANCE[cid] = (ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for cid, check in CHECKS.items():
        ok, detail = check()
        failed += not ok
        print(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failed else 0)
