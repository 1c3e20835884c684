import math

import numpy as np
import pytest

from helpers import TWO_BY_TWO, proof, random_local_theory, strength, two_by_two, uniform

from bellstrength import reference
from bellstrength.divergence import kl
from bellstrength.games import (
    MODES,
    equalizer_check,
    fact1_chain,
    minimax_value,
    saddle_check,
    strength_correlated,
    strength_uncorrelated,
    strength_uniform,
)
from bellstrength.games import strength as strength_of
from bellstrength.projection import project
from bellstrength.proofs import LocalTheory, SettingDistribution
from bellstrength.quantum import CATALOG_NAMES

PI_TILDE = [0, 1, 4, 6, 9, 11, 14, 15]


def pi_tilde():
    w = np.zeros(16)
    w[PI_TILDE] = 1 / 8
    return LocalTheory(two_by_two(), w)


def table_gap(p, pi, printed):
    return max(
        float(np.max(np.abs(pi.induced(s).probs - printed[i]))) for i, s in enumerate(p.scenario.joint_settings())
    )


@pytest.mark.parametrize("name", CATALOG_NAMES)
@pytest.mark.parametrize("mode", MODES)
def test_table_entry(name, mode):
    i = MODES.index(mode)
    r = strength(name, mode)
    assert abs(r.strength_bits - reference.STRENGTHS[name][i]) <= reference.TABLE_TOL[i]
    assert r.converged and r.kkt_residual <= 1e-8


def test_ghz_closed_forms():
    assert strength("ghz", "correlated").strength_bits == pytest.approx(-math.log2(0.75), abs=1e-9)
    assert strength("ghz", "uniform").strength_bits == pytest.approx(-0.5 * math.log2(0.75), abs=1e-9)


def test_ghz_correlated_sigma_on_parity_settings():
    sigma = strength("ghz", "correlated").sigma_star
    expected = np.zeros(8)
    expected[[0, 3, 5, 6]] = 0.25  # (1,1,1), (1,2,2), (2,1,2), (2,2,1)
    assert np.max(np.abs(sigma.probs - expected)) <= 1e-6


@pytest.mark.parametrize("name", ["bell", "bell-optimized", "hardy"])
def test_correlated_sigma(name):
    assert np.max(np.abs(strength(name, "correlated").sigma_star.probs - reference.CORRELATED_SIGMA[name])) <= 1e-6


@pytest.mark.parametrize("name", ["bell", "bell-optimized", "hardy"])
def test_uncorrelated_marginals(name):
    r = strength(name, "uncorrelated")
    got = r.sigma_star.party_marginals()
    for g, e in zip(got, reference.UNCORRELATED_MARGINALS[name]):
        assert np.max(np.abs(g - e)) <= 1e-5


def test_mermin_uncorrelated_drops_one_setting_per_side():
    r = strength("mermin", "uncorrelated")
    a, b = r.sigma_star.party_marginals()
    assert np.sum(a <= 1e-9) == 1 and np.sum(b <= 1e-9) == 1
    assert sorted(a[a > 1e-9]) == pytest.approx([0.3869208948, 0.6130791052], abs=1e-5)


@pytest.mark.parametrize("name", ["chsh", "bell", "bell-optimized", "hardy", "mermin"])
def test_best_uniform_tables(name):
    assert table_gap(proof(name), strength(name, "uniform").pi_star, reference.BEST_UNIFORM[name]) <= 1e-5


@pytest.mark.parametrize("name", ["bell", "bell-optimized", "hardy"])
def test_best_uncorrelated_and_correlated_tables(name):
    p = proof(name)
    assert table_gap(p, strength(name, "uncorrelated").pi_star, reference.BEST_UNCORRELATED[name]) <= 1e-5
    assert table_gap(p, strength(name, "correlated").pi_star, reference.BEST_CORRELATED[name]) <= 1e-5


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_fact1(name):
    assert fact1_chain({m: strength(name, m) for m in MODES})


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_minimax_agrees_with_correlated(name):
    m = minimax_value(proof(name))
    assert m.value == pytest.approx(strength(name, "correlated").strength_bits, abs=1e-6)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_weak_duality(name):
    p = proof(name)
    upper = minimax_value(p).value
    for m in MODES:
        r = strength(name, m)
        assert project(p, r.sigma_star).value <= upper + 1e-9


@pytest.mark.parametrize("name", TWO_BY_TWO)
def test_minimax_pi_is_equalizer(name):
    m = minimax_value(proof(name))
    assert equalizer_check(proof(name), m.pi_star, 1e-6).ok


def test_minimax_improper():
    rng = np.random.default_rng(13)
    p = random_local_theory(rng, two_by_two()).as_proof()
    assert minimax_value(p).value <= 1e-9


def test_equalizer_examples():
    chsh = proof("chsh")
    r = equalizer_check(chsh, pi_tilde())
    assert r.ok and np.allclose(r.values, 0.0462738469, atol=1e-9)
    # every CHSH table has the same entries, so flat P equalizes too
    r = equalizer_check(chsh, LocalTheory.uniform(chsh.scenario))
    flat = kl(chsh.tables[0].probs.ravel(), np.full(4, 0.25))
    assert r.ok and np.allclose(r.values, flat, atol=1e-12)
    r = equalizer_check(proof("hardy"), LocalTheory.uniform(chsh.scenario))
    assert not r.ok and r.spread > 0.1
    rng = np.random.default_rng(14)
    pi = random_local_theory(rng, two_by_two())
    r = equalizer_check(pi.as_proof(), pi)
    assert r.ok and np.all(np.abs(r.values) <= 1e-12)


def test_saddle_examples():
    chsh = proof("chsh")
    assert saddle_check(chsh, uniform(chsh), pi_tilde()).ok
    r = saddle_check(chsh, uniform(chsh), LocalTheory.uniform(chsh.scenario))
    assert not r.ok and r.kkt_residual > 0.1
    hardy = proof("hardy")
    r = saddle_check(hardy, uniform(hardy), LocalTheory.uniform(hardy.scenario))
    assert not r.ok and r.kkt_residual > 0.1 and r.spread > 0.1
    rng = np.random.default_rng(15)
    pi = random_local_theory(rng, two_by_two())
    sigma = SettingDistribution.product(chsh.scenario, [[0.3, 0.7], [0.6, 0.4]])
    r = saddle_check(pi.as_proof(), sigma, pi)
    assert r.ok and abs(r.value) <= 1e-12


def test_saddle_rejects_correlated_sigma_and_larger_scenarios():
    chsh = proof("chsh")
    with pytest.raises(ValueError):
        saddle_check(chsh, SettingDistribution.general(chsh.scenario, [0.4, 0.1, 0.1, 0.4]), pi_tilde())
    mermin = proof("mermin")
    with pytest.raises(ValueError):
        saddle_check(mermin, uniform(mermin), LocalTheory.uniform(mermin.scenario))


def test_boundary_strength_vanishes():
    for name in TWO_BY_TWO:
        p = proof(name)
        for zero in range(4):
            w = np.array([0.4, 0.3, 0.2, 0.1])
            w[zero] = 0
            w /= w.sum()
            assert project(p, SettingDistribution.general(p.scenario, w)).value <= 1e-9


def test_uncorrelated_is_deterministic():
    p = proof("bell")
    a = strength_uncorrelated(p, starts=4, seed=99)
    b = strength_uncorrelated(p, starts=4, seed=99)
    assert a.strength_bits == b.strength_bits
    assert np.array_equal(a.sigma_star.probs, b.sigma_star.probs)


def test_uncorrelated_sigma_is_product():
    r = strength("hardy", "uncorrelated")
    a, b = r.sigma_star.party_marginals()
    assert np.max(np.abs(np.outer(a, b).ravel() - r.sigma_star.probs)) <= 1e-12


def test_improper_strengths_zero():
    rng = np.random.default_rng(16)
    p = random_local_theory(rng, two_by_two()).as_proof()
    assert strength_uniform(p).strength_bits <= 1e-10
    assert strength_correlated(p).strength_bits <= 1e-9
    assert strength_uncorrelated(p, starts=2).strength_bits <= 1e-9


def test_unknown_mode():
    with pytest.raises(ValueError):
        strength_of(proof("chsh"), "bayesian")
