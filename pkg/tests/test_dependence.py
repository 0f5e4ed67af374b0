"""Dependent-count models: Gumbel copula Bonferroni pmf and the latent
fair-coin mixture.

Oracles: the binomial reduction at gamma = 1, a brute-force n = 3
orthant calculation by inclusion-exclusion, the mean invariance
E[B] = n Psi(alpha/n) for every gamma, and exact mixture structure for
the latent model.
"""
import math

import numpy as np
import pytest

from conftest import SIG_BC3, THETA_BC3
from fdrdist import (
    ConstraintError,
    GumbelCopula,
    Independent,
    InputError,
    Latent,
    TestingSetup,
    ThetaParams,
    bh_pmf,
    bonferroni_pmf,
    bonferroni_pmf_copula,
    cdf,
    gumbel_diagonal,
    latent_bh_pmf,
    latent_pvalue_correlation,
    moment,
    perturbed_pair,
    random_theta,
)

HALF_SIG = tuple(0.5 * s for s in SIG_BC3)


# ------------------------------------------------------------ spec objects

def test_dependence_spec_types():
    assert Independent() == Independent()
    assert GumbelCopula(1.0).gamma == 1.0
    with pytest.raises(ConstraintError):
        GumbelCopula(0.999)
    with pytest.raises(ConstraintError):
        GumbelCopula(float("nan"))
    lat = Latent((0.1, np.float64(0.2)))
    assert lat.eps == (0.1, 0.2)
    assert all(isinstance(e, float) for e in lat.eps)
    with pytest.raises(InputError):
        Latent((0.1, float("inf")))


def test_perturbed_pair_structure():
    minus, plus = perturbed_pair(THETA_BC3, HALF_SIG)
    for i in range(3):
        assert minus.coeffs[i] == THETA_BC3.coeffs[i] - HALF_SIG[i]
        assert plus.coeffs[i] == THETA_BC3.coeffs[i] + HALF_SIG[i]
    # theta_0 re-derives from the perturbed coefficients
    assert minus.theta0 > THETA_BC3.theta0 > plus.theta0


def test_perturbed_pair_errors():
    with pytest.raises(InputError):
        perturbed_pair(THETA_BC3, (0.1, 0.1))
    # eps pushing theta_3 - eps_3 negative leaves the valid region
    with pytest.raises(ConstraintError, match="theta - eps"):
        perturbed_pair(THETA_BC3, (0.0, 0.0, 0.03))


# ----------------------------------------------------------- diagonal map

def test_gumbel_diagonal_values():
    p = 0.013
    assert gumbel_diagonal(p, 4, 1.0) == pytest.approx(p**4, rel=1e-12)
    assert gumbel_diagonal(p, 9, 2.0) == pytest.approx(p**3, rel=1e-12)
    assert gumbel_diagonal(p, 1, 7.3) == pytest.approx(p, rel=1e-12)
    # stronger dependence pulls the diagonal toward the comonotone bound p*
    assert gumbel_diagonal(p, 5, 5000.0) == pytest.approx(p, rel=1e-2)
    assert abs(gumbel_diagonal(p, 5, 50.0) - p) > abs(gumbel_diagonal(p, 5, 5000.0) - p)
    vals = [gumbel_diagonal(p, m, 1.4) for m in range(1, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_gumbel_diagonal_domain():
    with pytest.raises(InputError):
        gumbel_diagonal(0.0, 2, 1.5)
    with pytest.raises(InputError):
        gumbel_diagonal(1.0, 2, 1.5)
    with pytest.raises(InputError):
        gumbel_diagonal(0.5, 0, 1.5)
    with pytest.raises(ConstraintError):
        gumbel_diagonal(0.5, 2, 0.5)


# ------------------------------------------------------------- copula pmf

@pytest.mark.parametrize("theta", [ThetaParams.uniform(), THETA_BC3])
def test_copula_gamma_one_is_binomial(theta):
    setup = TestingSetup(50, 0.05, theta)
    dep = bonferroni_pmf_copula(setup, 1.0, k_max=50)
    ind = bonferroni_pmf(setup, tail_tol=1e-15)
    for k in range(ind.k_max + 1):
        if ind.prob(k) > 1e-290:
            assert dep.prob(k) == pytest.approx(ind.prob(k), rel=1e-8)


def _orthant_pmf(p_star, gamma, n=3):
    """Exchangeable inclusion-exclusion over the copula diagonal."""
    def diag(m):
        return math.exp(m ** (1.0 / gamma) * math.log(p_star)) if m else 1.0

    out = []
    for j in range(n + 1):
        s = sum(
            (-1) ** i * math.comb(n - j, i) * diag(j + i)
            for i in range(n - j + 1)
        )
        out.append(math.comb(n, j) * s)
    return out


@pytest.mark.parametrize("gamma", [1.0, 1.3, 2.0])
@pytest.mark.parametrize("theta", [ThetaParams.uniform(), THETA_BC3])
def test_copula_matches_orthant_oracle_n3(gamma, theta):
    setup = TestingSetup(3, 0.2, theta)
    dist = bonferroni_pmf_copula(setup, gamma, k_max=3)
    oracle = _orthant_pmf(cdf(setup.alpha / 3, theta), gamma)
    for k in range(4):
        assert dist.prob(k) == pytest.approx(oracle[k], abs=1e-10)
    assert dist.tail_mass == pytest.approx(0.0, abs=1e-12)


def test_copula_zero_mass_nondecreasing_in_gamma():
    setup = TestingSetup(50, 0.05, THETA_BC3)
    p0 = [bonferroni_pmf_copula(setup, g, k_max=50).prob(0)
          for g in (1.0, 1.3, 2.0, 5.0)]
    assert all(a < b for a, b in zip(p0, p0[1:]))


@pytest.mark.parametrize("gamma", [1.0, 1.3, 2.0])
def test_copula_mean_invariant_in_gamma(gamma):
    # E[B] = sum_k Pr[B >= k] = n p* regardless of the copula
    setup = TestingSetup(50, 0.05, THETA_BC3)
    dist = bonferroni_pmf_copula(setup, gamma, k_max=50)
    assert dist.mean() == pytest.approx(50 * cdf(0.05 / 50, THETA_BC3), rel=1e-9)


def test_copula_large_n_regression():
    # adaptive precision survives the alternating sum at n = 3226
    setup = TestingSetup(3226, 0.05, THETA_BC3)
    dist = bonferroni_pmf_copula(setup, 1.05)
    assert dist.prob(0) == pytest.approx(0.295329, abs=5e-5)
    assert dist.mean() == pytest.approx(
        3226 * cdf(0.05 / 3226, THETA_BC3), rel=1e-6)
    assert dist.precision_bits >= 256


def test_copula_k_max_forcing():
    setup = TestingSetup(50, 0.05, THETA_BC3)
    cut = bonferroni_pmf_copula(setup, 1.3, k_max=5)
    full = bonferroni_pmf_copula(setup, 1.3, k_max=50)
    assert cut.k_max == 5
    np.testing.assert_allclose(cut.pmf, full.pmf[:6], rtol=1e-9)
    assert cut.tail_mass == pytest.approx(1.0 - cut.pmf.sum(), abs=1e-12)


def test_copula_rejects_bad_gamma():
    setup = TestingSetup(10, 0.05)
    with pytest.raises(ConstraintError):
        bonferroni_pmf_copula(setup, 0.9)


# ------------------------------------------------------------ latent model

def test_latent_pmf_is_exact_half_mixture():
    setup = TestingSetup(300, 0.05, THETA_BC3)
    mixture = latent_bh_pmf(setup, HALF_SIG)
    minus, plus = perturbed_pair(THETA_BC3, HALF_SIG)
    lo = bh_pmf(TestingSetup(300, 0.05, minus))
    hi = bh_pmf(TestingSetup(300, 0.05, plus))
    assert mixture.k_max == max(lo.k_max, hi.k_max)
    for k in range(mixture.k_max + 1):
        assert mixture.prob(k) == pytest.approx(
            0.5 * lo.prob(k) + 0.5 * hi.prob(k), rel=1e-12, abs=1e-300)
    assert abs(mixture.pmf.sum() + mixture.tail_mass - 1.0) <= 1e-9


def test_latent_zero_eps_collapses_to_independent():
    setup = TestingSetup(200, 0.05, THETA_BC3)
    mixture = latent_bh_pmf(setup, (0.0, 0.0, 0.0))
    base = bh_pmf(setup)
    assert mixture.k_max == base.k_max
    np.testing.assert_allclose(mixture.pmf, base.pmf, rtol=1e-13)
    assert latent_pvalue_correlation(THETA_BC3, (0.0, 0.0, 0.0)) == 0.0


def test_latent_breast_cancer_half_sigma():
    dist = latent_bh_pmf(TestingSetup(3226, 0.05, THETA_BC3), HALF_SIG)
    assert dist.mean() == pytest.approx(29.3951, abs=5e-4)
    assert dist.sd() == pytest.approx(29.4985, abs=5e-4)
    assert dist.prob(0) == pytest.approx(0.1158, abs=5e-5)


def test_latent_correlation_case_study_values():
    for z, expect in ((0.25, 0.00416), (0.5, 0.01665), (0.75, 0.03747)):
        eps = tuple(z * s for s in SIG_BC3)
        assert latent_pvalue_correlation(THETA_BC3, eps) == pytest.approx(
            expect, abs=5e-6)


def test_latent_correlation_nonnegative_and_symmetric():
    rng = np.random.default_rng(99)
    found = 0
    while found < 25:
        theta = random_theta(int(rng.integers(1, 4)), rng)
        frac = rng.uniform(0.0, 0.5)
        eps = tuple(frac * c for c in theta.coeffs)
        try:
            perturbed_pair(theta, eps)
        except (ConstraintError, InputError):
            continue
        found += 1
        corr = latent_pvalue_correlation(theta, eps)
        assert 0.0 <= corr < 1.0
        neg = tuple(-e for e in eps)
        try:
            perturbed_pair(theta, neg)
        except ConstraintError:
            continue
        assert latent_pvalue_correlation(theta, neg) == pytest.approx(corr, rel=1e-12)


def test_latent_correlation_increases_with_eps_scale():
    vals = [latent_pvalue_correlation(THETA_BC3, tuple(z * s for s in SIG_BC3))
            for z in (0.1, 0.25, 0.5, 0.75)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_latent_moment_mixture_identity():
    # marginal mean under the mixture is the average of component means
    minus, plus = perturbed_pair(THETA_BC3, HALF_SIG)
    mixture_mean = 0.5 * moment(1, minus) + 0.5 * moment(1, plus)
    assert mixture_mean == pytest.approx(moment(1, THETA_BC3), abs=1e-15)


def test_latent_pmf_propagates_infeasible_eps():
    setup = TestingSetup(100, 0.05, THETA_BC3)
    with pytest.raises(ConstraintError):
        latent_bh_pmf(setup, (0.0, 0.0, 0.03))
