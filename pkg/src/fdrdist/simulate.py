"""Monte Carlo sampling of p-value vectors and empirical count laws.

Every analytic result in the package can be cross-checked here: p-values
are drawn under the independent, latent-mixture, or Gumbel-copula models,
the counting rules are applied per replicate, and normalized histograms
with binomial standard errors come back as empirical distributions.

Reproducibility contract: replicate r of a run with seed s consumes only
the counter-based substream keyed by (s, r), so results are bit-identical
regardless of chunking or evaluation order.  Draw order within a
replicate is fixed and documented on each sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .psi_dist import ThetaParams, _quantile_array, require_valid
from .count_dist import CountDistribution, TestingSetup
from .dependence import (
    DependenceSpec,
    GumbelCopula,
    Independent,
    Latent,
    perturbed_pair,
)

__all__ = [
    "SimConfig",
    "EmpiricalCountDistribution",
    "sample_pvalues",
    "sample_pvalues_gamma_mixture",
    "positive_stable",
    "empirical_count_distribution",
]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run; the seed pins everything."""

    n_tests: int
    replicates: int
    marginal: ThetaParams
    alpha: float
    seed: int
    dependence: DependenceSpec = field(default_factory=Independent)

    def __post_init__(self):
        if self.n_tests < 1:
            raise InputError(f"n_tests must be >= 1, got {self.n_tests}")
        if self.replicates < 1:
            raise InputError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        require_valid(self.marginal, "marginal")
        dep = self.dependence
        if not isinstance(dep, (Independent, GumbelCopula, Latent)):
            raise InputError(f"unsupported dependence spec {dep!r}")
        if isinstance(dep, Latent):
            perturbed_pair(self.marginal, dep.eps)  # raises if either side is invalid


def _rng_for(seed: int, replicate: int) -> np.random.Generator:
    # (seed, replicate) packed into the 128-bit Philox key
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | replicate))


def _chunk_rows(n_tests: int, replicates: int) -> int:
    return max(1, min(replicates, 4_000_000 // n_tests))


def positive_stable(gamma: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Positive-stable frailties S with Laplace transform exp(-t^(1/gamma)).

    Exact Kanter construction: with a = 1/gamma, W uniform on (0, pi) and
    E standard exponential,

        S = sin(a W) * sin((1-a) W)^((1-a)/a) / sin(W)^(1/a) * E^(-(1-a)/a),

    evaluated in log space.  gamma = 1 degenerates to S = 1 (independence);
    the two driving variates are still consumed so the substream layout
    does not depend on gamma.
    """
    if not gamma >= 1.0:
        raise InputError(f"gamma must be >= 1, got {gamma}")
    w = rng.uniform(0.0, math.pi, size)
    e = rng.exponential(1.0, size)
    if gamma == 1.0:
        return np.ones(size)
    a = 1.0 / gamma
    r = (1.0 - a) / a
    log_s = (np.log(np.sin(a * w))
             + r * np.log(np.sin((1.0 - a) * w))
             - np.log(np.sin(w)) / a
             - r * np.log(e))
    return np.exp(log_s)


def _transform_uniform_chunk(u: np.ndarray, theta: ThetaParams) -> np.ndarray:
    if theta.order == 0:
        return u
    return _quantile_array(u, theta)


def sample_pvalues(config: SimConfig) -> np.ndarray:
    """Matrix of p-values, shape (replicates, n_tests).

    Per-replicate draw order:

    * Independent: n_tests uniforms, then the marginal quantile transform.
    * Latent: one uniform for the fair coin (< 0.5 selects theta - eps),
      then n_tests uniforms transformed by the selected parameters.
    * GumbelCopula: the two frailty variates, then n_tests exponentials;
      U_i = exp(-(E_i / S)^(1/gamma)) before the marginal transform.
    """
    out = np.empty((config.replicates, config.n_tests))
    for lo, hi, chunk in _iter_pvalue_chunks(config):
        out[lo:hi] = chunk
    return out


def _iter_pvalue_chunks(config: SimConfig):
    """Yield (lo, hi, matrix) blocks of replicates without holding the
    whole run in memory."""
    n, reps = config.n_tests, config.replicates
    dep = config.dependence
    rows = _chunk_rows(n, reps)
    if isinstance(dep, Latent):
        minus, plus = perturbed_pair(config.marginal, dep.eps)
    for lo in range(0, reps, rows):
        hi = min(lo + rows, reps)
        m = hi - lo
        if isinstance(dep, Independent):
            u = np.empty((m, n))
            for r in range(lo, hi):
                u[r - lo] = _rng_for(config.seed, r).uniform(size=n)
            yield lo, hi, _transform_uniform_chunk(u, config.marginal)
        elif isinstance(dep, Latent):
            u = np.empty((m, n))
            coin = np.empty(m, dtype=bool)
            for r in range(lo, hi):
                rng = _rng_for(config.seed, r)
                coin[r - lo] = rng.uniform() < 0.5
                u[r - lo] = rng.uniform(size=n)
            p = np.empty_like(u)
            if coin.any():
                p[coin] = _transform_uniform_chunk(u[coin], minus)
            if (~coin).any():
                p[~coin] = _transform_uniform_chunk(u[~coin], plus)
            yield lo, hi, p
        else:
            e = np.empty((m, n))
            s = np.empty(m)
            for r in range(lo, hi):
                rng = _rng_for(config.seed, r)
                s[r - lo] = positive_stable(dep.gamma, rng, 1)[0]
                e[r - lo] = rng.exponential(1.0, size=n)
            u = np.exp(-((e / s[:, None]) ** (1.0 / dep.gamma)))
            yield lo, hi, _transform_uniform_chunk(u, config.marginal)


def sample_pvalues_gamma_mixture(config: SimConfig) -> np.ndarray:
    """Independent-model sampler that never touches the quantile solver.

    The density is a mixture over i = 0..I of laws whose -log p is
    Gamma(i + 1): draw the component with weights (theta_0, 1! theta_1,
    ..., I! theta_I), then multiply i + 1 uniforms.  Serves as an
    independent cross-check of the inverse-CDF path.  Draw order per
    replicate: n_tests component indices, then n_tests * (I + 1) uniforms.
    """
    if not isinstance(config.dependence, Independent):
        raise InputError(
            "the mixture sampler covers only the independent model; got "
            f"{config.dependence!r}"
        )
    theta = config.marginal
    weights = np.array(
        [theta.theta0]
        + [math.factorial(i) * c for i, c in enumerate(theta.coeffs, start=1)]
    )
    n, reps = config.n_tests, config.replicates
    out = np.empty((reps, n))
    for r in range(reps):
        rng = _rng_for(config.seed, r)
        comp = rng.choice(len(weights), size=n, p=weights)
        u = rng.uniform(size=(n, theta.order + 1))
        # product of the first comp+1 uniforms per test
        mask = np.arange(theta.order + 1)[None, :] <= comp[:, None]
        out[r] = np.where(mask, u, 1.0).prod(axis=1)
    return out


@dataclass(frozen=True)
class EmpiricalCountDistribution(CountDistribution):
    """Histogram estimate of a count law with per-cell standard errors."""

    std_errs: np.ndarray = None
    replicates: int = 0

    def __post_init__(self):
        super().__post_init__()
        se = np.asarray(self.std_errs, dtype=float)
        se.flags.writeable = False
        object.__setattr__(self, "std_errs", se)


_RULES = ("bh", "bonferroni")


def empirical_count_distribution(config: SimConfig,
                                 rule: str = "bh") -> EmpiricalCountDistribution:
    """Apply a counting rule to every simulated replicate and normalize.

    ``rule`` is "bh" (step-down) or "bonferroni".  Standard errors are
    binomial: sqrt(phat (1 - phat) / replicates) per cell.
    """
    rule_key = str(rule).lower()
    if rule_key not in _RULES:
        raise InputError(f"rule must be one of {_RULES}, got {rule!r}")
    n, alpha = config.n_tests, config.alpha
    counts = np.zeros(n + 1, dtype=np.int64)
    thresh = np.arange(1, n + 1) * (alpha / n)
    for _, _, chunk in _iter_pvalue_chunks(config):
        if rule_key == "bh":
            ok = np.sort(chunk, axis=1) <= thresh
            k = np.where(ok.all(axis=1), n, np.argmin(ok, axis=1))
        else:
            k = (chunk <= alpha / n).sum(axis=1)
        counts += np.bincount(k, minlength=n + 1)
    k_max = int(np.nonzero(counts)[0][-1])
    pmf = counts[: k_max + 1] / config.replicates
    se = np.sqrt(pmf * (1.0 - pmf) / config.replicates)
    return EmpiricalCountDistribution(
        setup=TestingSetup(n, alpha, config.marginal),
        pmf=pmf,
        k_max=k_max,
        tail_mass=0.0,
        precision_bits=0,
        std_errs=se,
        replicates=config.replicates,
    )
