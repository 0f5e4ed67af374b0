"""Maximum-likelihood fitting of the log-polynomial p-value family.

The likelihood is maximized over the nested box constraints by a
derivative-free simplex search in transformed coordinates: each
coefficient is a sigmoid fraction of the interval allowed by the
coefficients above it, so every point the optimizer visits maps to a
valid parameter vector.  Multi-start (a near-uniform corner, a
small-coefficient point, and random feasible draws) guards against the
flat ridges this likelihood develops near the boundary.

Standard errors come from a central finite-difference Hessian of the
negative log-likelihood at the estimate.  Coefficients that land on a
constraint boundary are reported exactly on it and their standard
errors flagged, since curvature-based errors are not trustworthy there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .errors import InputError, NumericError
from .psi_dist import (
    ThetaParams,
    chained_upper_bound,
    random_theta,
    require_valid,
)

__all__ = ["FitOptions", "FitResult", "log_likelihood", "fit", "select_order"]

_BOUNDARY_SNAP = 1e-8
_CHI2_1_05 = 3.84  # chi-squared(1 df) critical value at .05
_NO_CHANGE = 1e-4


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings; the seed pins the random starts."""

    n_starts: int = 8
    seed: int = 0
    fatol: float = 1e-8
    xatol: float = 1e-9
    maxiter: int = 5000

    def __post_init__(self):
        if self.n_starts < 1:
            raise InputError(f"n_starts must be >= 1, got {self.n_starts}")


@dataclass(frozen=True)
class FitResult:
    """Outcome of one maximum-likelihood fit.

    ``boundary_flags[i]`` marks coefficient i+1 as sitting on a
    constraint boundary (its standard error is then unreliable).
    ``std_errs`` is None when the Hessian is not positive definite.
    ``trace`` carries the per-order fits when produced by select_order.
    """

    theta_hat: ThetaParams
    std_errs: tuple | None
    loglik: float
    n_obs: int
    pi0_hat: float
    converged: bool
    iterations: int
    boundary_flags: tuple = ()
    trace: tuple = ()

    @property
    def order(self) -> int:
        return self.theta_hat.order


def _checked_pvalues(pvalues) -> np.ndarray:
    arr = np.asarray(pvalues, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("no p-values supplied")
    if not np.all(np.isfinite(arr)):
        i = int(np.argmin(np.isfinite(arr)))
        raise InputError(f"p-value at index {i} is not finite: {arr[i]!r}")
    if np.any(arr == 0.0):
        i = int(np.argmax(arr == 0.0))
        raise InputError(
            f"p-value at index {i} is exactly 0, outside the family's "
            "domain (0, 1]; apply an explicit floor before fitting if "
            "underflow is expected"
        )
    if np.any((arr < 0.0) | (arr > 1.0)):
        bad = (arr < 0.0) | (arr > 1.0)
        i = int(np.argmax(bad))
        raise InputError(f"p-value at index {i} is outside [0, 1]: {arr[i]!r}")
    return np.sort(arr)


def _poly_coeffs(theta: ThetaParams) -> np.ndarray:
    # highest power first, constant term last, as np.polyval expects
    return np.array(list(theta.coeffs[::-1]) + [theta.theta0])


def _loglik_from_x(x: np.ndarray, theta: ThetaParams) -> float:
    vals = np.polyval(_poly_coeffs(theta), x)
    if np.any(vals <= 0.0):
        return -math.inf
    return float(np.log(vals).sum())


def log_likelihood(pvalues, theta: ThetaParams) -> float:
    """Sum of log densities; -inf when the density is nonpositive at any
    observation (possible only for parameters outside the valid region)."""
    arr = _checked_pvalues(pvalues)
    if theta.order == 0:
        return 0.0
    return _loglik_from_x(-np.log(arr), theta)


def _sigmoid(y: np.ndarray) -> np.ndarray:
    # floored at the smallest normal float: the map must stay inside the
    # open interval, or extreme simplex steps would underflow a strictly
    # positive top coefficient to an exact, invalid zero
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = np.maximum(ey / (1.0 + ey), np.finfo(float).tiny)
    return out


def _y_to_theta(y: np.ndarray, order: int) -> tuple:
    """Map unconstrained coordinates to a valid coefficient tuple,
    filling from the highest order down so each box bound is known."""
    frac = _sigmoid(y)
    coeffs = [0.0] * order
    for i in range(order, 0, -1):
        upper = chained_upper_bound(i, coeffs)
        coeffs[i - 1] = frac[i - 1] * upper
    return tuple(coeffs)


def _theta_to_y(coeffs, order: int) -> np.ndarray:
    y = np.empty(order)
    filled = [0.0] * order
    for i in range(order, 0, -1):
        upper = chained_upper_bound(i, filled)
        frac = coeffs[i - 1] / upper if upper > 0 else 0.0
        frac = min(max(frac, 1e-12), 1.0 - 1e-12)
        y[i - 1] = math.log(frac / (1.0 - frac))
        filled[i - 1] = coeffs[i - 1]
    return y


def _start_points(order: int, n_starts: int, seed: int) -> list:
    starts = []
    # near the uniform corner: all coefficients tiny
    starts.append(np.full(order, math.log(1e-3 / (1 - 1e-3))))
    if n_starts > 1:
        # moderate coefficients, a tenth of each box
        starts.append(np.full(order, math.log(0.1 / 0.9)))
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        theta = random_theta(order, rng)
        starts.append(_theta_to_y(theta.coeffs, order))
    return starts[:n_starts]


def _snap_boundaries(coeffs: tuple, order: int) -> tuple:
    """Coefficients within the snap tolerance of a box edge are set
    exactly on it; returns (snapped coefficients, flags)."""
    snapped = list(coeffs)
    flags = [False] * order
    for i in range(order, 0, -1):
        upper = chained_upper_bound(i, snapped)
        if upper - snapped[i - 1] <= _BOUNDARY_SNAP:
            snapped[i - 1] = upper
            flags[i - 1] = True
        elif snapped[i - 1] <= _BOUNDARY_SNAP:
            # the top coefficient of a higher-order fit is strictly
            # positive by definition of the order, so it is flagged as
            # boundary-pinned but never moved onto the excluded edge
            if i < order or order == 1:
                snapped[i - 1] = 0.0
            flags[i - 1] = True
    return tuple(snapped), tuple(flags)


def _fd_std_errs(x: np.ndarray, theta: ThetaParams):
    """Central finite-difference Hessian of -loglik; None when it is not
    positive definite (boundary or flat directions)."""
    order = theta.order
    est = np.array(theta.coeffs)
    h = 1e-4 * np.maximum(1.0, np.abs(est))

    def nll(c):
        return -_loglik_from_x(x, ThetaParams(order, tuple(c)))

    f0 = nll(est)
    hess = np.empty((order, order))
    for i in range(order):
        ei = np.zeros(order)
        ei[i] = h[i]
        hess[i, i] = (nll(est + ei) - 2.0 * f0 + nll(est - ei)) / h[i] ** 2
        for j in range(i + 1, order):
            ej = np.zeros(order)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (
                nll(est + ei + ej) - nll(est + ei - ej)
                - nll(est - ei + ej) + nll(est - ei - ej)
            ) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(hess)):
        return None
    try:
        eigs = np.linalg.eigvalsh(hess)
        if np.any(eigs <= 0.0):
            return None
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return None
    diag = np.diag(cov)
    if np.any(diag <= 0.0):
        return None
    return tuple(float(s) for s in np.sqrt(diag))


def fit(pvalues, order: int, options: FitOptions | None = None) -> FitResult:
    """Maximum-likelihood estimate of a fixed-order model.

    Runs the simplex search from every start point, keeps the best
    converged result (ties broken by start index, so the outcome is
    independent of scheduling), snaps boundary coefficients, and
    attaches finite-difference standard errors.
    """
    if order < 1:
        raise InputError(f"order must be >= 1, got {order}")
    arr = _checked_pvalues(pvalues)
    if arr.size < order + 5:
        raise InputError(
            f"need at least order + 5 = {order + 5} observations to fit "
            f"order {order}, got {arr.size}"
        )
    options = options or FitOptions()
    x = -np.log(arr)

    def objective(y):
        return -_loglik_from_x(x, ThetaParams(order, _y_to_theta(y, order)))

    best = None
    for idx, y0 in enumerate(_start_points(order, options.n_starts, options.seed)):
        res = optimize.minimize(
            objective,
            y0,
            method="Nelder-Mead",
            options=dict(
                fatol=options.fatol,
                xatol=options.xatol,
                maxiter=options.maxiter,
                maxfev=2 * options.maxiter,
            ),
        )
        if not res.success:
            continue
        key = (-res.fun, -idx)  # highest loglik, then earliest start
        if best is None or key > best[0]:
            best = (key, res)
    if best is None:
        raise NumericError(
            f"no simplex start converged within {options.maxiter} iterations"
        )
    res = best[1]
    coeffs, flags = _snap_boundaries(_y_to_theta(res.x, order), order)
    theta_hat = ThetaParams(order, coeffs)
    require_valid(theta_hat, "fitted parameters")
    return FitResult(
        theta_hat=theta_hat,
        std_errs=_fd_std_errs(x, theta_hat),
        loglik=_loglik_from_x(x, theta_hat),
        n_obs=int(arr.size),
        pi0_hat=theta_hat.theta0,
        converged=True,
        iterations=int(res.nit),
        boundary_flags=flags,
    )


def select_order(pvalues, max_order: int = 6,
                 options: FitOptions | None = None) -> FitResult:
    """Fit increasing orders until the likelihood stops improving.

    Stops at order I when twice the log-likelihood gain over I-1 falls
    below the chi-squared(1) critical value 3.84, or when the gain is
    numerically nil (below 1e-4); returns the last accepted fit with
    every attempted fit attached as the trace.
    """
    if max_order < 1:
        raise InputError(f"max_order must be >= 1, got {max_order}")
    fits = [fit(pvalues, 1, options)]
    selected = fits[0]
    for order in range(2, max_order + 1):
        candidate = fit(pvalues, order, options)
        fits.append(candidate)
        gain = candidate.loglik - selected.loglik
        if 2.0 * gain < _CHI2_1_05 or gain < _NO_CHANGE:
            break
        selected = candidate
    return replace(selected, trace=tuple(fits))
