"""Command-line surface.

Every subcommand emits a machine-readable document (JSON by default,
CSV with --csv) that embeds the fully resolved configuration, so a run
can be reproduced from its own output.  Numeric values serialize at 17
significant digits in both formats; the CSV carries scalars as
"# key=value" comment lines above the table.

Exit codes: 0 success, 2 bad input (flags, files, malformed values),
3 numeric failure (precision cap, no convergence), 4 infeasible
parameters (outside the valid coefficient region).
"""

from __future__ import annotations

import functools
import io
import json
import sys

import click
import numpy as np

from .errors import ConstraintError, InputError, NumericError
from .psi_dist import PrecisionContext, ThetaParams, cdf
from .count_dist import (
    TestingSetup,
    bh_count,
    bh_count_step_up,
    bh_pmf,
    bonferroni_count,
    bonferroni_pmf,
    bonferroni_poisson,
    borel_limit_param,
    borel_tanner_pmf,
    normal_approx,
)
from .dependence import (
    bonferroni_pmf_copula,
    latent_bh_pmf,
    latent_pvalue_correlation,
)
from .mle import FitOptions, fit, select_order
from .power import power_table
from .simulate import (
    GumbelCopula,
    Independent,
    Latent,
    SimConfig,
    empirical_count_distribution,
)

_EXIT_CODES = ((InputError, 2), (NumericError, 3), (ConstraintError, 4))


def _handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (InputError, NumericError, ConstraintError) as exc:
            for klass, code in _EXIT_CODES:
                if isinstance(exc, klass):
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(code)
            raise

    return wrapper


def _g17(value):
    """Round-trip floats through 17 significant digits so JSON and CSV
    agree bit for bit."""
    if isinstance(value, float):
        return float("%.17g" % value)
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.floating):
        return _g17(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _g17(obj)


def _emit(ctx_obj, command: str, config: dict, result: dict,
          table: tuple | None = None):
    """Write one result document.

    ``table`` is (result key, column names, rows) rendered as the CSV
    body; other result entries become comment lines.  JSON always
    carries the full structure.
    """
    doc = {
        "command": command,
        "config": _clean(config),
        "result": _clean(result),
    }
    if ctx_obj["format"] == "json":
        click.echo(json.dumps(doc, indent=2))
        return
    out = io.StringIO()
    out.write(f"# command={command}\n")
    for key, val in sorted(doc["config"].items()):
        out.write(f"# config.{key}={_fmt(val)}\n")
    for key, val in doc["result"].items():
        if table is not None and key == table[0]:
            continue
        if isinstance(val, (list, dict)):
            out.write(f"# {key}={json.dumps(val)}\n")
        else:
            out.write(f"# {key}={_fmt(val)}\n")
    if table is not None:
        _, columns, rows = table
        out.write(",".join(columns) + "\n")
        for row in rows:
            out.write(",".join(_fmt(_g17(v)) for v in row) + "\n")
    click.echo(out.getvalue(), nl=False)


def _parse_floats(ctx, param, value):
    if value is None:
        return None
    try:
        items = tuple(float(tok) for tok in str(value).split(",") if tok.strip())
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers: {exc}")
    if not items:
        raise click.BadParameter("expected at least one number")
    return items


def _parse_ints(ctx, param, value):
    floats = _parse_floats(ctx, param, value)
    if floats is None:
        return None
    if any(v != int(v) for v in floats):
        raise click.BadParameter(f"expected integers, got {value}")
    return tuple(int(v) for v in floats)


_MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "."}


def _is_header_token(token: str) -> bool:
    if token.lower() in _MISSING_TOKENS:
        return False
    try:
        float(token)
        return False
    except ValueError:
        return True


def read_pvalues(path: str, column: str | None = None,
                 delimiter: str | None = None):
    """Parse a p-value file.

    Plain format: one value per line.  Delimited format (when --column
    is given): the named or 0-based-indexed column of each row; a
    leading header row is detected automatically.  Missing entries are
    skipped and counted; anything else non-numeric is an error naming
    the line.  Returns (values array, source line numbers, skipped count).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    sep = delimiter or ","
    col_index = None
    saw_header = False
    if column is not None:
        try:
            col_index = int(column)
        except ValueError:
            col_index = None
    values, lines, skipped = [], [], 0
    for lineno, raw in enumerate(raw_lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if column is None:
            token = line
        else:
            cells = [c.strip() for c in line.split(sep)]
            if col_index is None:
                # first data line doubles as the header in name mode
                if column not in cells:
                    raise InputError(
                        f"{path}: header line {lineno} has no column "
                        f"named {column!r} (columns: {cells})"
                    )
                col_index = cells.index(column)
                saw_header = True
                continue
            if col_index >= len(cells):
                raise InputError(
                    f"{path} line {lineno}: only {len(cells)} columns, "
                    f"column {col_index} requested"
                )
            token = cells[col_index]
            if not saw_header and _is_header_token(token):
                saw_header = True
                continue
        if token.lower() in _MISSING_TOKENS:
            skipped += 1
            continue
        try:
            val = float(token)
        except ValueError:
            raise InputError(f"{path} line {lineno}: {token!r} is not a number")
        if val != val:  # NaN parses as a float; treat as missing
            skipped += 1
            continue
        if not 0.0 <= val <= 1.0:
            raise InputError(
                f"{path} line {lineno}: p-value {val!r} outside [0, 1]"
            )
        values.append(val)
        lines.append(lineno)
    if not values:
        raise InputError(f"{path}: no usable p-values found")
    return np.array(values), lines, skipped


def _reject_zeros(values, lines, path):
    zero = np.nonzero(values == 0.0)[0]
    if zero.size:
        raise InputError(
            f"{path} line {lines[int(zero[0])]}: p-value is exactly 0, "
            "outside the fit domain (0, 1]; floor such values explicitly "
            "(e.g. at the machine minimum) before fitting"
        )


def _resolve_theta(theta, uniform_) -> ThetaParams:
    if theta is not None and uniform_:
        raise InputError("--theta and --uniform are mutually exclusive")
    if theta is None and not uniform_:
        raise InputError("one of --theta or --uniform is required")
    return ThetaParams.uniform() if uniform_ else ThetaParams(len(theta), theta)


_file_options = [
    click.option("--column", default=None,
                 help="Column name or 0-based index for delimited files."),
    click.option("--delimiter", default=None,
                 help="Field delimiter for delimited files [default: ,]."),
]


def _add_options(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f

    return deco


@click.group()
@click.option("--precision-bits", default=256, show_default=True,
              help="Starting precision of the adaptive extended-precision passes.")
@click.option("--json", "fmt", flag_value="json", default=True,
              help="JSON output (default).")
@click.option("--csv", "fmt", flag_value="csv", help="CSV output.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for any randomized step (fit starts, simulation).")
@click.pass_context
def main(ctx, precision_bits, fmt, seed):
    """Distributions of multiple-testing discovery counts: exact pmfs,
    p-value density fitting, dependence models, power planning, and
    Monte Carlo checks."""
    ctx.ensure_object(dict)
    if precision_bits < 64:
        raise click.BadParameter("--precision-bits must be >= 64")
    ctx.obj.update(
        prec=PrecisionContext(bits=precision_bits),
        format=fmt,
        seed=int(seed),
        precision_bits=int(precision_bits),
    )


def _dist_summary(dist) -> dict:
    return {
        "mean": dist.mean(),
        "sd": dist.sd(),
        "pr_zero": dist.prob(0),
        "k_max": dist.k_max,
        "tail_mass": dist.tail_mass,
        "mean_error_bound": dist.mean_error_bound(),
        "precision_bits": dist.precision_bits,
    }


@main.command("fit")
@click.argument("file", type=click.Path())
@click.option("--order", default=None, type=int,
              help="Fit this fixed order instead of selecting one.")
@click.option("--max-order", default=6, show_default=True, type=int,
              help="Largest order tried by the selection sweep.")
@click.option("--starts", default=8, show_default=True, type=int,
              help="Number of optimizer start points.")
@_add_options(_file_options)
@click.pass_obj
@_handle_errors
def fit_cmd(obj, file, order, max_order, starts, column, delimiter):
    """Maximum-likelihood fit of the p-value density family to FILE."""
    values, lines, skipped = read_pvalues(file, column, delimiter)
    _reject_zeros(values, lines, file)
    options = FitOptions(n_starts=starts, seed=obj["seed"])
    if order is not None:
        result = fit(values, order, options)
    else:
        result = select_order(values, max_order, options)
    trace = [
        {"order": f.order, "loglik": f.loglik,
         "theta_hat": list(f.theta_hat.coeffs)}
        for f in (result.trace or (result,))
    ]
    for i in range(1, len(trace)):
        trace[i]["two_delta"] = 2.0 * (trace[i]["loglik"] - trace[i - 1]["loglik"])
    config = {
        "file": file, "order": order, "max_order": max_order,
        "starts": starts, "seed": obj["seed"], "column": column,
        "delimiter": delimiter, "skipped_rows": skipped,
    }
    result_doc = {
        "selected_order": result.order,
        "theta_hat": list(result.theta_hat.coeffs),
        "theta0_hat": result.theta_hat.theta0,
        "pi0_hat": result.pi0_hat,
        "std_errs": None if result.std_errs is None else list(result.std_errs),
        "boundary_flags": list(result.boundary_flags),
        "loglik": result.loglik,
        "n_obs": result.n_obs,
        "converged": result.converged,
        "iterations": result.iterations,
        "trace": trace,
    }
    rows = [
        (i + 1, c,
         "" if result.std_errs is None else result.std_errs[i],
         int(result.boundary_flags[i]))
        for i, c in enumerate(result.theta_hat.coeffs)
    ]
    _emit(obj, "fit", config, result_doc,
          ("theta_hat", ("index", "theta_hat", "std_err", "boundary"), rows))


@main.command("bh-dist")
@click.option("--n", required=True, type=int, help="Number of tests.")
@click.option("--alpha", required=True, type=float, help="FDR level.")
@click.option("--theta", callback=_parse_floats, default=None,
              help="Comma-separated coefficients theta_1..theta_I.")
@click.option("--uniform", "uniform_", is_flag=True,
              help="Uniform marginal (order 0).")
@click.option("--tail-tol", default=1e-9, show_default=True, type=float,
              help="Mass allowed beyond the truncation point.")
@click.option("--k-max", default=None, type=int,
              help="Force the pmf out to this k regardless of tail mass.")
@click.pass_obj
@_handle_errors
def bh_dist_cmd(obj, n, alpha, theta, uniform_, tail_tol, k_max):
    """Exact distribution of the step-down discovery count."""
    marginal = _resolve_theta(theta, uniform_)
    setup = TestingSetup(n, alpha, marginal)
    dist = bh_pmf(setup, obj["prec"], tail_tol, k_max)
    approx = normal_approx(setup)
    bt_param = borel_limit_param(marginal, alpha)
    bt = [borel_tanner_pmf(bt_param, k) for k in range(dist.k_max + 1)]
    config = {
        "n": n, "alpha": alpha, "theta": list(marginal.coeffs),
        "tail_tol": tail_tol, "k_max_forced": k_max,
        "precision_bits": obj["precision_bits"],
    }
    result = {
        **_dist_summary(dist),
        "normal_mu": approx.mu,
        "normal_sigma": approx.sigma,
        "borel_param": bt_param,
        "pmf": list(dist.pmf),
    }
    rows = [(k, dist.pmf[k], bt[k]) for k in range(dist.k_max + 1)]
    _emit(obj, "bh-dist", config, result,
          ("pmf", ("k", "pmf", "borel_tanner_pmf"), rows))


@main.command("bonf-dist")
@click.option("--n", required=True, type=int, help="Number of tests.")
@click.option("--alpha", required=True, type=float, help="FDR level.")
@click.option("--theta", callback=_parse_floats, default=None,
              help="Comma-separated coefficients theta_1..theta_I.")
@click.option("--uniform", "uniform_", is_flag=True,
              help="Uniform marginal (order 0).")
@click.option("--gamma", default=None, type=float,
              help="Gumbel copula parameter (>= 1); omit for independence.")
@click.option("--poisson", "poisson_", is_flag=True,
              help="Use the large-n Poisson limit instead of the binomial.")
@click.option("--tail-tol", default=1e-9, show_default=True, type=float)
@click.pass_obj
@_handle_errors
def bonf_dist_cmd(obj, n, alpha, theta, uniform_, gamma, poisson_, tail_tol):
    """Distribution of the Bonferroni count (binomial, Poisson limit,
    or Gumbel-copula dependent)."""
    marginal = _resolve_theta(theta, uniform_)
    setup = TestingSetup(n, alpha, marginal)
    if gamma is not None and poisson_:
        raise InputError("--gamma and --poisson are mutually exclusive")
    if gamma is not None:
        dist = bonferroni_pmf_copula(setup, gamma, obj["prec"], tail_tol)
        model = "gumbel-copula"
    elif poisson_:
        dist = bonferroni_poisson(setup, tail_tol)
        model = "poisson"
    else:
        dist = bonferroni_pmf(setup, tail_tol)
        model = "binomial"
    config = {
        "n": n, "alpha": alpha, "theta": list(marginal.coeffs),
        "gamma": gamma, "poisson": poisson_, "tail_tol": tail_tol,
        "precision_bits": obj["precision_bits"],
    }
    result = {
        "model": model,
        "p_star": cdf(alpha / n, marginal),
        **_dist_summary(dist),
        "pmf": list(dist.pmf),
    }
    rows = [(k, dist.pmf[k]) for k in range(dist.k_max + 1)]
    _emit(obj, "bonf-dist", config, result, ("pmf", ("k", "pmf"), rows))


@main.command("count")
@click.argument("file", type=click.Path())
@click.option("--alpha", required=True, type=float, help="FDR level.")
@_add_options(_file_options)
@click.pass_obj
@_handle_errors
def count_cmd(obj, file, alpha, column, delimiter):
    """Observed discovery counts for the p-values in FILE."""
    values, _, skipped = read_pvalues(file, column, delimiter)
    config = {
        "file": file, "alpha": alpha, "column": column,
        "delimiter": delimiter, "skipped_rows": skipped,
    }
    result = {
        "n": int(values.size),
        "bh": bh_count(values, alpha),
        "bh_step_up": bh_count_step_up(values, alpha),
        "bonferroni": bonferroni_count(values, alpha),
    }
    _emit(obj, "count", config, result)


@main.command("dependent")
@click.option("--n", required=True, type=int, help="Number of tests.")
@click.option("--alpha", required=True, type=float, help="FDR level.")
@click.option("--theta", callback=_parse_floats, required=True,
              help="Comma-separated coefficients theta_1..theta_I.")
@click.option("--eps", callback=_parse_floats, default=None,
              help="Latent perturbation vector, same length as theta.")
@click.option("--z", default=None, type=float,
              help="Perturbation scale; eps = z * sigma.")
@click.option("--sigma", callback=_parse_floats, default=None,
              help="Base vector multiplied by --z.")
@click.option("--tail-tol", default=1e-9, show_default=True, type=float)
@click.pass_obj
@_handle_errors
def dependent_cmd(obj, n, alpha, theta, eps, z, sigma, tail_tol):
    """Step-down count distribution under the latent fair-coin model."""
    marginal = ThetaParams(len(theta), theta)
    if eps is not None and (z is not None or sigma is not None):
        raise InputError("--eps and --z/--sigma are mutually exclusive")
    if eps is None:
        if z is None or sigma is None:
            raise InputError("supply either --eps or both --z and --sigma")
        if len(sigma) != len(theta):
            raise InputError(
                f"--sigma has length {len(sigma)}, --theta has {len(theta)}"
            )
        eps = tuple(z * s for s in sigma)
    elif len(eps) != len(theta):
        raise InputError(
            f"--eps has length {len(eps)}, --theta has {len(theta)}"
        )
    setup = TestingSetup(n, alpha, marginal)
    dist = latent_bh_pmf(setup, eps, obj["prec"], tail_tol)
    config = {
        "n": n, "alpha": alpha, "theta": list(marginal.coeffs),
        "eps": list(eps), "z": z,
        "sigma": None if sigma is None else list(sigma),
        "tail_tol": tail_tol, "precision_bits": obj["precision_bits"],
    }
    result = {
        **_dist_summary(dist),
        "correlation": latent_pvalue_correlation(marginal, eps),
        "pmf": list(dist.pmf),
    }
    rows = [(k, dist.pmf[k]) for k in range(dist.k_max + 1)]
    _emit(obj, "dependent", config, result, ("pmf", ("k", "pmf"), rows))


@main.command("power")
@click.option("--theta", callback=_parse_floats, required=True,
              help="Pilot-fitted coefficients theta_1..theta_I.")
@click.option("--pilot-n", required=True, type=int,
              help="Subject sample size of the pilot study.")
@click.option("--n-tests", required=True, type=int,
              help="Number of hypotheses in the planned study.")
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--n-list", callback=_parse_ints, required=True,
              help="Comma-separated subject sample sizes to evaluate.")
@click.option("--z-list", callback=_parse_floats, required=True,
              help="Comma-separated dependence levels (eps = z * theta(N)).")
@click.option("--tail-tol", default=1e-9, show_default=True, type=float)
@click.pass_obj
@_handle_errors
def power_cmd(obj, theta, pilot_n, n_tests, alpha, n_list, z_list, tail_tol):
    """Power table over subject sample sizes and dependence levels."""
    pilot = ThetaParams(len(theta), theta)
    grid = power_table(pilot, pilot_n, n_tests, alpha, n_list, z_list,
                       obj["prec"], tail_tol)
    config = {
        "theta": list(pilot.coeffs), "pilot_n": pilot_n,
        "n_tests": n_tests, "alpha": alpha,
        "n_list": list(n_list), "z_list": list(z_list),
        "tail_tol": tail_tol, "precision_bits": obj["precision_bits"],
    }
    rows = [
        (r.n_subjects, r.z, r.correlation, r.expected_bh,
         r.prob_bh_positive, r.expected_bh_error)
        for r in grid.rows
    ]
    result = {
        "rows": [
            {"N": r.n_subjects, "z": r.z, "correlation": r.correlation,
             "expected_bh": r.expected_bh,
             "prob_bh_positive": r.prob_bh_positive,
             "expected_bh_error": r.expected_bh_error}
            for r in grid.rows
        ],
    }
    _emit(obj, "power", config, result,
          ("rows",
           ("N", "z", "correlation", "expected_bh", "prob_bh_positive",
            "expected_bh_error"),
           rows))


@main.command("simulate")
@click.option("--n", required=True, type=int, help="Tests per replicate.")
@click.option("--alpha", required=True, type=float, help="FDR level.")
@click.option("--replicates", default=10000, show_default=True, type=int)
@click.option("--theta", callback=_parse_floats, default=None,
              help="Comma-separated coefficients theta_1..theta_I.")
@click.option("--uniform", "uniform_", is_flag=True,
              help="Uniform marginal (order 0).")
@click.option("--gamma", default=None, type=float,
              help="Sample under a Gumbel copula with this parameter.")
@click.option("--eps", callback=_parse_floats, default=None,
              help="Sample under the latent model with this perturbation.")
@click.option("--rule", default="bh", show_default=True,
              type=click.Choice(["bh", "bonferroni"]))
@click.pass_obj
@_handle_errors
def simulate_cmd(obj, n, alpha, replicates, theta, uniform_, gamma, eps, rule):
    """Empirical count distribution from Monte Carlo replicates."""
    marginal = _resolve_theta(theta, uniform_)
    if gamma is not None and eps is not None:
        raise InputError("--gamma and --eps are mutually exclusive")
    if gamma is not None:
        dependence = GumbelCopula(gamma)
    elif eps is not None:
        dependence = Latent(eps)
    else:
        dependence = Independent()
    sim = SimConfig(
        n_tests=n, replicates=replicates, marginal=marginal,
        alpha=alpha, seed=obj["seed"], dependence=dependence,
    )
    emp = empirical_count_distribution(sim, rule)
    config = {
        "n": n, "alpha": alpha, "replicates": replicates,
        "theta": list(marginal.coeffs), "gamma": gamma,
        "eps": None if eps is None else list(eps),
        "rule": rule, "seed": obj["seed"],
    }
    result = {
        "mean": emp.mean(),
        "sd": emp.sd(),
        "pr_zero": emp.prob(0),
        "k_max": emp.k_max,
        "replicates": emp.replicates,
        "pmf": list(emp.pmf),
        "std_errs": list(emp.std_errs),
    }
    rows = [
        (k, emp.pmf[k], emp.std_errs[k]) for k in range(emp.k_max + 1)
    ]
    _emit(obj, "simulate", config, result,
          ("pmf", ("k", "pmf", "std_err"), rows))


if __name__ == "__main__":
    main()
