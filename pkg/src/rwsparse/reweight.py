"""Outer reweighting loops.

Two families are implemented over the shared inner solvers:

* dual-ascent updates, where the weights move along a supergradient of a
  Lagrange dual with a zero-target stepsize and are projected back onto
  the nonnegative orthant (oracle and non-oracle variants, plus the noisy
  variant that also carries a data-fit multiplier);
* inverse-magnitude updates w_i = 1 / (|x_i| + eps), the classical
  baseline, in noiseless and noisy versions.

Every algorithm starts from unit weights, re-solves the inner problem with
a warm restart after each weight update, and returns the final iterate
together with a per-iteration trace.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .duality import (
    lambda_subgradient,
    polyak_step_lasso,
    polyak_step_nonoracle,
    polyak_step_oracle,
    project_nonneg,
    subgradient_nonoracle,
    subgradient_oracle,
)
from .model import (
    ConfigurationError,
    DualState,
    OracleRequiredError,
    ProblemInstance,
    SolverConfig,
    Weights,
    l0_norm,
    l0_reporting_tol,
)
from .solvers import (
    InnerSolveReport,
    constrained_weighted_l1,
    min_l2_solution,
    weighted_basis_pursuit,
    weighted_lasso_fista,
)

__all__ = [
    "RwTraceRow",
    "RwTrace",
    "rw_l1_oracle",
    "rw_l1_subgradient",
    "cwb_rw_l1",
    "rw_lasso_subgradient",
    "cwb_rw_l1_noisy",
    "l1_baseline",
    "ALGORITHMS",
    "run_algorithm",
    "trace_to_csv",
    "inner_trace_to_csv",
]

_DEFAULT_CFG = SolverConfig()

CWB_DEFAULT_EPS = 0.1
SUBGRADIENT_DEFAULT_EPS = 1.0


@dataclass(frozen=True, eq=False)
class RwTraceRow:
    k: int
    w_min: float
    w_max: float
    w_mean: float
    alpha: float
    objective: float
    l0: int
    linf_err: float
    inner_iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class RwTrace:
    """Per-iteration history of one outer run (at most rw_iter + 1 rows)."""

    algo: str
    seed: int
    rows: list
    exit_reason: str
    final_state: DualState


def _row(k, w, alpha, report: InnerSolveReport, x_star) -> RwTraceRow:
    x = report.x
    linf = float(np.max(np.abs(x - x_star))) if x_star is not None else float("nan")
    return RwTraceRow(
        k=k,
        w_min=float(np.min(w)),
        w_max=float(np.max(w)),
        w_mean=float(np.mean(w)),
        alpha=float(alpha),
        objective=report.objective,
        l0=l0_norm(x, l0_reporting_tol(x)),
        linf_err=linf,
        inner_iterations=report.iterations,
        residual=report.primal_residual,
    )


def _finish(algo, instance, w, lam, k, x, alpha, rows, exit_reason):
    state = DualState(w=Weights(w), lam=lam, k=k, x_k=x, alpha_k=alpha)
    return x, RwTrace(
        algo=algo,
        seed=instance.seed,
        rows=rows,
        exit_reason=exit_reason,
        final_state=state,
    )


def rw_l1_oracle(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Dual-ascent reweighting with ground truth available.

    Each iteration takes the supergradient g_i = |x_i| - |x*_i| at the
    current weights, a zero-target stepsize, a nonnegative projection, and
    a warm-restarted weighted basis pursuit re-solve. Stops early when the
    supergradient vanishes (the iterate magnitudes match the target).
    """
    if instance.x_star is None:
        raise OracleRequiredError("oracle reweighting requires instance.x_star")
    x_star = instance.x_star
    w = np.ones(instance.n)
    report = weighted_basis_pursuit(instance, w, None, cfg)
    x = report.x
    rows = [_row(0, w, 0.0, report, x_star)]
    alpha = 0.0
    exit_reason = "budget"
    k = 0
    for k in range(1, cfg.rw_iter + 1):
        g = subgradient_oracle(x, x_star)
        if not np.any(g):
            k -= 1
            exit_reason = "zero_subgradient"
            break
        step = polyak_step_oracle(w, x, x_star)
        alpha = step.alpha
        w = project_nonneg(w + alpha * g).w
        report = weighted_basis_pursuit(instance, w, warm=x, cfg=cfg)
        x = report.x
        rows.append(_row(k, w, alpha, report, x_star))
    return _finish("oracle", instance, w, None, k, x, alpha, rows, exit_reason)


def rw_l1_subgradient(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Dual-ascent reweighting without ground truth (noise free).

    The ideal magnitudes are replaced by the current iterate amplified by
    (1 + eps_k); the resulting supergradient is -eps_k |x_k| and the
    zero-target stepsize makes the combined update independent of eps_k.
    Stops early on an identically zero iterate.
    """
    x_star = instance.x_star
    w = np.ones(instance.n)
    report = weighted_basis_pursuit(instance, w, None, cfg)
    x = report.x
    rows = [_row(0, w, 0.0, report, x_star)]
    alpha = 0.0
    exit_reason = "budget"
    k = 0
    for k in range(1, cfg.rw_iter + 1):
        eps = cfg.eps_at(k - 1, SUBGRADIENT_DEFAULT_EPS)
        if not np.any(x):
            k -= 1
            exit_reason = "zero_iterate"
            break
        alpha = polyak_step_nonoracle(w, x, eps)
        g = subgradient_nonoracle(x, eps)
        w = project_nonneg(w + alpha * g).w
        report = weighted_basis_pursuit(instance, w, warm=x, cfg=cfg)
        x = report.x
        rows.append(_row(k, w, alpha, report, x_star))
    return _finish("rw-sub", instance, w, None, k, x, alpha, rows, exit_reason)


def cwb_rw_l1(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Inverse-magnitude reweighting baseline (noise free):
    w_i = 1 / (|x_i| + eps_k) followed by a weighted basis pursuit re-solve.
    """
    x_star = instance.x_star
    w = np.ones(instance.n)
    report = weighted_basis_pursuit(instance, w, None, cfg)
    x = report.x
    rows = [_row(0, w, float("nan"), report, x_star)]
    exit_reason = "budget"
    k = 0
    for k in range(1, cfg.rw_iter + 1):
        eps = cfg.eps_at(k - 1, CWB_DEFAULT_EPS)
        w = 1.0 / (np.abs(x) + eps)
        report = weighted_basis_pursuit(instance, w, warm=x, cfg=cfg)
        x = report.x
        rows.append(_row(k, w, float("nan"), report, x_star))
    return _finish("rw-cwb", instance, w, None, k, x, float("nan"), rows, exit_reason)


def rw_lasso_subgradient(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Dual-ascent reweighted LASSO for noisy systems.

    Joint ascent in (w, lambda): the weight supergradient is -eps_k |x_k|,
    the multiplier supergradient is (1/2)(||phi x - b||^2 - eta^2), and one
    shared zero-target stepsize drives both updates. The multiplier starts
    at n / ||z||_1 with z the minimum-l2-norm solution of phi x = b.
    """
    if instance.eta is None:
        raise ConfigurationError("noisy reweighting requires instance.eta")
    x_star = instance.x_star
    z = min_l2_solution(instance)
    lam = instance.n / float(np.sum(np.abs(z)))
    w = np.ones(instance.n)
    report = weighted_lasso_fista(instance, w, lam, None, cfg)
    x = report.x
    rows = [_row(0, w, 0.0, report, x_star)]
    alpha = 0.0
    exit_reason = "budget"
    k = 0
    for k in range(1, cfg.rw_iter + 1):
        eps = cfg.eps_at(k - 1, SUBGRADIENT_DEFAULT_EPS)
        g_w = subgradient_nonoracle(x, eps)
        g_lam = lambda_subgradient(x, instance)
        if cfg.alpha_schedule is not None:
            alpha = float(cfg.alpha_schedule(k - 1))
        else:
            if not np.any(x) and g_lam == 0.0:
                k -= 1
                exit_reason = "zero_subgradient"
                break
            alpha = polyak_step_lasso(w, lam, x, eps, instance)
        w = project_nonneg(w + alpha * g_w).w
        lam = max(0.0, lam + alpha * g_lam)
        report = weighted_lasso_fista(instance, w, lam, warm=x, cfg=cfg)
        x = report.x
        rows.append(_row(k, w, alpha, report, x_star))
    return _finish("rw-lasso", instance, w, lam, k, x, alpha, rows, exit_reason)


def cwb_rw_l1_noisy(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Inverse-magnitude reweighting with the quadratic data-fit constraint
    (1/2)||phi x - b||^2 <= eta^2 / 2 solved at every iteration."""
    if instance.eta is None:
        raise ConfigurationError("noisy reweighting requires instance.eta")
    x_star = instance.x_star
    w = np.ones(instance.n)
    report = constrained_weighted_l1(instance, w, instance.eta, cfg)
    x = report.x
    rows = [_row(0, w, float("nan"), report, x_star)]
    exit_reason = "budget"
    k = 0
    for k in range(1, cfg.rw_iter + 1):
        eps = cfg.eps_at(k - 1, CWB_DEFAULT_EPS)
        w = 1.0 / (np.abs(x) + eps)
        report = constrained_weighted_l1(instance, w, instance.eta, cfg)
        x = report.x
        rows.append(_row(k, w, float("nan"), report, x_star))
    return _finish("cwb-noisy", instance, w, None, k, x, float("nan"), rows, exit_reason)


def l1_baseline(instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    """Plain l1 minimization: equality constrained for noiseless instances,
    quadratically constrained (the noisy baseline) when a budget is set."""
    x_star = instance.x_star
    w = np.ones(instance.n)
    if instance.eta is not None and instance.eta > 0:
        report = constrained_weighted_l1(instance, w, instance.eta, cfg)
    else:
        report = weighted_basis_pursuit(instance, w, None, cfg)
    rows = [_row(0, w, 0.0, report, x_star)]
    return _finish("l1", instance, w, None, 0, report.x, 0.0, rows, "budget")


ALGORITHMS = {
    "l1": l1_baseline,
    "oracle": rw_l1_oracle,
    "rw-sub": rw_l1_subgradient,
    "rw-cwb": cwb_rw_l1,
    "rw-lasso": rw_lasso_subgradient,
    "cwb-noisy": cwb_rw_l1_noisy,
}


def run_algorithm(name: str, instance: ProblemInstance, cfg: SolverConfig = _DEFAULT_CFG):
    try:
        fn = ALGORITHMS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}"
        ) from None
    return fn(instance, cfg)


def trace_to_csv(traces, path) -> None:
    """Write outer-iteration rows as ``algo,seed,k,alpha,obj,l0,linf_err``."""
    if isinstance(traces, RwTrace):
        traces = [traces]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algo", "seed", "k", "alpha", "obj", "l0", "linf_err"])
        for tr in traces:
            for row in tr.rows:
                writer.writerow(
                    [
                        tr.algo,
                        tr.seed,
                        row.k,
                        repr(row.alpha),
                        repr(row.objective),
                        row.l0,
                        repr(row.linf_err),
                    ]
                )


def inner_trace_to_csv(traces, path) -> None:
    """Write the inner-solve reports as ``k,inner_iters,objective,residual``."""
    if isinstance(traces, RwTrace):
        traces = [traces]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "inner_iters", "objective", "residual"])
        for tr in traces:
            for row in tr.rows:
                writer.writerow(
                    [row.k, row.inner_iterations, repr(row.objective), repr(row.residual)]
                )
