"""Inner convex solvers called at every outer reweighting iteration.

Four problems are covered, all over a dense underdetermined matrix:

* weighted basis pursuit      min sum_i w_i |x_i|  s.t.  phi x = b
* weighted LASSO              min (lam/2) ||phi x - b||^2 + sum_i w_i |x_i|
* constrained weighted l1     min sum_i w_i |x_i|  s.t.  ||phi x - b|| <= eta
* minimum-l2-norm solution    argmin ||x||  s.t.  phi x = b

The basis pursuit solver is an operator-splitting iteration alternating an
affine projection with a coordinate-wise weighted shrinkage; the LASSO
solver is an accelerated proximal gradient method with adaptive restart.
Both periodically attempt a support polish: solve exactly on the current
support and accept only when the full optimality conditions certify the
candidate. The constrained problem is reduced to LASSO solves by bisection
on the data-fit multiplier. Cholesky factors of phi phi^T, the squared
spectral norm and the minimum-norm solution are computed once per problem
instance and cached.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import ProblemInstance, SolverConfig, as_weight_array

__all__ = [
    "InnerSolveReport",
    "NoConvergenceError",
    "soft_threshold",
    "spectral_norm_sq",
    "min_l2_solution",
    "weighted_basis_pursuit",
    "weighted_lasso_fista",
    "constrained_weighted_l1",
]

_DEFAULT_CFG = SolverConfig()

# certified-polish acceptance slack for the dual optimality conditions
_CERT_TOL = 1e-9
_POLISH_EVERY = 10
# over-relaxation factor of the splitting iteration
_RELAX = 1.8


class NoConvergenceError(RuntimeError):
    """An iterative solve failed to reach its stopping criterion."""


@dataclass(frozen=True, eq=False)
class InnerSolveReport:
    """Outcome of one inner solve.

    ``primal_residual`` is the solver's own normalized stopping measure
    (the larger of affine feasibility and splitting consensus for basis
    pursuit, worst-case optimality-condition violation for LASSO, relative
    distance of the data-fit norm from its budget for the constrained
    problem). ``degenerate`` marks solves whose solution set is unbounded.
    """

    x: np.ndarray
    iterations: int
    primal_residual: float
    objective: float
    converged: bool
    degenerate: bool = False


def soft_threshold(v, t):
    """Shrink toward zero: sign(v) * max(|v| - t, 0), elementwise."""
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def spectral_norm_sq(phi) -> float:
    """Largest eigenvalue of phi^T phi, by power iteration on the smaller
    Gram matrix from a fixed seeded start vector (relative accuracy 1e-8)."""
    phi = np.asarray(phi, dtype=float)
    if not np.any(phi):
        return 0.0
    gram = phi @ phi.T if phi.shape[0] <= phi.shape[1] else phi.T @ phi
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    lam = 0.0
    for _ in range(100_000):
        u = gram @ v
        lam = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            # start vector landed in the kernel; re-draw
            v = rng.standard_normal(gram.shape[0])
            v /= np.linalg.norm(v)
            continue
        v = u / norm_u
        if abs(lam - lam_prev) <= 1e-9 * max(abs(lam), 1e-300):
            break
        lam_prev = lam
    return lam


_GRAM_CHOL: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_SPECTRAL: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_MIN_L2: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _gram_cholesky(instance: ProblemInstance):
    """Cached Cholesky factor of phi phi^T (raises LinAlgError if singular)."""
    chol = _GRAM_CHOL.get(instance)
    if chol is None:
        chol = cho_factor(instance.phi @ instance.phi.T)
        _GRAM_CHOL[instance] = chol
    return chol


def _spectral_sq(instance: ProblemInstance) -> float:
    val = _SPECTRAL.get(instance)
    if val is None:
        val = spectral_norm_sq(instance.phi)
        _SPECTRAL[instance] = val
    return val


def min_l2_solution(instance: ProblemInstance) -> np.ndarray:
    """Minimum-l2-norm solution of phi x = b: phi^T (phi phi^T)^{-1} b.

    One step of iterative refinement keeps the residual near machine
    precision even for moderately conditioned Gram matrices.
    """
    z = _MIN_L2.get(instance)
    if z is None:
        phi, b = instance.phi, instance.b
        chol = _gram_cholesky(instance)
        y = cho_solve(chol, b)
        y += cho_solve(chol, b - phi @ (phi.T @ y))
        z = phi.T @ y
        _MIN_L2[instance] = z
    return z.copy()


def _affine_project(instance: ProblemInstance, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of v onto {x : phi x = b}."""
    phi = instance.phi
    return v - phi.T @ cho_solve(_gram_cholesky(instance), phi @ v - instance.b)


def _bp_polish(instance, w, support, tol):
    """Exact solve on a candidate support, accepted only with a verified
    dual certificate.

    Solves phi_S x_S = b by least squares, then builds the minimum-norm
    multiplier nu with (phi^T nu)_S = w_S sign(x_S) and accepts when the
    correlation phi^T nu matches the subdifferential of the weighted l1
    norm at x on every coordinate (equality on the support, magnitude at
    most w_i off it). A certified candidate is the solver-tolerance-exact
    minimizer.
    """
    phi, b = instance.phi, instance.b
    m, n = phi.shape
    if support.size == 0 or support.size > m:
        return None
    phi_s = phi[:, support]
    x_s, *_ = np.linalg.lstsq(phi_s, b, rcond=None)
    x = np.zeros(n)
    x[support] = x_s
    if np.linalg.norm(phi @ x - b) > tol * (1.0 + np.linalg.norm(b)):
        return None
    target = w[support] * np.sign(x_s)
    nu, *_ = np.linalg.lstsq(phi_s.T, target, rcond=None)
    corr = phi.T @ nu
    slack = _CERT_TOL * (1.0 + float(np.max(w, initial=0.0)))
    if np.max(np.abs(corr[support] - target), initial=0.0) > slack:
        return None
    off = np.ones(n, dtype=bool)
    off[support] = False
    if np.max(np.abs(corr[off]) - w[off], initial=0.0) > slack:
        return None
    return x


def weighted_basis_pursuit(
    instance: ProblemInstance,
    w,
    warm: np.ndarray | None = None,
    cfg: SolverConfig = _DEFAULT_CFG,
) -> InnerSolveReport:
    """Minimize sum_i w_i |x_i| subject to phi x = b.

    Operator splitting: the feasibility block is an affine projection
    (cached Cholesky of phi phi^T), the sparsity block a weighted soft
    threshold. The problem is scale invariant in both w and b, so the
    penalty is set to cfg.admm_rho * max(w) / ||z||_inf with z the
    minimum-norm solution, which keeps the shrinkage threshold a fixed
    fraction of the solution scale. Every few iterations the current
    support is polished by an exact solve and accepted only with a
    verified optimality certificate. Stops when both the affine residual
    ||phi x - b|| / (1 + ||b||) and the consensus residual of the split
    variables fall below ``cfg.inner_tol``. ``warm`` seeds the split
    iterate, which lets outer reweighting loops restart cheaply.
    """
    w = as_weight_array(w, instance.n)
    b = instance.b
    norm_b = np.linalg.norm(b)
    wmax = float(np.max(w))
    if wmax > 0.0:
        xscale = max(float(np.max(np.abs(min_l2_solution(instance)))), 1e-12)
        rho = cfg.admm_rho * wmax / xscale
    else:
        rho = cfg.admm_rho
    thresh = w / rho

    z = np.zeros(instance.n) if warm is None else np.asarray(warm, dtype=float).copy()
    u = np.zeros(instance.n)
    residual = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.inner_max_iter + 1):
        x = _affine_project(instance, z - u)
        xr = _RELAX * x + (1.0 - _RELAX) * z
        z = soft_threshold(xr + u, thresh)
        u = u + xr - z
        if it == 1 or it % _POLISH_EVERY == 0:
            polished = _bp_polish(instance, w, np.flatnonzero(z), cfg.inner_tol)
            if polished is not None:
                z = polished
                residual = np.linalg.norm(instance.phi @ z - b) / (1.0 + norm_b)
                converged = True
                break
        affine_rel = np.linalg.norm(instance.phi @ z - b) / (1.0 + norm_b)
        consensus_rel = np.linalg.norm(x - z) / (1.0 + np.linalg.norm(z))
        residual = max(affine_rel, consensus_rel)
        if residual <= cfg.inner_tol:
            converged = True
            break

    return InnerSolveReport(
        x=z,
        iterations=it,
        primal_residual=float(residual),
        objective=float(w @ np.abs(z)),
        converged=converged,
    )


def _lasso_objective(w, lam, x, resid) -> float:
    return 0.5 * lam * float(resid @ resid) + float(w @ np.abs(x))


def _lasso_optimality(w, grad, x) -> float:
    """Worst violation of the LASSO optimality conditions, normalized so
    that a value below the solver tolerance certifies the iterate:
    |grad_i + w_i sign(x_i)| / (1 + w_i) on the support, and
    max(|grad_i| - w_i, 0) off it.
    """
    nz = x != 0.0
    viol = np.empty_like(grad)
    viol[nz] = np.abs(grad[nz] + w[nz] * np.sign(x[nz])) / (1.0 + w[nz])
    viol[~nz] = np.maximum(np.abs(grad[~nz]) - w[~nz], 0.0)
    return float(np.max(viol, initial=0.0))


def _lasso_polish(instance, w, lam, support, sigma):
    """Exact solve of the reduced smooth problem on a candidate support.

    With signs sigma fixed, the minimizer on support S solves
    lam phi_S^T phi_S x_S = lam phi_S^T b - w_S sigma. The candidate is
    returned only when its signs match sigma on the penalized
    coordinates; the caller re-checks the full optimality conditions
    before accepting.
    """
    phi, b = instance.phi, instance.b
    if support.size == 0 or support.size > phi.shape[0]:
        return None
    phi_s = phi[:, support]
    try:
        x_s = np.linalg.solve(
            lam * (phi_s.T @ phi_s),
            lam * (phi_s.T @ b) - w[support] * sigma,
        )
    except np.linalg.LinAlgError:
        return None
    penalized = w[support] > 0.0
    if np.any(np.sign(x_s[penalized]) != sigma[penalized]):
        return None
    cand = np.zeros(instance.n)
    cand[support] = x_s
    return cand


def _lasso_polish_candidates(instance, w, lam, x, grad, viol):
    """Candidate supports for the exact reduced solve: the support of the
    current iterate, and the dual-active set {i : |grad_i| close to w_i}
    with signs read off the gradient (which identifies the optimal
    support before the iterate sheds its last spurious coordinates).
    The activity band widens with the current optimality violation, and
    trimmed supports (dropping the smallest magnitudes) cover spurious
    coordinates that shrink toward zero for many iterations."""
    support = np.flatnonzero(x)
    yield support, np.sign(x[support])
    if support.size > 1:
        by_magnitude = support[np.argsort(np.abs(x[support]))]
        for drop in range(1, min(3, support.size - 1) + 1):
            trimmed = np.sort(by_magnitude[drop:])
            yield trimmed, np.sign(x[trimmed])
    margin = np.maximum(1e-3 * w, 2.0 * viol * (1.0 + w))
    active = np.flatnonzero(np.abs(grad) >= w - margin)
    if active.size and not np.array_equal(active, support):
        yield active, -np.sign(grad[active])


def weighted_lasso_fista(
    instance: ProblemInstance,
    w,
    lam: float,
    warm: np.ndarray | None = None,
    cfg: SolverConfig = _DEFAULT_CFG,
) -> InnerSolveReport:
    """Minimize (lam/2) ||phi x - b||^2 + sum_i w_i |x_i|.

    Accelerated proximal gradient with step 1 / (lam * ||phi||_2^2) and
    restart of the momentum sequence whenever the objective increases.
    Every few iterations the support is polished by an exact reduced
    solve, accepted only if it satisfies the optimality conditions. Stops
    when the coordinate-wise optimality conditions hold at
    ``cfg.inner_tol``, or when the objective has moved by less than it
    (relative) over the last 10 iterations.

    lam = 0 removes the data-fit term entirely: the minimizer is x = 0,
    and the solve is flagged degenerate if any weight vanishes (those
    coordinates are then unconstrained by the objective).
    """
    w = as_weight_array(w, instance.n)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    phi, b = instance.phi, instance.b
    if lam == 0.0 or _spectral_sq(instance) == 0.0:
        x = np.zeros(instance.n)
        return InnerSolveReport(
            x=x,
            iterations=0,
            primal_residual=0.0,
            objective=_lasso_objective(w, lam, x, phi @ x - b),
            converged=True,
            degenerate=bool(np.any(w == 0.0)),
        )
    lip = lam * _spectral_sq(instance)

    x_prev = np.zeros(instance.n) if warm is None else np.asarray(warm, dtype=float).copy()
    y = x_prev.copy()
    t = 1.0
    obj_prev = _lasso_objective(w, lam, x_prev, phi @ x_prev - b)
    step_thresh = w / lip
    obj_history = [obj_prev]
    residual = np.inf
    converged = False
    x = x_prev
    it = 0

    def polished(x_now, grad_now, viol_now):
        for support, sigma in _lasso_polish_candidates(instance, w, lam, x_now, grad_now, viol_now):
            cand = _lasso_polish(instance, w, lam, support, sigma)
            if cand is None:
                continue
            cand_resid = phi @ cand - b
            cand_viol = _lasso_optimality(w, lam * (phi.T @ cand_resid), cand)
            if cand_viol <= cfg.inner_tol:
                return cand, cand_viol
        return None, None

    for it in range(1, cfg.inner_max_iter + 1):
        grad_y = lam * (phi.T @ (phi @ y - b))
        x = soft_threshold(y - grad_y / lip, step_thresh)
        resid = phi @ x - b
        grad_x = lam * (phi.T @ resid)
        residual = _lasso_optimality(w, grad_x, x)
        if residual <= cfg.inner_tol:
            converged = True
            break
        obj = _lasso_objective(w, lam, x, resid)
        # stall: the objective moved less than inner_tol over 10 iterations
        stalled = (
            len(obj_history) >= 10
            and abs(obj - obj_history[-10]) <= cfg.inner_tol * max(1.0, abs(obj))
        )
        if stalled or it % _POLISH_EVERY == 0:
            cand, cand_viol = polished(x, grad_x, residual)
            if cand is not None:
                x = cand
                residual = cand_viol
                converged = True
                break
        if stalled:
            converged = True
            break
        obj_history.append(obj)
        if len(obj_history) > 10:
            del obj_history[0]
        if obj > obj_prev:
            # adaptive restart: drop momentum when the objective rises
            t = 1.0
            y = x.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
        x_prev = x
        obj_prev = obj

    resid = phi @ x - b
    return InnerSolveReport(
        x=x,
        iterations=it,
        primal_residual=float(residual),
        objective=_lasso_objective(w, lam, x, resid),
        converged=converged,
    )


def constrained_weighted_l1(
    instance: ProblemInstance,
    w,
    eta: float,
    cfg: SolverConfig = _DEFAULT_CFG,
) -> InnerSolveReport:
    """Minimize sum_i w_i |x_i| subject to (1/2)||phi x - b||^2 <= eta^2 / 2.

    Solved by bisection on the LASSO multiplier: the data-fit norm of the
    LASSO minimizer decreases in lam, so lam is doubled while the residual
    norm exceeds eta and halved while it falls below eta (1 - bisect_tol),
    then the bracket is bisected until the residual norm is within
    ``cfg.bisect_tol`` of eta (relative) or the bracket collapses.
    """
    w = as_weight_array(w, instance.n)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0.0:
        return weighted_basis_pursuit(instance, w, None, cfg)
    norm_b = np.linalg.norm(instance.b)
    if norm_b <= eta:
        # zero is feasible and already has the smallest possible objective
        return InnerSolveReport(
            x=np.zeros(instance.n),
            iterations=0,
            primal_residual=0.0,
            objective=0.0,
            converged=True,
        )

    total_iters = 0
    warm = None

    def solve(lam):
        nonlocal total_iters, warm
        rep = weighted_lasso_fista(instance, w, lam, warm, cfg)
        total_iters += rep.iterations
        warm = rep.x
        return rep, float(np.linalg.norm(instance.phi @ rep.x - instance.b))

    def in_band(res):
        return abs(res - eta) <= cfg.bisect_tol * eta

    lam = 1.0
    rep, res = solve(lam)
    lam_lo = lam_hi = None  # lam_lo: residual above eta, lam_hi: at or below
    if res > eta:
        lam_lo = lam
        for _ in range(60):
            lam *= 2.0
            rep, res = solve(lam)
            if res <= eta:
                lam_hi = lam
                break
            lam_lo = lam
        if lam_hi is None:
            raise NoConvergenceError(
                f"no multiplier bracket found below residual {eta:.3e} "
                f"after 60 doublings"
            )
    elif res < eta * (1.0 - cfg.bisect_tol):
        lam_hi = lam
        for _ in range(60):
            lam /= 2.0
            rep, res = solve(lam)
            if res > eta:
                lam_lo = lam
                break
            lam_hi = lam
            if res >= eta * (1.0 - cfg.bisect_tol):
                break
        if lam_lo is None and not in_band(res):
            raise NoConvergenceError(
                f"no multiplier bracket found above residual {eta:.3e} "
                f"after 60 halvings"
            )

    while not in_band(res) and lam_lo is not None and lam_hi is not None:
        if lam_hi - lam_lo < 1e-12:
            if res > eta:  # land on the feasible side of the bracket
                rep, res = solve(lam_hi)
            break
        lam = 0.5 * (lam_lo + lam_hi)
        rep, res = solve(lam)
        if res > eta:
            lam_lo = lam
        else:
            lam_hi = lam

    return InnerSolveReport(
        x=rep.x,
        iterations=total_iters,
        primal_residual=abs(res - eta) / eta,
        objective=float(w @ np.abs(rep.x)),
        converged=rep.converged,
    )
