"""Core problem/result types and recovery metrics shared by all solvers.

All types are immutable value objects after construction and safe to share
across parallel trial workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemInstance",
    "Weights",
    "DualState",
    "SolverConfig",
    "SweepResult",
    "ConfigurationError",
    "OracleRequiredError",
    "DegenerateBaselineError",
    "l0_norm",
    "l0_reporting_tol",
    "recovered",
    "improvement",
    "as_weight_array",
]


class ConfigurationError(ValueError):
    """A run was requested with missing or inconsistent configuration."""


class OracleRequiredError(ConfigurationError):
    """An oracle-mode operation was called without ground truth available."""


class DegenerateBaselineError(ValueError):
    """The reference solution coincides with the ground truth, so the
    relative improvement is undefined."""


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A sensing problem: matrix ``phi`` (m x n, m <= n), observation ``b``,
    optionally the ground-truth sparse vector, and a noise description.

    For noiseless instances carrying ground truth, ``phi @ x_star`` must
    reproduce ``b`` to near machine precision. ``sigma`` is the
    per-coordinate noise standard deviation, ``eta`` the residual budget
    used by the quadratically constrained solvers.
    """

    phi: np.ndarray
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    sigma: Optional[float] = None
    eta: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2:
            raise ValueError(f"phi must be 2-D, got shape {phi.shape}")
        m, n = phi.shape
        if m > n:
            raise ValueError(f"phi must not be overdetermined, got {m}x{n}")
        if not np.all(np.isfinite(phi)):
            raise ValueError("phi has non-finite entries")
        b = _as_vector(self.b, "b")
        if b.shape[0] != m:
            raise ValueError(f"b has length {b.shape[0]}, expected {m}")
        if not np.all(np.isfinite(b)):
            raise ValueError("b has non-finite entries")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "b", b)
        if self.x_star is not None:
            xs = _as_vector(self.x_star, "x_star")
            if xs.shape[0] != n:
                raise ValueError(f"x_star has length {xs.shape[0]}, expected {n}")
            object.__setattr__(self, "x_star", xs)
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be an unsigned integer")
        if self.x_star is not None and self.eta is None:
            resid = np.linalg.norm(phi @ self.x_star - b)
            if resid > 1e-10 * (1.0 + np.linalg.norm(b)):
                raise ValueError(
                    "noiseless instance is inconsistent: "
                    f"||phi @ x_star - b|| = {resid:.3e}"
                )

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def content_digest(self) -> str:
        """SHA-256 over all defining fields, for pairing assertions."""
        h = hashlib.sha256()
        h.update(self.phi.tobytes())
        h.update(self.b.tobytes())
        h.update(b"" if self.x_star is None else self.x_star.tobytes())
        h.update(repr((self.sigma, self.eta, self.seed)).encode())
        return h.hexdigest()

    def to_json(self) -> str:
        doc = {
            "phi": self.phi.tolist(),
            "b": self.b.tolist(),
            "x_star": None if self.x_star is None else self.x_star.tolist(),
            "sigma": self.sigma,
            "eta": self.eta,
            "seed": self.seed,
        }
        return json.dumps(doc, indent=1)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        return cls(
            phi=np.asarray(doc["phi"], dtype=float),
            b=np.asarray(doc["b"], dtype=float),
            x_star=None if doc.get("x_star") is None else np.asarray(doc["x_star"], dtype=float),
            sigma=doc.get("sigma"),
            eta=doc.get("eta"),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "ProblemInstance":
        with open(path) as fh:
            return cls.from_json(fh.read())


def as_weight_array(w, n: Optional[int] = None) -> np.ndarray:
    """Coerce ``Weights`` or array-like weights to a validated float vector."""
    arr = _as_vector(w.w if isinstance(w, Weights) else w, "weights")
    if not np.all(np.isfinite(arr)):
        raise ValueError("weights must be finite")
    if np.any(arr < 0):
        raise ValueError("weights must be nonnegative")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"weights have length {arr.shape[0]}, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class Weights:
    """Nonnegative per-coordinate weights: the multipliers of the relaxed
    magnitude constraints."""

    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", as_weight_array(self.w))

    def __len__(self) -> int:
        return self.w.shape[0]

    @classmethod
    def ones(cls, n: int) -> "Weights":
        return cls(np.ones(n))


@dataclass(frozen=True, eq=False)
class DualState:
    """Snapshot of a subgradient ascent run: weights, the quadratic-penalty
    multiplier (noisy runs only), iteration counter, latest primal minimizer
    and the last stepsize applied."""

    w: Weights
    lam: Optional[float]
    k: int
    x_k: np.ndarray
    alpha_k: float

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("iteration counter must be >= 0")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "x_k", _as_vector(self.x_k, "x_k"))


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and budgets shared by the inner solvers and outer loops.

    ``eps_k`` is the constraint-amplification schedule; ``None`` selects
    each algorithm's default (1.0 for the subgradient update, 0.1 for the
    inverse-magnitude update). A float gives a constant schedule; a callable
    maps the iteration index to a value.

    ``admm_rho`` is the dimensionless penalty scale of the splitting
    solver; the effective penalty is admm_rho * max(w) / (solution scale),
    which the equality-constrained problem's invariance to rescaling of w
    and b makes a meaningful constant.

    ``alpha_schedule`` optionally overrides the noisy-run stepsize rule
    (e.g. a diminishing ``lambda k: c / (k + 1)``); by default the
    zero-target step derived from the current iterate is used.
    """

    rw_iter: int = 4
    eps_k: float | Callable[[int], float] | None = None
    inner_tol: float = 1e-8
    inner_max_iter: int = 50_000
    admm_rho: float = 10.0
    recovery_tol: float = 1e-3
    bisect_tol: float = 1e-3
    alpha_schedule: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.rw_iter < 0:
            raise ValueError("rw_iter must be >= 0")
        for name in ("inner_tol", "admm_rho", "recovery_tol", "bisect_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.inner_max_iter <= 0:
            raise ValueError("inner_max_iter must be > 0")
        if isinstance(self.eps_k, (int, float)) and self.eps_k <= 0:
            raise ValueError("eps_k must be > 0")

    def eps_at(self, k: int, default: float) -> float:
        if self.eps_k is None:
            eps = default
        elif callable(self.eps_k):
            eps = float(self.eps_k(k))
        else:
            eps = float(self.eps_k)
        if eps <= 0:
            raise ValueError(f"eps_k must be > 0, got {eps} at k={k}")
        return eps


@dataclass(frozen=True)
class SweepResult:
    """Aggregated outcome of a benchmark run.

    For recovery sweeps, ``recovery_rate_per_algorithm`` maps each algorithm
    name to one rate per sparsity level. For improvement benchmarks,
    ``improvements`` maps each algorithm name to one percentage per trial
    (NaN marks a skipped trial), aligned with ``seeds``.
    """

    sparsity_levels: list
    recovery_rate_per_algorithm: dict
    trials: int
    seeds: list
    improvements: Optional[dict] = None

    def __post_init__(self):
        if len(self.seeds) != self.trials:
            raise ValueError("seeds must have one entry per trial")
        for name, rates in self.recovery_rate_per_algorithm.items():
            if len(rates) != len(self.sparsity_levels):
                raise ValueError(f"rates for {name} do not match sparsity levels")
            if any(not (0.0 <= r <= 1.0) for r in rates):
                raise ValueError(f"rates for {name} outside [0, 1]")

    def to_csv(self, path) -> None:
        """Write rates as ``algorithm,s,trials,recovered,rate`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "s", "trials", "recovered", "rate"])
            for name in sorted(self.recovery_rate_per_algorithm):
                rates = self.recovery_rate_per_algorithm[name]
                for s, rate in zip(self.sparsity_levels, rates):
                    n_rec = round(rate * self.trials)
                    writer.writerow([name, s, self.trials, n_rec, repr(float(rate))])

    @classmethod
    def from_csv(cls, path) -> "SweepResult":
        per_algo: dict = {}
        levels: list = []
        trials = 0
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                name = row["algorithm"]
                s = int(row["s"])
                trials = int(row["trials"])
                if s not in levels:
                    levels.append(s)
                per_algo.setdefault(name, []).append(float(row["rate"]))
        return cls(
            sparsity_levels=levels,
            recovery_rate_per_algorithm=per_algo,
            trials=trials,
            seeds=list(range(trials)),
        )


def l0_norm(x, tol: float = 0.0) -> int:
    """Number of coordinates with magnitude strictly above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = _as_vector(x, "x")
    return int(np.count_nonzero(np.abs(x) > tol))


def l0_reporting_tol(x) -> float:
    """Scale-aware threshold for sparsity reporting: 1e-6 * max |x_i|.

    Iterative solvers never produce exact zeros, so counting is done
    relative to the largest magnitude present.
    """
    x = np.asarray(x, dtype=float)
    return 1e-6 * float(np.max(np.abs(x), initial=0.0))


def recovered(x, x_star, tol: float = 1e-3) -> bool:
    """True iff the sup-norm error against the ground truth is at most tol."""
    x = _as_vector(x, "x")
    x_star = _as_vector(x_star, "x_star")
    if x.shape != x_star.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {x_star.shape[0]}")
    return bool(np.max(np.abs(x - x_star)) <= tol)


def improvement(x_rw, x_l1, x_star) -> float:
    """Percent reduction of l2 error relative to the plain-l1 baseline:
    100 * (1 - ||x_rw - x*|| / ||x_l1 - x*||)."""
    x_rw = _as_vector(x_rw, "x_rw")
    x_l1 = _as_vector(x_l1, "x_l1")
    x_star = _as_vector(x_star, "x_star")
    if not (x_rw.shape == x_l1.shape == x_star.shape):
        raise ValueError("improvement requires equal-length vectors")
    denom = np.linalg.norm(x_l1 - x_star)
    if denom == 0.0:
        raise DegenerateBaselineError("baseline coincides with ground truth")
    return 100.0 * (1.0 - np.linalg.norm(x_rw - x_star) / denom)
