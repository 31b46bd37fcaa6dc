"""Fractional programming loop for ratios of homogeneous sphere forms.

Minimizes f(x)/g(x) over the unit sphere, with f given by a symmetric tensor
and g by a positive denominator operator, by repeatedly minimizing the
parametric difference f - theta * g with the PAM block solver and updating
theta to the ratio at the new iterate. The parametric optimal value F(theta)
is nondecreasing and nonpositive along the run while theta is nonincreasing,
and the loop stops when |F(theta)| falls below tolerance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ArityError, ConfigError, DenominatorError, DimError
from .pam import Given, PamConfig, Uniform, pam_solve
from .tensor_core import BOperator, SymTensor, axpy

__all__ = [
    "FractionalProblem",
    "DinkelbachConfig",
    "DinkelbachResult",
    "f_theta",
    "dinkelbach_solve",
    "write_trace_csv",
]

#: Trace slack for the runtime monotonicity checks.
MONOTONE_SLACK = 1e-9

#: Sphere samples used to vet denominator positivity at construction.
_POSITIVITY_SAMPLES = 100
_POSITIVITY_SEED = 12345


@dataclass(frozen=True)
class FractionalProblem:
    """Ratio of a symmetric numerator form to a positive denominator form.

    The denominator is vetted by sampling unit vectors from a fixed seed;
    a nonpositive sample raises DenominatorError at construction.
    """

    numerator: SymTensor
    denominator: BOperator

    def __post_init__(self):
        a, b = self.numerator, self.denominator
        if a.order != b.order:
            raise ArityError(f"numerator order {a.order} does not match "
                             f"denominator order {b.order}")
        if a.dim != b.dim:
            raise DimError(f"numerator dim {a.dim} does not match "
                           f"denominator dim {b.dim}")
        if a.order % 2 != 0:
            raise ArityError(f"degree must be even, got {a.order}")
        rng = np.random.default_rng(_POSITIVITY_SEED)
        for _ in range(_POSITIVITY_SAMPLES):
            u = rng.standard_normal(a.dim)
            u /= np.linalg.norm(u)
            val = b.apply_full(u)
            if val <= 0:
                raise DenominatorError(
                    f"denominator form is not positive on the sphere "
                    f"(sampled value {val:.6g})")

    @property
    def degree(self) -> int:
        return self.numerator.order

    @property
    def dim(self) -> int:
        return self.numerator.dim


@dataclass(frozen=True)
class DinkelbachConfig:
    """Outer-loop parameters; inner carries the PAM block-solver settings."""

    inner: PamConfig
    tol: float = 1e-3
    k_max: int = 50
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.k_max < 1:
            raise ConfigError(f"k_max must be >= 1, got {self.k_max}")
        if self.inner.radii is not None and any(
                r != 1.0 for r in self.inner.radii):
            raise ConfigError("fractional solve requires unit-sphere blocks")


@dataclass(frozen=True)
class DinkelbachResult:
    """theta is the parameter at the stopping test, x the unit minimizer
    that passed it, trace the per-iteration rows (k, theta, F(theta))."""

    theta: float
    x: np.ndarray
    outer_iters: int
    trace: tuple[tuple[int, float, float], ...]
    converged: bool
    inner_iters: int
    n_solves: int


def f_theta(problem: FractionalProblem, theta: float,
            x: np.ndarray) -> float:
    """Parametric objective f(x) - theta * g(x) at x normalized to the
    sphere."""
    x = np.asarray(x, dtype=float)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise DenominatorError("cannot normalize the zero vector")
    x = x / nx
    return (problem.numerator.apply_full(x)
            - theta * problem.denominator.apply_full(x))


def _initial_point(problem: FractionalProblem, config: DinkelbachConfig,
                   rng: np.random.Generator) -> np.ndarray:
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        if x0.shape != (problem.dim,):
            raise ConfigError(f"x0 has shape {x0.shape}, expected "
                              f"({problem.dim},)")
    elif isinstance(config.inner.init, Given):
        x0 = np.asarray(config.inner.init.blocks[0], dtype=float)
    else:
        init = config.inner.init
        x0 = rng.uniform(init.lo, init.hi, size=problem.dim)
    nx = float(np.linalg.norm(x0))
    if nx == 0.0:
        raise ConfigError("initial point is numerically zero")
    return x0 / nx


def dinkelbach_solve(problem: FractionalProblem,
                     config: DinkelbachConfig) -> DinkelbachResult:
    """Run the parametric loop until |F(theta)| < tol or k_max is reached.

    The trial's initial point seeds both theta and the first PAM run
    (replicated across blocks); later runs warm-start from the previous
    minimizer. Two certification checks guard the loop. First, a PAM result
    that fails to certify descent (parametric value at or above tol)
    triggers one retry from a fresh random init, keeping the better
    candidate; if the retry cannot certify either, the run stops with
    converged=False rather than moving theta upward. Second, a parametric
    value strictly below the previous iteration's (beyond slack) proves the
    previous subproblem stopped short of its minimum, so the run likewise
    stops with converged=False before recording the offending row. Both
    guards keep the recorded trace monotone by construction. outer_iters
    counts the iterations that moved theta, i.e. one less than the number of
    parametric subproblems solved, with a floor of 1.
    """
    a, b = problem.numerator, problem.denominator
    d = problem.degree
    rng = np.random.default_rng(config.inner.seed)
    x0 = _initial_point(problem, config, rng)
    g0 = b.apply_full(x0)
    if g0 <= 0:
        raise DenominatorError(f"denominator is {g0:.6g} at the initial "
                               f"point")
    theta = a.apply_full(x0) / g0
    fresh_init = config.inner.init if isinstance(config.inner.init, Uniform) \
        else Uniform()
    init: Given | Uniform = Given(tuple(x0.copy() for _ in range(d)))
    trace: list[tuple[int, float, float]] = []
    x = x0
    inner_total = 0
    solves = 0
    converged = False
    for k in range(1, config.k_max + 1):
        a_theta = axpy(a, b, theta)
        res = pam_solve(a_theta, replace(config.inner, init=init), rng=rng)
        inner_total += res.iterations
        solves += 1
        v = res.v / float(np.linalg.norm(res.v))
        big_f = f_theta(problem, theta, v)
        if big_f >= config.tol:
            res2 = pam_solve(a_theta,
                             replace(config.inner, init=fresh_init), rng=rng)
            inner_total += res2.iterations
            solves += 1
            v2 = res2.v / float(np.linalg.norm(res2.v))
            big_f2 = f_theta(problem, theta, v2)
            if big_f2 < big_f:
                v, big_f = v2, big_f2
            if big_f >= config.tol:
                break
        if trace and big_f < trace[-1][2] - MONOTONE_SLACK:
            break
        trace.append((k, theta, big_f))
        x = v
        if abs(big_f) < config.tol:
            converged = True
            break
        g = b.apply_full(v)
        if g <= 0:
            raise DenominatorError(f"denominator is {g:.6g} at iterate {k}")
        theta = a.apply_full(v) / g
        init = Given(tuple(v.copy() for _ in range(d)))
    thetas = [t for _, t, _ in trace]
    fs = [f for _, _, f in trace]
    for i in range(len(trace) - 1):
        assert thetas[i + 1] <= thetas[i] + MONOTONE_SLACK, \
            f"theta increased at iteration {i + 2}"
        assert fs[i] <= fs[i + 1] + MONOTONE_SLACK, \
            f"parametric value decreased at iteration {i + 2}"
    for f in fs:
        assert f <= config.tol + MONOTONE_SLACK, \
            "parametric value exceeded the stopping tolerance from above"
    return DinkelbachResult(theta=theta, x=x,
                            outer_iters=max(1, len(trace) - 1),
                            trace=tuple(trace), converged=converged,
                            inner_iters=inner_total, n_solves=solves)


def write_trace_csv(trace, path) -> None:
    """Write per-iteration rows as CSV with header k,theta,F_theta."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "theta", "F_theta"])
        for k, theta, big_f in trace:
            writer.writerow([k, f"{theta:.17g}", f"{big_f:.17g}"])
