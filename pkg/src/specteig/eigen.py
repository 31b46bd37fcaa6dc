"""Extremal generalized tensor eigenpairs by multistart fractional solves.

A pair (lambda, x) with A x^(m-1) = lambda * B x^(m-1) and |x| = 1 comes in
kinds distinguished by the denominator operator: unit-sphere normalization,
componentwise powers, or a dense positive form. The extremal eigenvalue is
the extremum of the ratio A x^m / B x^m on the sphere, found here by running
the fractional loop from many random starts and clustering the outcomes.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dinkelbach import (DinkelbachConfig, FractionalProblem,
                         dinkelbach_solve)
from .errors import ConfigError, DenominatorError
from .tensor_core import BOperator, DenseB, HDiagonal, SymTensor, ZIdentity

logger = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "GeneralizedEigenProblem",
    "EigenPair",
    "MultiStartReport",
    "build_problem",
    "rayleigh",
    "residual",
    "solve_multistart",
    "format_table",
    "report_to_json",
    "report_to_csv",
]

KINDS = ("Z", "H", "D", "B")
EXTREMA = ("min", "max")

#: Components smaller than this are skipped when fixing the sign of a
#: reported eigenvector.
_SIGN_TOL = 1e-8


@dataclass(frozen=True)
class GeneralizedEigenProblem:
    """Eigenpair problem A x^(m-1) = lambda B x^(m-1) with a target
    extremum."""

    a: SymTensor
    b: BOperator
    kind: str
    extremum: str = "min"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, "
                              f"got {self.kind!r}")
        if self.extremum not in EXTREMA:
            raise ConfigError(f"extremum must be one of {EXTREMA}, "
                              f"got {self.extremum!r}")
        if self.a.order != self.b.order or self.a.dim != self.b.dim:
            raise ConfigError(
                f"operator shapes disagree: ({self.a.order},{self.a.dim}) "
                f"vs ({self.b.order},{self.b.dim})")
        if self.kind in ("D", "B") and not isinstance(self.b, DenseB):
            raise ConfigError(f"kind {self.kind} requires a dense "
                              f"denominator tensor")


def build_problem(a: SymTensor, kind: str,
                  b: SymTensor | BOperator | None = None,
                  extremum: str = "min") -> GeneralizedEigenProblem:
    """Assemble the eigenproblem for a kind tag (case-insensitive).

    Z uses the unit-sphere normalizer, H the componentwise-power normalizer;
    D and B require an explicit dense denominator tensor.
    """
    kind = str(kind).upper()
    extremum = str(extremum).lower()
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if kind == "Z":
        if b is not None:
            raise ConfigError("kind Z fixes its denominator; do not pass one")
        op: BOperator = ZIdentity(a.order, a.dim)
    elif kind == "H":
        if b is not None:
            raise ConfigError("kind H fixes its denominator; do not pass one")
        op = HDiagonal(a.order, a.dim)
    else:
        if b is None:
            raise ConfigError(f"kind {kind} requires a denominator tensor")
        op = b if isinstance(b, DenseB) else DenseB(b)
    return GeneralizedEigenProblem(a=a, b=op, kind=kind, extremum=extremum)


def rayleigh(problem: GeneralizedEigenProblem, x: np.ndarray) -> float:
    """Ratio A x^m / B x^m at x normalized to the unit sphere."""
    x = np.asarray(x, dtype=float)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise DenominatorError("cannot normalize the zero vector")
    x = x / nx
    g = problem.b.apply_full(x)
    if g == 0.0:
        raise DenominatorError("denominator form vanishes at x")
    return problem.a.apply_full(x) / g


def residual(problem: GeneralizedEigenProblem, lam: float,
             x: np.ndarray) -> float:
    """Euclidean norm of A x^(m-1) - lambda * B x^(m-1)."""
    x = np.asarray(x, dtype=float)
    r = problem.a.apply_gradient(x) - lam * problem.b.apply_gradient(x)
    return float(np.linalg.norm(r))


@dataclass(frozen=True)
class EigenPair:
    """One clustered eigenpair with occurrence and effort statistics."""

    lambda_: float
    x: np.ndarray
    residual: float
    trials_hit: int
    mean_inner_iters: float
    std_inner_iters: float
    mean_outer_iters: float
    mean_cpu_s: float


@dataclass(frozen=True)
class MultiStartReport:
    """Clustered multistart outcome; pairs are sorted by eigenvalue."""

    pairs: tuple[EigenPair, ...]
    trials: int
    seed: int
    cluster_tol: float
    accepted: int
    total_cpu_s: float


@dataclass(frozen=True)
class _Trial:
    lambda_: float
    x: np.ndarray
    residual: float
    accepted: bool
    inner_iters: int
    outer_iters: int
    cpu_s: float


def _run_trial(problem: GeneralizedEigenProblem, frac: FractionalProblem,
               config: DinkelbachConfig, seed: int) -> _Trial:
    cfg = replace(config, inner=replace(config.inner, seed=seed))
    t0 = time.perf_counter()
    try:
        res = dinkelbach_solve(frac, cfg)
    except DenominatorError:
        return _Trial(lambda_=np.nan, x=np.zeros(problem.a.dim),
                      residual=np.inf, accepted=False, inner_iters=0,
                      outer_iters=0, cpu_s=time.perf_counter() - t0)
    cpu = time.perf_counter() - t0
    lam = rayleigh(problem, res.x)
    resid = residual(problem, lam, res.x)
    accepted = bool(res.converged and resid <= config.tol)
    return _Trial(lambda_=lam, x=res.x, residual=resid, accepted=accepted,
                  inner_iters=res.inner_iters, outer_iters=res.outer_iters,
                  cpu_s=cpu)


def _canonical_sign(x: np.ndarray) -> np.ndarray:
    for comp in x:
        if abs(comp) > _SIGN_TOL:
            return -x if comp < 0 else x.copy()
    return x.copy()


def solve_multistart(problem: GeneralizedEigenProblem, trials: int,
                     base_seed: int, config: DinkelbachConfig,
                     cluster_tol: float = 1e-4,
                     jobs: int = 1) -> MultiStartReport:
    """Run independent fractional solves and cluster the eigenvalues found.

    Trial t uses seed base_seed XOR t, so any jobs count reproduces the same
    report. A trial is accepted when the loop converged and its eigenpair
    residual is within config.tol. Accepted eigenvalues closer than
    cluster_tol chain into one cluster, represented by the member with the
    smallest residual, its eigenvector sign-fixed to a positive leading
    component. A max problem negates the numerator internally and reports
    the ratio of the original operators.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    a_eff = problem.a if problem.extremum == "min" \
        else problem.a.scaled(-1.0)
    frac = FractionalProblem(a_eff, problem.b)
    seeds = [base_seed ^ t for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(
                _run_trial, [problem] * trials, [frac] * trials,
                [config] * trials, seeds,
                chunksize=max(1, trials // (4 * jobs))))
    else:
        outcomes = [_run_trial(problem, frac, config, s) for s in seeds]
    accepted = [t for t in outcomes if t.accepted]
    n_rejected = trials - len(accepted)
    if n_rejected:
        logger.info("%d of %d trials not accepted", n_rejected, trials)
    accepted.sort(key=lambda t: t.lambda_)
    clusters: list[list[_Trial]] = []
    for t in accepted:
        if clusters and t.lambda_ - clusters[-1][-1].lambda_ < cluster_tol:
            clusters[-1].append(t)
        else:
            clusters.append([t])
    pairs = []
    for cluster in clusters:
        rep = min(cluster, key=lambda t: t.residual)
        inner = np.array([t.inner_iters for t in cluster], dtype=float)
        outer = np.array([t.outer_iters for t in cluster], dtype=float)
        cpu = np.array([t.cpu_s for t in cluster], dtype=float)
        pairs.append(EigenPair(
            lambda_=rep.lambda_,
            x=_canonical_sign(rep.x),
            residual=rep.residual,
            trials_hit=len(cluster),
            mean_inner_iters=float(inner.mean()),
            std_inner_iters=float(inner.std()),
            mean_outer_iters=float(outer.mean()),
            mean_cpu_s=float(cpu.mean()),
        ))
    total_cpu = float(sum(t.cpu_s for t in outcomes))
    return MultiStartReport(pairs=tuple(pairs), trials=trials,
                            seed=base_seed, cluster_tol=cluster_tol,
                            accepted=len(accepted), total_cpu_s=total_cpu)


def _occurrence_pct(hits: int, accepted: int) -> float:
    """Share of accepted trials landing in a cluster; rows sum to 100."""
    return 100.0 * hits / accepted if accepted > 0 else 0.0


def format_table(report: MultiStartReport) -> str:
    """Aligned text table, one row per clustered eigenpair."""
    header = (f"{'occ(%)':>7} | {'lambda':>10} | {'x':^34} | "
              f"{'inner its':>16} | {'outer its':>12} | {'cpu(s)':>8}")
    lines = [header, "-" * len(header)]
    for p in report.pairs:
        occ = _occurrence_pct(p.trials_hit, report.accepted)
        xs = ", ".join(f"{c:7.4f}" for c in p.x)
        inner = f"{p.mean_inner_iters:.2f} +- {p.std_inner_iters:.2f}"
        outer = f"{p.mean_outer_iters:.2f}"
        lines.append(f"{occ:7.2f} | {p.lambda_:10.4f} | ({xs:<30}) | "
                     f"{inner:>16} | {outer:>12} | {p.mean_cpu_s:8.4f}")
    lines.append(f"# trials={report.trials} accepted={report.accepted} "
                 f"seed={report.seed} cluster_tol={report.cluster_tol:g} "
                 f"total_cpu_s={report.total_cpu_s:.3f}")
    return "\n".join(lines)


def _pair_dict(p: EigenPair, accepted: int) -> dict:
    return {
        "occurrence_pct": round(_occurrence_pct(p.trials_hit, accepted), 10),
        "lambda": p.lambda_,
        "x": [float(c) for c in p.x],
        "residual": p.residual,
        "trials_hit": p.trials_hit,
        "mean_inner_iters": p.mean_inner_iters,
        "std_inner_iters": p.std_inner_iters,
        "mean_outer_iters": p.mean_outer_iters,
    }


def report_to_json(report: MultiStartReport) -> str:
    """Deterministic JSON rendering; wall-clock fields are left out."""
    doc = {
        "trials": report.trials,
        "seed": report.seed,
        "cluster_tol": report.cluster_tol,
        "accepted": report.accepted,
        "pairs": [_pair_dict(p, report.accepted) for p in report.pairs],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def report_to_csv(report: MultiStartReport) -> str:
    """Deterministic CSV rendering; wall-clock fields are left out."""
    lines = ["occ_pct,lambda,residual,trials_hit,mean_inner_iters,"
             "std_inner_iters,mean_outer_iters,x"]
    for p in report.pairs:
        occ = _occurrence_pct(p.trials_hit, report.accepted)
        xs = " ".join(f"{c:.10g}" for c in p.x)
        lines.append(f"{occ:.10g},{p.lambda_:.10g},{p.residual:.10g},"
                     f"{p.trials_hit},{p.mean_inner_iters:.10g},"
                     f"{p.std_inner_iters:.10g},{p.mean_outer_iters:.10g},"
                     f"{xs}")
    return "\n".join(lines) + "\n"
