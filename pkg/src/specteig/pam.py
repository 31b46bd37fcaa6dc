"""Proximal alternating minimization (PAM) over products of spheres.

Minimizes a multilinear surrogate h(x_1, ..., x_d) = <A, x_1 o ... o x_d>
- alpha * P(x_1, ..., x_d) by cyclic closed-form block updates with proximal
damping, where P is the symmetric polarization of |x|^d: the average over
all perfect pairings of the blocks of the product of paired inner products.
On the diagonal x_1 = ... = x_d the surrogate reduces to the homogeneous
objective <A, x^d> - alpha |x|^d. With alpha at least the Frobenius norm of
A that homogeneous objective is concave, every block update lands on the
sphere boundary, and the best block's value bounds the multilinear optimum
from above.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ArityError, ConfigError, DomainError, NumericalError
from .tensor_core import _double_factorial, _pair_matchings

logger = logging.getLogger(__name__)

#: Directions or objective gaps below this are treated as exactly zero.
DEGENERATE_TOL = 1e-14

#: Warn when the best block value exceeds the multilinear value by more.
DIAGONAL_GAP_SLACK = 1e-9


@dataclass(frozen=True)
class Uniform:
    """Componentwise uniform random init on [lo, hi], then normalized."""

    lo: float = -1.0
    hi: float = 1.0


@dataclass(frozen=True)
class Given:
    """Explicit starting blocks, one vector per slot."""

    blocks: tuple[np.ndarray, ...]


InitSpec = Union[Uniform, Given]


@dataclass(frozen=True)
class PamConfig:
    """Solver parameters for one PAM run.

    alpha=None means: use the Frobenius norm of the operator, recomputed at
    solve time. gammas has one proximal weight per block and fixes the block
    count d. radii default to unit spheres.
    """

    gammas: tuple[float, ...]
    alpha: float | None = None
    eps: float = 1e-6
    max_iter: int = 10000
    radii: tuple[float, ...] | None = None
    seed: int = 0
    init: InitSpec = field(default_factory=Uniform)

    def __post_init__(self):
        if len(self.gammas) < 1:
            raise ConfigError("gammas must name at least one block")
        if any(g < 0 for g in self.gammas):
            raise ConfigError(f"gammas must be nonnegative, got {self.gammas}")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.radii is not None:
            if len(self.radii) != len(self.gammas):
                raise ConfigError("radii and gammas must have equal length")
            if any(r <= 0 for r in self.radii):
                raise ConfigError(f"radii must be positive, got {self.radii}")


@dataclass
class PamState:
    """Mutable loop state: current blocks, sweep count, incumbent block."""

    blocks: list[np.ndarray]
    k: int
    v: np.ndarray
    value: float
    history: list[tuple[int, float, float, float]]


@dataclass(frozen=True)
class PamResult:
    """Outcome of a PAM run.

    v is the best block by homogeneous value, value its homogeneous
    objective, kkt_residual the norm of the stacked stationarity residuals
    at the final blocks, and history the per-sweep rows
    (iter, h_t, h_v, step_norm).
    """

    v: np.ndarray
    value: float
    blocks: tuple[np.ndarray, ...]
    iterations: int
    converged: bool
    kkt_residual: float
    history: tuple[tuple[int, float, float, float], ...]


def pair_product(blocks: Sequence[np.ndarray]) -> float:
    """Symmetric polarization of |x|^d at the blocks.

    Averages, over every perfect pairing of the block slots, the product of
    the paired inner products. On the diagonal (all blocks equal to w) this
    is exactly |w|^d, and the average couples every pair of slots, so block
    sweeps cannot drift apart pairwise without paying in the objective.
    """
    d = len(blocks)
    if d % 2 != 0:
        raise ArityError(f"pairing needs an even block count, got {d}")
    b = np.stack([np.asarray(v, dtype=float) for v in blocks])
    gram = b @ b.T
    total = 0.0
    for match in _pair_matchings(d):
        prod = 1.0
        for i, j in match:
            prod *= gram[i, j]
        total += prod
    return float(total / _double_factorial(d - 1))


def pair_partial(blocks: Sequence[np.ndarray], slot: int) -> np.ndarray:
    """Gradient of :func:`pair_product` with respect to the block at slot.

    The entry of blocks at slot is ignored (the form is linear in it).
    """
    d = len(blocks)
    if d % 2 != 0:
        raise ArityError(f"pairing needs an even block count, got {d}")
    b = np.stack([np.asarray(v, dtype=float) for v in blocks])
    gram = b @ b.T
    out = np.zeros(b.shape[1])
    for match in _pair_matchings(d):
        prod = 1.0
        partner = -1
        for i, j in match:
            if i == slot:
                partner = j
            elif j == slot:
                partner = i
            else:
                prod *= gram[i, j]
        out += prod * b[partner]
    out /= _double_factorial(d - 1)
    return out


def h_alpha_multilinear(a_theta, alpha: float,
                        blocks: Sequence[np.ndarray]) -> float:
    """Multilinear surrogate value at the given blocks; even d required."""
    if len(blocks) % 2 != 0:
        raise ArityError(f"surrogate needs an even block count, "
                         f"got {len(blocks)}")
    return a_theta.multilinear_apply(blocks) - alpha * pair_product(blocks)


def homogeneous_value(a_theta, alpha: float, w: np.ndarray) -> float:
    """Surrogate value with every block equal to w."""
    nsq = float(np.dot(w, w))
    return a_theta.apply_full(w) - alpha * nsq ** (a_theta.order // 2)


def block_update(a_theta, alpha: float, blocks: Sequence[np.ndarray],
                 slot: int, gamma: float, radius: float,
                 prev: np.ndarray) -> np.ndarray:
    """Exact minimizer of one proximal block subproblem on its sphere.

    The restriction of the surrogate to one block is linear with coefficient
    c, so the subproblem minimizes <c, x> + (gamma/2) |x - prev|^2 over the
    radius sphere, attained at a scaled multiple of c - gamma * prev. A
    degenerate direction (norm below 1e-14) keeps the previous block; an
    objective tie picks the candidate better aligned with prev.
    """
    others = [blocks[i] for i in range(len(blocks)) if i != slot]
    c = a_theta.multilinear_partial(others, slot)
    if alpha != 0.0:
        c = c - alpha * pair_partial(blocks, slot)
    w = c - gamma * prev
    nw = float(np.linalg.norm(w))
    if nw < DEGENERATE_TOL:
        logger.debug("degenerate direction at slot %d, keeping block", slot)
        return prev.copy()
    u = radius / nw * w
    lo, hi = -u, u
    obj_lo = float(np.dot(c, lo)) + 0.5 * gamma * float(
        np.dot(lo - prev, lo - prev))
    obj_hi = float(np.dot(c, hi)) + 0.5 * gamma * float(
        np.dot(hi - prev, hi - prev))
    if abs(obj_lo - obj_hi) < DEGENERATE_TOL:
        return lo if float(np.dot(lo, prev)) >= float(np.dot(hi, prev)) else hi
    return lo if obj_lo < obj_hi else hi


def _init_blocks(config: PamConfig, dim: int, d: int,
                 radii: Sequence[float],
                 rng: np.random.Generator) -> list[np.ndarray]:
    if isinstance(config.init, Given):
        given = config.init.blocks
        if len(given) != d:
            raise ConfigError(f"init has {len(given)} blocks, expected {d}")
        blocks = []
        for j, b in enumerate(given):
            b = np.asarray(b, dtype=float)
            if b.shape != (dim,):
                raise ConfigError(f"init block {j} has shape {b.shape}, "
                                  f"expected ({dim},)")
            nb = float(np.linalg.norm(b))
            if nb < DEGENERATE_TOL:
                raise ConfigError(f"init block {j} is numerically zero")
            blocks.append(radii[j] / nb * b)
        return blocks
    blocks = []
    for j in range(d):
        while True:
            b = rng.uniform(config.init.lo, config.init.hi, size=dim)
            nb = float(np.linalg.norm(b))
            if nb >= DEGENERATE_TOL:
                break
        blocks.append(radii[j] / nb * b)
    return blocks


def pam_solve(a_theta, config: PamConfig,
              rng: np.random.Generator | None = None) -> PamResult:
    """Run cyclic PAM sweeps until the best-block value stalls.

    a_theta must expose order, dim, apply_full, multilinear_apply and
    multilinear_partial. Stops when the homogeneous value of the best block
    changes by less than config.eps between sweeps, or after max_iter
    sweeps. When rng is given it overrides config.seed for random inits.
    """
    d = len(config.gammas)
    if a_theta.order != d:
        raise ArityError(f"operator order {a_theta.order} does not match "
                         f"block count {d}")
    dim = a_theta.dim
    alpha = config.alpha if config.alpha is not None \
        else a_theta.frobenius_norm()
    fro = a_theta.frobenius_norm()
    if alpha < fro - 1e-12:
        logger.warning("alpha=%.6g is below the operator Frobenius norm "
                       "%.6g; surrogate concavity is not guaranteed",
                       alpha, fro)
    radii = tuple(config.radii) if config.radii is not None else (1.0,) * d
    if rng is None:
        rng = np.random.default_rng(config.seed)
    blocks = _init_blocks(config, dim, d, radii, rng)
    block_vals = [homogeneous_value(a_theta, alpha, b) for b in blocks]
    j0 = int(np.argmin(block_vals))
    state = PamState(blocks=blocks, k=0, v=blocks[j0].copy(),
                     value=block_vals[j0], history=[])
    converged = False
    h_t = math.nan
    for k in range(1, config.max_iter + 1):
        prev = [b.copy() for b in state.blocks]
        for j in range(d):
            state.blocks[j] = block_update(a_theta, alpha, state.blocks, j,
                                           config.gammas[j], radii[j],
                                           state.blocks[j])
        h_t = h_alpha_multilinear(a_theta, alpha, state.blocks)
        if not math.isfinite(h_t):
            raise NumericalError(f"non-finite surrogate value at sweep {k}")
        step = math.sqrt(sum(float(np.dot(b - p, b - p))
                             for b, p in zip(state.blocks, prev)))
        block_vals = [homogeneous_value(a_theta, alpha, b)
                      for b in state.blocks]
        j_best = int(np.argmin(block_vals))
        h_v = block_vals[j_best]
        if h_v > h_t + DIAGONAL_GAP_SLACK:
            logger.warning("best block value %.9g exceeds multilinear value "
                           "%.9g at sweep %d", h_v, h_t, k)
        state.history.append((k, h_t, h_v, step))
        state.k = k
        stalled = abs(h_v - state.value) < config.eps
        state.v = state.blocks[j_best].copy()
        state.value = h_v
        if stalled:
            converged = True
            break
    kkt = _kkt_residual(a_theta, alpha, state.blocks, h_t)
    return PamResult(v=state.v, value=state.value,
                     blocks=tuple(b.copy() for b in state.blocks),
                     iterations=state.k, converged=converged,
                     kkt_residual=kkt, history=tuple(state.history))


def _kkt_residual(a_theta, alpha: float, blocks: Sequence[np.ndarray],
                  h_t: float) -> float:
    """Norm of the stacked first-order residuals c_j - h * x_j.

    At a stationary point every block multiplier equals the surrogate value,
    so the residual vanishes exactly there.
    """
    if not math.isfinite(h_t):
        h_t = h_alpha_multilinear(a_theta, alpha, blocks)
    total = 0.0
    for j in range(len(blocks)):
        others = [blocks[i] for i in range(len(blocks)) if i != j]
        c = a_theta.multilinear_partial(others, j)
        if alpha != 0.0:
            c = c - alpha * pair_partial(blocks, j)
        r = c - h_t * blocks[j]
        total += float(np.dot(r, r))
    return math.sqrt(total)


def write_history_csv(history: Sequence[tuple[int, float, float, float]],
                      path) -> None:
    """Write per-sweep rows as CSV with header iter,h_t,h_v,step_norm."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "h_t", "h_v", "step_norm"])
        for k, h_t, h_v, step in history:
            writer.writerow([k, f"{h_t:.17g}", f"{h_v:.17g}",
                             f"{step:.17g}"])


def kl_exponent(d: int, n: int) -> tuple[float, float]:
    """Lojasiewicz exponent data for the d-block surrogate on R^n spheres.

    Returns (tau, rate) with tau = 1 / (d * (3d - 3)^(dn - 1)) and
    rate = tau / (1 - 2 tau), the power-law decay exponent of the iterate
    error. Requires d >= 2 and n >= 2; tau < 1/2 always holds there.
    """
    if not isinstance(d, int) or not isinstance(n, int):
        raise DomainError("d and n must be integers")
    if d < 2 or n < 2:
        raise DomainError(f"need d >= 2 and n >= 2, got d={d}, n={n}")
    tau = 1.0 / (d * (3 * d - 3) ** (d * n - 1))
    assert tau < 0.5
    return tau, tau / (1.0 - 2.0 * tau)
