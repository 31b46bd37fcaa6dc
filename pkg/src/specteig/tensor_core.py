"""Symmetric tensors stored by canonical index classes, and the operator
algebra built on them.

A symmetric tensor of order m on R^n is determined by its entries on
nondecreasing index tuples. Construction expands every canonical class into
its distinct permutations once, into cached coordinate arrays, so that the
multilinear and homogeneous forms are vectorized gather-product-reduce
operations. The full dense array is never materialized.

Indices are 1-based in files and public entry points, 0-based internally.
All objects here are immutable after construction.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement, permutations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ArityError,
    DimError,
    DuplicateEntryError,
    NumericalError,
    ParseError,
)

__all__ = [
    "SymTensor",
    "BOperator",
    "DenseB",
    "ZIdentity",
    "HDiagonal",
    "ShiftedTensor",
    "axpy",
    "from_entries",
    "apply_full",
    "apply_gradient",
    "multilinear_apply",
    "multilinear_partial",
    "frobenius_norm",
    "frobenius_inner",
    "b_apply_full",
    "b_apply_gradient",
    "identity_tensor",
    "diagonal_tensor",
    "load_tensor",
]


def _check_vector(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


class SymTensor:
    """Order-m symmetric tensor on R^n with canonical-class storage."""

    __slots__ = ("order", "dim", "_canon", "_canon_idx", "_canon_val",
                 "_canon_mult", "_perm_idx", "_perm_val", "_fro")

    def __init__(self, order: int, dim: int,
                 canonical: Mapping[tuple[int, ...], float]):
        """Build from a map of 0-based nondecreasing index tuples to values.

        Most callers should use :meth:`from_entries` (1-based indices) or
        :func:`load_tensor` instead.
        """
        if order < 1:
            raise ArityError(f"order must be >= 1, got {order}")
        if dim < 1:
            raise DimError(f"dim must be >= 1, got {dim}")
        self.order = int(order)
        self.dim = int(dim)
        canon: dict[tuple[int, ...], float] = {}
        for idx, val in canonical.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != order:
                raise ArityError(
                    f"index {idx} has {len(idx)} entries, expected {order}")
            if any(i < 0 or i >= dim for i in idx):
                raise IndexError(f"index {tuple(i + 1 for i in idx)} out of "
                                 f"range 1..{dim}")
            if tuple(sorted(idx)) != idx:
                raise ValueError(f"canonical index {idx} is not sorted")
            val = float(val)
            if not math.isfinite(val):
                raise NumericalError(f"non-finite entry at index {idx}")
            canon[idx] = val
        self._canon = canon
        self._build_cache()

    @classmethod
    def from_entries(cls, order: int, dim: int,
                     entries: Iterable[tuple[Sequence[int], float]] |
                     Mapping[Sequence[int], float]) -> "SymTensor":
        """Build from (index, value) pairs with 1-based, unordered indices.

        Each index tuple is sorted to its canonical class. Two entries that
        land on the same class raise :class:`DuplicateEntryError`; indices
        outside 1..dim raise :class:`IndexError`.
        """
        if isinstance(entries, Mapping):
            entries = entries.items()
        canon: dict[tuple[int, ...], float] = {}
        for idx, val in entries:
            idx = tuple(int(i) for i in idx)
            if len(idx) != order:
                raise ArityError(
                    f"index {idx} has {len(idx)} entries, expected {order}")
            if any(i < 1 or i > dim for i in idx):
                raise IndexError(f"index {idx} out of range 1..{dim}")
            key = tuple(sorted(i - 1 for i in idx))
            if key in canon:
                raise DuplicateEntryError(
                    f"duplicate entry for index class {tuple(i + 1 for i in key)}")
            canon[key] = float(val)
        return cls(order, dim, canon)

    def _build_cache(self) -> None:
        m, n = self.order, self.dim
        classes = sorted(self._canon)
        c_idx = np.zeros((len(classes), m), dtype=np.intp)
        c_val = np.zeros(len(classes))
        c_mult = np.zeros(len(classes))
        p_rows: list[tuple[int, ...]] = []
        p_vals: list[float] = []
        fact_m = math.factorial(m)
        for r, idx in enumerate(classes):
            val = self._canon[idx]
            c_idx[r] = idx
            c_val[r] = val
            counts = [idx.count(i) for i in set(idx)]
            c_mult[r] = fact_m // math.prod(math.factorial(k) for k in counts)
            for p in sorted(set(permutations(idx))):
                p_rows.append(p)
                p_vals.append(val)
        self._canon_idx = c_idx
        self._canon_val = c_val
        self._canon_mult = c_mult
        if p_rows:
            self._perm_idx = np.array(p_rows, dtype=np.intp)
            self._perm_val = np.array(p_vals)
        else:
            self._perm_idx = np.zeros((0, m), dtype=np.intp)
            self._perm_val = np.zeros(0)
        self._fro = float(np.sqrt(np.sum(c_mult * c_val ** 2)))

    @property
    def canonical(self) -> Mapping[tuple[int, ...], float]:
        """Read-only view of the 0-based canonical entry map."""
        return dict(self._canon)

    def entry(self, *indices: int) -> float:
        """Entry at a 1-based index tuple (0.0 if the class is absent)."""
        if len(indices) != self.order:
            raise ArityError(
                f"expected {self.order} indices, got {len(indices)}")
        if any(i < 1 or i > self.dim for i in indices):
            raise IndexError(f"index {indices} out of range 1..{self.dim}")
        key = tuple(sorted(i - 1 for i in indices))
        return self._canon.get(key, 0.0)

    def apply_full(self, x: np.ndarray) -> float:
        """Homogeneous form: the tensor contracted with x on every slot."""
        x = _check_vector(x, self.dim)
        if self._canon_idx.shape[0] == 0:
            return 0.0
        terms = self._canon_val * self._canon_mult
        return float(np.dot(terms, np.prod(x[self._canon_idx], axis=1)))

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        """Contraction on all slots but one; (1/m) of the gradient of
        :meth:`apply_full`."""
        x = _check_vector(x, self.dim)
        w = self._perm_val.copy()
        for j in range(1, self.order):
            w *= x[self._perm_idx[:, j]]
        return np.bincount(self._perm_idx[:, 0], weights=w, minlength=self.dim)

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        """Multilinear form with one vector per slot."""
        if len(blocks) != self.order:
            raise ArityError(
                f"expected {self.order} blocks, got {len(blocks)}")
        w = self._perm_val.copy()
        for j, b in enumerate(blocks):
            b = _check_vector(b, self.dim)
            w *= b[self._perm_idx[:, j]]
        return float(w.sum())

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        """Contract all slots except ``free_slot`` with the given blocks.

        By symmetry the result does not depend on which slot is left free;
        the argument is validated for interface uniformity.
        """
        if len(blocks) != self.order - 1:
            raise ArityError(
                f"expected {self.order - 1} blocks, got {len(blocks)}")
        if not 0 <= free_slot < self.order:
            raise IndexError(f"free_slot {free_slot} out of range "
                             f"0..{self.order - 1}")
        w = self._perm_val.copy()
        for j, b in enumerate(blocks):
            b = _check_vector(b, self.dim)
            w *= b[self._perm_idx[:, j + 1]]
        return np.bincount(self._perm_idx[:, 0], weights=w, minlength=self.dim)

    def frobenius_norm(self) -> float:
        """Frobenius norm over all entries, multiplicities included."""
        return self._fro

    def scaled(self, factor: float) -> "SymTensor":
        """New tensor with every entry multiplied by ``factor``."""
        return SymTensor(self.order, self.dim,
                         {k: factor * v for k, v in self._canon.items()})

    def __repr__(self) -> str:
        return (f"SymTensor(order={self.order}, dim={self.dim}, "
                f"nnz={len(self._canon)})")


def frobenius_inner(a: SymTensor, b: SymTensor) -> float:
    """Frobenius inner product of two symmetric tensors of the same shape."""
    if a.order != b.order or a.dim != b.dim:
        raise DimError(f"shape mismatch: ({a.order},{a.dim}) vs "
                       f"({b.order},{b.dim})")
    small, large = (a, b) if len(a._canon) <= len(b._canon) else (b, a)
    total = 0.0
    fact_m = math.factorial(a.order)
    for idx, val in small._canon.items():
        other = large._canon.get(idx)
        if other is None:
            continue
        counts = [idx.count(i) for i in set(idx)]
        mult = fact_m // math.prod(math.factorial(k) for k in counts)
        total += mult * val * other
    return total


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@lru_cache(maxsize=None)
def identity_tensor(order: int, dim: int) -> SymTensor:
    """Symmetric tensor whose homogeneous form is the order-th power of the
    Euclidean norm.

    The canonical entry at a class where every index appears an even number
    of times k_i is prod_i (k_i - 1)!! / (order - 1)!!; all other entries
    vanish. Even order required.
    """
    if order % 2 != 0:
        raise ArityError(f"identity tensor needs even order, got {order}")
    denom = _double_factorial(order - 1)
    canon: dict[tuple[int, ...], float] = {}
    for comb in combinations_with_replacement(range(dim), order // 2):
        idx = tuple(sorted(i for i in comb for _ in range(2)))
        counts = [idx.count(i) for i in set(idx)]
        val = math.prod(_double_factorial(k - 1) for k in counts) / denom
        canon[idx] = val
    return SymTensor(order, dim, canon)


@lru_cache(maxsize=None)
def diagonal_tensor(order: int, dim: int) -> SymTensor:
    """Symmetric tensor with ones on the diagonal and zeros elsewhere."""
    return SymTensor(order, dim, {(i,) * order: 1.0 for i in range(dim)})


class BOperator:
    """Denominator-side operator: a structured symmetric form on R^n.

    Subclasses provide the homogeneous form, its slot-gradient, structural
    multilinear forms used by the block solver, and a symmetric tensor
    realization used only for Frobenius quantities.
    """

    variant = "abstract"

    def __init__(self, order: int, dim: int):
        if order < 1:
            raise ArityError(f"order must be >= 1, got {order}")
        if dim < 1:
            raise DimError(f"dim must be >= 1, got {dim}")
        self.order = int(order)
        self.dim = int(dim)

    def apply_full(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        raise NotImplementedError

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        raise NotImplementedError

    def to_symtensor(self) -> SymTensor:
        raise NotImplementedError

    def frobenius_norm(self) -> float:
        return self.to_symtensor().frobenius_norm()

    def _check_blocks(self, blocks: Sequence[np.ndarray],
                      expected: int) -> None:
        if len(blocks) != expected:
            raise ArityError(f"expected {expected} blocks, got {len(blocks)}")

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(order={self.order}, dim={self.dim})")


class DenseB(BOperator):
    """Denominator given by an explicit symmetric tensor."""

    variant = "dense"

    def __init__(self, tensor: SymTensor):
        super().__init__(tensor.order, tensor.dim)
        self.tensor = tensor

    def apply_full(self, x: np.ndarray) -> float:
        return self.tensor.apply_full(x)

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.tensor.apply_gradient(x)

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        return self.tensor.multilinear_apply(blocks)

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        return self.tensor.multilinear_partial(blocks, free_slot)

    def to_symtensor(self) -> SymTensor:
        return self.tensor


@lru_cache(maxsize=None)
def _pair_matchings(order: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All perfect matchings of slots 0..order-1, each as a tuple of pairs."""

    def rec(slots: tuple[int, ...]) -> list[tuple[tuple[int, int], ...]]:
        if not slots:
            return [()]
        head, rest = slots[0], slots[1:]
        out = []
        for k, partner in enumerate(rest):
            remainder = rest[:k] + rest[k + 1:]
            for tail in rec(remainder):
                out.append(((head, partner),) + tail)
        return out

    return tuple(rec(tuple(range(order))))


class ZIdentity(BOperator):
    """Unit-sphere normalization: homogeneous form |x|^m, slot-gradient
    |x|^(m-2) x.

    The multilinear form is the symmetric polarization of |x|^m: the average
    over all perfect pairings of the slots of the product of paired inner
    products. It agrees entrywise with the dense tensor from to_symtensor()
    but never materializes it.
    """

    variant = "z-identity"

    def __init__(self, order: int, dim: int):
        if order % 2 != 0:
            raise ArityError(f"identity pairing needs even order, got {order}")
        super().__init__(order, dim)

    def apply_full(self, x: np.ndarray) -> float:
        x = _check_vector(x, self.dim)
        return float(np.dot(x, x) ** (self.order // 2))

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        x = _check_vector(x, self.dim)
        nsq = float(np.dot(x, x))
        return nsq ** ((self.order - 2) // 2) * x if self.order > 2 else x.copy()

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        self._check_blocks(blocks, self.order)
        b = np.stack([np.asarray(v, dtype=float) for v in blocks])
        gram = b @ b.T
        total = 0.0
        for match in _pair_matchings(self.order):
            prod = 1.0
            for i, j in match:
                prod *= gram[i, j]
            total += prod
        return float(total / _double_factorial(self.order - 1))

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        self._check_blocks(blocks, self.order - 1)
        if not 0 <= free_slot < self.order:
            raise IndexError(f"free_slot {free_slot} out of range "
                             f"0..{self.order - 1}")
        others = [np.asarray(v, dtype=float) for v in blocks]
        full: list[np.ndarray | None] = list(others)
        full.insert(free_slot, None)
        row = {}
        for slot in range(self.order):
            if slot != free_slot:
                row[slot] = len(row)
        b = np.stack(others)
        gram = b @ b.T
        out = np.zeros(self.dim)
        for match in _pair_matchings(self.order):
            prod = 1.0
            partner = -1
            for i, j in match:
                if i == free_slot:
                    partner = j
                elif j == free_slot:
                    partner = i
                else:
                    prod *= gram[row[i], row[j]]
            out += prod * full[partner]
        out /= _double_factorial(self.order - 1)
        return out

    def to_symtensor(self) -> SymTensor:
        return identity_tensor(self.order, self.dim)


class HDiagonal(BOperator):
    """Componentwise-power normalization: homogeneous form sum_i x_i^m,
    slot-gradient with entries x_i^(m-1).

    The structural multilinear form is sum_i of the product of the blocks'
    i-th entries.
    """

    variant = "h-diagonal"

    def apply_full(self, x: np.ndarray) -> float:
        x = _check_vector(x, self.dim)
        return float(np.sum(x ** self.order))

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        x = _check_vector(x, self.dim)
        return x ** (self.order - 1)

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        self._check_blocks(blocks, self.order)
        prod = np.ones(self.dim)
        for b in blocks:
            prod = prod * _check_vector(b, self.dim)
        return float(prod.sum())

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        self._check_blocks(blocks, self.order - 1)
        if not 0 <= free_slot < self.order:
            raise IndexError(f"free_slot {free_slot} out of range "
                             f"0..{self.order - 1}")
        prod = np.ones(self.dim)
        for b in blocks:
            prod = prod * _check_vector(b, self.dim)
        return prod

    def to_symtensor(self) -> SymTensor:
        return diagonal_tensor(self.order, self.dim)


class ShiftedTensor:
    """Lazy composite A - theta * B with B applied structurally.

    Produced by :func:`axpy` when B is not dense. The Frobenius norm uses the
    symmetric realization of B through three scalars precomputed here.
    """

    __slots__ = ("a", "b", "theta", "order", "dim", "_fro")

    def __init__(self, a: SymTensor, b: BOperator, theta: float):
        if a.order != b.order or a.dim != b.dim:
            raise DimError(f"shape mismatch: ({a.order},{a.dim}) vs "
                           f"({b.order},{b.dim})")
        self.a = a
        self.b = b
        self.theta = float(theta)
        self.order = a.order
        self.dim = a.dim
        b_sym = b.to_symtensor()
        fa2 = a.frobenius_norm() ** 2
        fab = frobenius_inner(a, b_sym)
        fb2 = b_sym.frobenius_norm() ** 2
        self._fro = math.sqrt(max(fa2 - 2.0 * self.theta * fab
                                  + self.theta ** 2 * fb2, 0.0))

    def apply_full(self, x: np.ndarray) -> float:
        return self.a.apply_full(x) - self.theta * self.b.apply_full(x)

    def apply_gradient(self, x: np.ndarray) -> np.ndarray:
        return (self.a.apply_gradient(x)
                - self.theta * self.b.apply_gradient(x))

    def multilinear_apply(self, blocks: Sequence[np.ndarray]) -> float:
        return (self.a.multilinear_apply(blocks)
                - self.theta * self.b.multilinear_apply(blocks))

    def multilinear_partial(self, blocks: Sequence[np.ndarray],
                            free_slot: int) -> np.ndarray:
        return (self.a.multilinear_partial(blocks, free_slot)
                - self.theta * self.b.multilinear_partial(blocks, free_slot))

    def frobenius_norm(self) -> float:
        return self._fro

    def __repr__(self) -> str:
        return (f"ShiftedTensor(order={self.order}, dim={self.dim}, "
                f"theta={self.theta!r}, b={self.b.variant})")


def axpy(a: SymTensor, b: BOperator, theta: float) -> SymTensor | ShiftedTensor:
    """Operator for A - theta * B.

    Dense B merges into a plain SymTensor; structured variants return a lazy
    composite that applies B through its structural multilinear forms.
    """
    if a.order != b.order or a.dim != b.dim:
        raise DimError(f"shape mismatch: ({a.order},{a.dim}) vs "
                       f"({b.order},{b.dim})")
    if isinstance(b, DenseB):
        merged = dict(a._canon)
        for idx, val in b.tensor._canon.items():
            merged[idx] = merged.get(idx, 0.0) - theta * val
        return SymTensor(a.order, a.dim, merged)
    return ShiftedTensor(a, b, theta)


# Functional aliases matching the operation-level contract names.

def from_entries(order: int, dim: int, entries) -> SymTensor:
    return SymTensor.from_entries(order, dim, entries)


def apply_full(a, x: np.ndarray) -> float:
    return a.apply_full(x)


def apply_gradient(a, x: np.ndarray) -> np.ndarray:
    return a.apply_gradient(x)


def multilinear_apply(a, blocks: Sequence[np.ndarray]) -> float:
    return a.multilinear_apply(blocks)


def multilinear_partial(a, blocks: Sequence[np.ndarray],
                        free_slot: int) -> np.ndarray:
    return a.multilinear_partial(blocks, free_slot)


def frobenius_norm(a) -> float:
    return a.frobenius_norm()


def b_apply_full(b: BOperator, x: np.ndarray) -> float:
    return b.apply_full(x)


def b_apply_gradient(b: BOperator, x: np.ndarray) -> np.ndarray:
    return b.apply_gradient(x)


def load_tensor(path) -> SymTensor:
    """Read a symmetric tensor from the plain text format.

    Line 1: ``order m``; line 2: ``dim n``; every further non-blank line is
    ``i1 ... im value`` with 1-based indices. ``#`` starts a comment.
    """
    order: int | None = None
    dim: int | None = None
    entries: list[tuple[tuple[int, ...], float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if order is None:
                if len(parts) != 2 or parts[0] != "order":
                    raise ParseError(f"{path}:{lineno}: expected 'order m'")
                try:
                    order = int(parts[1])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad order {parts[1]!r}")
                continue
            if dim is None:
                if len(parts) != 2 or parts[0] != "dim":
                    raise ParseError(f"{path}:{lineno}: expected 'dim n'")
                try:
                    dim = int(parts[1])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad dim {parts[1]!r}")
                continue
            if len(parts) != order + 1:
                raise ParseError(f"{path}:{lineno}: expected {order} indices "
                                 f"and a value, got {len(parts)} fields")
            try:
                idx = tuple(int(p) for p in parts[:-1])
                val = float(parts[-1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: malformed entry {line!r}")
            entries.append((idx, val))
    if order is None or dim is None:
        raise ParseError(f"{path}: missing order/dim header")
    try:
        return SymTensor.from_entries(order, dim, entries)
    except (ArityError, IndexError, DuplicateEntryError, DimError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
