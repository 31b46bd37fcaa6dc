"""Shared fixtures and oracle helpers for the test suite.

The dense helpers materialize full numpy arrays from canonical entry maps
so that every structural contraction in the package can be checked against
an independent einsum-style route.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from importlib import resources

from specteig import SymTensor, load_tensor

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(num: int, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"CRITERION {num}: {status}" + (f" -- {detail}" if detail else "")
    _ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion_log():
    """Callable recording one pass/fail line per acceptance criterion."""
    return record_criterion


def to_dense(t) -> np.ndarray:
    """Full dense array of a symmetric tensor or structural operator."""
    if not isinstance(t, SymTensor):
        t = t.to_symtensor()
    arr = np.zeros((t.dim,) * t.order)
    for idx, val in t.canonical.items():
        for perm in set(itertools.permutations(idx)):
            arr[perm] = val
    return arr


def dense_multilinear(arr: np.ndarray, blocks) -> float:
    out = arr
    for b in blocks:
        out = np.tensordot(out, np.asarray(b, dtype=float), axes=([0], [0]))
    return float(out)


def dense_partial(arr: np.ndarray, blocks) -> np.ndarray:
    """Contract all axes but the first with the given vectors."""
    out = arr
    for b in blocks:
        out = np.tensordot(out, np.asarray(b, dtype=float),
                           axes=([out.ndim - 1], [0]))
    return np.asarray(out, dtype=float)


def random_symtensor(m: int, n: int, rng: np.random.Generator,
                     scale: float = 1.0) -> SymTensor:
    canon = {idx: float(scale * rng.uniform(-1.0, 1.0))
             for idx in itertools.combinations_with_replacement(range(n), m)}
    return SymTensor(m, n, canon)


def fd_gradient(fun, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    out = np.zeros_like(np.asarray(x, dtype=float))
    for i in range(out.shape[0]):
        e = np.zeros_like(out)
        e[i] = step
        out[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return out


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Bundled tensor files copied to a real directory."""
    target = tmp_path_factory.mktemp("data")
    root = resources.files("specteig.data")
    for name in ("example2.tns", "example3.tns", "example4_A.tns",
                 "example4_B.tns"):
        (target / name).write_text(
            (root / name).read_text(encoding="utf-8"), encoding="utf-8")
    return target


@pytest.fixture(scope="session")
def example2(data_dir):
    return load_tensor(data_dir / "example2.tns")


@pytest.fixture(scope="session")
def example3(data_dir):
    return load_tensor(data_dir / "example3.tns")


@pytest.fixture(scope="session")
def example4(data_dir):
    return (load_tensor(data_dir / "example4_A.tns"),
            load_tensor(data_dir / "example4_B.tns"))
