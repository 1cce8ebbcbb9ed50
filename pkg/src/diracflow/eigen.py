"""Dense Hermitian eigensolver kernel and windowed-spectrum conveniences.

The solver delegates to LAPACK's backward-stable dense Hermitian routines via
numpy; assembly-time validation guarantees inputs are Hermitian to rounding.
Sparse matrices are accepted as backing storage for large operators (they are
densified on demand for the dense code path; large sparse operators are
eigensolved inside the lattice backend, not here).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError

HERMITICITY_RTOL = 1e-12


@dataclass(frozen=True)
class HermitianOperator:
    """Finite-dimensional self-adjoint operator with provenance metadata.

    matrix may be a dense complex ndarray or a scipy sparse matrix; dimension
    must be even (two spinor components per site or channel point) and the
    Hermiticity defect max|H - H^dag| must not exceed 1e-12 * max|H|.
    """

    matrix: Any = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise AssemblyError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] % 2 != 0:
            raise AssemblyError(f"dimension must be even, got {m.shape[0]}")
        if sp.issparse(m):
            defect_mat = (m - m.conj().T).tocoo()
            defect = np.abs(defect_mat.data).max() if defect_mat.nnz else 0.0
            scale = np.abs(m.tocoo().data).max() if m.nnz else 0.0
        else:
            defect = float(np.abs(m - m.conj().T).max())
            scale = float(np.abs(m).max())
        if scale > 0 and defect > HERMITICITY_RTOL * scale:
            raise AssemblyError(
                f"Hermiticity defect {defect:.3e} exceeds {HERMITICITY_RTOL:.0e} * max|H| = "
                f"{HERMITICITY_RTOL * scale:.3e}"
            )

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return np.asarray(self.matrix.todense(), dtype=complex)
        return np.asarray(self.matrix, dtype=complex)


@dataclass(frozen=True)
class SpectrumSample:
    """Sorted eigenvalues in a symmetric window at one parameter value.

    count_below is the number of eigenvalues below the window (exact when the
    full spectrum was available, None when a sparse windowed solve cannot
    count them); it is bookkeeping only and never enters flow counting.
    """

    t: float
    eigenvalues: np.ndarray
    count_below: int | None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1:
            raise AssemblyError("eigenvalues must be a 1-d array")
        if ev.size > 1 and np.any(np.diff(ev) < 0):
            raise AssemblyError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def window(self) -> float | None:
        return self.metadata.get("window")


def eigh(h: HermitianOperator, spot_check: bool = False, rng=None) -> np.ndarray:
    """All eigenvalues of h, ascending.

    With spot_check=True, eigenvectors are computed as well and the backward
    error ||H v - lambda v|| <= 1e-9 ||H|| is verified on 10 random indices.
    """
    a = h.dense()
    if not spot_check:
        return np.linalg.eigvalsh(a)
    vals, vecs = np.linalg.eigh(a)
    norm = max(abs(vals[0]), abs(vals[-1]), np.finfo(float).tiny)
    rng = np.random.default_rng(0) if rng is None else rng
    idx = rng.integers(0, len(vals), size=min(10, len(vals)))
    for i in idx:
        resid = np.linalg.norm(a @ vecs[:, i] - vals[i] * vecs[:, i])
        if resid > 1e-9 * norm:
            raise AssemblyError(
                f"eigenpair {i} backward error {resid:.3e} > 1e-9 * ||H|| = {1e-9 * norm:.3e}"
            )
    return vals


def eigh_vectors(h: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors (columns); diagnostics variant."""
    return np.linalg.eigh(h.dense())


def lowest_vectors(h: HermitianOperator, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The k smallest-|lambda| eigenpairs (diagnostics; dense path)."""
    vals, vecs = np.linalg.eigh(h.dense())
    order = np.argsort(np.abs(vals), kind="stable")[:k]
    return vals[order], vecs[:, order]


def spectrum_window(h: HermitianOperator, lam: float) -> SpectrumSample:
    """Eigenvalues of h inside the closed window [-lam, lam] plus count_below.

    Window boundaries are inclusive (an eigenvalue exactly at +/-lam is kept).
    """
    if lam <= 0:
        raise ValueError(f"window half-width must be positive, got {lam}")
    vals = eigh(h)
    inside = vals[(vals >= -lam) & (vals <= lam)]
    count_below = int(np.count_nonzero(vals < -lam))
    meta = dict(h.metadata)
    meta["window"] = float(lam)
    return SpectrumSample(
        t=float(meta.get("t", float("nan"))),
        eigenvalues=inside,
        count_below=count_below,
        metadata=meta,
    )
