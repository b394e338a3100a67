"""
Finite-dimensional quantum linear algebra.

States, unitaries and measurement operators are plain complex numpy arrays
internally. The thin wrapper classes below (:class:`DensityMatrix`,
:class:`UnitaryMatrix`, :class:`HermitianOperator`, :class:`Pmf`) validate on
construction and expose ``__array__`` so that every function in the package
accepts either a wrapper or a raw array.

All entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    NotAStateError,
)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = 1e-10
# eigenvalues below this are a hard "not a state" error in entropy routines
EIG_CLAMP = 1e-8
PMF_TOL = 1e-10


def as_matrix(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def _check_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidDimensionError(f"{name} must be a non-empty square matrix, got shape {a.shape}")


def hermitian_defect(a) -> float:
    a = as_matrix(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix with no trace or positivity constraint."""

    data: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data)
        _check_square(data, "HermitianOperator")
        if hermitian_defect(data) > HERMITIAN_TOL:
            raise NotAStateError(f"operator is not Hermitian (defect {hermitian_defect(data):.3g})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix(HermitianOperator):
    """Hermitian, positive semidefinite, trace-one matrix."""

    def __post_init__(self):
        super().__post_init__()
        tr = np.trace(self.data).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotAStateError(f"trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(self.data)[0]
        if lo < -EIG_TOL:
            raise NotAStateError(f"negative eigenvalue {lo:.3g}")


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    data: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data)
        _check_square(data, "UnitaryMatrix")
        defect = np.max(np.abs(data.conj().T @ data - np.eye(data.shape[0])))
        if defect > HERMITIAN_TOL:
            raise NotAStateError(f"matrix is not unitary (defect {defect:.3g})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector. Entries within 1e-12 of [0, 1] are clamped."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise InvalidDimensionError("empty probability vector")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise NotAStateError("probability entry outside [0, 1]")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise NotAStateError(f"probabilities sum to {p.sum()!r}")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


# --------------------------------------------------------------------------
# sampling


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 1:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def haar_unitaries(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``count`` Haar-distributed unitaries, shape (count, dim, dim).

    QR of a complex Ginibre matrix, with the phases of diag(R) moved into Q so
    that the result is Haar rather than QR-convention biased.
    """
    dim = _check_dim(dim)
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[:, None, :]


def haar_unitary(dim: int, rng: np.random.Generator) -> UnitaryMatrix:
    return UnitaryMatrix(haar_unitaries(dim, 1, rng)[0])


def haar_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random unit vectors, shape (count, dim).

    Same law as ``U|0>`` with ``U`` Haar: a normalised complex Gaussian vector.
    """
    dim = _check_dim(dim)
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# --------------------------------------------------------------------------
# constructors and tensor plumbing


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(_check_dim(dim), dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    """Rank-one projector |v><v| for a unit vector v."""
    v = np.asarray(vec, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise NotAStateError(f"vector norm is {nrm!r}, expected 1")
    return np.outer(v, v.conj())


def maximally_mixed(dim: int) -> DensityMatrix:
    dim = _check_dim(dim)
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def tensor(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices or vectors."""
    if not ops:
        raise InvalidDimensionError("tensor() needs at least one operand")
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def tensor_power(op, n: int) -> np.ndarray:
    if n < 1:
        raise InvalidDimensionError("tensor power needs n >= 1")
    return tensor(*([op] * n))


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced operator on the subsystems listed in ``keep`` (in the given order)."""
    rho = as_matrix(rho)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionMismatchError(f"operator shape {rho.shape} does not match dims {dims}")
    n = len(dims)
    keep = list(keep)
    trace_out = [i for i in range(n) if i not in keep]
    t = rho.reshape(dims + dims)
    # einsum over the traced indices; kept ones in requested order
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise InvalidDimensionError("too many subsystems")
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in trace_out:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return red.reshape(dk, dk)


def permute_subsystems(op, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor i is input factor ``perm[i]``."""
    op = np.asarray(op, dtype=complex)
    dims = [int(d) for d in dims]
    n = len(dims)
    perm = list(perm)
    if op.ndim == 1:
        return op.reshape(dims).transpose(perm).reshape(-1)
    t = op.reshape(dims + dims)
    return t.transpose(perm + [n + p for p in perm]).reshape(op.shape)


def swap_operator(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            s[j * dim + i, i * dim + j] = 1.0
    return s


def symmetric_projector(dim: int) -> HermitianOperator:
    """Projector (I + SWAP)/2 onto the symmetric subspace of two copies."""
    dim = _check_dim(dim)
    return HermitianOperator((np.eye(dim * dim, dtype=complex) + swap_operator(dim)) / 2)


# --------------------------------------------------------------------------
# spectral quantities (everything goes through eigvalsh)


def eigenvalues(a) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix or a stack of them."""
    a = as_matrix(a)
    return np.linalg.eigvalsh(a)


def entropy_of_spectrum(lam, axis: int = -1) -> np.ndarray:
    """-sum l log2 l along ``axis``, with 0 log 0 = 0."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < -EIG_CLAMP):
        raise NotAStateError(f"eigenvalue {lam.min():.3g} below clamp")
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, -lam * np.log2(np.where(lam > 0, lam, 1.0)), 0.0)
    return terms.sum(axis=axis)


def shannon_entropy(p) -> float:
    return float(entropy_of_spectrum(np.asarray(p, dtype=float)))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits of a density matrix."""
    rho = as_matrix(rho)
    _check_square(rho, "state")
    return float(entropy_of_spectrum(eigenvalues(rho)))


def von_neumann_entropies(rhos) -> np.ndarray:
    """Entropies of a stack of density matrices, shape (count,)."""
    return entropy_of_spectrum(eigenvalues(rhos), axis=-1)


def trace_norm(a) -> float:
    """Sum of singular values; for Hermitian input the sum of |eigenvalues|."""
    a = as_matrix(a)
    if hermitian_defect(a) <= HERMITIAN_TOL:
        return float(np.abs(eigenvalues((a + a.conj().T) / 2)).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def trace_distance(rho, sigma) -> float:
    """Unnormalised trace distance ||rho - sigma||_1, in [0, 2] for states."""
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatchError(f"shapes {rho.shape} and {sigma.shape} differ")
    return trace_norm(rho - sigma)


def operator_inf_norm(a) -> float:
    """Largest absolute eigenvalue of a Hermitian operator."""
    lam = eigenvalues(a)
    return float(max(abs(lam[0]), abs(lam[-1])))


def inverse_sqrt_on_support(t, rel_cutoff: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root of a PSD matrix and the projector onto its support.

    Eigenvalues below ``rel_cutoff * lambda_max`` count as outside the support.
    """
    t = as_matrix(t)
    lam, w = np.linalg.eigh((t + t.conj().T) / 2)
    cut = rel_cutoff * max(lam[-1], 0.0)
    keep = lam > cut
    if not np.any(keep):
        raise NotAStateError("operator has empty support")
    wk = w[:, keep]
    inv_sqrt = (wk / np.sqrt(lam[keep])) @ wk.conj().T
    support = wk @ wk.conj().T
    return inv_sqrt, support


def is_density_matrix(a, tol: float = EIG_TOL) -> bool:
    try:
        a = as_matrix(a)
        _check_square(a)
    except InvalidDimensionError:
        return False
    if hermitian_defect(a) > tol or abs(np.trace(a).real - 1) > tol:
        return False
    return bool(eigenvalues((a + a.conj().T) / 2)[0] >= -tol)
