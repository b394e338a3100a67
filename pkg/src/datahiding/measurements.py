"""
Separable rank-one measurements on a B (x) C system and a local search over them.

A :class:`ProductMeasurement` stores, for every outcome y, a unit vector on
Bob's space, a unit vector on Charlie's space and a weight, so that the POVM
element is ``w_y |b_y><b_y| (x) |c_y><c_y|``. Operators it acts on are
ordered B first, then C.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import qlin
from .errors import DimensionMismatchError, InvalidParameterError

PROJECTIVE = "projective-separable"
QUASI = "quasi"


@dataclass(frozen=True, eq=False)
class ProductMeasurement:
    b_vectors: np.ndarray
    c_vectors: np.ndarray
    weights: np.ndarray
    kind: str = PROJECTIVE
    f: float = 1.0

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b_vectors, dtype=complex))
        c = np.atleast_2d(np.asarray(self.c_vectors, dtype=complex))
        w = np.asarray(self.weights, dtype=float).ravel()
        if not (b.shape[0] == c.shape[0] == w.size):
            raise DimensionMismatchError("outcome counts of b_vectors, c_vectors and weights differ")
        if np.any(w <= 0):
            raise InvalidParameterError("weights must be positive")
        for name, v in (("b", b), ("c", c)):
            if np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) > 1e-9:
                raise InvalidParameterError(f"{name}_vectors must be unit vectors")
        if self.kind not in (PROJECTIVE, QUASI):
            raise InvalidParameterError(f"unknown measurement kind {self.kind!r}")
        for a in (b, c, w):
            a.setflags(write=False)
        object.__setattr__(self, "b_vectors", b)
        object.__setattr__(self, "c_vectors", c)
        object.__setattr__(self, "weights", w)
        if self.kind == PROJECTIVE:
            if w.size != self.dim:
                raise InvalidParameterError(f"projective product measurement needs {self.dim} outcomes, got {w.size}")
            defect = np.max(np.abs(self.povm_sum() - np.eye(self.dim)))
            if defect > 1e-9:
                raise InvalidParameterError(f"POVM does not sum to identity (defect {defect:.3g})")

    @property
    def dim_b(self) -> int:
        return self.b_vectors.shape[1]

    @property
    def dim_c(self) -> int:
        return self.c_vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.dim_b * self.dim_c

    @property
    def n_outcomes(self) -> int:
        return self.weights.size

    def product_vectors(self) -> np.ndarray:
        """Rows are b_y (x) c_y, shape (outcomes, dim)."""
        return np.einsum("yi,yj->yij", self.b_vectors, self.c_vectors).reshape(self.n_outcomes, self.dim)

    def povm_sum(self) -> np.ndarray:
        v = self.product_vectors()
        return (v.T * self.weights) @ v.conj()

    def elements(self) -> np.ndarray:
        v = self.product_vectors()
        return self.weights[:, None, None] * np.einsum("yi,yj->yij", v, v.conj())

    def probabilities(self, sigma) -> np.ndarray:
        """Outcome weights Tr(E_y sigma); ``sigma`` may be a stack (..., dim, dim)."""
        sigma = np.asarray(sigma, dtype=complex)
        if sigma.shape[-2:] != (self.dim, self.dim):
            raise DimensionMismatchError(f"state dimension {sigma.shape[-1]} but measurement acts on {self.dim}")
        v = self.product_vectors()
        p = np.einsum("yi,...ij,yj->...y", v.conj(), sigma, v).real
        return p * self.weights

    def probabilities_pure(self, psi) -> np.ndarray:
        """Outcome weights for pure input vectors (..., dim)."""
        amp = np.asarray(psi, dtype=complex) @ self.product_vectors().conj().T
        return np.abs(amp) ** 2 * self.weights


def product_basis_measurement(basis_b, basis_c) -> ProductMeasurement:
    """Measurement in the product basis {col_i(basis_b) (x) col_j(basis_c)}, outcome y = i * D_C + j."""
    ub = np.asarray(basis_b, dtype=complex)
    uc = np.asarray(basis_c, dtype=complex)
    db, dc = ub.shape[0], uc.shape[0]
    b = np.repeat(ub.T, dc, axis=0)
    c = np.tile(uc.T, (db, 1))
    return ProductMeasurement(b, c, np.ones(db * dc))


def computational_measurement(dim_b: int, dim_c: int) -> ProductMeasurement:
    return product_basis_measurement(np.eye(dim_b), np.eye(dim_c))


def random_product_measurement(dim_b: int, dim_c: int, rng: np.random.Generator) -> ProductMeasurement:
    """Product basis measurement with independent Haar-random local bases."""
    ub = qlin.haar_unitaries(dim_b, 1, rng)[0]
    uc = qlin.haar_unitaries(dim_c, 1, rng)[0]
    return product_basis_measurement(ub, uc)


def quasi_measurement(dim_b: int, dim_c: int, s: int, rng: np.random.Generator,
                      f: float | None = None) -> ProductMeasurement:
    """(s, f) separable quasi-measurement with elements (D_B D_C)^2 / s * phi_B (x) phi_C.

    The rank-one factors are Haar-random. ``f`` defaults to the operator norm
    of the element sum; a supplied ``f`` smaller than that norm is rejected.
    """
    if s < 1:
        raise InvalidParameterError("s must be at least 1")
    b = qlin.haar_states(dim_b, s, rng)
    c = qlin.haar_states(dim_c, s, rng)
    w = np.full(s, (dim_b * dim_c) ** 2 / s)
    m = ProductMeasurement(b, c, w, kind=QUASI)
    f_actual = qlin.operator_inf_norm(m.povm_sum())
    if f is None:
        f = f_actual
    elif f_actual > f + 1e-9:
        raise InvalidParameterError(f"element sum has norm {f_actual:.6g} > f = {f}")
    object.__setattr__(m, "f", float(f))
    return m


# --------------------------------------------------------------------------
# classical information from outcome statistics


def mutual_information(p_x, p_y_given_x) -> float:
    """I(X;Y) in bits from a prior (nx,) and a row-stochastic matrix (nx, ny)."""
    p_x = np.asarray(p_x, dtype=float)
    cond = np.asarray(p_y_given_x, dtype=float)
    joint = p_x[:, None] * cond
    return qlin.shannon_entropy(joint.sum(axis=0)) - float(np.dot(p_x, qlin.entropy_of_spectrum(cond, axis=1)))


def small_unitary(dim: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (h + h.conj().T) / 2
    return expm(1j * scale * h)


def coordinate_ascent(objective: Callable[[np.ndarray, np.ndarray], float], basis_b, basis_c,
                      steps: int, rng: np.random.Generator, scale: float = 0.3):
    """Maximise ``objective(basis_b, basis_c)`` by alternating local unitary perturbations.

    Odd steps rotate Bob's basis, even steps Charlie's. A perturbation is kept
    only if it improves the objective; the step size halves after two
    consecutive rejections. Returns (best_b, best_c, best_value).
    """
    ub = np.asarray(basis_b, dtype=complex)
    uc = np.asarray(basis_c, dtype=complex)
    best = objective(ub, uc)
    misses = 0
    for step in range(steps):
        if step % 2 == 0:
            cand_b, cand_c = small_unitary(ub.shape[0], scale, rng) @ ub, uc
        else:
            cand_b, cand_c = ub, small_unitary(uc.shape[0], scale, rng) @ uc
        val = objective(cand_b, cand_c)
        if val > best:
            ub, uc, best = cand_b, cand_c, val
            misses = 0
        else:
            misses += 1
            if misses >= 2:
                scale /= 2
                misses = 0
    return ub, uc, best
