"""
Mutual information of jointly circular-symmetric complex Gaussian vectors.

Vectors are described by a square-root factor F with covariance F F^H
(rows are variables, columns independent unit-variance sources), so
principal blocks are just row subsets of F. Pseudo-log-determinants come
from the singular values of those row blocks, which keeps near-singular
blocks accurate. All quantities are in bits and broadcast over leading
batch axes.

For a complex circular Gaussian vector h(X) = log det(pi e Sigma), so
I(A;B|C) = log det S_AC + log det S_BC - log det S_ABC - log det S_C
with no factor of one half.
"""

import logging
from typing import Sequence, Tuple, Union

import numpy as np


logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
PSD_TOL = 1e-9

Index = Union[int, Sequence[int]]


class CovarianceError(ValueError):
    """Covariance not Hermitian positive semidefinite."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def _indices(index: Index) -> Tuple[int, ...]:
    if isinstance(index, (int, np.integer)):
        return (int(index),)
    return tuple(int(i) for i in index)


def check_psd(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Eigenvalues of a (stack of) covariance matrices; raises on a negative one."""
    cov = np.asarray(cov)
    if cov.shape[-1] != cov.shape[-2]:
        raise CovarianceError(f"covariance must be square, got {cov.shape}", float("nan"))
    scale = max(1.0, float(np.max(np.abs(cov))) if cov.size else 1.0)
    asym = float(np.max(np.abs(cov - np.conj(np.swapaxes(cov, -1, -2))))) if cov.size else 0.0
    if asym > tol * scale:
        raise CovarianceError(f"covariance is not Hermitian (deviation {asym:.3e})", float("nan"))
    eigenvalues = np.linalg.eigvalsh(cov)
    lowest = float(np.min(eigenvalues)) if eigenvalues.size else 0.0
    if lowest < -tol * scale:
        raise CovarianceError(f"covariance is not positive semidefinite: eigenvalue {lowest:.6e}", lowest)
    return eigenvalues


def covariance(factor: np.ndarray) -> np.ndarray:
    factor = np.asarray(factor)
    return factor @ np.conj(np.swapaxes(factor, -1, -2))


def factor_from_covariance(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Square-root factor V diag(sqrt(w)) of a PSD covariance stack."""
    check_psd(cov, tol)
    w, v = np.linalg.eigh(np.asarray(cov))
    return v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def pseudo_logdet(factor: np.ndarray, rtol: float = RANK_RTOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    (rank, log2 pseudo-determinant) of F F^H for a stack of row blocks F.
    An empty block has rank 0 and log-determinant 0.
    """
    factor = np.asarray(factor)
    batch = factor.shape[:-2]
    if factor.shape[-2] == 0:
        return np.zeros(batch, dtype=int), np.zeros(batch)
    s = np.linalg.svd(factor, compute_uv=False)
    cutoff = rtol * np.maximum(1.0, s[..., :1])
    kept = s > cutoff
    logs = np.where(kept, 2.0 * np.log2(np.where(kept, s, 1.0)), 0.0)
    return kept.sum(axis=-1), logs.sum(axis=-1)


def _block(factor: np.ndarray, rows: Tuple[int, ...]) -> np.ndarray:
    return factor[..., list(rows), :]


def conditional_mutual_information(factor: np.ndarray, a: Index, b: Index, c: Index = ()) -> np.ndarray:
    """
    I(A;B|C) for rows a, b, c of the factor. Infinite when A and B share a
    deterministic component given C (rank deficit).
    """
    a, b, c = _indices(a), _indices(b), _indices(c)
    if not a or not b:
        raise ValueError("mutual information needs two nonempty index groups")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError(f"index groups must be disjoint: {a} ; {b} | {c}")
    factor = np.asarray(factor)
    n = factor.shape[-2]
    if any(i < 0 or i >= n for i in a + b + c):
        raise ValueError(f"index out of range for {n} variables")

    r_ac, l_ac = pseudo_logdet(_block(factor, a + c))
    r_bc, l_bc = pseudo_logdet(_block(factor, b + c))
    r_abc, l_abc = pseudo_logdet(_block(factor, a + b + c))
    r_c, l_c = pseudo_logdet(_block(factor, c))

    deficit = r_ac + r_bc - r_abc - r_c
    value = np.maximum(l_ac + l_bc - l_abc - l_c, 0.0)
    value = np.where(deficit > 0, np.inf, value)
    return value[()] if np.ndim(value) == 0 else value


def mutual_information(factor: np.ndarray, a: Index, b: Index) -> np.ndarray:
    return conditional_mutual_information(factor, a, b, ())


def covariance_mutual_information(cov: np.ndarray, a: Index, b: Index, c: Index = (),
                                  tol: float = PSD_TOL) -> np.ndarray:
    """Same as conditional_mutual_information, from a covariance stack."""
    return conditional_mutual_information(factor_from_covariance(cov, tol), a, b, c)
