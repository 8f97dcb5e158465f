"""Dense complex linear algebra used by every other module.

Conventions
-----------
* Composite spaces are ordered system first, environment second, so the
  composite basis index of ``|n, mu>`` is ``n * d_E + mu``.
* Eigenvalues are ascending.  Inside a degenerate group the eigenvectors are
  obtained by Gram-Schmidt on the projected computational basis vectors, taken
  in input order, and each vector's largest-magnitude component is made real
  and positive.  This makes every decomposition reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DomainError, NotHermitian, NotSquare

HERMITIAN_TOL = 1e-10
DEGENERACY_RTOL = 1e-9
# Projected basis vectors shorter than this (after orthogonalisation) are skipped.
_GS_MIN_NORM = 1e-4


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, SpectralHamiltonian):
        return M.matrix
    if hasattr(M, "matrix"):
        return np.asarray(M.matrix)
    return np.asarray(M)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def max_norm(M) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def dagger(M: np.ndarray) -> np.ndarray:
    return np.conj(M).T


def check_hermitian(M, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``M`` as a complex array after checking it is square and Hermitian."""
    M = np.asarray(_as_matrix(M), dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max_norm(M)
    residual = max_norm(M - dagger(M))
    if residual > tol * scale:
        raise NotHermitian(f"||H - H^dag||_max = {residual:.3e} exceeds {tol:.0e} * ||H||_max")
    return M


def degeneracy_groups(eigenvalues, rtol: float = DEGENERACY_RTOL) -> tuple[tuple[int, ...], ...]:
    """Group indices of ascending ``eigenvalues`` by chained closeness.

    Consecutive values closer than ``rtol * max(1, spectral range)`` share a
    group; the grouping is the transitive closure of that relation.
    """
    E = np.asarray(eigenvalues, dtype=float)
    if E.size == 0:
        return ()
    eps = rtol * max(1.0, float(E[-1] - E[0]))
    groups, current = [], [0]
    for i in range(1, E.size):
        if E[i] - E[i - 1] <= eps:
            current.append(i)
        else:
            groups.append(tuple(current))
            current = [i]
    groups.append(tuple(current))
    return tuple(groups)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    k = int(np.argmax(mags >= mags.max() - 1e-12))
    return v * (np.conj(v[k]) / mags[k])


def _canonical_block(block: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the column span of ``block``."""
    k = block.shape[1]
    if k == 1:
        return _fix_phase(block[:, 0])[:, None]
    P = block @ dagger(block)
    basis: list[np.ndarray] = []
    for j in range(P.shape[0]):
        x = P[:, j].copy()
        for _ in range(2):
            for b in basis:
                x -= b * np.vdot(b, x)
        nrm = np.linalg.norm(x)
        if nrm > _GS_MIN_NORM:
            basis.append(x / nrm)
            if len(basis) == k:
                break
    if len(basis) < k:  # pragma: no cover - needs an ill-conditioned eigenspace
        basis = [block[:, i] for i in range(k)]
    return np.column_stack([_fix_phase(b) for b in basis])


@dataclass(frozen=True, eq=False)
class SpectralHamiltonian:
    """A Hermitian operator together with its canonical eigendecomposition."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    groups: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def bohr_frequencies(self) -> np.ndarray:
        """``omega[n, m] = E_n - E_m``."""
        E = self.eigenvalues
        return E[:, None] - E[None, :]

    @property
    def is_degenerate(self) -> bool:
        return any(len(g) > 1 for g in self.groups)

    @property
    def group_labels(self) -> np.ndarray:
        labels = np.empty(self.dim, dtype=int)
        for k, g in enumerate(self.groups):
            labels[list(g)] = k
        return labels

    def projectors(self) -> list[np.ndarray]:
        V = self.eigenvectors
        return [V[:, g] @ dagger(V[:, g]) for g in map(list, self.groups)]

    def to_eigenbasis(self, M) -> np.ndarray:
        V = self.eigenvectors
        return dagger(V) @ _as_matrix(M) @ V

    def from_eigenbasis(self, M) -> np.ndarray:
        V = self.eigenvectors
        return V @ np.asarray(M) @ dagger(V)


def hermitian_eigendecomposition(H) -> SpectralHamiltonian:
    """Canonical eigendecomposition of a Hermitian matrix.

    Raises
    ------
    NotSquare, NotHermitian
        If ``H`` is not square, or ``||H - H^dag||_max > 1e-10 ||H||_max``.
    """
    if isinstance(H, SpectralHamiltonian):
        return H
    M = check_hermitian(H)
    w, v = np.linalg.eigh((M + dagger(M)) / 2)
    groups = degeneracy_groups(w)
    V = np.empty_like(v)
    for g in groups:
        idx = list(g)
        V[:, idx] = _canonical_block(v[:, idx])
    return SpectralHamiltonian(_frozen(M), _frozen(w), _frozen(V), groups)


def spectral_function(H, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Return ``V diag(f(E)) V^dag``.

    ``f`` receives the full eigenvalue array.  A real ``f`` yields a Hermitian
    result.  Non-finite values of ``f`` raise :class:`DomainError`.
    """
    H = hermitian_eigendecomposition(H)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(H.eigenvalues))
    if vals.shape != H.eigenvalues.shape:
        raise ValueError("f must map the eigenvalue array elementwise")
    if not np.all(np.isfinite(vals)):
        bad = H.eigenvalues[~np.isfinite(vals)]
        raise DomainError(f"function undefined at eigenvalue(s) {bad}")
    V = H.eigenvectors
    return (V * vals) @ dagger(V)


def unitary_from_generator(K, t: float) -> np.ndarray:
    """``U = exp(-i K t)`` for Hermitian ``K``."""
    return spectral_function(K, lambda E: np.exp(-1j * E * t))


def kron_product(A, B) -> np.ndarray:
    return np.kron(_as_matrix(A), _as_matrix(B))


def composite_hamiltonian(H_S, H_E) -> SpectralHamiltonian:
    """``H_S (x) 1 + 1 (x) H_E`` with its canonical decomposition."""
    A, B = _as_matrix(H_S), _as_matrix(H_E)
    total = np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)
    return hermitian_eigendecomposition(total)


def partial_trace(M, dims: tuple[int, int], keep: str = "S") -> np.ndarray:
    """Reduced operator of a bipartite matrix.

    Parameters
    ----------
    M : array_like
        Operator on the composite space, shape ``(d_S d_E, d_S d_E)``.
    dims : (int, int)
        ``(d_S, d_E)``.
    keep : {"S", "E"}
        Which factor survives.
    """
    M = np.asarray(_as_matrix(M))
    dS, dE = dims
    if M.shape != (dS * dE, dS * dE):
        raise DimensionMismatch(f"matrix of shape {M.shape} does not match dims {dims}")
    T = M.reshape(dS, dE, dS, dE)
    if keep == "S":
        return np.einsum("ijkj->ik", T)
    if keep == "E":
        return np.einsum("ijil->jl", T)
    raise ValueError(f"keep must be 'S' or 'E', got {keep!r}")


def dephase(rho, H) -> np.ndarray:
    """Remove coherences between distinct eigenspaces of ``H``.

    Coherences inside a degenerate eigenspace are kept.
    """
    H = hermitian_eigendecomposition(H)
    R = np.asarray(_as_matrix(rho))
    if R.shape != (H.dim, H.dim):
        raise DimensionMismatch(f"state of shape {R.shape} vs Hamiltonian of dim {H.dim}")
    labels = H.group_labels
    R = H.to_eigenbasis(R)
    R = np.where(labels[:, None] == labels[None, :], R, 0.0)
    return H.from_eigenbasis(R)


def read_matrix(path) -> np.ndarray:
    """Parse the plain-text matrix format.

    The first line holds ``rows cols``; the remaining whitespace-separated
    tokens are ``re im`` pairs in row-major order.
    """
    tokens = Path(path).read_text(encoding="utf-8").split()
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = [float(x) for x in tokens[2:]]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed matrix file ({exc})") from None
    if rows <= 0 or cols <= 0:
        raise ValueError(f"{path}: dimensions must be positive")
    if len(values) != 2 * rows * cols:
        raise ValueError(f"{path}: expected {2 * rows * cols} numbers, found {len(values)}")
    pairs = np.asarray(values).reshape(rows, cols, 2)
    M = pairs[..., 0] + 1j * pairs[..., 1]
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: non-finite entry")
    return M


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
