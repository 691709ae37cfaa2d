"""The coefficient map A, its frequency symbols, and Hermitian roots.

A acts on m x d matrices and is stored as a real (m*d) x (m*d) array in
(component r, direction j) -> r*d + j ordering.  Its symbol is
(Ahat(p) a)_r = sum_{j,s,k} conj(q_j) A_{r,j;s,k} a_s q_k with
q_j(p) = e^{i p_j} - 1; it is Hermitian positive definite for p != 0 and
vanishes at p = 0.

c0 and the norm are the extreme eigenvalues of the symmetrized array: the
sharp constants, so that derivative bound checks downstream are
meaningful.  Full positive definiteness is required; positivity on
rank-one matrices only is not accepted.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    NotPSD,
    NotPositiveDefinite,
    NotSymmetric,
    OutsideDisc,
    SingularSymbol,
)
from .lattice import TorusGeometry, p_flat
from .spectral import MultiplierTable, grid_table

SYMMETRY_TOL = 1e-12
COND_LIMIT = 1e14


@dataclass(frozen=True)
class EllipticMap:
    d: int
    m: int
    entries: np.ndarray
    c0: float
    opnorm: float

    @property
    def tensor(self) -> np.ndarray:
        """entries reshaped to (m, d, m, d)."""
        m, d = self.m, self.d
        return self.entries.reshape(m, d, m, d)


def max_asymmetry(raw: np.ndarray):
    """Largest |raw - raw^T| entry and its index pair."""
    diff = np.abs(raw - raw.T)
    idx = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[idx]), (int(idx[0]), int(idx[1]))


def validate_map(raw, d: int, m: int, tol: float = SYMMETRY_TOL) -> EllipticMap:
    """Symmetrize within tolerance, compute the extreme eigenvalues, or reject."""
    raw = np.asarray(raw, dtype=np.float64)
    n = m * d
    if raw.shape != (n, n):
        raise ValueError("coefficient array must be %d x %d" % (n, n))
    sym = 0.5 * (raw + raw.T)
    eigs = np.linalg.eigvalsh(sym)
    opnorm = float(np.max(np.abs(eigs)))
    asym, idx = max_asymmetry(raw)
    if asym > tol * max(opnorm, 1e-300):
        raise NotSymmetric(
            "entry (%d, %d) breaks symmetry by %.3e (tolerance %.1e of norm %.3e)"
            % (idx[0], idx[1], asym, tol, opnorm)
        )
    c0 = float(eigs[0])
    if c0 <= 0.0:
        raise NotPositiveDefinite("smallest eigenvalue %.3e is not positive" % c0)
    return EllipticMap(d=d, m=m, entries=sym, c0=c0, opnorm=float(eigs[-1]))


def identity_map(d: int, m: int) -> EllipticMap:
    return validate_map(np.eye(m * d), d, m)


def _q_of(p: np.ndarray) -> np.ndarray:
    return np.exp(1j * p) - 1.0


def symbol_from_tensor(tensor: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Symbol of an arbitrary (possibly complex) coefficient tensor at one p."""
    q = _q_of(np.asarray(p, dtype=np.float64))
    return np.einsum("j,rjsk,k->rs", np.conj(q), tensor, q)


def symbol(A: EllipticMap, p) -> np.ndarray:
    """Ahat(p) as a complex m x m matrix; the zero matrix at p = 0."""
    pv = np.asarray(getattr(p, "p", p), dtype=np.float64)
    return symbol_from_tensor(A.tensor, pv)


def symbol_flat(tensor: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """Symbols at all frequencies, shape (S^d, m, m); row 0 is p = 0."""
    q = _q_of(p_flat(g))
    return np.einsum("fj,rjsk,fk->frs", np.conj(q), tensor, q)


def symbol_table(A: EllipticMap, g: TorusGeometry) -> MultiplierTable:
    flat = symbol_flat(A.tensor, g)
    return MultiplierTable(g, grid_table(flat, g), real_kernel=True)


def green_symbol(A: EllipticMap, g: TorusGeometry) -> MultiplierTable:
    """Chat(p) = Ahat(p)^-1 for p != 0, zero at p = 0, Hermitian PD."""
    flat = symbol_flat(A.tensor, g)
    body = flat[1:]
    eigs = np.linalg.eigvalsh(body)
    lo = float(np.min(eigs))
    hi = float(np.max(eigs))
    if lo <= 0.0 or hi / lo > COND_LIMIT:
        raise SingularSymbol(
            "symbol family conditioning %.3e exceeds %.1e" % (hi / max(lo, 1e-300), COND_LIMIT)
        )
    inv = np.linalg.inv(body)
    inv = 0.5 * (inv + np.conj(np.swapaxes(inv, -1, -2)))
    out = np.zeros_like(flat)
    out[1:] = inv
    return MultiplierTable(g, grid_table(out, g), real_kernel=True)


def _eigh_checked(M: np.ndarray):
    herm_defect = np.max(np.abs(M - np.conj(np.swapaxes(M, -1, -2))))
    scale = max(float(np.max(np.abs(M))), 1e-300)
    if herm_defect > 1e-12 * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(M)


def _clamp_psd(w: np.ndarray, context: str = "matrix") -> np.ndarray:
    scale = np.maximum(np.max(np.abs(w), axis=-1, keepdims=True), 1e-300)
    worst = float(np.min(w / scale))
    if worst < -1e-10:
        raise NotPSD(
            "%s has eigenvalue %.3e of scale, below the -1e-10 floor" % (context, worst)
        )
    return np.maximum(w, 0.0)


def hermitian_sqrt(M: np.ndarray) -> np.ndarray:
    """The Hermitian PSD square root, with tiny negative eigenvalues clamped."""
    M = np.asarray(M, dtype=np.complex128)
    w, U = _eigh_checked(M)
    w = _clamp_psd(w)
    root = (U * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))
    return 0.5 * (root + np.conj(np.swapaxes(root, -1, -2)))


def sqrt_and_invsqrt_flat(flat: np.ndarray):
    """Batched Hermitian square root and inverse root of an (F, m, m) stack.

    Every slice must be Hermitian positive definite (the p = 0 slot is
    excluded by callers before batching).
    """
    w, U = _eigh_checked(flat)
    if np.min(w) <= 0.0:
        raise NotPSD("stack has a non-positive eigenvalue %.3e" % float(np.min(w)))
    Uh = np.conj(np.swapaxes(U, -1, -2))
    root = (U * np.sqrt(w)[..., None, :]) @ Uh
    invroot = (U * (1.0 / np.sqrt(w))[..., None, :]) @ Uh
    return root, invroot


def hermitian_sqrt_flat(flat: np.ndarray, context: str = "table") -> np.ndarray:
    """Batched PSD square root with the same clamping policy as the scalar op."""
    w, U = _eigh_checked(flat)
    w = _clamp_psd(w, context)
    Uh = np.conj(np.swapaxes(U, -1, -2))
    return (U * np.sqrt(w)[..., None, :]) @ Uh


@dataclass(frozen=True)
class ComplexEllipticPath:
    """The affine family A(z) = A0 + z A1 on the open unit disc.

    The direction obeys the operator-norm bound |A1| <= c0(A0)/2, which
    keeps the form coercive (real part at least half the A0 energy) for
    every |z| < 1.
    """

    A0: EllipticMap
    A1: np.ndarray

    def __post_init__(self):
        A1 = np.asarray(self.A1, dtype=np.float64)
        n = self.A0.m * self.A0.d
        if A1.shape != (n, n):
            raise ValueError("direction must be %d x %d" % (n, n))
        asym, idx = max_asymmetry(A1)
        scale = max(float(np.max(np.abs(A1))), self.A0.opnorm, 1e-300)
        if asym > 1e-12 * scale:
            raise NotSymmetric(
                "direction entry (%d, %d) breaks symmetry by %.3e" % (idx[0], idx[1], asym)
            )
        A1 = 0.5 * (A1 + A1.T)
        norm = float(np.max(np.abs(np.linalg.eigvalsh(A1)))) if np.any(A1) else 0.0
        if norm > 0.5 * self.A0.c0 * (1.0 + 1e-12):
            raise ValueError(
                "direction norm %.3e exceeds c0/2 = %.3e" % (norm, 0.5 * self.A0.c0)
            )
        object.__setattr__(self, "A1", A1)

    @classmethod
    def from_direction(cls, A0: EllipticMap, direction) -> "ComplexEllipticPath":
        """Scale a unit-ball direction to the admissible radius c0/2."""
        direction = np.asarray(direction, dtype=np.float64)
        sym = 0.5 * (direction + direction.T)
        norm = float(np.max(np.abs(np.linalg.eigvalsh(sym)))) if np.any(sym) else 0.0
        if norm > 1.0 + 1e-12:
            raise ValueError("direction norm %.3e exceeds 1" % norm)
        return cls(A0=A0, A1=0.5 * A0.c0 * direction)

    @property
    def direction(self) -> np.ndarray:
        """The unit-ball direction this path was scaled from."""
        return self.A1 / (0.5 * self.A0.c0)

    def tensor_at(self, z: complex) -> np.ndarray:
        if abs(z) >= 1.0:
            raise OutsideDisc("|z| = %.6f is not inside the open unit disc" % abs(z))
        m, d = self.A0.m, self.A0.d
        ent = self.A0.entries.astype(np.complex128) + complex(z) * self.A1
        return ent.reshape(m, d, m, d)


def complex_symbol(path: ComplexEllipticPath, z: complex, p) -> np.ndarray:
    """Symbol of A0 + z A1; invertible for p != 0 by coercivity."""
    pv = np.asarray(getattr(p, "p", p), dtype=np.float64)
    return symbol_from_tensor(path.tensor_at(z), pv)


def complex_symbol_flat(path: ComplexEllipticPath, z: complex, g: TorusGeometry) -> np.ndarray:
    return symbol_flat(path.tensor_at(z), g)
