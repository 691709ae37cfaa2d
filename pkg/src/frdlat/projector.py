"""The cube-local energy projection and its frequency-space symbols.

The local space is ALL fields supported in the open cube interior
Q = {1,...,l-1}^d, with no zero-mean side constraint: a constant supported
strictly inside the torus vanishes, so the energy form is definite there
and the projection is well posed.  Skipped scales are represented
explicitly by the decomposition layer, never by l = 2 stand-in cubes.
(The source material is ambiguous on whether the global zero-mean
constraint restricts to the local space; this implementation fixes the
support-only reading, which is the one the locality arguments use.)

The stiffness matrix K[(z,s),(z',s')] = <A grad(delta_{z'} e_{s'}),
grad(delta_z e_s)> couples nearest and diagonal neighbors only and is
independent of frequency, so one factorization per cube size is reused
across every frequency and basis vector.  The averaged-projection symbol
is That(p) = l^-d Ghat_Q(p) Ahat(p) with
Ghat_Q(p)_{st} = (f_p e_s)|_Q^dagger K^-1 (f_p e_t)|_Q.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .elliptic import EllipticMap, symbol_from_tensor
from .errors import (
    FactorizationFailure,
    ShapeMismatch,
    TooLargeForOracle,
    ZeroFrequency,
)
from .fields import Field, apply_elliptic
from .lattice import Cube, TorusGeometry, p_flat

DENSE_LIMIT = 2048
ORACLE_SITE_LIMIT = 4096


def _coefficient_tensor(A) -> np.ndarray:
    if isinstance(A, EllipticMap):
        return A.tensor.astype(np.float64)
    tensor = np.asarray(A)
    if tensor.ndim == 2:
        n = tensor.shape[0]
        # Infer (m, d) is impossible from a square array alone; require 4-d.
        raise ShapeMismatch("pass coefficients as a (m, d, m, d) tensor")
    if tensor.ndim != 4 or tensor.shape[0] != tensor.shape[2] or tensor.shape[1] != tensor.shape[3]:
        raise ShapeMismatch("coefficient tensor must have shape (m, d, m, d)")
    return tensor


def _offset_blocks(tensor: np.ndarray):
    """m x m coupling block per site offset w with both ends in Q."""
    m, d = tensor.shape[0], tensor.shape[1]
    blocks = {}

    def add(w, blk):
        w = tuple(int(v) for v in w)
        if w in blocks:
            blocks[w] = blocks[w] + blk
        else:
            blocks[w] = blk

    diag = np.einsum("rjsj->rs", tensor) + np.einsum("rjsk->rs", tensor)
    add((0,) * d, diag)
    for c in range(d):
        e_c = np.zeros(d, dtype=int)
        e_c[c] = 1
        add(e_c, -np.einsum("rjs->rs", tensor[:, :, :, c]))
        add(-e_c, -np.einsum("rsk->rs", tensor[:, c, :, :]))
    for a in range(d):
        for b in range(d):
            if a == b:
                continue
            w = np.zeros(d, dtype=int)
            w[b] = 1
            w[a] = -1
            add(w, tensor[:, a, :, b])
    return blocks


@dataclass
class StiffnessFactor:
    """Factorized local energy matrix over the cube interior."""

    cube: Cube
    tensor: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    n_sites: int
    m: int
    mode: str
    handle: object = field(repr=False)

    @property
    def n(self) -> int:
        return self.n_sites * self.m

    @property
    def is_complex(self) -> bool:
        return np.issubdtype(self.matrix.dtype, np.complexfloating)

    def solve(self, B: np.ndarray) -> np.ndarray:
        """K^-1 B for B of shape (n, k); complex right-hand sides allowed."""
        if self.mode == "cholesky":
            if np.issubdtype(B.dtype, np.complexfloating):
                re = scipy.linalg.cho_solve(self.handle, np.ascontiguousarray(B.real))
                im = scipy.linalg.cho_solve(self.handle, np.ascontiguousarray(B.imag))
                return re + 1j * im
            return scipy.linalg.cho_solve(self.handle, B)
        if self.mode == "lu":
            return scipy.linalg.lu_solve(self.handle, B.astype(np.complex128, copy=False))
        return self.handle.solve(B)


def assemble_stiffness(A, cube: Cube) -> StiffnessFactor:
    """Assemble and factorize K over the interior sites of the cube.

    A may be an EllipticMap (real branch, Cholesky) or a complex
    (m, d, m, d) tensor (general LU).  Positive definiteness in the real
    branch is verified by the factorization itself.
    """
    tensor = _coefficient_tensor(A)
    m, d = tensor.shape[0], tensor.shape[1]
    if cube.d != d:
        raise ShapeMismatch("cube dimension %d does not match coefficients %d" % (cube.d, d))
    sites = cube.interior
    n_sites = sites.shape[0]
    side = cube.l - 1
    index = np.ravel_multi_index((sites - 1).T, dims=(side,) * d)
    order = np.argsort(index)
    assert np.array_equal(index[order], np.arange(n_sites))

    is_complex = np.issubdtype(tensor.dtype, np.complexfloating)
    dtype = np.complex128 if is_complex else np.float64
    K4 = np.zeros((n_sites, m, n_sites, m), dtype=dtype)
    for w, blk in _offset_blocks(tensor).items():
        shifted = sites + np.asarray(w)
        ok = np.all((shifted >= 1) & (shifted <= side), axis=1)
        if not np.any(ok):
            continue
        rows = np.arange(n_sites)[ok]
        cols = np.ravel_multi_index((shifted[ok] - 1).T, dims=(side,) * d)
        K4[rows, :, cols, :] += blk
    K = K4.reshape(n_sites * m, n_sites * m)

    n = n_sites * m
    if is_complex:
        if n <= DENSE_LIMIT:
            handle = scipy.linalg.lu_factor(K)
            mode = "lu"
        else:
            handle = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(K))
            mode = "sparse"
    else:
        if n <= DENSE_LIMIT:
            try:
                handle = scipy.linalg.cho_factor(K)
            except scipy.linalg.LinAlgError as exc:
                raise FactorizationFailure(
                    "stiffness Cholesky failed for cube l=%d: %s" % (cube.l, exc)
                ) from exc
            mode = "cholesky"
        else:
            handle = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(K))
            mode = "sparse"
    return StiffnessFactor(
        cube=cube,
        tensor=tensor,
        matrix=K,
        n_sites=n_sites,
        m=m,
        mode=mode,
        handle=handle,
    )


def _phases(factor: StiffnessFactor, p_rows: np.ndarray) -> np.ndarray:
    """exp(i <p, z>) over interior sites, shape (n_sites, n_freq)."""
    return np.exp(1j * (factor.cube.interior @ p_rows.T))


def local_green_flat(
    factor: StiffnessFactor, g: TorusGeometry, chunk: int = 4096
) -> np.ndarray:
    """Ghat_Q(p) for every frequency of g, shape (S^d, m, m).

    Row order matches lattice.p_flat.  Frequencies are processed in fixed
    chunks so memory stays bounded and results do not depend on chunking.
    """
    m = factor.m
    ps = p_flat(g)
    F = ps.shape[0]
    eye = np.eye(m)
    out = np.empty((F, m, m), dtype=np.complex128)
    for start in range(0, F, chunk):
        rows = ps[start : start + chunk]
        phi = _phases(factor, rows)
        nc = rows.shape[0]
        W = np.einsum("zf,st->zsft", phi, eye).reshape(factor.n, nc * m)
        X = factor.solve(W).reshape(factor.n_sites, m, nc, m)
        out[start : start + chunk] = np.einsum("zf,zsft->fst", np.conj(phi), X)
    return out


def projector_symbol(factor: StiffnessFactor, p) -> np.ndarray:
    """That(p) = l^-d Ghat_Q(p) Ahat(p) for a single frequency p != 0."""
    pv = np.asarray(getattr(p, "p", p), dtype=np.float64)
    if np.allclose(pv, 0.0):
        raise ZeroFrequency("projector symbol undefined at p = 0")
    m = factor.m
    phi = _phases(factor, pv[None, :])[:, 0]
    W = np.einsum("z,st->zst", phi, np.eye(m)).reshape(factor.n, m)
    X = factor.solve(W).reshape(factor.n_sites, m, m)
    G = np.einsum("z,zst->st", np.conj(phi), X)
    Ahat = symbol_from_tensor(factor.tensor, pv)
    return (G @ Ahat) / factor.cube.volume


def dual_symbol(T_flat: np.ndarray, A_flat: np.ndarray) -> np.ndarray:
    """T'(p) = Ahat(p) That(p) Ahat(p)^-1, batched over frequencies."""
    X = A_flat @ T_flat
    Xt = np.swapaxes(X, -1, -2)
    At = np.swapaxes(A_flat, -1, -2)
    return np.swapaxes(np.linalg.solve(At, Xt), -1, -2)


def oracle_projection(A, cube: Cube, phi: Field) -> Field:
    """The projection onto fields supported in Q, by direct dense solve.

    Small-torus oracle: the variational identity is solved with the cube
    stiffness and the result embedded back into the torus; the residual of
    the identity is re-checked and treated as a bug if violated.
    """
    g = phi.geometry
    if g.site_count > ORACLE_SITE_LIMIT:
        raise TooLargeForOracle(
            "site count %d exceeds the oracle guard %d" % (g.site_count, ORACLE_SITE_LIMIT)
        )
    if cube.l - 1 >= g.side:
        raise ShapeMismatch("cube does not fit in the torus")
    factor = assemble_stiffness(A, cube)
    rhs_field = apply_elliptic(A, phi)
    sites = cube.interior
    site_sel = tuple(sites.T)
    # rhs[(z, s)] = (phi, delta_z e_s)_+ = (A-applied phi) at (s, z).
    rhs = np.stack([rhs_field.values[s][site_sel] for s in range(g.m)], axis=1)
    v = factor.solve(rhs.reshape(factor.n, 1)).reshape(factor.n_sites, g.m)
    out_vals = np.zeros(g.field_shape(), dtype=v.dtype)
    for s in range(g.m):
        out_vals[(s,) + site_sel] = v[:, s]
    out = Field(g, out_vals)
    resid_field = apply_elliptic(A, Field(g, out.values - phi.values))
    resid = max(
        float(np.max(np.abs(resid_field.values[s][site_sel]))) for s in range(g.m)
    )
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if resid > 1e-9 * scale:
        raise FactorizationFailure(
            "projection residual %.3e violates the variational identity" % resid
        )
    return out
