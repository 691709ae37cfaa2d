"""Cube schedules, renormalized products, and the multiscale kernels.

Scale k of the decomposition is built from the averaged-projection
symbols of the cubes l_1, ..., l_k.  In the real branch everything is
conjugated by Ahat^{1/2}: with Ttilde = Ahat^{1/2} That Ahat^{-1/2}
Hermitian and Rtilde = I - Ttilde a contraction, the products
Mtilde_k = Rtilde_1 ... Rtilde_k give

    Chat_k = Ahat^{-1/2} [Mtilde_{k-1} Mtilde_{k-1}^H
                          - Mtilde_k Mtilde_k^H] Ahat^{-1/2},

which telescopes exactly to Ahat^{-1} and is positive semidefinite per
frequency.  The complex branch cannot take Hermitian roots, so it uses
the order-reversed product form with the duals Rhat' = Ahat Rhat Ahat^-1
folded in analytically (the inner Ahat^-1 Ahat pairs cancel):

    Chat_{A,k} = P_{k-1} rev_{k-1} Ahat^-1 - P_k rev_k Ahat^-1,
    P_k = Rhat_1 ... Rhat_k,   rev_k = Rhat_k ... Rhat_1.

Agreement of the two branches at real coefficients is a mandatory
cross-check exercised by the test suite.

Skipped levels are explicit: they contribute the identity to every
product and an identically zero kernel.  Scale N+1 carries the remainder
and makes no finite-range claim.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .elliptic import EllipticMap, ComplexEllipticPath, complex_symbol_flat, sqrt_and_invsqrt_flat, symbol_flat
from .errors import EmptyFarRegion, InvalidSchedule
from .lattice import TorusGeometry, cube, rho_inf_grid
from .projector import StiffnessFactor, assemble_stiffness, local_green_flat
from .spectral import (
    Kernel,
    MultiplierTable,
    flat_table,
    grid_table,
    multiplier_to_kernel,
    spectral_norms,
)


@dataclass(frozen=True)
class CubeSchedule:
    """Side parameters per level; None marks an explicitly skipped level."""

    levels: tuple
    S: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def N(self) -> int:
        return len(self.levels)

    @property
    def ranges(self) -> tuple:
        """r_k = -1 + 2 sum_{j<=k, non-skip} (l_j - 1), for k = 1..N."""
        out = []
        acc = -1
        for l in self.levels:
            if l is not None:
                acc += 2 * (l - 1)
            out.append(acc)
        return tuple(out)

    def is_skipped(self, k: int) -> bool:
        """Level index k is 1-based."""
        return self.levels[k - 1] is None


def build_schedule(g: TorusGeometry, override=None) -> CubeSchedule:
    """Default cube sides per level, or a validated user override.

    Defaults: l_j = floor(L^j/8) + 1 for L >= 17; the same with l_1 = 3
    for odd 7 <= L <= 15; for L in {3, 5} the first two levels are
    skipped.  Non-final ranges reaching S/2 are flagged with a warning
    (coverage degenerates), not an error.
    """
    S = g.side
    if override is not None:
        levels = list(override)
        if len(levels) != g.N:
            raise InvalidSchedule(
                "override has %d levels but N = %d" % (len(levels), g.N)
            )
        checked = []
        for j, l in enumerate(levels, start=1):
            if l is None:
                checked.append(None)
                continue
            l = int(l)
            if l < 3:
                raise InvalidSchedule("level %d: side %d is below 3" % (j, l))
            if l - 1 >= S:
                raise InvalidSchedule(
                    "level %d: side %d does not fit in torus of side %d" % (j, l, S)
                )
            checked.append(l)
        sched = CubeSchedule(tuple(checked), S)
    else:
        levels = []
        for j in range(1, g.N + 1):
            if g.L >= 17:
                levels.append(g.L ** j // 8 + 1)
            elif g.L >= 7:
                levels.append(3 if j == 1 else g.L ** j // 8 + 1)
            else:
                levels.append(None if j <= 2 else g.L ** j // 8 + 1)
        sched = CubeSchedule(tuple(levels), S)
    ranges = sched.ranges
    for k in range(1, sched.N):
        if ranges[k - 1] >= S / 2:
            warnings.warn(
                "range r_%d = %d already reaches S/2 = %.1f" % (k, ranges[k - 1], S / 2),
                stacklevel=2,
            )
    return sched


@dataclass
class ProjectorSymbols:
    """Per-level symbol tables on the p != 0 rows (flat layout)."""

    level: int
    l: int
    Ghat: np.ndarray = field(repr=False)
    That: np.ndarray = field(repr=False)
    Ttilde: np.ndarray = field(repr=False)
    Rtilde: np.ndarray = field(repr=False)


def _identity_stack(F: int, m: int) -> np.ndarray:
    out = np.zeros((F, m, m), dtype=np.complex128)
    out[:, np.arange(m), np.arange(m)] = 1.0
    return out


def renormalized_products(level_symbols, F: int, m: int):
    """Mtilde_k = Rtilde_1 ... Rtilde_k for k = 0..N; skips give identity."""
    products = [_identity_stack(F, m)]
    for sym in level_symbols:
        if sym is None:
            products.append(products[-1])
        else:
            products.append(products[-1] @ sym.Rtilde)
    return products


def _hermitize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + np.conj(np.swapaxes(X, -1, -2)))


@dataclass
class DecompositionResult:
    geometry: TorusGeometry
    A: EllipticMap
    schedule: CubeSchedule
    tables: list
    kernels: list
    far_constants: list
    green_table: MultiplierTable
    symbols: list
    products: list = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_scales(self) -> int:
        return self.schedule.N + 1

    def table(self, k: int) -> MultiplierTable:
        """Scale index k is 1-based, up to N+1."""
        return self.tables[k - 1]

    def kernel(self, k: int) -> Kernel:
        return self.kernels[k - 1]


def kernel_sup_norm(K: Kernel) -> float:
    """sup over sites of the operator norm of K(x)."""
    g = K.geometry
    flat = flat_table(K.values, g)
    return float(np.max(spectral_norms(flat)))


def far_field_constant(K: Kernel, r: int):
    """Mean of the kernel beyond range r, and the max deviation from it."""
    g = K.geometry
    mask = rho_inf_grid(g) > r
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise EmptyFarRegion("no site lies beyond range %d" % r)
    far = K.values[:, :, mask]
    C = far.mean(axis=-1)
    dev = np.moveaxis(far - C[:, :, None], -1, 0)
    residual = float(np.max(spectral_norms(dev)))
    return C, residual


def _level_symbols_real(A, g, sched, Ahat_body, Asqrt):
    symbols = []
    for j, l in enumerate(sched.levels, start=1):
        if l is None:
            symbols.append(None)
            continue
        factor = assemble_stiffness(A, cube(l, g))
        Ghat = local_green_flat(factor, g)[1:]
        That = (Ghat @ Ahat_body) / factor.cube.volume
        Ttilde = _hermitize((Asqrt @ Ghat @ Asqrt) / factor.cube.volume)
        Rtilde = _identity_stack(*Ttilde.shape[:2]) - Ttilde
        symbols.append(
            ProjectorSymbols(level=j, l=l, Ghat=Ghat, That=That, Ttilde=Ttilde, Rtilde=Rtilde)
        )
    return symbols


def _embed_body(body: np.ndarray, g: TorusGeometry) -> np.ndarray:
    out = np.zeros((g.site_count,) + body.shape[1:], dtype=np.complex128)
    out[1:] = body
    return out


def decompose(A: EllipticMap, g: TorusGeometry, sched: CubeSchedule) -> DecompositionResult:
    """Build all scale kernels C_1..C_{N+1} with diagnostics.

    The returned diagnostics hold the telescoping residual, per-scale
    range residuals (None where the far region is empty), per-scale
    normalized minimum eigenvalues, the worst relative imaginary residue
    of the kernel reconstructions, and the schedule with its ranges.
    """
    if sched.S != g.side:
        raise InvalidSchedule("schedule was built for side %d, not %d" % (sched.S, g.side))
    m = g.m
    Ahat = symbol_flat(A.tensor, g)
    body = Ahat[1:]
    Asqrt, Ainvsqrt = sqrt_and_invsqrt_flat(body)
    green_body = np.linalg.inv(body)
    green_body = _hermitize(green_body)
    green_table = MultiplierTable(g, grid_table(_embed_body(green_body, g), g), real_kernel=True)

    symbols = _level_symbols_real(A, g, sched, body, Asqrt)
    products = renormalized_products(symbols, body.shape[0], m)

    grams = [_hermitize(Mk @ np.conj(np.swapaxes(Mk, -1, -2))) for Mk in products]
    tables = []
    kernels = []
    psd_mins = []
    imag_rel = 0.0
    for k in range(1, sched.N + 2):
        if k <= sched.N:
            diff = grams[k - 1] - grams[k]
        else:
            diff = grams[sched.N]
        Ck = _hermitize(Ainvsqrt @ diff @ Ainvsqrt)
        eigs = np.linalg.eigvalsh(Ck)
        norms = np.maximum(np.max(np.abs(eigs), axis=-1), 1e-300)
        psd_mins.append(float(np.min(eigs[:, 0] / norms)))
        table = MultiplierTable(g, grid_table(_embed_body(Ck, g), g), real_kernel=True)
        kern = multiplier_to_kernel(table)
        scale = max(float(np.max(np.abs(kern.values))), 1e-300)
        imag_rel = max(imag_rel, kern.imag_residue / scale)
        tables.append(table)
        kernels.append(kern)

    sums = np.sum([flat_table(t.values, g)[1:] for t in tables], axis=0)
    denom = np.maximum(spectral_norms(green_body, hermitian=True), 1e-300)
    sum_residual = float(np.max(spectral_norms(sums - green_body) / denom))

    ranges = sched.ranges
    far_constants = []
    range_residual = []
    for k in range(1, sched.N + 1):
        try:
            C, residual = far_field_constant(kernels[k - 1], ranges[k - 1])
        except EmptyFarRegion:
            far_constants.append(None)
            range_residual.append(None)
            continue
        far_constants.append((C, residual))
        sup = kernel_sup_norm(kernels[k - 1])
        range_residual.append(residual / sup if sup > 0.0 else 0.0)

    diagnostics = {
        "sum_residual": sum_residual,
        "range_residual": range_residual,
        "min_psd_eig": psd_mins,
        "imag_residue": imag_rel,
        "schedule": list(sched.levels),
        "ranges": list(ranges),
    }
    return DecompositionResult(
        geometry=g,
        A=A,
        schedule=sched,
        tables=tables,
        kernels=kernels,
        far_constants=far_constants,
        green_table=green_table,
        symbols=symbols,
        products=products,
        diagnostics=diagnostics,
    )


@dataclass
class ComplexDecompositionResult:
    geometry: TorusGeometry
    z: complex
    tables: list
    green_table: MultiplierTable

    def table(self, k: int) -> MultiplierTable:
        return self.tables[k - 1]


def complex_decompose(
    path: ComplexEllipticPath, z: complex, g: TorusGeometry, sched: CubeSchedule
) -> ComplexDecompositionResult:
    """Scale multipliers of the family member A0 + z A1, |z| < 1.

    Uses the non-Hermitian product form with duals folded analytically;
    telescoping to the full Green symbol is exact by construction.
    """
    if sched.S != g.side:
        raise InvalidSchedule("schedule was built for side %d, not %d" % (sched.S, g.side))
    m = g.m
    tensor = path.tensor_at(z)
    Ahat = complex_symbol_flat(path, z, g)
    body = Ahat[1:]
    Ainv = np.linalg.inv(body)
    F = body.shape[0]
    is_real = complex(z).imag == 0.0

    P = _identity_stack(F, m)
    rev = _identity_stack(F, m)
    F_prev = Ainv
    tables = []
    remainder = F_prev
    for j, l in enumerate(sched.levels, start=1):
        if l is None:
            Ck = np.zeros((F, m, m), dtype=np.complex128)
        else:
            factor = assemble_stiffness(tensor, cube(l, g))
            Ghat = local_green_flat(factor, g)[1:]
            That = (Ghat @ body) / factor.cube.volume
            Rhat = _identity_stack(F, m) - That
            P = P @ Rhat
            rev = Rhat @ rev
            F_cur = P @ rev @ Ainv
            Ck = F_prev - F_cur
            F_prev = F_cur
        remainder = F_prev
        tables.append(
            MultiplierTable(g, grid_table(_embed_body(Ck, g), g), real_kernel=is_real)
        )
    tables.append(
        MultiplierTable(g, grid_table(_embed_body(remainder, g), g), real_kernel=is_real)
    )
    green = MultiplierTable(g, grid_table(_embed_body(Ainv, g), g), real_kernel=is_real)
    return ComplexDecompositionResult(geometry=g, z=complex(z), tables=tables, green_table=green)
