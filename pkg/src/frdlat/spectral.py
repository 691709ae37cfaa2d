"""Discrete Fourier transforms on the torus and the multiplier calculus.

Conventions: the forward transform is hat f(p) = sum_x e^{-i<p,x>} f(x) and
the inverse carries the S^-d factor, which is exactly numpy's fftn/ifftn
pair, so the transforms delegate to pocketfft (deterministic, handles the
odd composite sizes L^N).  Frequency tables are stored on the canonical
grid: slot n' in {0,...,S-1} along each axis holds the centered index
n = n' or n' - S, matching the FFT layout.

The p = 0 slot of every multiplier is pinned to the zero matrix: all
operators here act on zero-mean fields, where constants vanish, and the
pin fixes the kernel's additive-constant ambiguity (kernels are stored in
the canonical zero-mean gauge).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ImaginaryResidue, OrderTooHigh, ShapeMismatch
from .fields import Field
from .lattice import TorusGeometry

DEFAULT_MAX_ORDER = 4
IMAG_TOL = 1e-10


@dataclass
class Kernel:
    """Real matrix-valued map on the torus, zero mean per entry."""

    geometry: TorusGeometry
    values: np.ndarray
    imag_residue: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.geometry.kernel_shape():
            raise ShapeMismatch(
                "kernel values %s do not match geometry %s"
                % (self.values.shape, self.geometry.kernel_shape())
            )

    @property
    def site_axes(self) -> tuple:
        return tuple(range(2, 2 + self.geometry.d))

    def mean_residual(self) -> float:
        sums = np.abs(self.values.sum(axis=self.site_axes))
        scale = self.geometry.site_count * max(np.max(np.abs(self.values)), 1e-300)
        return float(np.max(sums) / scale)


@dataclass
class MultiplierTable:
    """Complex m x m matrix per frequency; the p = 0 slot is pinned zero."""

    geometry: TorusGeometry
    values: np.ndarray
    real_kernel: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.geometry.kernel_shape():
            raise ShapeMismatch(
                "multiplier values %s do not match geometry %s"
                % (self.values.shape, self.geometry.kernel_shape())
            )
        zero = (slice(None), slice(None)) + (0,) * self.geometry.d
        self.values[zero] = 0.0

    @property
    def site_axes(self) -> tuple:
        return tuple(range(2, 2 + self.geometry.d))


def _site_axes(values: np.ndarray, g: TorusGeometry) -> tuple:
    return tuple(range(values.ndim - g.d, values.ndim))


def dft_field(phi: Field) -> Field:
    """Forward transform per component; output lives on the dual grid."""
    g = phi.geometry
    hat = np.fft.fftn(phi.values, axes=_site_axes(phi.values, g))
    return Field(g, hat)


def idft_field(phi_hat: Field) -> Field:
    g = phi_hat.geometry
    vals = np.fft.ifftn(phi_hat.values, axes=_site_axes(phi_hat.values, g))
    return Field(g, vals)


def kernel_to_multiplier(K: Kernel) -> MultiplierTable:
    g = K.geometry
    hat = np.fft.fftn(K.values, axes=_site_axes(K.values, g))
    return MultiplierTable(g, hat, real_kernel=True)


def multiplier_to_kernel(M: MultiplierTable, tol: float = IMAG_TOL) -> Kernel:
    """Inverse transform, canonicalized to zero mean by the pinned p = 0 slot.

    The reconstruction must be real: the residual imaginary part is
    recorded on the kernel and rejected beyond tol * max|entry|.
    """
    g = M.geometry
    vals = np.fft.ifftn(M.values, axes=_site_axes(M.values, g))
    scale = max(float(np.max(np.abs(vals.real))), 1e-300)
    residue = float(np.max(np.abs(vals.imag)))
    if residue > tol * scale:
        raise ImaginaryResidue(
            "imaginary residue %.3e exceeds %.1e of max entry %.3e"
            % (residue, tol, scale)
        )
    return Kernel(g, vals.real.copy(), imag_residue=residue)


def apply_multiplier(M: MultiplierTable, phi: Field) -> Field:
    """Transform, multiply per frequency, transform back; zero-mean output."""
    g = phi.geometry
    if M.geometry != g:
        raise ShapeMismatch("multiplier and field geometries differ")
    axes = _site_axes(phi.values, g)
    phi_hat = np.fft.fftn(phi.values, axes=axes)
    out_hat = np.einsum("rs...,s...->r...", M.values, phi_hat)
    out = np.fft.ifftn(out_hat, axes=axes)
    if not phi.complex_mode and M.real_kernel:
        scale = max(float(np.max(np.abs(out.real))), 1e-300)
        residue = float(np.max(np.abs(out.imag)))
        if residue > IMAG_TOL * scale:
            raise ImaginaryResidue(
                "multiplier output has imaginary residue %.3e" % residue
            )
        out = out.real.copy()
    return Field(g, out, zero_mean=True)


def kernel_derivative(
    K: Kernel, alpha, max_order: int = DEFAULT_MAX_ORDER
) -> Kernel:
    """Iterated forward differences prod_i grad_i^alpha_i of the kernel."""
    g = K.geometry
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != g.d or any(a < 0 for a in alpha):
        raise ValueError("alpha must be %d nonnegative integers" % g.d)
    if sum(alpha) > max_order:
        raise OrderTooHigh("|alpha| = %d exceeds max order %d" % (sum(alpha), max_order))
    vals = K.values
    for i, a in enumerate(alpha):
        axis = 2 + i
        for _ in range(a):
            vals = np.roll(vals, -1, axis=axis) - vals
    return Kernel(g, vals)


def reflect_sites(values: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """values at -x: flip each site axis and roll the origin back to slot 0."""
    out = values
    for axis in _site_axes(values, g):
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out


def flat_table(values: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """(m, m, *grid) -> (S^d, m, m), rows aligned with lattice.p_flat."""
    m = g.m
    moved = np.moveaxis(values, (0, 1), (-2, -1))
    return moved.reshape(g.site_count, m, m)


def grid_table(flat: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """(S^d, m, m) -> (m, m, *grid), inverse of flat_table."""
    m = g.m
    grid = flat.reshape(g.site_shape + (m, m))
    return np.moveaxis(grid, (-2, -1), (0, 1))


def spectral_norms(flat: np.ndarray, hermitian: bool = False) -> np.ndarray:
    """Operator 2-norm per frequency of a flat (F, m, m) stack."""
    if flat.shape[-1] == 1:
        return np.abs(flat[..., 0, 0])
    if hermitian:
        return np.max(np.abs(np.linalg.eigvalsh(flat)), axis=-1)
    return np.linalg.svd(flat, compute_uv=False)[..., 0]
