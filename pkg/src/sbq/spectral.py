"""Fourier-space scalar fields on the periodic square [-pi, pi]^2 and the
multiplier calculus built on them.

Conventions used throughout the package:

* Coefficients follow the numpy ``fft2`` layout: the forward transform carries
  no normalisation factor, the inverse carries ``1/n**2``.  Integer wavenumbers
  ``k = (k1, k2)`` run over ``fftfreq(n) * n``.
* All L2-type norms and inner products include the ``(2*pi)**2`` measure of the
  torus, so e.g. ``||sin x||_L2 = pi * sqrt(2)``.
* Quadratic nonlinearities go through :func:`product` with the 2/3 rule:
  modes with ``max(|k1|, |k2|) > n/3`` are zeroed in both inputs and in the
  output.  This also removes the Nyquist modes ``|k| = n/2`` before any
  dynamics touches them.
* Sup and L^p norms are collocation-grid approximations; pass ``oversample``
  to evaluate on a zero-padded finer grid when the default is too coarse.

Fields are immutable values: every operation returns a new field, so the
functions here are safe to call concurrently from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "SpectralField",
    "VelocityField",
    "derivative",
    "fractional_laplacian",
    "bessel_multiplier",
    "sobolev_norm",
    "velocity_sobolev_norm",
    "biot_savart",
    "stream_to_velocity",
    "product",
    "dealiased_product",
    "inner",
    "l2_norm",
    "linf_norm",
    "lp_norm",
    "resample",
    "random_field",
    "random_divergence_free",
]


class Grid:
    """Uniform n x n collocation grid on the torus [-pi, pi]^2.

    Precomputes integer wavenumber meshes, the 2/3-rule dealiasing mask and
    physical coordinates.  Immutable after construction; two grids compare
    equal iff they have the same ``n``.
    """

    def __init__(self, n: int):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        self.n = n
        self.spacing = 2.0 * np.pi / n
        self.k_max = n // 2 - 1
        k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)  # 0,1,..,n/2-1,-n/2,..,-1
        self.k1 = k[:, None] * np.ones((1, n), dtype=np.int64)
        self.k2 = np.ones((n, 1), dtype=np.int64) * k[None, :]
        self.ksq = (self.k1**2 + self.k2**2).astype(np.float64)
        self.dealias_keep = (np.maximum(np.abs(self.k1), np.abs(self.k2)) <= n / 3.0)
        coord = -np.pi + self.spacing * np.arange(n)
        self.x = coord[:, None] * np.ones((1, n))
        self.y = np.ones((n, 1)) * coord[None, :]
        # index (n/2) along either axis is the unpaired Nyquist line
        self._nyquist = n // 2

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self):
        return hash(("Grid", self.n))

    def __repr__(self):
        return f"Grid(n={self.n})"


@dataclass(frozen=True)
class SpectralField:
    """Real scalar field stored as complex Fourier coefficients.

    Coefficients of a real field satisfy Hermitian symmetry
    ``coeff(-k) == conj(coeff(k))``; fields built through
    :meth:`from_physical` or the module operations keep that property to
    round-off.

    Physical samples are cached (read-only): a field built from physical
    values returns exactly those values, which is what makes snapshot
    round trips bit-exact.
    """

    grid: Grid
    coeffs: np.ndarray
    _values: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        if values.flags.writeable:
            values = values.copy()
            values.setflags(write=False)
        return cls(grid, np.fft.fft2(values), values)

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs: np.ndarray) -> "SpectralField":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {coeffs.shape}")
        return cls(grid, coeffs)

    @classmethod
    def zero(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))

    def values(self) -> np.ndarray:
        """Physical-space samples on the collocation grid (read-only array)."""
        if self._values is None:
            out = np.real(np.fft.ifft2(self.coeffs))
            out.setflags(write=False)
            object.__setattr__(self, "_values", out)
        return self._values

    def mean(self) -> float:
        """Mean value over the torus (the k = 0 coefficient / n^2)."""
        return float(np.real(self.coeffs[0, 0])) / self.grid.n**2

    def hermitian_defect(self) -> float:
        """Relative departure from coeff(-k) == conj(coeff(k))."""
        flipped = np.conj(self.coeffs[self._flip_index()])
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs - flipped)) / scale)

    def _flip_index(self):
        n = self.grid.n
        idx = (-np.arange(n)) % n
        return np.ix_(idx, idx)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    # linear-space arithmetic; grids must match
    def _check(self, other: "SpectralField"):
        if self.grid != other.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class VelocityField:
    """Pair of scalar fields (u1, u2).

    Divergence-free by construction when produced by :func:`biot_savart` or
    :func:`stream_to_velocity`; holds arbitrary vector fields otherwise.
    """

    u1: SpectralField
    u2: SpectralField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("velocity components on different grids")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    def divergence(self) -> SpectralField:
        return derivative(self.u1, "x", 1) + derivative(self.u2, "y", 1)

    def sup_magnitude(self, oversample: int = 1) -> float:
        """max over the collocation grid of sqrt(u1^2 + u2^2)."""
        a = _physical(self.u1, oversample)
        b = _physical(self.u2, oversample)
        return float(np.max(np.hypot(a, b)))

    def is_finite(self) -> bool:
        return self.u1.is_finite() and self.u2.is_finite()


def derivative(f: SpectralField, axis: str, order: int = 1) -> SpectralField:
    """Spectral partial derivative: multiply by (i * k_axis)^order.

    The unpaired Nyquist mode is zeroed for odd orders so derivatives of real
    fields stay real.
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if order < 1:
        raise ValueError("derivative order must be a positive integer")
    g = f.grid
    k = g.k1 if axis == "x" else g.k2
    mult = (1j * k.astype(np.float64)) ** order
    if order % 2 == 1:
        if axis == "x":
            mult[g._nyquist, :] = 0.0
        else:
            mult[:, g._nyquist] = 0.0
    return SpectralField(g, f.coeffs * mult)


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """Apply |k|^s; the k = 0 mode maps to 0.  Requires s >= 0."""
    if s < 0:
        raise ValueError(f"fractional Laplacian exponent must be >= 0, got {s}")
    g = f.grid
    mag = np.sqrt(g.ksq)
    with np.errstate(divide="ignore"):
        mult = np.where(mag > 0, mag**s, 0.0)
    return SpectralField(g, f.coeffs * mult)


def bessel_multiplier(f: SpectralField, s: float) -> SpectralField:
    """Apply (1 + |k|^2)^(s/2); s may be negative."""
    g = f.grid
    return SpectralField(g, f.coeffs * (1.0 + g.ksq) ** (s / 2.0))


def inner(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product over the torus, integral of f*g dV."""
    f._check(g)
    n = f.grid.n
    return float(np.real(np.vdot(f.coeffs, g.coeffs))) * (2.0 * np.pi) ** 2 / n**4


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm: L2 norm of (I - Lap)^(s/2) f, via Parseval."""
    g = f.grid
    w = (1.0 + g.ksq) ** s
    total = float(np.sum(w * np.abs(f.coeffs) ** 2)) * (2.0 * np.pi) ** 2 / g.n**4
    return float(np.sqrt(total))


def velocity_sobolev_norm(v: VelocityField, s: float) -> float:
    """Component-wise combined H^s norm sqrt(||u1||^2 + ||u2||^2)."""
    return float(np.hypot(sobolev_norm(v.u1, s), sobolev_norm(v.u2, s)))


def biot_savart(omega: SpectralField) -> VelocityField:
    """Reconstruct the divergence-free velocity from vorticity.

    Solves psi_hat = -omega_hat / |k|^2 (zero mode dropped) and returns
    u = (-d_y psi, d_x psi), so that d_x u2 - d_y u1 == omega on all
    non-Nyquist modes and div u == 0 exactly in Fourier space.

    Rejects vorticity whose mean exceeds a round-off tolerance: no periodic
    velocity field has nonzero mean curl on the torus.
    """
    g = omega.grid
    mean = abs(omega.coeffs[0, 0]) / g.n**2
    if mean > 1e-12 * max(1.0, l2_norm(omega)):
        raise ValueError(f"vorticity must have zero mean, got mean {mean:.3e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        psi_coeffs = np.where(g.ksq > 0, -omega.coeffs / g.ksq, 0.0)
    psi = SpectralField(g, psi_coeffs)
    return stream_to_velocity(psi)


def stream_to_velocity(psi: SpectralField) -> VelocityField:
    """Perpendicular gradient of the stream function: (-d_y psi, d_x psi)."""
    return VelocityField(-derivative(psi, "y", 1), derivative(psi, "x", 1))


def product(f: SpectralField, g: SpectralField, dealias: bool = True) -> SpectralField:
    """Pointwise physical-space product.

    With ``dealias`` (the default) the 2/3 rule is applied to both inputs and
    to the output, which makes the product alias-free for inputs inside the
    retained ball.
    """
    f._check(g)
    grid = f.grid
    if dealias:
        keep = grid.dealias_keep
        a = np.real(np.fft.ifft2(np.where(keep, f.coeffs, 0.0)))
        b = np.real(np.fft.ifft2(np.where(keep, g.coeffs, 0.0)))
        out = np.fft.fft2(a * b)
        return SpectralField(grid, np.where(keep, out, 0.0))
    return SpectralField.from_physical(grid, f.values() * g.values())


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    return product(f, g, dealias=True)


def _physical(f: SpectralField, oversample: int) -> np.ndarray:
    if oversample == 1:
        return f.values()
    return resample(f, f.grid.n * oversample).values()


def linf_norm(f: SpectralField, oversample: int = 1) -> float:
    """Sup norm sampled on the (optionally oversampled) collocation grid."""
    return float(np.max(np.abs(_physical(f, oversample))))


def lp_norm(f: SpectralField, p: float, oversample: int = 1) -> float:
    """L^p norm by collocation quadrature, p in [2, inf)."""
    if p < 2:
        raise ValueError(f"lp_norm requires p >= 2, got {p}")
    vals = _physical(f, oversample)
    spacing = 2.0 * np.pi / vals.shape[0]
    return float((np.sum(np.abs(vals) ** p) * spacing**2) ** (1.0 / p))


def resample(f: SpectralField, m: int) -> SpectralField:
    """Trigonometric resampling onto an m x m grid by zero padding (m >= n)."""
    n = f.grid.n
    if m == n:
        return f
    if m < n or m % 2 != 0:
        raise ValueError("resample target must be an even integer >= n")
    h = n // 2
    # split each Nyquist line evenly between +h and -h so the padded spectrum
    # stays Hermitian (the corner coefficient ends up quartered)
    src = f.coeffs.copy()
    src[h, :] *= 0.5
    src[:, h] *= 0.5
    ks = np.arange(-h, h + 1)
    si = ks % n  # k = +-h both read the shared source index h
    di = ks % m  # distinct destinations since m > n
    out = np.zeros((m, m), dtype=np.complex128)
    out[np.ix_(di, di)] = src[np.ix_(si, si)]
    return SpectralField(Grid(m), out * (m / n) ** 2)


def random_field(grid: Grid, rng: np.random.Generator, band: int,
                 amplitude: float = 1.0, decay: float = 0.0,
                 zero_mean: bool = False) -> SpectralField:
    """Random real band-limited field with max(|k1|, |k2|) <= band.

    Coefficient magnitudes fall off like (1 + |k|^2)^(-decay/2); the field is
    rescaled so its L2 norm equals ``amplitude`` (zero-amplitude draws are
    left as zero).  ``zero_mean`` clears the k = 0 mode, as required of
    vorticity fields.
    """
    n = grid.n
    if band > n // 2 - 1:
        raise ValueError("band exceeds grid resolution")
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    keep = np.maximum(np.abs(grid.k1), np.abs(grid.k2)) <= band
    raw = np.where(keep, raw, 0.0)
    if decay:
        raw = raw * (1.0 + grid.ksq) ** (-decay / 2.0)
    f = SpectralField(grid, raw)
    # make real: average with the reflected conjugate
    sym = 0.5 * (f.coeffs + np.conj(f.coeffs[f._flip_index()]))
    if zero_mean:
        sym[0, 0] = 0.0
    f = SpectralField(grid, sym)
    norm = l2_norm(f)
    if norm > 0:
        f = f * (amplitude / norm)
    return f


def random_divergence_free(grid: Grid, rng: np.random.Generator, band: int,
                           amplitude: float = 1.0) -> VelocityField:
    """Random divergence-free field from a random band-limited stream function."""
    psi = random_field(grid, rng, band, amplitude)
    return stream_to_velocity(psi)
