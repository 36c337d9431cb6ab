"""Real spherical harmonics on Gauss-Legendre x equispaced-longitude grids.

Fields on the round unit sphere are carried as truncated expansions in the
orthonormal real basis

    Y_{l,0}  = P_l^0(cos t)
    Y_{l,k}  = sqrt(2) P_l^k(cos t) cos(k p)      k > 0
    Y_{l,-k} = sqrt(2) P_l^k(cos t) sin(k p)      k > 0

with ``P_l^k`` the fully normalized spherical Legendre functions without
the Condon-Shortley phase (so ``Y_{1,1}`` is a positive multiple of ``x``), so that
the integral of ``Y_i Y_j`` over the sphere is ``delta_ij``.  Coefficients
are stored flat with index ``l*l + l + k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import roots_legendre, sph_legendre_p_all

__all__ = [
    "SphereGrid",
    "SpectralField",
    "sphere_grid",
    "harmonic_index",
    "n_coeffs",
    "degree_of_index",
    "real_harmonics",
    "grid_basis",
]


def n_coeffs(degree):
    return (degree + 1) ** 2


def harmonic_index(l, k):
    if abs(k) > l:
        raise ValueError(f"order {k} exceeds degree {l}")
    return l * l + l + k


@lru_cache(maxsize=None)
def degree_of_index(degree):
    """Degree ``l`` of each flat coefficient index, as a read-only array."""
    out = np.concatenate([np.full(2 * l + 1, l) for l in range(degree + 1)])
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SphereGrid:
    """Tensor grid: ``nlat`` Gauss-Legendre colatitudes times ``nlon`` longitudes.

    Node arrays are flattened latitude-major, i.e. node ``i*nlon + j`` sits
    at colatitude ``theta_i`` and longitude ``2 pi j / nlon``.
    """

    nlat: int
    nlon: int

    def __post_init__(self):
        if self.nlat < 1 or self.nlon < 1:
            raise ValueError("grid sizes must be positive")

    @cached_property
    def _nodes(self):
        x, w = roots_legendre(self.nlat)
        # north pole first
        x, w = x[::-1], w[::-1]
        theta = np.arccos(x)
        phi = 2.0 * np.pi * np.arange(self.nlon) / self.nlon
        T, P = np.meshgrid(theta, phi, indexing="ij")
        W = np.repeat(w * (2.0 * np.pi / self.nlon), self.nlon)
        arrays = (T.ravel(), P.ravel(), W)
        for a in arrays:
            a.setflags(write=False)
        return arrays

    @property
    def theta(self):
        return self._nodes[0]

    @property
    def phi(self):
        return self._nodes[1]

    @property
    def weights(self):
        """Quadrature weights for the round area element ``sin t dt dp``."""
        return self._nodes[2]

    @property
    def size(self):
        return self.nlat * self.nlon

    def integrate(self, values):
        """Integrate grid values against the round area element (last axis)."""
        return np.asarray(values) @ self.weights

    def max_exact_degree(self):
        """Largest harmonic degree recovered exactly by the forward transform."""
        return min(self.nlat - 1, (self.nlon - 1) // 2)


@lru_cache(maxsize=64)
def sphere_grid(nlat, nlon):
    return SphereGrid(nlat, nlon)


def real_harmonics(degree, theta, phi, derivs=0):
    """Real orthonormal harmonics up to ``degree`` at arbitrary points.

    Parameters
    ----------
    degree : int
        Truncation degree ``N``.
    theta, phi : array_like
        Colatitude and longitude, same shape ``(n,)``.
    derivs : {0, 1, 2}
        Highest order of coordinate derivatives to return.

    Returns
    -------
    dict
        ``"Y"`` of shape ``(n_coeffs, n)``; with ``derivs >= 1`` also
        ``"t"`` and ``"p"`` (first derivatives in theta, phi); with
        ``derivs == 2`` also ``"tt"``, ``"tp"``, ``"pp"``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    npts = theta.shape[0]
    # shape (derivs+1, degree+1, 2*degree+1, npts); orders k >= 0 at [.., k, ..]
    P = sph_legendre_p_all(degree, degree, theta, diff_n=derivs)
    # drop the Condon-Shortley phase so that Y_{1,1} is proportional to +x
    P[:, :, 1 : degree + 1 : 2] *= -1.0
    nc = n_coeffs(degree)
    names = ["Y"]
    if derivs >= 1:
        names += ["t", "p"]
    if derivs >= 2:
        names += ["tt", "tp", "pp"]
    out = {name: np.empty((nc, npts)) for name in names}
    ks = np.arange(degree + 1)
    cos_kp = np.cos(ks[:, None] * phi[None, :])
    sin_kp = np.sin(ks[:, None] * phi[None, :])
    sqrt2 = np.sqrt(2.0)
    for l in range(degree + 1):
        base = l * l + l
        out["Y"][base] = P[0, l, 0]
        if derivs >= 1:
            out["t"][base] = P[1, l, 0]
            out["p"][base] = 0.0
        if derivs >= 2:
            out["tt"][base] = P[2, l, 0]
            out["tp"][base] = 0.0
            out["pp"][base] = 0.0
        for k in range(1, l + 1):
            c, s = cos_kp[k], sin_kp[k]
            p0 = sqrt2 * P[0, l, k]
            out["Y"][base + k] = p0 * c
            out["Y"][base - k] = p0 * s
            if derivs >= 1:
                p1 = sqrt2 * P[1, l, k]
                out["t"][base + k] = p1 * c
                out["t"][base - k] = p1 * s
                out["p"][base + k] = -k * p0 * s
                out["p"][base - k] = k * p0 * c
            if derivs >= 2:
                p2 = sqrt2 * P[2, l, k]
                out["tt"][base + k] = p2 * c
                out["tt"][base - k] = p2 * s
                out["tp"][base + k] = -k * p1 * s
                out["tp"][base - k] = k * p1 * c
                out["pp"][base + k] = -k * k * p0 * c
                out["pp"][base - k] = -k * k * p0 * s
    return out


@lru_cache(maxsize=32)
def grid_basis(degree, nlat, nlon, derivs=0):
    """Cached, read-only :func:`real_harmonics` on a :class:`SphereGrid`."""
    grid = sphere_grid(nlat, nlon)
    out = real_harmonics(degree, grid.theta, grid.phi, derivs=derivs)
    for a in out.values():
        a.setflags(write=False)
    return out


def default_grid_shape(degree):
    return degree + 1, 2 * degree + 2


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar field on the unit sphere in truncated real harmonics.

    ``coeffs`` has length ``(degree+1)**2``.  Grid values on the attached
    ``(nlat, nlon)`` grid are synthesized lazily and cached.
    """

    degree: int
    coeffs: np.ndarray
    nlat: int = 0
    nlon: int = 0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (n_coeffs(self.degree),):
            raise ValueError(
                f"expected {n_coeffs(self.degree)} coefficients for degree "
                f"{self.degree}, got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        nlat, nlon = default_grid_shape(self.degree)
        if self.nlat == 0:
            object.__setattr__(self, "nlat", nlat)
        if self.nlon == 0:
            object.__setattr__(self, "nlon", nlon)
        if self.nlat < self.degree + 1 or self.nlon < 2 * self.degree + 2:
            raise ValueError("grid too coarse for the truncation degree")

    # constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, degree, **grid):
        return cls(degree, np.zeros(n_coeffs(degree)), **grid)

    @classmethod
    def constant(cls, value, degree, **grid):
        c = np.zeros(n_coeffs(degree))
        c[0] = value * np.sqrt(4.0 * np.pi)
        return cls(degree, c, **grid)

    @classmethod
    def from_triples(cls, triples, degree, **grid):
        """Build from ``[[l, k, value], ...]``; repeated entries add up."""
        c = np.zeros(n_coeffs(degree))
        for entry in triples:
            l, k, v = entry
            l, k = int(l), int(k)
            if l > degree:
                raise ValueError(f"harmonic degree {l} exceeds truncation {degree}")
            c[harmonic_index(l, k)] += float(v)
        return cls(degree, c, **grid)

    @classmethod
    def from_values(cls, values, degree, nlat, nlon):
        """Project grid values onto degree ``degree`` by quadrature."""
        grid = sphere_grid(nlat, nlon)
        Y = grid_basis(degree, nlat, nlon)["Y"]
        c = Y @ (np.asarray(values, dtype=float) * grid.weights)
        return cls(degree, c, nlat=nlat, nlon=nlon)

    @classmethod
    def from_function(cls, fn, degree, nlat=0, nlon=0):
        """Project ``fn(theta, phi)`` sampled on the field grid."""
        if nlat == 0 or nlon == 0:
            nlat, nlon = default_grid_shape(degree)
        grid = sphere_grid(nlat, nlon)
        return cls.from_values(fn(grid.theta, grid.phi), degree, nlat, nlon)

    # views -------------------------------------------------------------

    @property
    def grid(self):
        return sphere_grid(self.nlat, self.nlon)

    @cached_property
    def values(self):
        v = self.coeffs @ grid_basis(self.degree, self.nlat, self.nlon)["Y"]
        v.setflags(write=False)
        return v

    def triples(self, atol=0.0):
        ls = degree_of_index(self.degree)
        out = []
        for i, v in enumerate(self.coeffs):
            if abs(v) > atol:
                l = int(ls[i])
                out.append([l, i - l * l - l, float(v)])
        return out

    def with_grid(self, nlat, nlon):
        return SpectralField(self.degree, self.coeffs, nlat=nlat, nlon=nlon)

    def with_degree(self, degree):
        """Zero-pad or truncate to another degree (grid reset to default)."""
        c = np.zeros(n_coeffs(degree))
        n = min(len(c), len(self.coeffs))
        c[:n] = self.coeffs[:n]
        return SpectralField(degree, c)

    def on_grid(self, nlat, nlon, derivs=0):
        """Values (and coordinate derivatives) on another grid."""
        B = grid_basis(self.degree, nlat, nlon, derivs)
        return {name: self.coeffs @ M for name, M in B.items()}

    def evaluate(self, theta, phi, derivs=0):
        B = real_harmonics(self.degree, theta, phi, derivs)
        return {name: self.coeffs @ M for name, M in B.items()}

    def laplacian(self):
        ls = degree_of_index(self.degree)
        return SpectralField(
            self.degree, -ls * (ls + 1) * self.coeffs, nlat=self.nlat, nlon=self.nlon
        )

    def integral(self):
        """Integral over the round unit sphere."""
        return self.coeffs[0] * np.sqrt(4.0 * np.pi)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def is_constant(self, atol=0.0):
        return bool(np.all(np.abs(self.coeffs[1:]) <= atol))

    # arithmetic (same degree and grid) ----------------------------------

    def _same(self, other):
        if other.degree != self.degree:
            raise ValueError("degree mismatch")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._same(other)
            return SpectralField(self.degree, self.coeffs + other.coeffs, self.nlat, self.nlon)
        return self + SpectralField.constant(other, self.degree, nlat=self.nlat, nlon=self.nlon)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        return SpectralField(self.degree, scalar * self.coeffs, self.nlat, self.nlon)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __repr__(self):
        return f"SpectralField(degree={self.degree}, grid={self.nlat}x{self.nlon})"
