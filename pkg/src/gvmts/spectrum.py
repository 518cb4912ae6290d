"""The order-k generalized von Mises (GvM) spectral model.

A GvM_k spectrum is a circular exponential-cosine density rescaled to total
mass sigma^2.  This module provides its density, distribution function,
spectral Shannon entropy, Kullback-Leibler functionals, exponential tilting
of an arbitrary reference spectrum, and the map from parameters to the
autocovariance function of the corresponding stationary time series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleError, QuadratureError, SupportError
from .special import (
    GvMShape,
    _ab_tables,
    _cell_gl_nodes,
    _gh_quad_scaled,
    _gvm2_cancelled,
    _gvm2_tables_scaled,
    _iv_scaled_seq,
    default_abs_tol,
    wrap_half_open,
)

__all__ = [
    "GvMParams",
    "Acvf",
    "TabulatedDensity",
    "gvm_density",
    "gvm_tabulated",
    "gvm_cdf",
    "spectral_increment_variance",
    "kl_information",
    "spectral_entropy",
    "gvm_entropy",
    "gvm_acvf",
    "exponential_tilt",
    "kl_bound",
]

_TWO_PI = 2.0 * math.pi


def wrap_location(mu: float, j: int) -> float:
    """Reduce a location angle of the j-th harmonic into (-pi/j, pi/j]."""
    width = _TWO_PI / j
    return math.pi / j - wrap_half_open(math.pi / j - mu, width)


@dataclass(frozen=True)
class GvMParams:
    """Parameters of a GvM_k spectral density with total mass ``sigma2``.

    ``mus[j-1]`` is the location of the j-th harmonic, constrained to
    (-pi/j, pi/j]; ``kappas[j-1]`` its concentration.  A location whose
    concentration is zero is unidentifiable and is canonicalized to 0.
    """

    sigma2: float
    mus: tuple[float, ...]
    kappas: tuple[float, ...]

    def __post_init__(self) -> None:
        sigma2 = float(self.sigma2)
        kappas = tuple(float(v) for v in self.kappas)
        mus = tuple(
            0.0 if kap == 0.0 else float(mu) for mu, kap in zip(self.mus, kappas)
        )
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "kappas", kappas)
        if not (math.isfinite(sigma2) and sigma2 >= 0.0):
            raise ValueError("sigma2 must be finite and >= 0")
        if len(mus) != len(kappas) or len(kappas) < 1:
            raise ValueError("mus and kappas must have equal length k >= 1")
        for j, kap in enumerate(kappas, start=1):
            if not (math.isfinite(kap) and kap >= 0.0):
                raise ValueError(f"kappas[{j - 1}] must be finite and >= 0")
        for j, mu in enumerate(mus, start=1):
            if not (-math.pi / j < mu <= math.pi / j):
                raise ValueError(
                    f"mus[{j - 1}] must lie in (-pi/{j}, pi/{j}] (got {mu:g})"
                )

    @property
    def k(self) -> int:
        return len(self.kappas)

    @property
    def deltas(self) -> tuple[float, ...]:
        """Reduced phase shifts (mu_1 - mu_{j+1}) mod 2*pi/(j+1)."""
        mu1 = self.mus[0]
        return tuple(
            wrap_half_open(mu1 - self.mus[j], _TWO_PI / (j + 1))
            for j in range(1, self.k)
        )

    @property
    def shape(self) -> GvMShape:
        return GvMShape(kappas=self.kappas, deltas=self.deltas)


@dataclass(frozen=True)
class Acvf:
    """A finite Hermitian autocovariance sequence psi(0..k).

    ``sigma2`` is psi(0); ``values`` holds psi(1)..psi(k).  The negative lags
    are implied by Hermitian symmetry.  ``validate`` checks the feasibility
    invariants (|psi_r| <= sigma2 and a nonnegative-definite Toeplitz matrix).
    """

    sigma2: float
    values: tuple[complex, ...]

    def __post_init__(self) -> None:
        sigma2 = float(self.sigma2)
        values = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "values", values)
        if not (math.isfinite(sigma2) and sigma2 >= 0.0):
            raise ValueError("sigma2 must be finite and >= 0")
        for r, v in enumerate(values, start=1):
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"psi({r}) must be finite")

    @property
    def max_lag(self) -> int:
        return len(self.values)

    def psi(self, r: int) -> complex:
        if r == 0:
            return complex(self.sigma2)
        if abs(r) > self.max_lag:
            raise IndexError(f"lag {r} beyond max_lag {self.max_lag}")
        return self.values[r - 1] if r > 0 else self.values[-r - 1].conjugate()

    def nu(self, r: int) -> float:
        return self.psi(r).real

    def xi(self, r: int) -> float:
        return self.psi(r).imag

    def toeplitz(self) -> np.ndarray:
        """The (k+1) x (k+1) Hermitian Toeplitz matrix of the sequence."""
        k = self.max_lag
        full = np.empty(2 * k + 1, dtype=complex)
        for r in range(-k, k + 1):
            full[r + k] = self.psi(r)
        idx = np.arange(k + 1)
        return full[(idx[None, :] - idx[:, None]) + k]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.toeplitz())[0])

    def validate(self) -> None:
        """Raise InfeasibleError unless the sequence is a valid a.c.v.f."""
        bound = self.sigma2 * (1.0 + 1e-12)
        for r in range(1, self.max_lag + 1):
            if abs(self.psi(r)) > bound:
                raise InfeasibleError(
                    f"infeasible autocovariance: |psi({r})| > sigma2"
                )
        if self.max_lag > 0 and self.min_eigenvalue() < -1e-10 * self.sigma2:
            raise InfeasibleError(
                "infeasible autocovariance: Toeplitz matrix is not "
                "nonnegative definite"
            )


def _grid_angles(num_nodes: int) -> np.ndarray:
    return -math.pi + (_TWO_PI / num_nodes) * np.arange(1, num_nodes + 1)


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """A nonnegative spectral density sampled on an equispaced circular grid.

    Nodes sit at -pi + 2*pi*(i+1)/n for i = 0..n-1 (so the last node is pi
    and -pi is identified with it); ``n`` must be even.  Off-grid evaluation
    interpolates linearly.  The periodic trapezoid sum of ``values`` must
    match ``mass`` to 1e-8 relative.
    """

    values: np.ndarray
    mass: float

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        mass = float(self.mass)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mass", mass)
        if vals.ndim != 1 or vals.size < 4:
            raise ValueError("values must be a 1-D array with at least 4 nodes")
        if vals.size % 2 != 0:
            raise ValueError("the tabulation grid must have an even node count")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if np.any(vals < 0.0):
            raise ValueError("density values must be nonnegative")
        if not (math.isfinite(mass) and mass > 0.0):
            raise ValueError("mass must be finite and > 0")
        quad = (_TWO_PI / vals.size) * float(vals.sum())
        if abs(quad - mass) > 1e-8 * mass:
            raise ValueError(
                f"trapezoid integral {quad:g} does not match mass {mass:g}"
            )
        vals.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return int(self.values.size)

    @property
    def grid(self) -> np.ndarray:
        return _grid_angles(self.num_nodes)

    def density_at(self, theta) -> np.ndarray:
        """Evaluate the piecewise-linear periodic interpolant."""
        th = np.asarray(theta, dtype=float)
        wrapped = math.pi - (math.pi - th) % _TWO_PI  # into (-pi, pi]
        xp = np.concatenate(([-math.pi], self.grid))
        fp = np.concatenate(([self.values[-1]], self.values))
        return np.interp(wrapped, xp, fp)

    @classmethod
    def uniform(cls, mass: float, num_nodes: int = 4096) -> "TabulatedDensity":
        vals = np.full(num_nodes, mass / _TWO_PI)
        return cls(values=vals, mass=mass)


# ---------------------------------------------------------------------------
# Density, distribution function, increments
# ---------------------------------------------------------------------------


def _log_g0(
    shape: GvMShape, h: Optional[TabulatedDensity], abs_tol: Optional[float]
) -> float:
    """log of the normalization constant G_0 for the given reference density."""
    tol = default_abs_tol() if abs_tol is None else float(abs_tol)
    if h is None and shape.k == 1:
        kap = shape.kappas[0]
        return math.log(float(_iv_scaled_seq(0, kap)[0])) + kap
    if h is None and shape.k == 2:
        g, _ = _gvm2_tables_scaled(
            0, shape.deltas[0], shape.kappas[0], shape.kappas[1], tol
        )
        return math.log(float(g[0])) + shape.kappas[0] + shape.kappas[1]
    g0, _, shift = _gh_quad_scaled(0, shape, h, tol)
    return math.log(g0) + shift


def gvm_density(p: GvMParams, theta, abs_tol: Optional[float] = None):
    """GvM_k spectral density at ``theta`` (scalar or array), mass sigma2."""
    shape = p.shape
    logg0 = _log_g0(shape, None, abs_tol)
    th = np.asarray(theta, dtype=float)
    out = (p.sigma2 / _TWO_PI) * np.exp(shape.exponent(th - p.mus[0]) - logg0)
    return float(out) if np.isscalar(theta) else out


def gvm_tabulated(
    p: GvMParams, num_nodes: int = 4096, abs_tol: Optional[float] = None
) -> TabulatedDensity:
    """Tabulate the GvM_k density on an equispaced grid."""
    grid = _grid_angles(num_nodes)
    return TabulatedDensity(values=gvm_density(p, grid, abs_tol), mass=p.sigma2)


_CDF_MAX_TERMS = 1 << 16


def gvm_cdf(p: GvMParams, theta, abs_tol: Optional[float] = None):
    """Spectral distribution function F(theta) = integral of the density
    from -pi to theta, for theta in [-pi, pi].

    Computed by term-by-term integration of the Fourier series of the
    density, anchored at the lower limit -pi, so F(-pi) = 0 and
    F(pi) = sigma2 hold exactly.  The harmonic sum stops at the first r with
    |A_r| + |B_r| < tol/r for two consecutive r.
    """
    tol = default_abs_tol() if abs_tol is None else float(abs_tol)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(th < -math.pi - 1e-9) or np.any(th > math.pi + 1e-9):
        raise ValueError("theta must lie in [-pi, pi]")
    th = np.clip(th, -math.pi, math.pi)
    mu1 = p.mus[0]
    x = th - mu1
    acc = np.zeros_like(th)

    shape = p.shape
    rmax = 64
    consecutive = 0
    r = 1
    a, b = _ab_tables(rmax, shape, None, tol)
    while True:
        if r > rmax:
            rmax *= 4
            if rmax > _CDF_MAX_TERMS:
                raise QuadratureError(
                    "spectral distribution series did not converge"
                )
            a, b = _ab_tables(rmax, shape, None, tol)
        ar = float(a[r])
        br = float(b[r])
        sgn = -1.0 if r % 2 else 1.0
        acc += (
            ar * (np.sin(r * x) + sgn * math.sin(r * mu1))
            - br * (np.cos(r * x) - sgn * math.cos(r * mu1))
        ) / r
        consecutive = consecutive + 1 if abs(ar) + abs(br) < tol / r else 0
        if consecutive >= 2:
            break
        r += 1

    out = p.sigma2 * ((th + math.pi) / _TWO_PI + acc / math.pi)
    return float(out[0]) if np.isscalar(theta) else out


def spectral_increment_variance(
    p: GvMParams, theta1: float, theta2: float, abs_tol: Optional[float] = None
) -> float:
    """Variance of the spectral-process increment over (theta1, theta2]."""
    t1 = float(theta1)
    t2 = float(theta2)
    if not (-math.pi <= t1 < t2 <= math.pi):
        raise ValueError("need -pi <= theta1 < theta2 <= pi")
    f = gvm_cdf(p, np.array([t1, t2]), abs_tol)
    return max(0.0, float(f[1] - f[0]))


# ---------------------------------------------------------------------------
# Kullback-Leibler information and entropies
# ---------------------------------------------------------------------------


def kl_information(f: TabulatedDensity, g: TabulatedDensity) -> float:
    """Kullback-Leibler information of ``f`` with respect to ``g``.

    Both densities must carry the same total mass (to 1e-8 relative) and the
    support of ``f`` must lie inside the support of ``g``.  The integral uses
    cell-wise Gauss-Legendre quadrature on the union of the two grids, which
    is exact for the piecewise-linear interpolants; 0*log(0) counts as 0.
    """
    if abs(f.mass - g.mass) > 1e-8 * max(f.mass, g.mass):
        raise ValueError(
            f"masses differ: {f.mass:g} vs {g.mass:g}; the divergence is "
            "defined for densities of equal total mass"
        )
    breakpoints = np.unique(np.concatenate((f.grid, g.grid)))
    thetas, weights = _cell_gl_nodes(breakpoints)
    fv = f.density_at(thetas)
    gv = g.density_at(thetas)
    pos = fv > 0.0
    if np.any(pos & (gv <= 0.0)):
        raise SupportError(
            "infinite divergence: f is positive where g vanishes"
        )
    vals = np.zeros_like(fv)
    vals[pos] = fv[pos] * np.log(fv[pos] / gv[pos])
    return float(np.dot(weights, vals))


def spectral_entropy(f: TabulatedDensity) -> float:
    """Shannon spectral entropy: minus the divergence from the uniform
    density of equal mass.  Nonpositive, zero only for the uniform density."""
    return -kl_information(f, TabulatedDensity.uniform(f.mass, f.num_nodes))


def gvm_entropy(p: GvMParams, abs_tol: Optional[float] = None) -> float:
    """Closed-form spectral entropy of a GvM_k density with mass sigma2.

    Scales exactly linearly in sigma2 and equals the tabulated-density
    entropy up to interpolation error.
    """
    tol = default_abs_tol() if abs_tol is None else float(abs_tol)
    shape = p.shape
    a, b = _ab_tables(p.k, shape, None, tol)
    s = _log_g0(shape, None, tol) - p.kappas[0] * float(a[1])
    for r in range(2, p.k + 1):
        dlt = p.deltas[r - 2]
        s -= p.kappas[r - 1] * (
            float(a[r]) * math.cos(r * dlt) - float(b[r]) * math.sin(r * dlt)
        )
    return p.sigma2 * s


def gvm_acvf(p: GvMParams, max_lag: int, abs_tol: Optional[float] = None) -> Acvf:
    """Autocovariances psi(1..max_lag) of the GvM_k time series.

    psi(r) = sigma2 * exp(i*r*mu_1) * (A_r + i*B_r); psi(0) = sigma2.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    a, b = _ab_tables(max_lag, p.shape, None, abs_tol)
    r = np.arange(1, max_lag + 1)
    psi = p.sigma2 * np.exp(1j * r * p.mus[0]) * (a[1:] + 1j * b[1:])
    return Acvf(sigma2=p.sigma2, values=tuple(psi))


# ---------------------------------------------------------------------------
# Exponential tilting and the divergence bound
# ---------------------------------------------------------------------------


def exponential_tilt(
    h: TabulatedDensity,
    mus: Sequence[float],
    kappas: Sequence[float],
) -> TabulatedDensity:
    """Tilt a reference spectral density by an exponential-cosine factor.

    Returns h(theta) * exp(sum_j kappa_j cos(j*(theta - mu_j))), renormalized
    on h's grid so the output mass equals h.mass.  With all kappas zero the
    reference density is returned unchanged.
    """
    p = GvMParams(sigma2=h.mass, mus=tuple(mus), kappas=tuple(kappas))
    grid = h.grid
    w = p.shape.exponent(grid - p.mus[0])
    t = h.values * np.exp(w - float(w.max()))
    norm = (_TWO_PI / t.size) * float(t.sum())
    return TabulatedDensity(values=t * (h.mass / norm), mass=h.mass)


def kl_bound(
    p: GvMParams,
    target: Acvf,
    h: Optional[TabulatedDensity] = None,
    abs_tol: Optional[float] = None,
) -> float:
    """Lower bound on the divergence I(g|h) over densities meeting ``target``.

    Evaluated at the tilt shape of ``p`` (its locations and concentrations);
    equals the divergence of the solved exponential tilt when ``p`` solves
    the moment equations for ``target``.  ``h`` defaults to the uniform
    reference; the mass is taken from ``target``.
    """
    if target.max_lag < p.k:
        raise ValueError("target must provide at least k lags")
    sigma2 = target.sigma2
    out = -sigma2 * _log_g0(p.shape, h, abs_tol)
    for r in range(1, p.k + 1):
        mu_r = p.mus[r - 1]
        out += p.kappas[r - 1] * (
            target.nu(r) * math.cos(r * mu_r) + target.xi(r) * math.sin(r * mu_r)
        )
    return out
