"""Modified Bessel functions, periodic quadrature, and the cosine/sine
exponential-trigonometric integral constants used by every other module.

All routines are pure functions of their arguments.  The only ambient input
is the ``GVM_TOL`` environment variable, which overrides the default
absolute tolerance of the adaptive routines.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from .errors import QuadratureError

if TYPE_CHECKING:  # avoid a circular import; only needed for annotations
    from .spectrum import TabulatedDensity

__all__ = [
    "DEFAULT_ABS_TOL",
    "MAX_QUAD_NODES",
    "BESSEL_Z_LIMIT",
    "QuadratureSpec",
    "GvMShape",
    "default_abs_tol",
    "bessel_i",
    "quad_periodic",
    "g_const",
    "h_const",
    "ab_ratios",
]

DEFAULT_ABS_TOL = 1e-12
MAX_QUAD_NODES = 1 << 20
# Power series below this argument, backward recurrence above it.
BESSEL_SERIES_Z_MAX = 15.0
# exp(z) approaches the float64 range; unscaled values refuse larger z.
BESSEL_Z_LIMIT = 650.0

_EPS = float(np.finfo(float).eps)
_LOG_HUGE = 709.0  # log of the largest finite float64, rounded down
_TWO_PI = 2.0 * math.pi

# Fixed-order Gauss-Legendre rule used for integrals of tabulated
# (piecewise-linear) densities, where cell-wise quadrature is exact and
# trapezoid refinement would stall at O(h^2).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def default_abs_tol() -> float:
    """Default absolute tolerance; the GVM_TOL env var overrides it."""
    raw = os.environ.get("GVM_TOL")
    return float(raw) if raw else DEFAULT_ABS_TOL


def wrap_half_open(x: float, width: float) -> float:
    """Reduce x into [0, width); float modulo can round up to width exactly."""
    r = x % width
    return 0.0 if r >= width else r


# ---------------------------------------------------------------------------
# Modified Bessel functions of the first kind, integer order
# ---------------------------------------------------------------------------


def _besseli_series(n: int, z: float) -> float:
    """I_n(z) by its ascending power series (positive terms, no cancellation)."""
    half = 0.5 * z
    log_t0 = n * math.log(half) - math.lgamma(n + 1)
    if log_t0 < -745.0:  # leading term underflows float64
        return 0.0
    term = math.exp(log_t0)
    total = term
    zz = half * half
    for m in range(1, 2000):
        term *= zz / (m * (m + n))
        total += term
        if term < total * _EPS:
            return total
    raise RuntimeError(f"Bessel series did not converge for n={n}, z={z}")


def _iv0_scaled(z: float) -> float:
    """I_0(z) * exp(-z)."""
    if z <= BESSEL_Z_LIMIT:
        # The series value stays below exp(650) ~ 2.7e282, well inside range.
        return _besseli_series(0, z) * math.exp(-z)
    return float(_iv_scaled_asymptotic(0, z)[0])


def _iv_scaled_asymptotic(nmax: int, z: float) -> np.ndarray:
    """Scaled values I_n(z) exp(-z), n=0..nmax, by the large-z expansion.

    Valid when z is large compared with nmax**2; callers guard the regime.
    """
    out = np.empty(nmax + 1)
    pref = 1.0 / math.sqrt(_TWO_PI * z)
    for n in range(nmax + 1):
        mu = 4.0 * n * n
        term = 1.0
        total = 1.0
        for j in range(1, 40):
            factor = -(mu - (2 * j - 1) ** 2) / (8.0 * j * z)
            nxt = term * factor
            if abs(nxt) >= abs(term):  # asymptotic tail started diverging
                break
            term = nxt
            total += term
            if abs(term) < 1e-18 * abs(total):
                break
        out[n] = pref * total
    return out


@lru_cache(maxsize=2048)
def _iv_scaled_seq_cached(nmax: int, z: float) -> np.ndarray:
    seq = _iv_scaled_seq_impl(nmax, z)
    seq.setflags(write=False)
    return seq


def _iv_scaled_seq_impl(nmax: int, z: float) -> np.ndarray:
    if z == 0.0:
        out = np.zeros(nmax + 1)
        out[0] = 1.0
        return out
    if z > BESSEL_Z_LIMIT:
        if nmax > 0.5 * math.sqrt(z):
            raise OverflowError(
                f"Bessel order {nmax} too large for the asymptotic regime at z={z:g}"
            )
        return _iv_scaled_asymptotic(nmax, z)
    # Miller's backward recurrence.  The start order is high enough that
    # I_start/I_0 is far below double precision for every z <= 650.
    start = nmax + int(3.2 * z) + 32
    vals = np.zeros(start + 2)
    vals[start] = 1.0
    for m in range(start, 0, -1):
        vals[m - 1] = vals[m + 1] + (2.0 * m / z) * vals[m]
        if vals[m - 1] > 1e250:  # rescale to dodge overflow; only ratios matter
            vals[m - 1 :] *= 1e-250
    ratios = vals[: nmax + 1] / vals[0]
    return ratios * _iv0_scaled(z)


def _iv_scaled_seq(nmax: int, z: float) -> np.ndarray:
    """I_n(z) exp(-z) for n = 0..nmax; read-only array, cached."""
    return _iv_scaled_seq_cached(int(nmax), float(z))


def bessel_i(n: int, z: float) -> float:
    """Modified Bessel function of the first kind, integer order ``n >= 0``.

    Uses the ascending power series for ``z <= 15`` and Miller's backward
    recurrence normalized by the series value of I_0 above that.  Raises
    OverflowError for ``z > 650``, where exp(z) nears the float64 range.
    """
    n = int(n)
    z = float(z)
    if n < 0:
        raise ValueError("order n must be >= 0")
    if not math.isfinite(z) or z < 0.0:
        raise ValueError("argument z must be finite and >= 0")
    if z > BESSEL_Z_LIMIT:
        raise OverflowError(
            f"bessel_i: z={z:g} exceeds the exponential-range limit {BESSEL_Z_LIMIT:g}"
        )
    if z == 0.0:
        return 1.0 if n == 0 else 0.0
    if z <= BESSEL_SERIES_Z_MAX:
        return _besseli_series(n, z)
    return float(_iv_scaled_seq(n, z)[n] * math.exp(z))


# ---------------------------------------------------------------------------
# Quadrature on the circle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls the adaptive equispaced trapezoid rule on (-pi, pi]."""

    num_nodes: int = 256
    refinement_factor: int = 2
    abs_tol: float = field(default_factory=default_abs_tol)

    def __post_init__(self) -> None:
        if self.num_nodes < 16:
            raise ValueError("num_nodes must be >= 16")
        if self.refinement_factor < 2:
            raise ValueError("refinement_factor must be >= 2")
        if not self.abs_tol >= 100.0 * _EPS:
            raise ValueError("abs_tol must be >= 100 * machine epsilon")


def _periodic_sum(f: Callable[[np.ndarray], np.ndarray], n: int) -> float:
    theta = -math.pi + (_TWO_PI / n) * np.arange(1, n + 1)
    vals = np.asarray(f(theta), dtype=float)
    return (_TWO_PI / n) * float(vals.sum())


def quad_periodic(
    f: Callable[[np.ndarray], np.ndarray], spec: Optional[QuadratureSpec] = None
) -> float:
    """Integrate a smooth 2*pi-periodic function over (-pi, pi].

    ``f`` must accept an ndarray of angles and return values elementwise.
    The equispaced trapezoid rule is spectrally accurate for smooth periodic
    integrands; nodes are multiplied by ``refinement_factor`` until two
    successive estimates differ by less than ``abs_tol``.
    """
    if spec is None:
        spec = QuadratureSpec()
    n = spec.num_nodes
    prev = _periodic_sum(f, n)
    while n <= MAX_QUAD_NODES // spec.refinement_factor:
        n *= spec.refinement_factor
        cur = _periodic_sum(f, n)
        if abs(cur - prev) < spec.abs_tol:
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature failure: estimates did not settle within {spec.abs_tol:g} "
        f"using up to {MAX_QUAD_NODES} nodes"
    )


def _cell_gl_nodes(breakpoints: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on the cells of a circular partition.

    ``breakpoints`` must be strictly increasing inside (-pi, pi]; the last
    cell wraps around to the first breakpoint plus 2*pi.
    """
    lefts = breakpoints
    rights = np.roll(breakpoints, -1).copy()
    rights[-1] = breakpoints[0] + _TWO_PI
    centers = 0.5 * (lefts + rights)
    halfw = 0.5 * (rights - lefts)
    thetas = (centers[:, None] + halfw[:, None] * _GL_X[None, :]).ravel()
    weights = (halfw[:, None] * _GL_W[None, :]).ravel()
    return thetas, weights


# ---------------------------------------------------------------------------
# The integral constants G_r, H_r, A_r, B_r
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GvMShape:
    """Shape of an order-k exponential-cosine tilt: concentrations and phases.

    ``kappas`` holds the concentrations of the cosine harmonics 1..k and
    ``deltas`` the reduced phase shifts of harmonics 2..k; the j-th phase
    lives in [0, 2*pi/(j+1)).
    """

    kappas: tuple[float, ...]
    deltas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        kappas = tuple(float(v) for v in self.kappas)
        deltas = tuple(float(v) for v in self.deltas)
        object.__setattr__(self, "kappas", kappas)
        object.__setattr__(self, "deltas", deltas)
        if len(kappas) < 1:
            raise ValueError("order k must be >= 1 (at least one kappa)")
        if len(deltas) != len(kappas) - 1:
            raise ValueError("need exactly k-1 deltas")
        for j, kap in enumerate(kappas, start=1):
            if not (math.isfinite(kap) and kap >= 0.0):
                raise ValueError(f"kappas[{j - 1}] must be finite and >= 0")
        for i, dlt in enumerate(deltas):
            width = _TWO_PI / (i + 2)
            if not (0.0 <= dlt < width):
                raise ValueError(f"deltas[{i}] must lie in [0, {width:g})")

    @property
    def k(self) -> int:
        return len(self.kappas)

    @property
    def kappa_total(self) -> float:
        return float(sum(self.kappas))

    def exponent(self, theta: np.ndarray) -> np.ndarray:
        """The tilt exponent sum(kappa_j * cos(j*(theta + delta_{j-1})))."""
        th = np.asarray(theta, dtype=float)
        w = self.kappas[0] * np.cos(th)
        for j in range(2, self.k + 1):
            w = w + self.kappas[j - 1] * np.cos(j * (th + self.deltas[j - 2]))
        return w


def _suggest_jmax(kap2: float) -> int:
    return int(kap2 + 12.0 * math.sqrt(kap2 + 1.0)) + 12


def _gvm2_tables_scaled(
    rmax: int, delta: float, kap1: float, kap2: float, abs_tol: float
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled constants (G_r, H_r) * exp(-(kap1+kap2)) for r = 0..rmax, k = 2.

    Bessel-product series in the order of the second harmonic; truncated when
    the term bound 2*I_j(kap2)*I_0(kap1), scaled, falls below abs_tol/10 for
    two consecutive j (the products decay super-geometrically in j).
    """
    jmax = _suggest_jmax(kap2)
    tol_scaled = (abs_tol / 10.0) * math.exp(-min(kap1 + kap2, 745.0))
    while True:
        s2 = _iv_scaled_seq(jmax, kap2)
        s1 = _iv_scaled_seq(2 * jmax + rmax, kap1)
        floor = 1e-18 * s1[0] * s2[0]
        bound = 2.0 * s1[0] * s2[1:]
        small = bound < max(tol_scaled, floor)
        pairs = small[:-1] & small[1:]
        if pairs.any():
            jcut = int(np.argmax(pairs)) + 2  # keep both members of the pair
            break
        if bound.size and bound[-1] == 0.0:
            jcut = jmax
            break
        if jmax > 20000:
            raise RuntimeError("harmonic series for the tilt constants stalled")
        jmax *= 2

    r = np.arange(rmax + 1)
    g = s2[0] * s1[r]
    h = np.zeros(rmax + 1)
    # The j-sum below covers the even-r boundary term once, through the
    # |2j - r| = 0 member at j = r/2; do not add it separately.
    if jcut >= 1:
        j = np.arange(1, jcut + 1)
        cj = s2[1 : jcut + 1]
        plus = s1[2 * j[None, :] + r[:, None]]
        minus = s1[np.abs(2 * j[None, :] - r[:, None])]
        cos_j = np.cos(2.0 * j * delta) * cj
        sin_j = np.sin(2.0 * j * delta) * cj
        g = g + ((plus + minus) * cos_j[None, :]).sum(axis=1)
        h = h + ((plus - minus) * sin_j[None, :]).sum(axis=1)
    return g, h


def _gvm2_cancelled(g: np.ndarray, kap1: float, kap2: float) -> bool:
    """Whether the order-2 series lost too many digits to cancellation.

    The series terms are of size I_0(k1)I_0(k2), scaled, while the true
    normalization constant can be exponentially smaller when the two
    harmonics disagree in phase; fall back to quadrature past ~10 digits.
    """
    lead = float(_iv_scaled_seq(0, kap1)[0]) * float(_iv_scaled_seq(0, kap2)[0])
    return not (g[0] > 1e-10 * lead)


def _tilt_samples(
    shape: GvMShape, h: Optional["TabulatedDensity"]
) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadrature samples of exp(exponent - shift) * reference density.

    Returns (thetas paired with weights already folded in, i.e. the weighted
    sample values w_i * p(theta_i)), the angles, and the log-shift used.
    """
    if h is None:
        raise ValueError("uniform reference handled by the caller")
    grid = h.grid
    thetas, weights = _cell_gl_nodes(grid)
    href = h.density_at(thetas) / h.mass
    ex = shape.exponent(thetas)
    shift = float(ex.max())
    return weights * np.exp(ex - shift) * href, thetas, shift


def _exponent_peak(shape: GvMShape) -> float:
    """Near-maximum of the tilt exponent, for stable rescaling."""
    probe = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
    return float(shape.exponent(probe).max())


def _gh_quad_scaled(
    r: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"],
    abs_tol: float,
) -> tuple[float, float, float]:
    """(G_r, H_r) scaled by exp(-shift) plus the log shift, by quadrature."""
    if h is not None:
        wp, thetas, shift = _tilt_samples(shape, h)
        g = float((np.cos(r * thetas) * wp).sum())
        s = float((np.sin(r * thetas) * wp).sum())
        return g, s, shift
    shift = _exponent_peak(shape)
    spec = QuadratureSpec(
        num_nodes=max(256, 1 << int(2 * r + 32).bit_length()), abs_tol=abs_tol
    )
    g = quad_periodic(
        lambda t: np.cos(r * t) * np.exp(shape.exponent(t) - shift) / _TWO_PI, spec
    )
    s = quad_periodic(
        lambda t: np.sin(r * t) * np.exp(shape.exponent(t) - shift) / _TWO_PI, spec
    )
    return g, s, shift


def _gh_pair(
    r: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"],
    abs_tol: Optional[float],
) -> tuple[float, float]:
    """Unscaled (G_r, H_r); raises OverflowError out of the exp range."""
    if r < 0:
        raise ValueError("harmonic index r must be >= 0")
    tol = default_abs_tol() if abs_tol is None else float(abs_tol)
    if h is None and shape.k == 1:
        kap = shape.kappas[0]
        if kap > BESSEL_Z_LIMIT:
            raise OverflowError(
                f"tilt constants overflow: kappa={kap:g} exceeds {BESSEL_Z_LIMIT:g}"
            )
        return bessel_i(r, kap), 0.0
    if h is None and shape.k == 2:
        kap1, kap2 = shape.kappas
        if kap1 + kap2 > BESSEL_Z_LIMIT:
            raise OverflowError(
                "tilt constants overflow: kappa_1 + kappa_2 exceeds "
                f"{BESSEL_Z_LIMIT:g}"
            )
        g, s = _gvm2_tables_scaled(r, shape.deltas[0], kap1, kap2, tol)
        if not _gvm2_cancelled(g, kap1, kap2):
            scale = math.exp(kap1 + kap2)
            return float(g[r]) * scale, float(s[r]) * scale
    g, s, shift = _gh_quad_scaled(r, shape, h, tol)
    if shift > _LOG_HUGE:
        raise OverflowError("tilt constants overflow the double range")
    scale = math.exp(shift)
    return g * scale, s * scale


def g_const(
    r: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"] = None,
    abs_tol: Optional[float] = None,
) -> float:
    """Cosine integral constant G_r of the exponential tilt.

    With ``h`` absent the reference density is the circular uniform one and,
    for k <= 2, the value comes from the Bessel-product series; otherwise it
    is computed by quadrature against the (normalized) reference density.
    """
    return _gh_pair(r, shape, h, abs_tol)[0]


def h_const(
    r: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"] = None,
    abs_tol: Optional[float] = None,
) -> float:
    """Sine integral constant H_r of the exponential tilt (r >= 1)."""
    if r < 1:
        raise ValueError("harmonic index r must be >= 1 for h_const")
    return _gh_pair(r, shape, h, abs_tol)[1]


def ab_ratios(
    r: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"] = None,
    abs_tol: Optional[float] = None,
) -> tuple[float, float]:
    """Normalized constants (A_r, B_r) = (G_r, H_r) / G_0.

    Computed from scaled quantities so the ratios stay finite for any
    concentration (|A_r| <= 1, |B_r| <= 1, A_r^2 + B_r^2 <= 1).
    """
    if r < 1:
        raise ValueError("harmonic index r must be >= 1")
    a, b = _ab_tables(r, shape, h, abs_tol)
    return float(a[r]), float(b[r])


def _ab_tables(
    rmax: int,
    shape: GvMShape,
    h: Optional["TabulatedDensity"] = None,
    abs_tol: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of A_r and B_r for r = 0..rmax (A_0 = 1, B_0 = 0)."""
    tol = default_abs_tol() if abs_tol is None else float(abs_tol)
    if h is None and shape.k == 1:
        seq = _iv_scaled_seq(rmax, shape.kappas[0])
        a = np.asarray(seq) / seq[0]
        return a, np.zeros(rmax + 1)
    if h is None and shape.k == 2:
        g, s = _gvm2_tables_scaled(
            rmax, shape.deltas[0], shape.kappas[0], shape.kappas[1], tol
        )
        if not _gvm2_cancelled(g, shape.kappas[0], shape.kappas[1]):
            return g / g[0], s / g[0]
    if h is not None:
        wp, thetas, _ = _tilt_samples(shape, h)
        g0 = float(wp.sum())
        r = np.arange(rmax + 1)
        cosrt = np.cos(np.outer(r, thetas))
        sinrt = np.sin(np.outer(r, thetas))
        return cosrt @ wp / g0, sinrt @ wp / g0
    return _ab_tables_fft(rmax, shape, tol)


def _ab_tables_fft(rmax: int, shape: GvMShape, abs_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """A_r, B_r for a smooth uniform-reference tilt of any order, via the FFT.

    Fourier coefficients of the tilted density on a doubling grid; accepted
    once two successive grids agree within abs_tol on every ratio.
    """
    n = 1 << max(9, int(2 * rmax + 64).bit_length())
    shift = _exponent_peak(shape)
    prev: Optional[tuple[np.ndarray, np.ndarray]] = None
    while n <= MAX_QUAD_NODES:
        theta = -math.pi + (_TWO_PI / n) * np.arange(n)
        p = np.exp(shape.exponent(theta) - shift)
        coeff = np.fft.fft(p)[: rmax + 1] / n
        # the grid starts at -pi rather than 0: exp(-i*r*(-pi)) = (-1)**r
        signs = np.where(np.arange(rmax + 1) % 2 == 0, 1.0, -1.0)
        coeff = coeff * signs
        a = coeff.real / coeff.real[0]
        b = -coeff.imag / coeff.real[0]
        if prev is not None:
            da = np.max(np.abs(a - prev[0]))
            db = np.max(np.abs(b - prev[1]))
            if max(da, db) < abs_tol:
                return a, b
        prev = (a, b)
        n *= 2
    raise QuadratureError(
        "quadrature failure: Fourier coefficients of the tilt did not settle"
    )
