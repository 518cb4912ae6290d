"""Data-side statistics and parameter estimation for GvM spectra.

Sample autocovariances, the periodogram, the Burg entropy functional, and
the trigonometric method of moments: solving the nonlinear system that maps
target autocovariances to the locations and concentrations of a GvM_k
spectral density (or of an exponential tilt of an arbitrary reference).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleError, NoConvergenceError
from .special import (
    GvMShape,
    _cell_gl_nodes,
    _iv_scaled_seq,
    default_abs_tol,
    wrap_half_open,
)
from .spectrum import Acvf, GvMParams, TabulatedDensity, wrap_location

__all__ = [
    "ComplexSeries",
    "SolverConfig",
    "FitReport",
    "Periodogram",
    "sample_acvf",
    "periodogram",
    "acvf_from_periodogram",
    "solve_moments",
    "solve_vm",
    "burg_entropy",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class ComplexSeries:
    """An ordered finite sample X_1..X_n of a complex-valued time series."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a series needs at least two observations")
        if not np.all(np.isfinite(vals)):
            raise ValueError("series values must be finite")
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the moment-equation solver."""

    residual_tol: float = 1e-10
    max_iter: int = 200
    multistart_grid: int = 8
    fd_step: float = 1e-6

    def __post_init__(self) -> None:
        if self.residual_tol <= 0 or self.fd_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.multistart_grid < 1:
            raise ValueError("max_iter and multistart_grid must be >= 1")


@dataclass(frozen=True)
class FitReport:
    params: GvMParams
    residual_norm: float
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# Sample statistics
# ---------------------------------------------------------------------------


def sample_acvf(x: ComplexSeries, max_lag: int) -> Acvf:
    """Mean-corrected sample autocovariances psi_hat(0..max_lag).

    psi_hat(r) = n^-1 sum_{j<=n-r} (X_{j+r} - M_n) * conj(X_j - M_n); the
    resulting Toeplitz matrix is nonnegative definite by construction.
    """
    n = x.n
    if not 0 <= max_lag <= n - 1:
        raise ValueError(f"max_lag must lie in [0, {n - 1}]")
    y = x.values - x.values.mean()
    sigma2 = float(np.vdot(y, y).real) / n
    vals = tuple(complex(np.vdot(y[: n - r], y[r:])) / n for r in range(1, max_lag + 1))
    return Acvf(sigma2=sigma2, values=vals)


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Periodogram ordinates on a uniform angular frequency grid.

    ``freqs`` holds 2*pi*j/m for the symmetric index range
    j = -floor((m-1)/2) .. floor(m/2) where m = len(values); ``num_obs`` is
    the length of the underlying series.
    """

    freqs: np.ndarray
    values: np.ndarray
    num_obs: int

    def __post_init__(self) -> None:
        for name in ("freqs", "values"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.freqs.shape != self.values.shape:
            raise ValueError("freqs and values must align")


def periodogram(x: ComplexSeries, num_freqs: Optional[int] = None) -> Periodogram:
    """Discrete Fourier transform of the sample a.c.v.f.

    Evaluated as |DFT of the centered sample|^2 / n, which is algebraically
    the transform of the full sample a.c.v.f. and therefore real and
    nonnegative.  The default grid carries n ordinates at 2*pi*j/n;
    ``num_freqs`` >= n evaluates the same function on a finer grid
    (an m-point grid determines lags only up to m - n, see
    ``acvf_from_periodogram``).
    """
    n = x.n
    m = n if num_freqs is None else int(num_freqs)
    if m < n:
        raise ValueError("num_freqs must be >= the series length")
    y = x.values - x.values.mean()
    lam = np.abs(np.fft.fft(y, n=m)) ** 2 / n
    j = np.arange(-((m - 1) // 2), m // 2 + 1)
    return Periodogram(freqs=_TWO_PI * j / m, values=lam[j % m], num_obs=n)


def acvf_from_periodogram(pg: Periodogram, max_lag: int) -> Acvf:
    """Invert a periodogram back to sample autocovariances.

    Exact for max_lag <= m - n: on an m-point grid the lag r aliases with
    r - m, so the n-point default grid only determines lag 0.
    """
    m = pg.values.size
    if max_lag > m - pg.num_obs:
        raise ValueError(
            f"lags beyond {m - pg.num_obs} alias on an {m}-point grid; "
            "recompute the periodogram with num_freqs >= n + max_lag"
        )
    r = np.arange(max_lag + 1)
    coeff = (pg.values[None, :] * np.exp(1j * np.outer(r, pg.freqs))).sum(axis=1) / m
    return Acvf(sigma2=float(coeff[0].real), values=tuple(coeff[1:]))


def burg_entropy(f: TabulatedDensity) -> float:
    """Burg's spectral entropy, the integral of log f over the circle.

    Requires a strictly positive tabulated density.  Satisfies
    B(f) = 2*pi*(log(mass/(2*pi)) - I(u_1|f_1)) with u_1 the unit-mass
    uniform density.
    """
    if np.any(f.values <= 0.0):
        raise ValueError("burg_entropy needs a strictly positive density")
    thetas, weights = _cell_gl_nodes(f.grid)
    return float(np.dot(weights, np.log(f.density_at(thetas))))


# ---------------------------------------------------------------------------
# The concentration ratio A_1 and its inverse (vM closed form)
# ---------------------------------------------------------------------------


def _a1(kappa: float) -> float:
    seq = _iv_scaled_seq(1, kappa)
    return float(seq[1] / seq[0])


def _invert_a1(rho: float, tol: float = 1e-13) -> tuple[float, int]:
    """Solve A_1(kappa) = rho for kappa >= 0; A_1 is strictly increasing.

    Starts from the classical piecewise approximation and polishes with
    Newton steps using A_1' = 1 - A_1^2 - A_1/kappa.
    """
    if not 0.0 <= rho < 1.0:
        raise InfeasibleError(
            "infeasible: the concentration ratio maps [0, inf) onto [0, 1)"
        )
    if rho == 0.0:
        return 0.0, 0
    if rho < 0.53:
        kappa = 2 * rho + rho**3 + 5 * rho**5 / 6
    elif rho < 0.85:
        kappa = -0.4 + 1.39 * rho + 0.43 / (1 - rho)
    else:
        kappa = 1.0 / (rho**3 - 4 * rho**2 + 3 * rho)
    iterations = 0
    for _ in range(100):
        iterations += 1
        a = _a1(kappa)
        deriv = 1.0 - a * a - a / kappa
        step = (rho - a) / deriv
        nxt = kappa + step
        kappa = kappa / 2 if nxt <= 0 else nxt
        if abs(step) <= tol * (1.0 + kappa):
            break
    return kappa, iterations


def solve_vm(target: Acvf, residual_tol: float = 1e-10) -> FitReport:
    """Closed-form fit of the order-1 (von Mises) spectral model.

    mu_1 is the argument of psi(1) and kappa_1 inverts the strictly
    increasing concentration ratio at |psi(1)|/sigma2.
    """
    if target.max_lag < 1:
        raise ValueError("target must provide lag 1")
    sigma2 = target.sigma2
    if sigma2 == 0.0:
        params = GvMParams(sigma2=0.0, mus=(0.0,), kappas=(0.0,))
        return FitReport(params, 0.0, 0, True)
    psi1 = target.psi(1)
    rho = abs(psi1) / sigma2
    if rho >= 1.0:
        raise InfeasibleError("infeasible: |psi(1)| >= sigma2")
    mu1 = math.atan2(psi1.imag, psi1.real) if rho > 0 else 0.0
    kappa, iterations = _invert_a1(rho)
    a = _a1(kappa) if kappa > 0 else 0.0
    res = math.hypot(
        psi1.real / sigma2 - a * math.cos(mu1),
        psi1.imag / sigma2 - a * math.sin(mu1),
    )
    params = GvMParams(sigma2=sigma2, mus=(wrap_location(mu1, 1),), kappas=(kappa,))
    return FitReport(params, res, iterations, res <= residual_tol)


# ---------------------------------------------------------------------------
# Trigonometric method of moments, general order
# ---------------------------------------------------------------------------


def _ab_from_samples(
    rmax: int, shape: GvMShape, thetas: np.ndarray, wh: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """A_r, B_r (r = 0..rmax) against reference samples wh = weights*h_1."""
    ex = shape.exponent(thetas)
    p = np.exp(ex - float(ex.max())) * wh
    g0 = float(p.sum())
    r = np.arange(rmax + 1)
    a = np.cos(np.outer(r, thetas)) @ p / g0
    b = np.sin(np.outer(r, thetas)) @ p / g0
    return a, b


class _MomentSystem:
    """Residuals of the moment equations in solver coordinates.

    The unknown vector is x = (mu_1, d_1..d_{k-1}, s_1..s_k) with
    kappa_j = s_j**2 (enforcing nonnegativity) and the d_j free; phases are
    reduced modulo their period inside the residual, where the constants are
    periodic anyway.
    """

    def __init__(self, target: Acvf, k: int, h: Optional[TabulatedDensity]):
        self.k = k
        self.scaled = np.array(
            [target.psi(r) / target.sigma2 for r in range(1, k + 1)]
        )
        self.tol = default_abs_tol()
        if h is not None:
            thetas, weights = _cell_gl_nodes(h.grid)
            self._thetas = thetas
            self._wh = weights * h.density_at(thetas) / h.mass
        else:
            self._thetas = None
            self._wh = None

    def split(self, x: np.ndarray) -> tuple[float, tuple[float, ...], np.ndarray]:
        k = self.k
        mu1 = float(x[0])
        deltas = tuple(
            wrap_half_open(float(x[1 + i]), _TWO_PI / (i + 2)) for i in range(k - 1)
        )
        kappas = x[k:] ** 2
        return mu1, deltas, kappas

    def residual(self, x: np.ndarray) -> np.ndarray:
        from .special import _ab_tables  # local import to keep namespaces tidy

        mu1, deltas, kappas = self.split(x)
        shape = GvMShape(kappas=tuple(kappas), deltas=deltas)
        if self._thetas is not None:
            a, b = _ab_from_samples(self.k, shape, self._thetas, self._wh)
        else:
            a, b = _ab_tables(self.k, shape, None, self.tol)
        r = np.arange(1, self.k + 1)
        rot = np.exp(1j * r * mu1)
        model = rot * (a[1:] + 1j * b[1:])
        diff = self.scaled - model
        out = np.empty(2 * self.k)
        out[0::2] = diff.real
        out[1::2] = diff.imag
        return out


def _newton_run(
    system: _MomentSystem, x0: np.ndarray, cfg: SolverConfig
) -> tuple[np.ndarray, float, int, bool]:
    """Damped Newton iteration with a forward-difference Jacobian."""
    x = x0.astype(float).copy()
    f = system.residual(x)
    norm = float(np.linalg.norm(f))
    stall = 0
    for it in range(1, cfg.max_iter + 1):
        if norm <= cfg.residual_tol:
            return x, norm, it - 1, True
        dim = x.size
        jac = np.empty((f.size, dim))
        for i in range(dim):
            h = cfg.fd_step * max(1.0, abs(x[i]))
            xp = x.copy()
            xp[i] += h
            jac[:, i] = (system.residual(xp) - f) / h
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -f, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        accepted = False
        while t >= 1e-8:
            xn = x + t * step
            xn[system.k :] = np.clip(xn[system.k :], -25.0, 25.0)
            try:
                fn = system.residual(xn)
            except OverflowError:
                t *= 0.5
                continue
            nn = float(np.linalg.norm(fn))
            if np.isfinite(nn) and nn <= (1.0 - 1e-4 * t) * norm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        stall = stall + 1 if nn > 0.9 * norm else 0
        x, f, norm = xn, fn, nn
        if stall >= 6:
            break
    return x, norm, cfg.max_iter, norm <= cfg.residual_tol


def _start_points(
    target: Acvf, k: int, cfg: SolverConfig
) -> list[np.ndarray]:
    sigma2 = target.sigma2
    rho = [abs(target.psi(r)) / sigma2 for r in range(1, k + 1)]
    args = [
        math.atan2(target.xi(r), target.nu(r)) if rho[r - 1] > 0 else 0.0
        for r in range(1, k + 1)
    ]
    if k == 1:
        # the order-1 system has a closed-form solution; start exactly there
        return [np.array([args[0], math.sqrt(_invert_a1(rho[0])[0])])]
    kap0 = np.array(
        [min(max(_invert_a1(min(p, 0.999))[0], 0.05), 25.0) for p in rho]
    )
    s0 = np.sqrt(kap0)
    mu0 = args[0]
    d0 = [
        wrap_half_open(mu0 - args[j] / (j + 1), _TWO_PI / (j + 1))
        for j in range(1, k)
    ]
    starts = [np.concatenate(([mu0], d0, s0))]
    m = cfg.multistart_grid
    mu_grid = -math.pi + _TWO_PI * (np.arange(m) + 0.5) / m
    delta_grids = [
        (_TWO_PI / (j + 1)) * (np.arange(m) + 0.5) / m for j in range(1, k)
    ]
    for mu in mu_grid:
        for combo in product(*delta_grids):
            starts.append(np.concatenate(([mu], combo, s0)))
    return starts


def solve_moments(
    target: Acvf,
    k: int,
    h: Optional[TabulatedDensity] = None,
    cfg: Optional[SolverConfig] = None,
) -> FitReport:
    """Fit GvM_k (or tilt-of-h) parameters to target autocovariances.

    Solves the 2k real moment equations psi_r = sigma2*exp(i*r*mu_1)*
    (A_r + i*B_r), r = 1..k, by damped Newton iteration from a data-driven
    start plus a uniform multistart grid over the phases.  Among converged
    runs the least concentrated solution (minimal sum of kappa_j^2) wins.
    ``h`` defaults to the uniform reference, in which case the solution is
    the entropy-maximizing spectral density under the constraints.
    """
    if cfg is None:
        cfg = SolverConfig()
    if k < 1:
        raise ValueError("order k must be >= 1")
    if target.max_lag < k:
        raise ValueError(f"target must provide at least {k} lags")
    target.validate()
    sigma2 = target.sigma2

    if sigma2 == 0.0 or all(target.psi(r) == 0 for r in range(1, k + 1)):
        params = GvMParams(sigma2=sigma2, mus=(0.0,) * k, kappas=(0.0,) * k)
        return FitReport(params, 0.0, 0, True)
    for r in range(1, k + 1):
        if abs(target.psi(r)) > (1.0 - 1e-12) * sigma2:
            raise InfeasibleError(
                f"infeasible: |psi({r})| is at the sigma2 boundary, the "
                "concentration would diverge"
            )

    system = _MomentSystem(target, k, h)
    runs = []
    for x0 in _start_points(target, k, cfg):
        x, res, iters, ok = _newton_run(system, x0, cfg)
        if ok:
            runs.append((float(np.sum(x[k:] ** 4)), res, iters, x))
    if not runs:
        raise NoConvergenceError(
            "no convergence: every multistart exhausted its iteration budget"
        )
    sumk2, res, iters, x = min(runs, key=lambda t: (t[0], t[1]))

    mu1, deltas, kappas = system.split(x)
    mu1 = wrap_location(mu1, 1)
    mus = [mu1]
    for j in range(1, k):
        mus.append(wrap_location(mu1 - deltas[j - 1], j + 1))
    params = GvMParams(sigma2=sigma2, mus=tuple(mus), kappas=tuple(kappas))
    return FitReport(params, res, iters, True)
