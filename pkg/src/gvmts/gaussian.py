"""Gaussian time series with a GvM spectrum.

Stacking real and imaginary coordinates of a radially symmetric complex
Gaussian vector gives a real covariance matrix built from the autocovariance
function: the diagonal blocks carry half its real part and the off-diagonal
blocks half its (sign-flipped) imaginary part.  This module builds that
matrix, evaluates the temporal (differential) entropy of the stacked
coordinates, and simulates sample paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleError, NoConvergenceError
from .estimation import ComplexSeries
from .spectrum import Acvf, GvMParams, gvm_acvf, gvm_cdf

__all__ = ["GaussianModel", "SimConfig", "build_sigma", "temporal_entropy", "simulate"]

_TWO_PI = 2.0 * math.pi
_METHODS = ("exact-cholesky", "spectral")


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """An a.c.v.f. together with its stacked real-coordinate covariance."""

    acvf: Acvf
    sigma_matrix: np.ndarray


def _stacked_covariance(nu: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """The 2n x 2n covariance of (U_1..U_n, V_1..V_n) from lags 0..n-1.

    Entries: E[U_l U_m] = E[V_l V_m] = nu(l-m)/2, E[U_l V_m] = -xi(l-m)/2,
    E[V_l U_m] = xi(l-m)/2, with nu even and xi odd (xi(0) = 0).
    """
    n = nu.size
    idx = np.arange(n, dtype=np.int32)
    d = idx[:, None] - idx[None, :]
    ad = np.abs(d)
    nu_d = nu[ad]
    xi_d = np.where(d >= 0, xi[ad], -xi[ad])
    sigma = np.empty((2 * n, 2 * n))
    sigma[:n, :n] = nu_d / 2.0
    sigma[n:, n:] = nu_d / 2.0
    sigma[:n, n:] = -xi_d / 2.0
    sigma[n:, :n] = xi_d / 2.0
    return 0.5 * (sigma + sigma.T)


def build_sigma(acvf: Acvf) -> GaussianModel:
    """Build the stacked real covariance of a radially symmetric Gaussian
    vector at k+1 consecutive times with the given autocovariances.

    Raises InfeasibleError when the result is not positive semidefinite,
    which indicates an inconsistent a.c.v.f.
    """
    acvf.validate()
    k = acvf.max_lag
    nu = np.array([acvf.nu(r) for r in range(k + 1)])
    xi = np.array([acvf.xi(r) for r in range(k + 1)])
    sigma = _stacked_covariance(nu, xi)
    min_eig = float(np.linalg.eigvalsh(sigma)[0])
    if min_eig < -1e-10 * acvf.sigma2:
        raise InfeasibleError(
            f"inconsistent a.c.v.f.: stacked covariance has eigenvalue {min_eig:g}"
        )
    sigma.setflags(write=False)
    return GaussianModel(acvf=acvf, sigma_matrix=sigma)


def temporal_entropy(model: GaussianModel) -> float:
    """Differential entropy {1 + log(2*pi)}*(k+1) + log(det Sigma)/2 of the
    stacked Gaussian coordinates.  Requires a positive definite covariance."""
    eigs = np.linalg.eigvalsh(model.sigma_matrix)
    if eigs[0] <= 0.0:
        raise ValueError("degenerate distribution - entropy undefined")
    n = model.sigma_matrix.shape[0] // 2
    return (1.0 + math.log(_TWO_PI)) * n + 0.5 * float(np.log(eigs).sum())


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; the seed is mandatory, there is no ambient RNG."""

    length: int
    seed: int
    method: str = "exact-cholesky"
    spectral_nodes: int = 4096
    jitter: Optional[float] = None

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.spectral_nodes < 64 or self.spectral_nodes % 2 != 0:
            raise ValueError("spectral_nodes must be even and >= 64")
        if self.jitter is not None and self.jitter < 0:
            raise ValueError("jitter must be >= 0")


def _cholesky_with_jitter(sigma: np.ndarray, jitter0: float, cap: float) -> np.ndarray:
    jitter = jitter0
    eye = np.eye(sigma.shape[0])
    while True:
        try:
            return np.linalg.cholesky(sigma + jitter * eye)
        except np.linalg.LinAlgError:
            jitter = jitter * 10.0 if jitter > 0 else max(cap * 1e-6, 1e-300)
            if jitter > cap:
                raise NoConvergenceError(
                    "numerical indefiniteness: Cholesky failed after jitter "
                    "escalation"
                ) from None


def simulate(p: GvMParams, cfg: SimConfig) -> ComplexSeries:
    """Simulate a zero-mean, radially symmetric Gaussian path whose spectrum
    is the GvM density of ``p``.

    ``exact-cholesky`` factors the full 2n x 2n stacked covariance (exact,
    O(n^3)); ``spectral`` sums independent spectral increments over
    ``spectral_nodes`` cells of (-pi, pi], with a.c.v.f. bias O(1/nodes).
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    sigma2 = p.sigma2
    if sigma2 == 0.0:
        return ComplexSeries(np.zeros(n, dtype=complex))

    if cfg.method == "exact-cholesky":
        if n == 1:
            nu = np.array([sigma2])
            xi = np.array([0.0])
        else:
            acv = gvm_acvf(p, n - 1)
            psi = np.concatenate(([sigma2], np.asarray(acv.values)))
            nu = psi.real.copy()
            xi = psi.imag.copy()
        sigma = _stacked_covariance(nu, xi)
        jitter0 = 1e-12 * sigma2 if cfg.jitter is None else cfg.jitter
        chol = _cholesky_with_jitter(sigma, jitter0, 1e-6 * sigma2)
        w = chol @ rng.standard_normal(2 * n)
        return ComplexSeries(w[:n] + 1j * w[n:])

    m = cfg.spectral_nodes
    edges = -math.pi + _TWO_PI * np.arange(m + 1) / m
    cdf = gvm_cdf(p, edges)
    df = np.clip(np.diff(cdf), 0.0, None)
    zeta = rng.standard_normal(m)
    eta = rng.standard_normal(m)
    dz = np.sqrt(df / 2.0) * (zeta + 1j * eta)
    # cell midpoints are a uniform grid, so the sum over cells is a DFT:
    # X_j = exp(i*j*(pi/m - pi)) * (m * ifft(dz))[j mod m]
    lattice = m * np.fft.ifft(dz)
    j = np.arange(1, n + 1)
    x = np.exp(1j * j * (math.pi / m - math.pi)) * lattice[j % m]
    return ComplexSeries(x)
