"""Separable GP on a 2-D lattice: profile likelihood, MLE and prediction.

The covariance of ``vec(Y)`` is ``sigma2 * (R2 kron R1 + eta I)``.  Every
quantity is evaluated through the per-axis eigendecompositions
``R_l = U_l diag(lam_l) U_l^T`` so no N x N matrix is ever formed.  The
``*_direct`` functions build the full matrix and exist only to check the
fast path.

``Y`` is stored as an ``n1 x n2`` array; ``vec`` is column-major, matching
``R2 kron R1``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg, optimize

from gpcellseg.kernels import KernelFamily, KernelSpec, check_grid, correlation_matrix, default_grid

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-12
S2_FLOOR = 1e-300
DIRECT_MAX_N = 10_000

LOG_ETA_BOUNDS = (np.log(1e-10), np.log(1e6))


class DegenerateDataWarning(RuntimeWarning):
    """Residual quadratic form is zero (e.g. a constant tile)."""


@dataclass(frozen=True)
class AxisEigen:
    """Eigenpairs of one axis correlation matrix (eigenvalues floored)."""

    vectors: np.ndarray
    values: np.ndarray
    spec: Optional[KernelSpec] = None
    coords: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.values.size

    @classmethod
    def from_kernel(cls, spec: KernelSpec, coords) -> "AxisEigen":
        coords = check_grid(coords)
        R = correlation_matrix(spec, coords)
        lam, U = np.linalg.eigh(R)
        if not np.all(np.isfinite(lam)):
            raise FloatingPointError("eigendecomposition produced non-finite values")
        return cls(U, np.maximum(lam, EIG_FLOOR), spec, coords)

    @classmethod
    def trivial(cls) -> "AxisEigen":
        """Single-point axis (R = [1])."""
        return cls(np.ones((1, 1)), np.ones(1), None, np.ones(1))


@dataclass(frozen=True)
class GpHyperParams:
    kernel1: KernelSpec
    kernel2: KernelSpec
    eta: float
    mu: Optional[float] = None
    sigma2: Optional[float] = None
    loglik: Optional[float] = None
    flags: tuple = field(default=())

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"nugget must be positive and finite, got {self.eta}")
        if self.sigma2 is not None and not (self.sigma2 > 0):
            raise ValueError(f"variance must be positive, got {self.sigma2}")

    @property
    def gammas(self) -> tuple[float, float]:
        return self.kernel1.range, self.kernel2.range

    def to_dict(self) -> dict:
        return {
            "family": self.kernel1.family.value,
            "gamma1": self.kernel1.range,
            "gamma2": self.kernel2.range,
            "eta": self.eta,
            "mu": self.mu,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "flags": list(self.flags),
        }


@dataclass
class PredictiveField:
    mean: np.ndarray
    variance: Optional[np.ndarray]
    mu: float
    sigma2: float
    degenerate: bool = False


class ProfileLik(NamedTuple):
    loglik: float
    mu: float
    sigma2: float


def _check_image(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("image contains non-finite values")
    return Y


def _axis(n: int, spec: KernelSpec, coords) -> AxisEigen:
    if n == 1:
        return AxisEigen.trivial()
    coords = default_grid(n) if coords is None else check_grid(coords)
    if coords.size != n:
        raise ValueError(f"axis has {n} pixels but {coords.size} coordinates")
    return AxisEigen.from_kernel(spec, coords)


def _log_constant(N: int) -> float:
    # makes the profile value the exact log density at (mu_hat, sigma2_hat)
    return -0.5 * N * np.log(2 * np.pi) - 0.5 * N + 0.5 * N * np.log(N)


class _Profile(NamedTuple):
    mu: float
    S2: float
    logdet: float
    resid_t: np.ndarray  # U1^T (Y - mu) U2
    denom: np.ndarray  # lam1 lam2^T + eta
    degenerate: bool


def _profile(Y: np.ndarray, e1: AxisEigen, e2: AxisEigen, eta: float) -> _Profile:
    U1, U2 = e1.vectors, e2.vectors
    denom = np.outer(e1.values, e2.values) + eta
    u1 = U1.sum(axis=0)  # U1^T 1
    u2 = U2.sum(axis=0)
    Y0 = U1.T @ Y @ U2
    u12 = np.outer(u1, u2)
    mu = float(np.sum(u12 * Y0 / denom) / np.sum(u12 * u12 / denom))
    resid_t = Y0 - mu * u12
    S2 = float(np.sum(resid_t * resid_t / denom))
    # a constant image has S^2 = 0 exactly; roundoff leaves ~1e-33
    flat = np.ptp(Y) <= 1e-12 * max(1.0, float(np.max(np.abs(Y))))
    degenerate = flat or not S2 > S2_FLOOR
    if degenerate:
        S2 = S2_FLOOR
    return _Profile(mu, S2, float(np.sum(np.log(denom))), resid_t, denom, degenerate)


def _loglik(p: _Profile, N: int) -> float:
    return _log_constant(N) - 0.5 * p.logdet - 0.5 * N * np.log(p.S2)


def axis_eigens(shape, family, gamma1, gamma2, coords1=None, coords2=None):
    family = KernelFamily.parse(family)
    n1, n2 = shape
    e1 = _axis(n1, KernelSpec(family, gamma1), coords1)
    e2 = _axis(n2, KernelSpec(family, gamma2), coords2)
    return e1, e2


def profile_loglik_fast(Y, gamma1, gamma2, eta, family=KernelFamily.MATERN52,
                        coords1=None, coords2=None) -> ProfileLik:
    """Profile log-likelihood of ``(gamma, eta)`` in O(n1^3 + n2^3 + N(n1+n2)).

    Returns ``(loglik, mu_hat, sigma2_hat)``.  The additive constant is
    chosen so ``loglik`` is the exact Gaussian log density at the plug-in
    ``mu_hat`` and ``sigma2_hat = S^2 / N``.
    """
    Y = _check_image(Y)
    if not (np.isfinite(eta) and eta > 0):
        raise ValueError("eta must be positive and finite")
    e1, e2 = axis_eigens(Y.shape, family, gamma1, gamma2, coords1, coords2)
    p = _profile(Y, e1, e2, eta)
    if p.degenerate:
        warnings.warn("zero residual sum of squares; S^2 floored", DegenerateDataWarning, stacklevel=2)
    N = Y.size
    return ProfileLik(_loglik(p, N), p.mu, p.S2 / N)


def _direct_system(Y, gamma1, gamma2, eta, family, coords1, coords2):
    Y = _check_image(Y)
    N = Y.size
    if N > DIRECT_MAX_N:
        raise ValueError(f"direct evaluation refused for N={N} > {DIRECT_MAX_N}")
    family = KernelFamily.parse(family)
    n1, n2 = Y.shape
    c1 = default_grid(n1) if coords1 is None else coords1
    c2 = default_grid(n2) if coords2 is None else coords2
    R = np.kron(correlation_matrix(KernelSpec(family, gamma2), c2),
                correlation_matrix(KernelSpec(family, gamma1), c1))
    Rt = R + eta * np.eye(N)
    cho = linalg.cho_factor(Rt, lower=True)
    y = Y.ravel(order="F")
    one = np.ones(N)
    Ri_y = linalg.cho_solve(cho, y)
    Ri_1 = linalg.cho_solve(cho, one)
    mu = float(one @ Ri_y / (one @ Ri_1))
    r = y - mu
    Ri_r = linalg.cho_solve(cho, r)
    S2 = float(r @ Ri_r)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    return Y, R, cho, mu, S2, logdet, Ri_r


def profile_loglik_direct(Y, gamma1, gamma2, eta, family=KernelFamily.MATERN52,
                          coords1=None, coords2=None) -> ProfileLik:
    """Same quantity as :func:`profile_loglik_fast` with the full N x N matrix."""
    Y, _, _, mu, S2, logdet, _ = _direct_system(Y, gamma1, gamma2, eta, family, coords1, coords2)
    N = Y.size
    return ProfileLik(_log_constant(N) - 0.5 * logdet - 0.5 * N * np.log(S2), mu, S2 / N)


def predict_direct(Y, params: GpHyperParams, coords1=None, coords2=None) -> PredictiveField:
    """Predictive mean and marginal variance from the explicit matrices."""
    g1, g2 = params.gammas
    Y, R, cho, mu, S2, _, Ri_r = _direct_system(Y, g1, g2, params.eta, params.kernel1.family,
                                                coords1, coords2)
    n1, n2 = Y.shape
    N = Y.size
    mean = (mu + R @ Ri_r).reshape((n1, n2), order="F")
    c = 1.0 - np.einsum("ij,ji->i", R, linalg.cho_solve(cho, R))
    var = (S2 / N) * np.maximum(c, 0.0).reshape((n1, n2), order="F")
    return PredictiveField(mean, var, mu, S2 / N)


def predict(Y, params: GpHyperParams, want_variance: bool = True, coords1=None, coords2=None,
            eigen: Optional[tuple[AxisEigen, AxisEigen]] = None) -> PredictiveField:
    """Posterior mean (and marginal variance) of the latent image.

    ``mu`` and ``sigma2`` are re-estimated from ``Y`` in closed form given
    the range parameters and nugget in ``params``.  Pass ``eigen`` to reuse
    decompositions across tiles of equal size.
    """
    Y = _check_image(Y)
    g1, g2 = params.gammas
    if not all(np.isfinite(v) and v > 0 for v in (g1, g2, params.eta)):
        raise ValueError("hyperparameters must be positive and finite")
    if eigen is None:
        eigen = axis_eigens(Y.shape, params.kernel1.family, g1, g2, coords1, coords2)
    e1, e2 = eigen
    p = _profile(Y, e1, e2, params.eta)
    N = Y.size
    sigma2 = p.S2 / N
    if p.degenerate:
        # constant data: posterior collapses onto the observed constant
        return PredictiveField(np.full(Y.shape, p.mu),
                               np.zeros(Y.shape) if want_variance else None,
                               p.mu, sigma2, degenerate=True)

    lam1, lam2 = e1.values, e2.values
    weighted = (lam1[:, None] * (p.resid_t / p.denom)) * lam2[None, :]
    mean = p.mu + e1.vectors @ weighted @ e2.vectors.T

    var = None
    if want_variance:
        A = (e1.vectors * lam1[None, :]) ** 2  # rows: (r_i^T U1)^2
        B = (e2.vectors * lam2[None, :]) ** 2
        c = 1.0 - A @ (1.0 / p.denom) @ B.T
        var = sigma2 * np.clip(c, 0.0, 1.0)
    return PredictiveField(mean, var, p.mu, sigma2)


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------

def _span(coords, n: int) -> float:
    x = default_grid(n) if coords is None else check_grid(coords)
    # n * mean spacing; equals n on the integer lattice
    return (x[-1] - x[0]) * n / (n - 1)


def _spacing(coords, n: int) -> float:
    x = default_grid(n) if coords is None else check_grid(coords)
    return float(np.min(np.diff(x)))


def fit_mle(Y, family=KernelFamily.MATERN52, coords1=None, coords2=None,
            n_polish: int = 3, maxiter: int = 500, xatol: float = 1e-6,
            eta_max: float | None = None,
            gamma_fractions=(1 / 20, 1 / 5, 1 / 2)) -> GpHyperParams:
    """Maximise the profile likelihood over log range parameters and log nugget.

    Every point of a 3x3x3 start grid (ranges at n/20, n/5, n/2 of each
    axis, nugget in {0.01, 0.1, 1}) is evaluated; Nelder-Mead is then run
    from the ``n_polish`` best starts.  Axes with a single pixel are not
    optimised.  The returned value is never worse than the best start.
    ``eta_max`` lowers the upper bound of the nugget search and
    ``gamma_fractions`` replaces the range starts (fractions of the span).
    """
    Y = _check_image(Y)
    family = KernelFamily.parse(family)
    n1, n2 = Y.shape
    active = [n > 1 for n in (n1, n2)]
    if not any(active):
        raise ValueError("need at least two pixels to fit")
    coords = (coords1, coords2)
    N = Y.size

    gamma_grids, bounds = [], []
    for l, n in enumerate((n1, n2)):
        if not active[l]:
            continue
        span = _span(coords[l], n)
        gamma_grids.append([span * f for f in gamma_fractions])
        bounds.append((np.log(0.05 * _spacing(coords[l], n)), np.log(100 * span)))
    log_eta_hi = LOG_ETA_BOUNDS[1] if eta_max is None else min(LOG_ETA_BOUNDS[1], np.log(eta_max))
    if log_eta_hi < np.log(0.01):
        raise ValueError("eta_max must be at least 0.01")
    bounds.append((LOG_ETA_BOUNDS[0], log_eta_hi))

    eig_cache: dict = {}

    def eig(l, gamma):
        key = (l, gamma)
        if key not in eig_cache:
            if len(eig_cache) > 512:
                eig_cache.clear()
            eig_cache[key] = AxisEigen.from_kernel(
                KernelSpec(family, gamma), default_grid((n1, n2)[l]) if coords[l] is None else coords[l])
        return eig_cache[key]

    def unpack(theta):
        vals = list(np.exp(theta))
        gammas = [1.0, 1.0]
        for l in range(2):
            if active[l]:
                gammas[l] = vals.pop(0)
        return gammas, vals[0]

    def negll(theta):
        theta = np.clip(theta, [b[0] for b in bounds], [b[1] for b in bounds])
        gammas, eta = unpack(theta)
        e = [eig(l, gammas[l]) if active[l] else AxisEigen.trivial() for l in range(2)]
        p = _profile(Y, e[0], e[1], eta)
        val = -_loglik(p, N)
        return val if np.isfinite(val) else np.inf

    grids = gamma_grids + [[0.01, 0.1, 1.0]]
    mesh = np.meshgrid(*[np.log(g) for g in grids], indexing="ij")
    starts = np.stack([m.ravel() for m in mesh], axis=1)
    start_vals = np.array([negll(s) for s in starts])
    order = np.argsort(start_vals, kind="stable")
    best_theta, best_val = starts[order[0]], start_vals[order[0]]
    improved = False
    for idx in order[:n_polish]:
        res = optimize.minimize(negll, starts[idx], method="Nelder-Mead", bounds=bounds,
                                options={"xatol": xatol, "fatol": np.inf, "maxiter": maxiter})
        if res.fun < best_val:
            best_theta, best_val, improved = res.x, float(res.fun), True

    flags = () if improved else ("no_improvement_over_start_grid",)
    if not improved:
        log.warning("MLE polishing did not improve on the start grid")
    best_theta = np.clip(best_theta, [b[0] for b in bounds], [b[1] for b in bounds])
    gammas, eta = unpack(best_theta)
    e = [eig(l, gammas[l]) if active[l] else AxisEigen.trivial() for l in range(2)]
    p = _profile(Y, e[0], e[1], eta)
    if p.degenerate:
        flags = flags + ("degenerate_residual",)
    return GpHyperParams(KernelSpec(family, gammas[0]), KernelSpec(family, gammas[1]), float(eta),
                         mu=p.mu, sigma2=p.S2 / N, loglik=_loglik(p, N), flags=flags)


def simulate(shape, params: GpHyperParams, rng: np.random.Generator,
             coords1=None, coords2=None) -> np.ndarray:
    """Draw ``Y = F + E`` from the separable model (used for consistency checks)."""
    n1, n2 = shape
    c1 = default_grid(n1) if coords1 is None else coords1
    c2 = default_grid(n2) if coords2 is None else coords2
    jitter = 1e-10
    L1 = np.linalg.cholesky(correlation_matrix(params.kernel1, c1) + jitter * np.eye(n1))
    L2 = np.linalg.cholesky(correlation_matrix(params.kernel2, c2) + jitter * np.eye(n2))
    sigma2 = 1.0 if params.sigma2 is None else params.sigma2
    mu = 0.0 if params.mu is None else params.mu
    F = mu + np.sqrt(sigma2) * (L1 @ rng.standard_normal((n1, n2)) @ L2.T)
    return F + np.sqrt(params.eta * sigma2) * rng.standard_normal((n1, n2))


def with_estimates(params: GpHyperParams, Y) -> GpHyperParams:
    """Copy of ``params`` with closed-form mu, sigma2 and loglik for ``Y``."""
    g1, g2 = params.gammas
    ll, mu, s2 = profile_loglik_fast(Y, g1, g2, params.eta, params.kernel1.family)
    return replace(params, mu=mu, sigma2=s2, loglik=ll)
