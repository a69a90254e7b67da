"""Damped least-squares driver, fit containers and the Jacobian harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from ..errors import FitError

# analytic and finite-difference Jacobians must agree to this level
JACOBIAN_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FitModel:
    """A differentiable model y = func(x, p) with its analytic Jacobian.

    `steps(p)` gives finite-difference steps per parameter and `grid(p)` a
    representative abscissa for Jacobian checks.
    """

    name: str
    param_names: tuple[str, ...]
    func: Callable
    jac: Callable
    steps: Callable
    grid: Callable


@dataclass
class SpectralFit:
    model: str
    param_names: tuple[str, ...]
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    nfev: int = 0
    flags: list[str] = field(default_factory=list)
    derived: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def __getitem__(self, name: str) -> float:
        if name in self.param_names:
            return float(self.values[self.param_names.index(name)])
        if name in self.derived:
            return self.derived[name][0]
        raise KeyError(name)

    def error(self, name: str) -> float:
        if name in self.param_names:
            return float(self.uncertainties[self.param_names.index(name)])
        return self.derived[name][1]

    def propagate(self, grad) -> float:
        """1-sigma error of a derived quantity with gradient `grad`."""
        grad = np.asarray(grad, dtype=float)
        return float(np.sqrt(max(grad @ self.covariance @ grad, 0.0)))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": {n: float(v) for n, v in zip(self.param_names, self.values)},
            "uncertainties": {n: float(v) for n, v in
                              zip(self.param_names, self.uncertainties)},
            "covariance": self.covariance.tolist(),
            "derived": {k: {"value": v, "uncertainty": e}
                        for k, (v, e) in self.derived.items()},
            "chi2": self.chi2,
            "dof": self.dof,
            "reduced_chi2": self.reduced_chi2,
            "nfev": self.nfev,
            "flags": list(self.flags),
        }


def covariance_from_jacobian(jac: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """(J^T J)^-1 * scale via SVD; singular directions get zero weight."""
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    tol = np.finfo(float).eps * max(jac.shape) * (s[0] if s.size else 0.0)
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0) ** 2, 0.0)
    cov = (vt.T * inv) @ vt * scale
    return 0.5 * (cov + cov.T)


def least_squares_fit(model: FitModel, x, y, p0, sigma=None,
                      max_nfev: int = 2000) -> SpectralFit:
    """Levenberg-Marquardt fit of `model` to (x, y).

    Parameters are rescaled by their initial magnitude so absolute offsets
    (optical frequencies) and widths are conditioned alike. With `sigma` the
    covariance is absolute; without it, it is scaled by chi2/dof.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise FitError("uncertainties must be positive and finite")
    if y.size < p0.size:
        raise FitError(f"need at least {p0.size} points, got {y.size}")
    scale = np.where(p0 != 0, np.abs(p0), 1.0)

    def residual(q):
        return (model.func(x, p0 + q * scale) - y) * w

    def jacobian(q):
        return model.jac(x, p0 + q * scale) * w[:, None] * scale[None, :]

    try:
        res = optimize.least_squares(residual, np.zeros_like(p0), jac=jacobian,
                                     method="lm", xtol=1e-12, ftol=1e-15,
                                     gtol=1e-10, max_nfev=max_nfev)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"{model.name}: {exc}") from exc
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"{model.name}: no convergence after {res.nfev} evaluations "
                       f"(status {res.status}: {res.message}; cost {res.cost:.3g})")
    p = p0 + res.x * scale
    chi2 = float(2.0 * res.cost)
    dof = y.size - p.size
    jw = model.jac(x, p) * w[:, None]
    s2 = 1.0 if sigma is not None else (chi2 / dof if dof > 0 else 0.0)
    cov = covariance_from_jacobian(jw, s2)
    return SpectralFit(model.name, model.param_names, p, cov, chi2, dof, int(res.nfev))


def finite_difference_jacobian(model: FitModel, x, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    steps = np.asarray(model.steps(point), dtype=float)
    cols = []
    for j, h in enumerate(steps):
        up = point.copy()
        dn = point.copy()
        up[j] += h
        dn[j] -= h
        cols.append((model.func(x, up) - model.func(x, dn)) / (up[j] - dn[j]))
    return np.column_stack(cols)


def jacobian_check(model: FitModel, point, x=None) -> float:
    """Max over parameters of |J_analytic - J_fd|_inf / |J_analytic|_inf.

    Values above JACOBIAN_TOLERANCE indicate a wrong derivative or an
    ill-conditioned point (e.g. a linewidth shrinking towards zero).
    """
    point = np.asarray(point, dtype=float)
    x = model.grid(point) if x is None else np.asarray(x, dtype=float)
    ja = model.jac(x, point)
    jf = finite_difference_jacobian(model, x, point)
    worst = 0.0
    for j in range(point.size):
        ref = max(np.max(np.abs(ja[:, j])), np.max(np.abs(jf[:, j])))
        if ref == 0:
            continue
        worst = max(worst, float(np.max(np.abs(ja[:, j] - jf[:, j])) / ref))
    return worst


def ill_conditioned(deviation: float) -> bool:
    return not deviation <= JACOBIAN_TOLERANCE
