"""Analytic asymptotic covariances and stability certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .linalg import StabilityError


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    re_negative: np.ndarray
    momentum_contractive: np.ndarray
    l_spectral_radius: float | None
    zeta: float

    @property
    def overall(self) -> bool:
        ok = bool(np.all(self.re_negative) and np.all(self.momentum_contractive))
        if self.l_spectral_radius is not None:
            ok = ok and self.l_spectral_radius < 1.0
        return ok

    def failure_reason(self) -> str:
        for lam, neg, con in zip(self.eigenvalues, self.re_negative, self.momentum_contractive):
            if not neg:
                return f"eigenvalue {lam:.6g} has non-negative real part"
            if not con:
                return f"|1 + zeta*lambda| = {abs(1 + self.zeta * lam):.6g} >= 1 for lambda={lam:.6g}"
        if self.l_spectral_radius is not None and self.l_spectral_radius >= 1.0:
            return f"operator spectral radius {self.l_spectral_radius:.6g} >= 1"
        return ""


@dataclass(frozen=True)
class CovariancePrediction:
    algorithm: str
    sigma_star: np.ndarray
    sigma22: np.ndarray
    sigma11: np.ndarray
    sigma11_verbatim: np.ndarray | None = None

    @property
    def sigma11_psd(self) -> bool:
        w = np.linalg.eigvalsh(linalg.symmetrize(self.sigma11))
        return bool(w.min() >= -1e-9 * max(1.0, np.abs(w).max()))

    @property
    def sigma11_symmetrized(self) -> np.ndarray:
        return linalg.symmetrize(self.sigma11)

    def blocks(self) -> dict[str, np.ndarray]:
        return {"sigma_star": self.sigma_star, "sigma11": self.sigma11, "sigma22": self.sigma22}


def check_stability(a, zeta: float = 1.0, l_operator=None) -> StabilityReport:
    ev = linalg.eigenvalues(a)
    rho = None
    if l_operator is not None:
        rho = float(np.max(np.abs(np.linalg.eigvals(linalg.as_matrix(l_operator)))))
    return StabilityReport(
        eigenvalues=ev,
        re_negative=ev.real < 0,
        momentum_contractive=np.abs(1 + zeta * ev) < 1,
        l_spectral_radius=rho,
        zeta=zeta,
    )


def optimal_covariance(a, sigma_delta) -> np.ndarray:
    a_inv = np.linalg.inv(linalg.as_matrix(a))
    return linalg.symmetrize(a_inv @ linalg.as_matrix(sigma_delta) @ a_inv.T)


def predict_polsa(a, sigma_delta, zeta: float = 1.0) -> CovariancePrediction:
    """Limits for PolSA with fixed momentum matrix ``I + zeta A``.

    The position block equals the optimal covariance; the velocity block
    solves ``X = (I + zeta A) X (I + zeta A)^T + zeta^2 Sigma_Delta``.
    """
    a = linalg.as_matrix(a, "a")
    sigma_delta = linalg.as_matrix(sigma_delta, "sigma_delta")
    report = check_stability(a, zeta)
    if not report.overall:
        bad = ~(report.re_negative & report.momentum_contractive)
        raise StabilityError(f"PolSA unstable: {report.failure_reason()}",
                             complex(report.eigenvalues[np.argmax(bad)]))
    sigma_star = optimal_covariance(a, sigma_delta)
    m = np.eye(a.shape[0]) + zeta * a
    s22 = linalg.solve_discrete_lyapunov(m, zeta ** 2 * sigma_delta)
    return CovariancePrediction("PolSA", sigma_star, s22, sigma_star.copy())


def predict_nesa(l_operator, a, sigma_delta) -> CovariancePrediction:
    """Limits for NeSA (zeta = 1) with random ``A_n``.

    The velocity block solves ``X = L(X) + Sigma_Delta``. The position block
    is ``-X - A^{-1} X - X A^{-T}``; with deterministic ``A_n`` this equals the
    optimal covariance. ``sigma11_verbatim`` keeps the form with ``X A^{-1}`` on
    the right, which differs only for non-symmetric ``A``. With random ``A_n``
    the position block need not be PSD; see ``sigma11_psd``.
    """
    a = linalg.as_matrix(a, "a")
    sigma_delta = linalg.as_matrix(sigma_delta, "sigma_delta")
    s22 = linalg.solve_operator_lyapunov(l_operator, sigma_delta)
    a_inv = np.linalg.inv(a)
    s11 = -s22 - a_inv @ s22 - s22 @ a_inv.T
    verbatim = -s22 - a_inv @ s22 - s22 @ a_inv
    return CovariancePrediction("NeSA", optimal_covariance(a, sigma_delta), s22, s11, verbatim)


def sa_fixed_gain_covariance(a, sigma_delta, gain) -> np.ndarray:
    """Asymptotic covariance of SA with ``alpha_n = 1/n`` and fixed matrix gain ``G``.

    Solves ``(G A + I/2) S + S (G A + I/2)^T + G Sigma_Delta G^T = 0`` which
    requires every eigenvalue of ``G A`` to have real part below ``-1/2``.
    """
    a = linalg.as_matrix(a)
    g = linalg.as_matrix(gain)
    drift = g @ a + 0.5 * np.eye(a.shape[0])
    ev = np.linalg.eigvals(drift)
    if np.any(ev.real >= 0):
        raise StabilityError("G A must have all eigenvalues with real part < -1/2",
                             complex(ev[np.argmax(ev.real)]))
    s = scipy.linalg.solve_continuous_lyapunov(drift, -g @ linalg.as_matrix(sigma_delta) @ g.T)
    return linalg.symmetrize(s)
