"""Synthetic linear models ``f_n(theta) = A_n theta - b_n`` with known root and noise.

``A_n = A + Atilde_n`` where ``Atilde_n`` is drawn i.i.d. from a finite
zero-mean mixture, and ``f_n(theta*) = Delta*_n`` is i.i.d. with covariance
``noise_cov``. With a finite mixture the operator
``L(Q) = E[(I + A_n) Q (I + A_n)^T]`` is available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .sa_core import LinearSample

NOISE_KINDS = ("gaussian", "bounded-mixture")


@dataclass(frozen=True)
class LinearModelSpec:
    a_mean: np.ndarray
    b_mean: np.ndarray
    noise_cov: np.ndarray
    a_perturbations: tuple = ()
    noise_kind: str = "gaussian"
    name: str = ""
    _noise_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = linalg.as_matrix(self.a_mean, "a_mean")
        d = a.shape[0]
        if a.shape != (d, d):
            raise ValueError("a_mean must be square")
        b = np.asarray(self.b_mean, dtype=float).reshape(-1)
        if b.size != d:
            raise ValueError("b_mean has the wrong length")
        cov = linalg.symmetrize(linalg.as_matrix(self.noise_cov, "noise_cov"))
        if cov.shape != (d, d):
            raise ValueError("noise_cov has the wrong shape")
        w, v = np.linalg.eigh(cov)
        if w.min() < -1e-10 * max(1.0, abs(w).max()):
            raise ValueError("noise_cov must be positive semi-definite")
        if np.linalg.matrix_rank(a) < d:
            raise ValueError("a_mean must be nonsingular")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"noise_kind must be one of {NOISE_KINDS}")
        perts = tuple((linalg.as_matrix(m, "perturbation"), float(p))
                      for m, p in self.a_perturbations)
        if perts:
            probs = np.array([p for _, p in perts])
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("perturbation probabilities must be >= 0 and sum to 1")
            mean = sum(p * m for m, p in perts)
            if np.abs(mean).max() > 1e-12:
                raise ValueError("perturbation mixture must have zero mean")
            if any(m.shape != (d, d) for m, _ in perts):
                raise ValueError("perturbations must match a_mean")
        object.__setattr__(self, "a_mean", a)
        object.__setattr__(self, "b_mean", b)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "a_perturbations", perts)
        object.__setattr__(self, "_noise_factor", v * np.sqrt(np.clip(w, 0.0, None)))

    @property
    def dim(self) -> int:
        return self.a_mean.shape[0]

    @property
    def theta_star(self) -> np.ndarray:
        return np.linalg.solve(self.a_mean, self.b_mean)

    @property
    def perturbation_stack(self) -> np.ndarray:
        if not self.a_perturbations:
            return np.zeros((0, self.dim, self.dim))
        return np.stack([m for m, _ in self.a_perturbations])

    @property
    def perturbation_probs(self) -> np.ndarray:
        return np.array([p for _, p in self.a_perturbations])

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` i.i.d. draws of ``Delta*`` with covariance ``noise_cov``, shape (n, d)."""
        d = self.dim
        if self.noise_kind == "gaussian":
            z = rng.standard_normal((n, d))
        else:
            z = rng.choice(np.array([-1.0, 1.0]), size=(n, d))
        return z @ self._noise_factor.T

    def draw_perturbation_indices(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if not self.a_perturbations:
            return np.zeros(0, dtype=np.int64)
        probs = self.perturbation_probs
        return rng.choice(len(probs), size=n, p=probs).astype(np.int64)

    def draw_stream(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw stream for ``n`` steps: (perturbation indices, noise) in a fixed draw order."""
        idx = self.draw_perturbation_indices(rng, n)
        noise = self.draw_noise(rng, n)
        return idx, noise

    def make_sample(self, pert_index: int | None, noise: np.ndarray) -> LinearSample:
        a = self.a_mean.copy()
        if pert_index is not None and self.a_perturbations:
            a = a + self.a_perturbations[pert_index][0]
        # b chosen so that f(theta*) = a theta* - b equals the noise draw
        b = a @ self.theta_star - noise
        return LinearSample(a, b)

    def meets_bounded_noise(self) -> bool:
        """Whether the martingale-difference noise is bounded (Gaussian is not)."""
        return self.noise_kind == "bounded-mixture"


@dataclass(frozen=True)
class ModelFacts:
    theta_star: np.ndarray
    sigma_star: np.ndarray
    l_operator: np.ndarray


def sample(spec: LinearModelSpec, rng: np.random.Generator) -> LinearSample:
    idx, noise = spec.draw_stream(rng, 1)
    return spec.make_sample(int(idx[0]) if idx.size else None, noise[0])


def l_operator(spec: LinearModelSpec, zeta: float = 1.0) -> np.ndarray:
    """Vectorized ``Q -> E[(I + zeta A_n) Q (I + zeta A_n)^T]``, exact over the mixture."""
    d = spec.dim
    eye = np.eye(d)
    if not spec.a_perturbations:
        m = eye + zeta * spec.a_mean
        return linalg.kron(m, m)
    out = np.zeros((d * d, d * d))
    for pert, p in spec.a_perturbations:
        m = eye + zeta * (spec.a_mean + pert)
        out += p * linalg.kron(m, m)
    return out


def facts(spec: LinearModelSpec) -> ModelFacts:
    a_inv = np.linalg.inv(spec.a_mean)
    sigma_star = linalg.symmetrize(a_inv @ spec.noise_cov @ a_inv.T)
    return ModelFacts(spec.theta_star, sigma_star, l_operator(spec))


# presets -------------------------------------------------------------------

def symmetric_drift_model(d: int = 10, rng_seed: int = 0, *, lam_min: float = 0.05,
                  theta_star=None, noise_scale: float = 1.0) -> LinearModelSpec:
    """Symmetric ``-A`` > 0 with largest eigenvalue 1, ``A_n = A``, Gaussian noise.

    The eigenvalues of ``-A`` are drawn in ``[lam_min, 1]`` with the largest
    pinned at 1. Noise is unit scale (``noise_scale * I``); the coupling and
    covariance checks scale with the noise, so nothing depends on its size.
    The root defaults to the all-ones vector so relative comparisons of
    iterates are well posed.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if d == 1:
        a = np.array([[-1.0]])
    else:
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        lam = rng.uniform(lam_min, 1.0, size=d)
        lam[np.argmax(lam)] = 1.0
        a = -(q * lam) @ q.T
        a = linalg.symmetrize(a)
        a = a / np.max(np.linalg.eigvalsh(-a))
    theta = np.ones(d) if theta_star is None else np.asarray(theta_star, dtype=float)
    return LinearModelSpec(a, a @ theta, noise_scale * np.eye(d), (), "gaussian",
                           name=f"fig2-d{d}")


def scalar_model(a: float = -0.5, sigma2: float = 1.0, theta_star: float = 1.0) -> LinearModelSpec:
    return LinearModelSpec(np.array([[a]]), np.array([a * theta_star]), np.array([[sigma2]]),
                           (), "gaussian", name="scalar")


def mixture_model(d: int = 3, rng_seed: int = 0, *, spread: float = 0.3,
                  lam_range=(0.3, 0.9)) -> LinearModelSpec:
    """Stable ``A`` with a symmetric two-point perturbation mixture ``A_n = A +/- E``.

    Noise is bounded (Rademacher mixture), so the boundedness assumptions on
    the martingale differences hold. ``E`` is a random matrix scaled to
    ``spread`` in spectral norm; the seed is rejected and redrawn internally
    until the operator L has spectral radius below 0.95.
    """
    rng = np.random.default_rng(rng_seed)
    for _ in range(1000):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        lam = rng.uniform(*lam_range, size=d)
        a = linalg.symmetrize(-(q * lam) @ q.T)
        e = rng.standard_normal((d, d))
        e *= spread / np.linalg.norm(e, 2)
        mix = rng.standard_normal((d, d))
        cov = mix @ mix.T / d + 0.5 * np.eye(d)
        theta = rng.uniform(0.5, 1.5, size=d)
        spec = LinearModelSpec(a, a @ theta, cov, ((e, 0.5), (-e, 0.5)), "bounded-mixture",
                               name=f"mixture-d{d}")
        if linalg.spectral_radius(l_operator(spec)) < 0.95:
            return spec
    raise RuntimeError("could not draw a stable mixture model")


PRESETS = {
    "fig2": lambda: symmetric_drift_model(10, 0),
    "fig2-d4": lambda: symmetric_drift_model(4, 0),
    "scalar": lambda: scalar_model(),
    "mixture-d3": lambda: mixture_model(3, 0),
    "mixture-d4": lambda: mixture_model(4, 0),
}


def preset(name: str) -> LinearModelSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}") from None
