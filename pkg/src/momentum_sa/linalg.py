"""Small dense linear algebra shared by the rest of the package.

Matrices and vectors are plain ``numpy.ndarray`` objects (float64). The
routines here add the shape/finiteness checks and the few operations
(Kronecker vectorization, discrete Lyapunov solves) that the covariance
predictions are built on.
"""

from __future__ import annotations

import numpy as np

MAX_DIM = 512


class LinalgError(ValueError):
    """Raised for shape violations or failed factorizations."""


class StabilityError(LinalgError):
    """Raised when a Lyapunov solve is requested for an unstable matrix."""

    def __init__(self, message: str, eigenvalue: complex):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise LinalgError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise LinalgError(f"{name} has non-finite entries")
    return m


def _square(m, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise LinalgError(f"{name} has dimension {m.shape[0]} > cap {MAX_DIM}")
    return m


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a square matrix, with multiplicity, as complex numbers."""
    m = _square(m)
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise LinalgError(f"eigenvalue iteration failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise LinalgError("eigenvalue iteration produced non-finite values")
    return ev.astype(complex)


def spectral_radius(m) -> float:
    return float(np.max(np.abs(eigenvalues(m)))) if np.size(m) else 0.0


def pseudo_inverse(m, tol: float | None = None, rtol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse.

    Singular values below ``tol`` are treated as zero. ``rtol`` gives the
    cutoff relative to the largest singular value instead; the default is
    ``rtol = 1e-10``.
    """
    m = as_matrix(m)
    if tol is not None and rtol is not None:
        raise LinalgError("give tol or rtol, not both")
    if (tol is not None and tol < 0) or (rtol is not None and rtol < 0):
        raise LinalgError("tolerances must be non-negative")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    cutoff = tol if tol is not None else (1e-10 if rtol is None else rtol) * s[0]
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def kron(a, b) -> np.ndarray:
    """Kronecker product; entry (i*rows_b + k, j*cols_b + l) is a[i, j] * b[k, l]."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def vec(m) -> np.ndarray:
    """Column-stacking vectorization, so that vec(F X G^T) = (G kron F) vec(X)."""
    return np.asarray(m, dtype=float).reshape(-1, order="F")


def unvec(v, d: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(d, d, order="F")


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def check_stable(f, *, what: str = "f") -> None:
    ev = eigenvalues(f)
    k = int(np.argmax(np.abs(ev)))
    if abs(ev[k]) >= 1.0:
        raise StabilityError(
            f"spectral radius of {what} is {abs(ev[k]):.6g} >= 1 "
            f"(eigenvalue {ev[k]:.6g})",
            complex(ev[k]),
        )


def solve_discrete_lyapunov(f, q) -> np.ndarray:
    """Solve ``X = f X f^T + q`` for a stable ``f`` (spectral radius < 1).

    The equation is vectorized as ``(I - f kron f) vec(X) = vec(q)`` and
    solved densely; the result is symmetrized to remove round-off asymmetry.
    """
    f = _square(f, "f")
    q = _square(q, "q")
    if f.shape != q.shape:
        raise LinalgError(f"shape mismatch: f {f.shape}, q {q.shape}")
    check_stable(f)
    d = f.shape[0]
    lhs = np.eye(d * d) - kron(f, f)
    x = unvec(np.linalg.solve(lhs, vec(q)), d)
    return symmetrize(x)


def solve_operator_lyapunov(l_operator, q, *, neumann_tol: float = 1e-10,
                            max_iter: int = 1_000_000) -> np.ndarray:
    """Solve ``X = L(X) + q`` for a vectorized linear operator ``L`` (d^2 x d^2).

    ``L`` acts on column-stacked ``vec(X)``. A dense solve is used for
    d <= 64; larger problems fall back to the Neumann series sum L^k vec(q).
    """
    l_operator = as_matrix(l_operator, "l_operator")
    q = as_matrix(q, "q")
    d = q.shape[0]
    if l_operator.shape != (d * d, d * d):
        raise LinalgError(f"operator shape {l_operator.shape} does not match q {q.shape}")
    if d <= 64:
        ev = np.linalg.eigvals(l_operator)
        k = int(np.argmax(np.abs(ev)))
        if abs(ev[k]) >= 1.0:
            raise StabilityError(
                f"spectral radius of the operator is {abs(ev[k]):.6g} >= 1", complex(ev[k])
            )
        x = np.linalg.solve(np.eye(d * d) - l_operator, vec(q))
        return symmetrize(unvec(x, d))
    term = vec(q)
    total = term.copy()
    scale = max(np.abs(total).max(), 1e-300)
    for _ in range(max_iter):
        term = l_operator @ term
        total += term
        if np.abs(term).max() <= neumann_tol * scale:
            return symmetrize(unvec(total, d))
    raise StabilityError("Neumann series did not converge", complex(np.nan))
