"""Small dense complex linear algebra used by the receiver chain.

Everything here works on plain ``numpy`` arrays in complex128. Matrices are
tiny (n of a few tens at most), so clarity wins over blocking tricks.
"""

from itertools import combinations
from math import comb

import numpy as np

from .errors import ConvergenceError, SingularMatrixError, SingularUpdateError

__all__ = [
    "hankel_expand",
    "convolution_matrix",
    "mil_rank1_update",
    "regularized_inverse",
    "smallest_eigvec",
    "enumerate_combinations",
    "count_combinations",
]

_MIL_TINY = 1e-300
_SINGULAR_RCOND = 1e-14


def hankel_expand(x, width):
    """Return the ``M x width`` Hankel matrix of ``x`` padded with zeros.

    Entry ``(m, n)`` is ``x[m + n]`` when ``m + n < M`` and zero otherwise,
    so ``hankel_expand(x, I) @ v.conj()`` is the interpolator output
    ``V^H x`` for an interpolator ``v`` of length ``I``.

    Parameters
    ----------
    x : array_like, shape (M,)
    width : int
        Number of columns (the interpolator length).

    Returns
    -------
    ndarray, shape (M, width), complex
    """
    width = int(width)
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    x = np.asarray(x, dtype=complex).ravel()
    m = x.shape[0]
    if m == 0:
        raise ValueError("x must be non-empty")
    padded = np.concatenate([x, np.zeros(width - 1, dtype=complex)])
    idx = np.arange(m)[:, None] + np.arange(width)[None, :]
    return padded[idx]


def convolution_matrix(v, m):
    """Banded ``m x m`` matrix holding shifted copies of ``v`` down its columns.

    Column ``c`` carries ``v[0], ..., v[I-1]`` starting at row ``c``; entries
    that fall past the last row are dropped. ``convolution_matrix(v, M).conj().T @ r``
    is the interpolated vector.
    """
    v = np.asarray(v, dtype=complex).ravel()
    out = np.zeros((m, m), dtype=complex)
    for c in range(m):
        stop = min(m, c + v.size)
        out[c:stop, c] = v[: stop - c]
    return out


def mil_rank1_update(a_inv, a, g, h):
    """Inverse of ``a * A + g h^H`` given ``A^{-1}`` (matrix inversion lemma).

    Uses the gain-vector form of the RLS recursion::

        k     = a^{-1} A^{-1} g / (1 + a^{-1} h^H A^{-1} g)
        A'^-1 = a^{-1} A^{-1} - a^{-1} k h^H A^{-1}

    Raises
    ------
    SingularUpdateError
        If the scalar denominator is numerically zero.
    """
    a_inv = np.asarray(a_inv, dtype=complex)
    g = np.asarray(g, dtype=complex).ravel()
    h = np.asarray(h, dtype=complex).ravel()
    if not 0.0 < a <= 1.0:
        raise ValueError(f"forgetting factor must lie in (0, 1], got {a}")
    inv_a = 1.0 / a
    pg = a_inv @ g
    denom = 1.0 + inv_a * np.vdot(h, pg)
    if abs(denom) < _MIL_TINY:
        raise SingularUpdateError(f"rank-one update denominator {denom!r} is zero")
    k = inv_a * pg / denom
    hp = h.conj() @ a_inv
    return inv_a * a_inv - inv_a * np.outer(k, hp)


def regularized_inverse(a, delta=0.0):
    """Inverse of ``A + delta * I`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        When the regularized matrix is numerically singular.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    n = a.shape[0]
    if n < 1 or a.shape != (n, n):
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    reg = a + delta * np.eye(n)
    if not np.all(np.isfinite(reg)):
        raise SingularMatrixError("matrix has non-finite entries")
    s = np.linalg.svd(reg, compute_uv=False)
    if s[0] == 0.0 or s[-1] / s[0] < _SINGULAR_RCOND:
        raise SingularMatrixError(
            f"matrix is numerically singular (reciprocal condition {s[-1] / s[0] if s[0] else 0.0:.3e})"
        )
    return np.linalg.solve(reg, np.eye(n, dtype=complex))


def _fix_phase(x, tiny=1e-12):
    nz = np.flatnonzero(np.abs(x) > tiny)
    if nz.size:
        lead = x[nz[0]]
        x = x * (abs(lead) / lead)
        x[nz[0]] = abs(lead)
    return x


def smallest_eigvec(a, x0=None, tol=1e-12, max_iter=500):
    """Unit eigenvector of a Hermitian matrix for its smallest eigenvalue.

    Shifted inverse power iteration: the shift starts just below the
    Gershgorin lower bound (or at zero for matrices that are already certified
    positive definite) and is raised towards the Rayleigh quotient whenever an
    inertia count confirms it stays below the smallest eigenvalue, so the
    iteration is attracted to the bottom of the spectrum.
    The result is rotated so its first non-negligible entry is real and
    non-negative.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Hermitian within 1e-10.
    x0 : array_like, optional
        Warm start. A fixed deterministic vector is used otherwise.
    tol : float
        Stop once ``||A x - lambda x|| <= tol * max(1, ||A||_inf)``.
    max_iter : int

    Returns
    -------
    x : ndarray, shape (n,)
    lam : float
        Rayleigh quotient of ``x``.

    Raises
    ------
    ConvergenceError
        If the residual is still above tolerance after ``max_iter`` steps.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.sum(np.abs(a), axis=1))))
    if np.max(np.abs(a - a.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    if n == 1:
        return np.ones(1, dtype=complex), float(a[0, 0].real)

    diag = a.diagonal().real
    radius = np.sum(np.abs(a), axis=1) - np.abs(a.diagonal())
    lower = float(np.min(diag - radius))
    shift = 0.0 if lower > 0.0 else lower - 1e-3 * scale
    shifted = a - shift * np.eye(n)
    lu_solve = _lu_solver(shifted)

    if x0 is None:
        x = np.ones(n, dtype=complex) + 0.1j * np.arange(1, n + 1)
    else:
        x = np.asarray(x0, dtype=complex).ravel().copy()
        if np.linalg.norm(x) < 1e-300:
            x = np.ones(n, dtype=complex)
    x /= np.linalg.norm(x)

    thresh = tol * scale
    resid = np.inf
    for _ in range(max_iter):
        y = lu_solve(x)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            break
        x = y / ny
        ax = a @ x
        lam = np.vdot(x, ax).real
        resid = np.linalg.norm(ax - lam * x)
        if resid <= thresh:
            return _fix_phase(x), float(lam)
        # Move the shift up towards the bottom eigenvalue when the inertia
        # count certifies the new shift is still below the whole spectrum.
        cand = lam - 2.0 * resid
        if cand > shift and resid < 0.1 * (lam - shift) and _below_spectrum(a, cand):
            shift = cand
            lu_solve = _lu_solver(a - shift * np.eye(n))
    raise ConvergenceError(
        f"inverse iteration stalled after {max_iter} steps (residual {resid:.3e})",
        vector=_fix_phase(x),
        residual=float(resid),
    )


def _below_spectrum(a, s):
    from scipy.linalg import ldl

    # Sylvester inertia: A - sI has no negative eigenvalue iff s <= lambda_min.
    try:
        _, d, _ = ldl(a - s * np.eye(a.shape[0]), hermitian=True)
    except (ValueError, np.linalg.LinAlgError):
        return False
    return bool(np.all(np.linalg.eigvalsh(d) > 0.0))


def _lu_solver(m):
    from scipy.linalg import lu_factor, lu_solve

    # Exact-singular shift (shift equal to an eigenvalue) still yields a valid
    # LU; a tiny nudge keeps the triangular solves finite.
    try:
        fac = lu_factor(m, check_finite=False)
    except (ValueError, np.linalg.LinAlgError):
        fac = lu_factor(m + 1e-12 * np.eye(m.shape[0]), check_finite=False)
    if np.min(np.abs(np.diag(fac[0]))) == 0.0:
        fac = lu_factor(m + 1e-12 * np.eye(m.shape[0]), check_finite=False)
    return lambda b: lu_solve(fac, b, check_finite=False)


def count_combinations(m, d):
    return comb(int(m), int(d))


def enumerate_combinations(m, d):
    """All strictly increasing ``d``-subsets of ``range(m)`` in lexicographic order."""
    m, d = int(m), int(d)
    if m < 1 or d < 1:
        raise ValueError("m and d must be positive")
    if d > m:
        raise ValueError(f"cannot choose {d} offsets out of {m}")
    return [tuple(c) for c in combinations(range(m), d)]
