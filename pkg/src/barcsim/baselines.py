"""Reference receivers and the supporting estimators.

The full-rank CCM receivers are written out directly on the ``M``-dimensional
observation. They coincide with the BARC chain run with ``I = 1``, ``v = [1]``
and a single identity pattern, which the test-suite checks.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .barc import constrained_solution
from .errors import ConvergenceError, DegenerateConstraintError, SingularMatrixError
from .numerics import mil_rank1_update, regularized_inverse, smallest_eigvec

__all__ = [
    "FullRankState",
    "ChannelEstimate",
    "fullrank_init",
    "fullrank_ccm_sg_step",
    "fullrank_ccm_rls_step",
    "analytic_covariance",
    "mmse_oracle",
    "sinr",
    "blind_channel_estimate",
    "BlindChannelTracker",
    "detect_qpsk",
    "detect_bpsk",
    "phase_reference",
]

_TINY = 1e-12


@dataclass
class FullRankState:
    w_full: np.ndarray
    nu: float = 1.0
    r_inv: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None

    def copy(self):
        return FullRankState(
            self.w_full.copy(),
            self.nu,
            None if self.r_inv is None else self.r_inv.copy(),
            None if self.d is None else self.d.copy(),
        )


def fullrank_init(p, nu=1.0):
    """Minimum-norm filter meeting ``w^H p = nu``."""
    p = np.asarray(p, dtype=complex)
    pp = np.vdot(p, p).real
    if pp < _TINY**2:
        raise DegenerateConstraintError("effective signature vanishes")
    return FullRankState(nu * p / pp, float(nu))


def fullrank_ccm_sg_step(state, r, p, mu, enforce=True):
    """Constrained CM gradient step ``w <- w - mu e z* (I - p p^H / p^H p) r``.

    Returns ``(state, z)`` with ``z`` computed before the update; ``state`` is
    modified in place.
    """
    r = np.asarray(r, dtype=complex)
    p = np.asarray(p, dtype=complex)
    pp = np.vdot(p, p).real
    if pp < _TINY**2:
        raise DegenerateConstraintError("effective signature vanishes")
    w = state.w_full
    z = np.vdot(w, r)
    e = abs(z) ** 2 - 1.0
    proj = r - p * (np.vdot(p, r) / pp)
    w = w - mu * e * np.conj(z) * proj
    if enforce:
        w = w + p * ((state.nu - np.vdot(p, w)) / pp)
    state.w_full = w
    return state, complex(z)


def fullrank_ccm_rls_step(state, r, p, alpha, delta=0.01, rho=0.01, cross_weight="forgetting"):
    """Constrained CM recursive least squares on the full observation.

    ``R^{-1}`` tracks ``sum alpha^(i-l) |z|^2 r r^H``; the filter is the exact
    constrained solution so ``w^H p = nu`` holds every step. See
    :func:`barcsim.barc.rls_step` for ``cross_weight``.
    """
    r = np.asarray(r, dtype=complex)
    p = np.asarray(p, dtype=complex)
    if state.r_inv is None:
        state.r_inv = delta * np.eye(r.size, dtype=complex)
        state.d = np.full(r.size, rho, dtype=complex)
    c = {"forgetting": 1.0 - alpha, "sum": 1.0}[cross_weight]
    if np.vdot(p, p).real < _TINY**2:
        raise DegenerateConstraintError("effective signature vanishes")
    z = np.vdot(state.w_full, r)
    zr = z * r
    state.d = alpha * state.d + c * np.conj(z) * r
    ri = mil_rank1_update(state.r_inv, alpha, zr, zr)
    state.r_inv = 0.5 * (ri + ri.conj().T)
    state.w_full = constrained_solution(state.r_inv, state.d, p, state.nu)
    return state, complex(z)


def _fold_matrices(m, n):
    # Maps a chip-level response onto the window of the previous / next symbol.
    tail = m - n
    up = np.zeros((m, m))
    down = np.zeros((m, m))
    if tail > 0:
        up[np.arange(tail), n + np.arange(tail)] = 1.0
        down[n + np.arange(tail), np.arange(tail)] = 1.0
    return up, down


def analytic_covariance(ensemble, i, noise_var):
    """``E[r r^H]`` at symbol ``i`` from the true signatures, amplitudes and ISI.

    Channels are frozen at their symbol-``i`` values, symbols are i.i.d. unit
    power.
    """
    m, n = ensemble.m, ensemble.n
    up, down = _fold_matrices(m, n)
    cov = noise_var * np.eye(m, dtype=complex)
    for k in range(ensemble.k):
        pk = ensemble.constraints[k] @ ensemble.taps(k, i)
        a2 = ensemble.amplitudes[k] ** 2
        for vec in (pk, up @ pk, down @ pk):
            cov += a2 * np.outer(vec, vec.conj())
    return cov


def mmse_oracle(cov, p, nu=1.0):
    """``R^{-1} p`` scaled so that ``w^H p = nu``.

    Raises
    ------
    SingularMatrixError
    """
    p = np.asarray(p, dtype=complex)
    ri = regularized_inverse(cov)
    rp = ri @ p
    den = np.vdot(p, rp)
    if abs(den) < _TINY**2:
        raise SingularMatrixError("signature lies in the null space of R^{-1}")
    return rp * (nu / np.conj(den))


def sinr(w, ensemble, i, noise_var):
    """Output SINR of a linear filter for the desired user at symbol ``i``."""
    w = np.asarray(w, dtype=complex)
    p1 = ensemble.constraints[0] @ ensemble.taps(0, i)
    sig = ensemble.amplitudes[0] ** 2 * abs(np.vdot(w, p1)) ** 2
    total = np.vdot(w, analytic_covariance(ensemble, i, noise_var) @ w).real
    return sig / max(total - sig, 1e-300)


@dataclass
class ChannelEstimate:
    h_hat: np.ndarray


def blind_channel_estimate(r_inv_hat, c, x0=None, max_iter=500):
    """Blind channel estimate from an inverse correlation estimate.

    ``h_hat`` is the unit-norm minimizer of ``h^H C^H R^{-1} C h`` (smallest
    eigenvector), with its first tap rotated onto the non-negative real axis.
    """
    c = np.asarray(c)
    q = c.T @ np.asarray(r_inv_hat, dtype=complex) @ c
    q = 0.5 * (q + q.conj().T)
    h, _ = smallest_eigvec(q, x0=x0, max_iter=max_iter)
    return ChannelEstimate(h)


class BlindChannelTracker:
    """Symbol-by-symbol blind channel estimation for one user.

    Keeps an exponentially weighted ``R^{-1}`` of the received vectors via the
    matrix inversion lemma and re-solves the eigenproblem each symbol, warm
    started from the previous estimate.
    """

    def __init__(self, c, forgetting=0.998, delta=1.0, max_iter=30):
        self.c = np.asarray(c, dtype=float)
        self.forgetting = forgetting
        self.r_inv = delta * np.eye(self.c.shape[0], dtype=complex)
        self.max_iter = max_iter
        self.h_hat = None

    def update(self, r):
        r = np.asarray(r, dtype=complex)
        ri = mil_rank1_update(self.r_inv, self.forgetting, r, r)
        self.r_inv = 0.5 * (ri + ri.conj().T)
        try:
            est = blind_channel_estimate(self.r_inv, self.c, x0=self.h_hat, max_iter=self.max_iter)
            self.h_hat = est.h_hat
        except ConvergenceError as exc:
            # Tracking tolerates a partially converged iterate.
            self.h_hat = exc.vector
        return self.h_hat


def phase_reference(h_true, h_used):
    """Phase rotation the constrained output inherits from a channel estimate.

    A receiver constrained with ``C h_used`` produces ``z ~ b * h_true[0] / h_used[0]``
    in phase; with the genie channel this is one, with a blind estimate whose
    first tap is real it is the phase of the true first tap.
    """
    return complex(h_true[0] * np.conj(h_used[0]))


def detect_qpsk(z, phase_ref=1.0):
    """Nearest ``(+-1 +- 1j)/sqrt(2)`` point after removing ``arg(phase_ref)``.

    ``z`` may be a scalar or an array.
    """
    if np.any(np.abs(phase_ref) == 0):
        raise DegenerateConstraintError("zero phase reference")
    y = np.asarray(z) * np.exp(-1j * np.angle(phase_ref))
    out = (np.where(y.real >= 0, 1.0, -1.0) + 1j * np.where(y.imag >= 0, 1.0, -1.0)) / np.sqrt(2.0)
    return complex(out) if out.ndim == 0 else out


def detect_bpsk(z, phase_ref=1.0):
    if np.any(np.abs(phase_ref) == 0):
        raise DegenerateConstraintError("zero phase reference")
    y = np.asarray(z) * np.exp(-1j * np.angle(phase_ref))
    out = np.where(y.real >= 0, 1.0, -1.0).astype(complex)
    return complex(out) if out.ndim == 0 else out
