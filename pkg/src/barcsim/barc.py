"""Interpolation, switched decimation and reduced-rank CCM estimation.

One symbol flows through the chain

    r  --(interpolator v)-->  r_I = Re_o v*  --(pattern D_b)-->  r_bar_b  --(w)-->  z_b

where ``Re_o`` is the ``M x I`` Hankel matrix of ``r``. All ``B`` branches share
``v`` and ``w``; the branch whose constant-modulus error ``|z_b|^2 - 1`` has the
smallest square drives the adaptation. The desired user's response is pinned by
the linear constraint ``w^H D_b V^H p = nu``, which can be rewritten either as
``w^H p_bar = nu`` (``p_bar = P_o v*``) or ``v^H p_w = nu`` (``p_w = P_o^T w*``)
with ``P_o = D_b Hankel(p)``.

Conjugation conventions are chosen so that these identities hold exactly.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateConstraintError
from .numerics import (
    count_combinations,
    enumerate_combinations,
    hankel_expand,
    mil_rank1_update,
    regularized_inverse,
)

__all__ = [
    "SCHEMES",
    "DecimationPattern",
    "BranchBank",
    "BranchOutput",
    "ConstraintData",
    "BarcState",
    "StepResult",
    "gen_patterns",
    "identity_bank",
    "apply_chain",
    "chain_routes",
    "select_branch",
    "build_constraint_terms",
    "init_state",
    "evaluate_branches",
    "sg_step",
    "rls_step",
    "constrained_solution",
    "batch_ccm_solve",
]

SCHEMES = ("uniform", "prestored", "random", "optimal")
DEFAULT_OPTIMAL_CAP = 50_000
_DEGENERATE = 1e-12


@dataclass(frozen=True)
class DecimationPattern:
    """Selection of ``D`` distinct samples out of ``M``.

    Applying the pattern to a length-``M`` vector keeps entries
    ``offsets[0], ..., offsets[D-1]`` in that order.
    """

    offsets: tuple
    m: int

    def __post_init__(self):
        offs = tuple(int(o) for o in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if not offs:
            raise ValueError("a decimation pattern needs at least one offset")
        if len(set(offs)) != len(offs):
            raise ValueError(f"repeated offsets in pattern {offs}")
        if min(offs) < 0 or max(offs) >= self.m:
            raise ValueError(f"offsets {offs} out of range [0, {self.m - 1}]")

    @property
    def d(self):
        return len(self.offsets)

    def apply(self, x):
        return np.asarray(x)[list(self.offsets)]

    def matrix(self):
        """The ``D x M`` 0/1 selection matrix."""
        sel = np.zeros((self.d, self.m))
        sel[np.arange(self.d), self.offsets] = 1.0
        return sel


@dataclass
class BranchBank:
    """Fixed set of decimation patterns switched symbol by symbol.

    ``patterns`` is an integer array of shape ``(B, D)``.
    """

    patterns: np.ndarray
    m: int
    scheme: str
    usage_counts: np.ndarray = None

    def __post_init__(self):
        self.patterns = np.atleast_2d(np.asarray(self.patterns, dtype=np.intp))
        if self.patterns.shape[0] < 1:
            raise ValueError("bank needs at least one branch")
        for row in self.patterns:
            DecimationPattern(tuple(row), self.m)
        if self.usage_counts is None:
            self.usage_counts = np.zeros(self.patterns.shape[0], dtype=np.int64)

    @property
    def b(self):
        return self.patterns.shape[0]

    @property
    def d(self):
        return self.patterns.shape[1]

    def pattern(self, b):
        return DecimationPattern(tuple(self.patterns[b]), self.m)


def gen_patterns(scheme, m, d, b=1, seed=0, cap=DEFAULT_OPTIMAL_CAP):
    """Build a bank of decimation patterns.

    Parameters
    ----------
    scheme : {"uniform", "prestored", "random", "optimal"}
        ``uniform``: one pattern with offsets ``j * L``;
        ``prestored``: branch ``b`` uses ``j * L + b``;
        ``random``: each branch draws ``D`` distinct offsets uniformly on
        ``[0, M - 1]`` (stored sorted);
        ``optimal``: every ``D``-subset of the ``M`` samples.
        ``L = M // D`` throughout.
    m, d, b : int
        Observation length, rank and requested number of branches. ``b`` is
        ignored by ``uniform`` (always one branch) and ``optimal``.
    seed : int
        Seed for the random scheme; the bank is drawn once and kept.
    cap : int
        Largest exhaustive bank ``optimal`` may build.
    """
    m, d, b = int(m), int(d), int(b)
    if not 1 <= d <= m:
        raise ValueError(f"rank D={d} must lie in [1, M={m}]")
    if b < 1:
        raise ValueError("need at least one branch")
    step = m // d
    if scheme == "uniform":
        pats = [np.arange(d) * step]
    elif scheme == "prestored":
        pats = [np.arange(d) * step + k for k in range(b)]
        if pats[-1][-1] >= m:
            raise ValueError(
                f"prestored branch {b} would select offset {pats[-1][-1]} >= M={m}; "
                f"at most {m - (d - 1) * step} branches fit"
            )
    elif scheme == "random":
        rng = np.random.default_rng(seed)
        pats, seen = [], set()
        limit = count_combinations(m, d)
        while len(pats) < b:
            row = tuple(sorted(rng.choice(m, size=d, replace=False)))
            if row in seen and len(seen) < limit:
                continue
            seen.add(row)
            pats.append(np.array(row))
    elif scheme == "optimal":
        total = count_combinations(m, d)
        if total > cap:
            raise OverflowError(f"exhaustive bank has {total} patterns, above the cap of {cap}")
        pats = enumerate_combinations(m, d)
    else:
        raise ValueError(f"unknown decimation scheme {scheme!r}; expected one of {SCHEMES}")
    return BranchBank(np.array(pats, dtype=np.intp), m, scheme)


def identity_bank(m):
    """Single branch keeping every sample (full-rank degenerate chain)."""
    return BranchBank(np.arange(m)[None, :], m, "uniform")


class BranchOutput(NamedTuple):
    z: complex
    e: float
    r_bar: np.ndarray
    u: np.ndarray


def apply_chain(v, pattern, w, r):
    """Filter one received vector through interpolator, pattern and estimator."""
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    r = np.asarray(r, dtype=complex)
    if w.size != pattern.d or r.size != pattern.m:
        raise ValueError("dimension mismatch between filters, pattern and observation")
    re_b = hankel_expand(r, v.size)[list(pattern.offsets)]
    u = re_b.T @ w.conj()
    r_bar = re_b @ v.conj()
    z = complex(np.vdot(v, u))
    return BranchOutput(z, abs(z) ** 2 - 1.0, r_bar, u)


def chain_routes(v, pattern, w, r):
    """Filter output computed the three algebraically equivalent ways.

    Returns ``(w^H S_D^H r, w^H Re_b v*, v^H u)``; the first route builds the
    interpolator as an explicit banded convolution matrix.
    """
    from .numerics import convolution_matrix

    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    r = np.asarray(r, dtype=complex)
    s_d = convolution_matrix(v, pattern.m) @ pattern.matrix().T
    via_s = np.vdot(w, s_d.conj().T @ r)
    re_b = hankel_expand(r, v.size)[list(pattern.offsets)]
    via_re = w.conj() @ re_b @ v.conj()
    via_u = np.vdot(v, re_b.T @ w.conj())
    return complex(via_s), complex(via_re), complex(via_u)


def select_branch(outputs):
    """Index of the branch with the smallest squared CM error (lowest index on ties)."""
    errs = [o.e if hasattr(o, "e") else o for o in outputs]
    if not errs:
        raise ValueError("no branch outputs to select from")
    return int(np.argmin(np.square(errs)))


@dataclass
class ConstraintData:
    """Constraint vectors for one pattern and filter pair.

    Attributes
    ----------
    p : effective signature (M,)
    re_p : Hankel expansion of ``p`` (M, I)
    p_o : decimated Hankel ``D_b re_p`` (D, I)
    p_w : ``p_o^T w*`` (I,), so that ``v^H p_w = w^H p_bar``
    p_bar : ``p_o v*`` (D,), equal to ``S_D^H p``
    """

    p: np.ndarray
    re_p: np.ndarray
    p_o: np.ndarray
    p_w: np.ndarray
    p_bar: np.ndarray


def build_constraint_terms(pattern, p, v, w):
    p = np.asarray(p, dtype=complex)
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    re_p = hankel_expand(p, v.size)
    p_o = re_p[list(pattern.offsets)]
    return ConstraintData(p=p, re_p=re_p, p_o=p_o, p_w=p_o.T @ w.conj(), p_bar=p_o @ v.conj())


@dataclass
class BarcState:
    """Adaptive state of one BARC receiver.

    The RLS fields stay ``None`` until the first :func:`rls_step`.
    """

    v: np.ndarray
    w: np.ndarray
    bank: BranchBank
    nu: float = 1.0
    rls_u_inv: Optional[np.ndarray] = None
    rls_z_inv: Optional[np.ndarray] = None
    d_u: Optional[np.ndarray] = None
    d_z: Optional[np.ndarray] = None
    steps: int = 0
    _idx: np.ndarray = field(default=None, repr=False)

    @property
    def i_len(self):
        return self.v.size

    @property
    def d(self):
        return self.w.size

    def copy(self):
        def c(x):
            return None if x is None else x.copy()

        bank = BranchBank(self.bank.patterns.copy(), self.bank.m, self.bank.scheme, self.bank.usage_counts.copy())
        return BarcState(
            self.v.copy(), self.w.copy(), bank, self.nu, c(self.rls_u_inv), c(self.rls_z_inv), c(self.d_u), c(self.d_z), self.steps
        )

    def hankel(self, x):
        # Cached gather indices; hankel_expand semantics without re-validation.
        if self._idx is None:
            m, i_len = self.bank.m, self.v.size
            self._idx = np.arange(m)[:, None] + np.arange(i_len)[None, :]
        padded = np.concatenate([x, np.zeros(self.v.size - 1, dtype=complex)])
        return padded[self._idx]


def init_state(bank, p, i_len, nu=1.0, v0=None, w0=None):
    """Constraint-satisfying starting point.

    Without explicit filters: start from the unit interpolator ``e_1`` on the
    first branch, set ``w = nu p_bar / ||p_bar||^2``, then replace ``v`` by
    ``nu p_w / ||p_w||^2`` so that both forms of the constraint hold.
    With ``v0``/``w0`` given, only ``w`` is rescaled by a complex scalar so
    that ``w^H p_bar = nu`` on the first branch.
    """
    p = np.asarray(p, dtype=complex)
    i_len = int(i_len)
    if i_len < 1:
        raise ValueError("interpolator length must be positive")
    pattern = bank.pattern(0)
    if v0 is None:
        v = np.zeros(i_len, dtype=complex)
        v[0] = 1.0
    else:
        v = np.asarray(v0, dtype=complex).copy()
    cd = build_constraint_terms(pattern, p, v, np.zeros(bank.d))
    p_bar = cd.p_bar
    nb = np.vdot(p_bar, p_bar).real
    if nb < _DEGENERATE**2:
        raise DegenerateConstraintError("effective signature vanishes on the first branch")
    if w0 is None:
        w = nu * p_bar / nb
        p_w = cd.p_o.T @ w.conj()
        if v0 is None:
            v = nu * p_w / np.vdot(p_w, p_w).real
    else:
        w = np.asarray(w0, dtype=complex).copy()
        resp = np.vdot(w, p_bar)
        if abs(resp) < _DEGENERATE:
            raise DegenerateConstraintError("initial estimator is orthogonal to the constraint")
        w = w * (nu / np.conj(resp))
    state = BarcState(v=v, w=w, bank=bank, nu=float(nu))
    _fix_gauge(state)
    return state


class StepResult(NamedTuple):
    z: complex
    branch: int
    evaluated: int
    errors: np.ndarray


def evaluate_branches(state, r, p=None):
    """Interpolated vector and per-branch outputs for one observation.

    Returns ``(re_o, r_i, z_all, resp)`` with ``r_i = Re_o v*``,
    ``z_all[b] = w^H r_i[pattern_b]`` and ``resp[b] = w^H p_bar_b`` the
    response of branch ``b`` to the signature ``p`` (``None`` without ``p``).
    """
    re_o = state.hankel(np.asarray(r, dtype=complex))
    r_i = re_o @ state.v.conj()
    wc = state.w.conj()
    z_all = r_i[state.bank.patterns] @ wc
    resp = None
    if p is not None:
        p_i = state.hankel(np.asarray(p, dtype=complex)) @ state.v.conj()
        resp = p_i[state.bank.patterns] @ wc
    return re_o, r_i, z_all, resp


class _Front(NamedTuple):
    z: complex
    b: int
    n_eval: int
    err: np.ndarray
    rows: np.ndarray
    r_bar: np.ndarray
    u: np.ndarray
    p_o: np.ndarray


def _front(state, p, r, selector, branch_norm):
    """Evaluate and select a branch; with ``branch_norm`` every branch is
    scored with ``w`` rescaled to meet its own constraint, and the selected
    rescaling is adopted by the state."""
    re_o, r_i, z_all, resp = evaluate_branches(state, r, p)
    if branch_norm:
        ok = np.abs(resp) > _DEGENERATE * max(1.0, np.linalg.norm(state.w))
        scale = np.where(ok, state.nu / np.where(ok, resp, 1.0), 0.0)
        z_all = z_all * scale
        err = np.abs(z_all) ** 2 - 1.0
        err = np.where(ok, err, np.inf)
    else:
        err = np.abs(z_all) ** 2 - 1.0
    sq = err * err
    if selector is None:
        b = int(np.argmin(sq))
        n_eval = sq.size
    else:
        b, n_eval = selector.select(sq)
    state.bank.usage_counts[b] += 1
    if branch_norm:
        if not np.isfinite(err[b]):
            raise DegenerateConstraintError("no branch responds to the constraint vector")
        state.w = state.w * np.conj(scale[b])
    rows = state.bank.patterns[b]
    re_b = re_o[rows]
    u = re_b.T @ state.w.conj()
    p_o = state.hankel(np.asarray(p, dtype=complex))[rows]
    return _Front(complex(z_all[b]), b, n_eval, err, rows, r_i[rows], u, p_o)


def _project_out(x, c, tol=_DEGENERATE):
    nc = np.vdot(c, c).real
    if nc < tol * tol:
        raise DegenerateConstraintError(f"constraint vector norm {np.sqrt(nc):.3e} below {tol}")
    return x - c * (np.vdot(c, x) / nc), nc


def sg_step(state, p, r, mu_v, mu_w, selector=None, enforce=True, normalize=True, branch_norm=True):
    """One stochastic-gradient update of the interpolator and the estimator.

    Order: pick the branch, update ``v`` with the gradient projected
    orthogonally to ``p_w``, rebuild ``p_bar`` from the new ``v``, update
    ``w`` with the gradient projected orthogonally to ``p_bar``.

    With ``enforce`` set, a component along the constraint vector restores
    ``v^H p_w = nu`` / ``w^H p_bar = nu`` exactly; it vanishes when the
    constraint already holds, so the update is the plain projected gradient
    whenever the selected branch does not change.

    ``normalize`` rescales ``(v, w) -> (v / ||v||, ||v|| w)`` afterwards,
    which leaves every branch output unchanged.

    ``branch_norm`` scores each branch with ``w`` rescaled to meet that
    branch's own constraint ``w^H p_bar_b = nu`` and adopts the rescaling of
    the selected branch; without it the shared ``w`` is used as is, so only
    the branch adapted last satisfies the constraint.

    ``state`` is modified in place. The returned ``z`` is the selected
    branch output before the update.
    """
    f = _front(state, p, r, selector, branch_norm)
    z, b, n_eval, err, r_bar, u, p_o = f.z, f.b, f.n_eval, f.err, f.r_bar, f.u, f.p_o
    g = err[b] * np.conj(z)

    p_w = p_o.T @ state.w.conj()
    step_v, nw = _project_out(u, p_w)
    v = state.v - mu_v * g * step_v
    if enforce:
        v = v + p_w * ((state.nu - np.vdot(p_w, v)) / nw)

    p_bar = p_o @ v.conj()
    step_w, nb = _project_out(r_bar, p_bar)
    w = state.w - mu_w * g * step_w
    if enforce:
        w = w + p_bar * ((state.nu - np.vdot(p_bar, w)) / nb)

    state.v, state.w = v, w
    if normalize:
        _fix_gauge(state)
    state.steps += 1
    return StepResult(complex(z), b, n_eval, err)


def constrained_solution(r_inv, d, c, nu):
    """``R^{-1} [d - c (c^H R^{-1} c)^{-1} (c^H R^{-1} d - nu)]``, satisfying ``x^H c = nu``."""
    rd = r_inv @ d
    rc = r_inv @ c
    den = np.vdot(c, rc)
    if not abs(den) > 1e-13 * np.linalg.norm(c) * np.linalg.norm(rc):
        raise DegenerateConstraintError("constraint vector is (numerically) in the null space of R^{-1}")
    return rd - rc * ((np.vdot(c, rd) - nu) / den)


def _fix_gauge(state):
    # z = w^H Re v* is unchanged by (v, w) -> (v / s, s w) with s > 0; pin
    # ||v|| = 1 and carry the RLS statistics along so outputs are unaffected.
    s = np.linalg.norm(state.v)
    if not np.isfinite(s) or s == 0.0 or s == 1.0:
        return
    state.v = state.v / s
    state.w = state.w * s
    if state.rls_u_inv is not None:
        state.rls_u_inv = state.rls_u_inv / (s * s)
        state.d_u = state.d_u * s
        state.rls_z_inv = state.rls_z_inv * (s * s)
        state.d_z = state.d_z / s


def _init_rls(state, delta_v, delta_w, rho_v, rho_w):
    state.rls_u_inv = delta_v * np.eye(state.i_len, dtype=complex)
    state.rls_z_inv = delta_w * np.eye(state.d, dtype=complex)
    state.d_u = np.full(state.i_len, rho_v, dtype=complex)
    state.d_z = np.full(state.d, rho_w, dtype=complex)


def rls_step(
    state,
    p,
    r,
    alpha,
    delta_v=0.01,
    delta_w=0.01,
    rho_v=0.01,
    rho_w=0.01,
    selector=None,
    cross_weight="forgetting",
    branch_norm=True,
    normalize=True,
):
    """One recursive-least-squares update of the interpolator and the estimator.

    The inverse correlation matrices follow the gain-vector recursion with
    forgetting factor ``alpha`` and regressors ``z u`` / ``z r_bar``; the
    cross-correlation vectors follow ``d = alpha d + c z* x`` with
    ``c = 1 - alpha`` (``cross_weight="forgetting"``) or ``c = 1``
    (``cross_weight="sum"``, the same normalization as the correlation
    matrices). Each filter is then the exact constrained least-squares
    solution, so ``v^H p_w = nu`` and ``w^H p_bar = nu`` hold to rounding.
    The bilinear scale ambiguity is pinned at ``||v|| = 1`` with the RLS
    statistics rescaled consistently, which does not change any output.

    The initialization scalars only matter on the first call, which sets
    ``R_u^{-1} = delta_v I``, ``d_u = rho_v 1`` and likewise for ``w``.
    ``selector``, ``branch_norm`` and ``normalize`` behave as in
    :func:`sg_step`; a selector
    exposes ``select(squared_errors) -> (branch, count_evaluated)``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"forgetting factor must lie in (0, 1], got {alpha}")
    if state.rls_u_inv is None:
        _init_rls(state, delta_v, delta_w, rho_v, rho_w)
    if cross_weight == "forgetting":
        c = 1.0 - alpha
    elif cross_weight == "sum":
        c = 1.0
    else:
        raise ValueError(f"unknown cross_weight {cross_weight!r}")

    f = _front(state, p, r, selector, branch_norm)
    z, b, n_eval, err, r_bar, u, p_o = f.z, f.b, f.n_eval, f.err, f.r_bar, f.u, f.p_o

    p_w = p_o.T @ state.w.conj()
    if np.vdot(p_w, p_w).real < _DEGENERATE**2:
        raise DegenerateConstraintError("p_w vanished")
    zu = z * u
    state.d_u = alpha * state.d_u + c * np.conj(z) * u
    pu = mil_rank1_update(state.rls_u_inv, alpha, zu, zu)
    state.rls_u_inv = 0.5 * (pu + pu.conj().T)
    v = constrained_solution(state.rls_u_inv, state.d_u, p_w, state.nu)

    p_bar = p_o @ v.conj()
    if np.vdot(p_bar, p_bar).real < _DEGENERATE**2:
        raise DegenerateConstraintError("p_bar vanished")
    zr = z * r_bar
    state.d_z = alpha * state.d_z + c * np.conj(z) * r_bar
    pz = mil_rank1_update(state.rls_z_inv, alpha, zr, zr)
    state.rls_z_inv = 0.5 * (pz + pz.conj().T)
    w = constrained_solution(state.rls_z_inv, state.d_z, p_bar, state.nu)

    state.v, state.w = v, w
    if normalize:
        _fix_gauge(state)
    state.steps += 1
    return StepResult(complex(z), b, n_eval, err)


def batch_ccm_solve(frames, pattern, p, v0, w0, iterations, nu=1.0, tol=1e-6):
    """Alternating closed-form CCM solution with sample-average statistics.

    Each iteration fixes ``w`` and solves for ``v`` from
    ``R_u = <|z|^2 u u^H>``, ``d_u = <z* u>``, then fixes ``v`` and solves
    for ``w`` from ``R_z = <|z|^2 r_bar r_bar^H>``, ``d_z = <z* r_bar>``; the
    outputs ``z`` are recomputed with the current filters over all frames.

    Parameters
    ----------
    frames : array_like, shape (Q, M)
    pattern : DecimationPattern
    p : array_like, shape (M,)
    v0, w0 : array_like
        Starting filters; returned unchanged when ``iterations == 0``.
    iterations : int
    nu : float
    tol : float
        Stop early once every output has ``||z|^2 - 1| <= tol``. At that
        point the CM cost is at its floor and the sample matrices are close
        to losing rank, so further alternations only amplify rounding.

    Raises
    ------
    SingularMatrixError
        If a sample correlation matrix cannot be inverted.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=complex))
    v = np.asarray(v0, dtype=complex).copy()
    w = np.asarray(w0, dtype=complex).copy()
    if iterations <= 0:
        return v, w
    q, m = frames.shape
    i_len = v.size
    rows = list(pattern.offsets)
    idx = np.arange(m)[:, None] + np.arange(i_len)[None, :]
    padded = np.concatenate([frames, np.zeros((q, i_len - 1), dtype=complex)], axis=1)
    re_b = padded[:, idx][:, rows, :]  # (Q, D, I)
    p_o = hankel_expand(p, i_len)[rows]
    for _ in range(iterations):
        u = np.einsum("qdi,d->qi", re_b, w.conj())
        z = u @ v.conj()
        wts = np.abs(z) ** 2
        r_u = np.einsum("q,qi,qj->ij", wts, u, u.conj()) / q
        d_u = (z.conj()[:, None] * u).mean(axis=0)
        v = constrained_solution(regularized_inverse(r_u), d_u, p_o.T @ w.conj(), nu)

        r_bar = re_b @ v.conj()
        z = r_bar @ w.conj()
        wts = np.abs(z) ** 2
        r_z = np.einsum("q,qi,qj->ij", wts, r_bar, r_bar.conj()) / q
        d_z = (z.conj()[:, None] * r_bar).mean(axis=0)
        w = constrained_solution(regularized_inverse(r_z), d_z, p_o @ v.conj(), nu)
        if np.max(np.abs(np.abs(r_bar @ w.conj()) ** 2 - 1.0)) <= tol:
            break
    return v, w
