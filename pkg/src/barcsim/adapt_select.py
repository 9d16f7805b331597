"""Automatic choice of the model order ``(D, I)`` and of the number of branches.

Model order
    One filter pair is adapted at the largest ranks. Every candidate
    ``(d, n)`` reuses its leading ``d`` weights, ``n`` interpolator taps and
    the first ``d`` rows of the decimation pattern, and keeps its own
    exponentially weighted CM cost. The cheapest candidate is used for output.

Branch count
    Branches are visited one at a time and the search stops at the first one
    whose squared CM error is below ``rho``. Visiting the most frequently
    selected branches first (sorted mode) shortens the search.
"""

from dataclasses import dataclass, field

import numpy as np

from .barc import BarcState, gen_patterns, init_state, rls_step

__all__ = [
    "RankRange",
    "ExtendedState",
    "AutoRankReceiver",
    "auto_rank",
    "candidate_outputs",
    "snb",
    "sort_branches",
    "avg_branches",
    "BranchSelector",
    "calibrate_rho",
]


@dataclass(frozen=True)
class RankRange:
    d_min: int
    d_max: int
    i_min: int
    i_max: int

    def __post_init__(self):
        for name in ("d_min", "d_max", "i_min", "i_max"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.d_min > self.d_max or self.i_min > self.i_max:
            raise ValueError(f"empty rank range {self}")

    @property
    def shape(self):
        return (self.d_max - self.d_min + 1, self.i_max - self.i_min + 1)


@dataclass
class ExtendedState:
    """Maximum-rank filters plus one running cost per candidate ``(d, n)``.

    ``costs[j, k]`` belongs to ``d = d_min + j`` and ``n = i_min + k``.
    """

    barc: BarcState
    rank_range: RankRange
    forgetting: float = 0.998
    costs: np.ndarray = field(default=None)

    def __post_init__(self):
        rr = self.rank_range
        if self.barc.d != rr.d_max or self.barc.i_len != rr.i_max:
            raise ValueError("extended filters must be sized at the maximum ranks")
        if self.costs is None:
            self.costs = np.zeros(rr.shape)

    def accumulate(self, p, r):
        """Fold the current symbol into every candidate cost; returns the
        table of candidate outputs."""
        z = candidate_outputs(self.barc, p, r)
        rr = self.rank_range
        z = z[rr.d_min - 1 :, rr.i_min - 1 :]
        e2 = (np.abs(z) ** 2 - 1.0) ** 2
        e2 = np.where(np.isfinite(e2), e2, np.inf)
        self.costs = self.forgetting * self.costs + e2
        return z


def candidate_outputs(state, p, r, pattern=0):
    """Constraint-normalized outputs of every truncation of the filters.

    Entry ``[d - 1, n - 1]`` is ``nu * z_dn / g_dn`` where ``z_dn`` uses the
    first ``d`` weights, the first ``n`` taps and the first ``d`` pattern
    rows, and ``g_dn`` is the same truncation applied to the signature.
    Both tables are two-dimensional prefix sums of the elementwise products
    ``w_j* x[row_j + t] v_t*``. Candidates with no response are NaN.
    """
    rows = state.bank.patterns[pattern]
    wc, vc = state.w.conj(), state.v.conj()
    re_b = state.hankel(np.asarray(r, dtype=complex))[rows]
    pe_b = state.hankel(np.asarray(p, dtype=complex))[rows]
    z = np.cumsum(np.cumsum(wc[:, None] * re_b * vc[None, :], axis=0), axis=1)
    g = np.cumsum(np.cumsum(wc[:, None] * pe_b * vc[None, :], axis=0), axis=1)
    ok = np.abs(g) > 1e-12 * max(1.0, np.linalg.norm(state.w))
    out = np.full(z.shape, np.nan + 0j)
    out[ok] = state.nu * z[ok] / g[ok]
    return out


def auto_rank(costs, rank_range):
    """``(d, n)`` with the smallest accumulated cost.

    ``costs`` is an :class:`ExtendedState` or a table laid out as
    ``ExtendedState.costs``. Ties go to the smaller ``d``, then the smaller
    ``n`` (the first minimum in row-major order).
    """
    if isinstance(costs, ExtendedState):
        costs = costs.costs
    costs = np.asarray(costs, dtype=float)
    if costs.shape != rank_range.shape:
        raise ValueError(f"cost table shape {costs.shape} does not match range {rank_range.shape}")
    j, k = np.unravel_index(int(np.argmin(np.where(np.isnan(costs), np.inf, costs))), costs.shape)
    return rank_range.d_min + int(j), rank_range.i_min + int(k)


class AutoRankReceiver:
    """BARC-RLS receiver whose output rank is picked online.

    Selection runs every symbol while ``steps < select_for`` and is frozen
    afterwards. Adaptation always uses the maximum ranks with uniform
    decimation at ``D = d_max``.
    """

    def __init__(self, p, m, rank_range, alpha=0.998, cost_forgetting=0.998, select_for=500, nu=1.0, rls_kwargs=None):
        self.rank_range = rank_range
        self.alpha = alpha
        self.select_for = select_for
        self.rls_kwargs = dict(rls_kwargs or {})
        bank = gen_patterns("uniform", m, rank_range.d_max)
        self.ext = ExtendedState(init_state(bank, p, rank_range.i_max, nu=nu), rank_range, cost_forgetting)
        self.choice = (rank_range.d_max, rank_range.i_max)
        self.history = []

    def step(self, p, r):
        """Returns ``(z, (d, n))`` for this symbol, ``z`` taken before adaptation."""
        table = self.ext.accumulate(p, r)
        if self.ext.barc.steps < self.select_for:
            self.choice = auto_rank(self.ext, self.rank_range)
        d, n = self.choice
        rr = self.rank_range
        z = table[d - rr.d_min, n - rr.i_min]
        rls_step(self.ext.barc, p, r, self.alpha, **self.rls_kwargs)
        self.history.append(self.choice)
        return complex(z), self.choice


def _costs_of(outputs):
    out = []
    for o in outputs:
        e = getattr(o, "e", None)
        out.append(float(o) if e is None else float(e) ** 2)
    return np.asarray(out, dtype=float)


def snb(outputs, rho, b_max, order=None):
    """Sequential branch search with early stop.

    Parameters
    ----------
    outputs : sequence
        Squared CM errors, or :class:`~barcsim.barc.BranchOutput` records
        (their ``e ** 2`` is used).
    rho : float
        Stop at the first visited branch with cost ``<= rho``.
    b_max : int
        Visit at most this many branches.
    order : sequence of int, optional
        Visiting order; identity by default.

    Returns
    -------
    b_s : int
        Index (in ``outputs``) of the chosen branch.
    count : int
        Number of branches visited. When no branch qualifies this is
        ``min(b_max, len(outputs))`` and ``b_s`` is the cheapest one visited.
    """
    costs = _costs_of(outputs)
    if costs.size == 0:
        raise ValueError("no branches to search")
    if rho <= 0:
        raise ValueError("rho must be positive")
    order = np.arange(costs.size) if order is None else np.asarray(order, dtype=int)
    limit = min(int(b_max), order.size)
    if limit < 1:
        raise ValueError("b_max must be at least 1")
    best = order[0]
    for count in range(1, limit + 1):
        b = order[count - 1]
        if costs[b] <= rho:
            return int(b), count
        if costs[b] < costs[best]:
            best = b
    return int(best), limit


def sort_branches(usage_counts):
    """Branch indices by descending usage; equal counts keep their order."""
    counts = np.asarray(usage_counts)
    if np.any(counts < 0):
        raise ValueError("usage counts must be non-negative")
    return np.argsort(-counts, kind="stable")


def avg_branches(history):
    if len(history) == 0:
        raise ValueError("empty history")
    return float(np.mean(history))


class BranchSelector:
    """Stateful branch-count selector pluggable into ``sg_step``/``rls_step``.

    With ``sorted_order`` the visiting order is re-sorted by usage after
    ``warmup`` symbols and then every ``resort_every`` symbols.
    """

    def __init__(self, rho, b_max, sorted_order=False, warmup=200, resort_every=500):
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.rho = float(rho)
        self.b_max = int(b_max)
        self.sorted_order = sorted_order
        self.warmup = warmup
        self.resort_every = resort_every
        self.usage = None
        self.order = None
        self.history = []

    def select(self, sq):
        sq = np.asarray(sq, dtype=float)
        if self.usage is None:
            self.usage = np.zeros(sq.size, dtype=np.int64)
            self.order = np.arange(sq.size)
        i = len(self.history)
        if self.sorted_order and i >= self.warmup and (i - self.warmup) % self.resort_every == 0:
            self.order = sort_branches(self.usage)
        b, count = snb(sq, self.rho, self.b_max, self.order)
        self.usage[b] += 1
        self.history.append(count)
        return b, count

    @property
    def b_avg(self):
        return avg_branches(self.history)


def calibrate_rho(z_reference, multiplier=1.04):
    """``multiplier`` times the mean squared CM error of reference outputs."""
    z = np.asarray(z_reference)
    if z.size == 0:
        raise ValueError("calibration needs at least one output")
    return float(multiplier * np.mean((np.abs(z) ** 2 - 1.0) ** 2))
