"""Synchronous DS-CDMA uplink synthesis.

The received chip-rate window for symbol ``i`` has ``M = N + L_p - 1`` samples::

    r[i] = sum_k A_k (b_k[i] p_k[i] + b_k[i-1] tail(p_k[i-1]) + b_k[i+1] head(p_k[i+1])) + n[i]

with ``p_k[i] = C_k h_k[i]``. The previous symbol leaks its last ``L_p - 1``
chips into the top of the window and the next symbol starts ``N`` chips in,
which is the three-symbol ISI span of a channel with ``1 < L_p <= N``.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PATH_POWERS_DB",
    "MultipathChannel",
    "FadingProcess",
    "UserEnsemble",
    "ReceivedFrame",
    "random_code",
    "build_constraint_matrix",
    "effective_signature",
    "clarke_fading",
    "draw_user_ensemble",
    "draw_symbols",
    "signal_frame",
    "signal_block",
    "synthesize_received",
    "synthesize_block",
    "complex_noise",
]

PATH_POWERS_DB = (0.0, -3.0, -6.0)


def random_code(n, rng):
    """Binary spreading code with chips ``+-1/sqrt(n)``."""
    return rng.choice((-1.0, 1.0), size=n) / np.sqrt(n)


def build_constraint_matrix(code, lp):
    """``M x L_p`` matrix whose column ``j`` is the code delayed by ``j`` chips."""
    code = np.asarray(code, dtype=float).ravel()
    lp = int(lp)
    if lp < 1:
        raise ValueError(f"L_p must be at least 1, got {lp}")
    if code.size < 1:
        raise ValueError("empty spreading code")
    n = code.size
    c = np.zeros((n + lp - 1, lp))
    for j in range(lp):
        c[j : j + n, j] = code
    return c


def effective_signature(c, h):
    """Effective signature ``p = C h``."""
    c = np.asarray(c)
    h = np.asarray(h, dtype=complex)
    if c.ndim != 2 or h.shape[-1] != c.shape[1]:
        raise ValueError(f"cannot apply a {c.shape} constraint matrix to channel of shape {h.shape}")
    return h @ c.T if h.ndim > 1 else c @ h


@dataclass
class FadingProcess:
    """Per-path complex gains over symbols, unit mean-square before power scaling.

    Attributes
    ----------
    normalized_doppler : float
        ``f_D T``.
    gains : ndarray, shape (num_symbols, num_paths)
    """

    normalized_doppler: float
    gains: np.ndarray


def clarke_fading(normalized_doppler, num_symbols, num_paths, seed, num_oscillators=16):
    """Clarke/Jakes Rayleigh fading by sum-of-sinusoids synthesis.

    Each path follows the Zheng-Xiao construction: in-phase and quadrature
    branches each sum ``num_oscillators`` cosines with arrival angles
    ``(2 pi n - pi + theta) / (4 num_oscillators)`` and random phases. The
    autocorrelation approaches ``J0(2 pi f_D T tau)`` and the mean-square
    gain is one. With ``f_D T = 0`` every path is a constant complex gain.

    Parameters
    ----------
    normalized_doppler : float
        ``f_D T`` (non-negative).
    num_symbols, num_paths : int
    seed : int or numpy.random.Generator
    num_oscillators : int
        Sinusoids per quadrature branch (at least 16).
    """
    if normalized_doppler < 0:
        raise ValueError(f"normalized Doppler must be non-negative, got {normalized_doppler}")
    if num_symbols < 1:
        raise ValueError("num_symbols must be at least 1")
    if num_oscillators < 16:
        raise ValueError("use at least 16 oscillators per path")
    rng = np.random.default_rng(seed)
    n_osc = int(num_oscillators)
    t = np.arange(num_symbols, dtype=float)
    wd = 2.0 * np.pi * normalized_doppler
    gains = np.empty((num_symbols, num_paths), dtype=complex)
    n = np.arange(1, n_osc + 1)
    for p in range(num_paths):
        theta = rng.uniform(-np.pi, np.pi)
        phi = rng.uniform(-np.pi, np.pi, size=n_osc)
        psi = rng.uniform(-np.pi, np.pi, size=n_osc)
        alpha = (2.0 * np.pi * n - np.pi + theta) / (4.0 * n_osc)
        xc = np.cos(wd * np.outer(t, np.cos(alpha)) + phi).sum(axis=1)
        xs = np.cos(wd * np.outer(t, np.sin(alpha)) + psi).sum(axis=1)
        gains[:, p] = (xc + 1j * xs) / np.sqrt(n_osc)
    return FadingProcess(float(normalized_doppler), gains)


@dataclass
class MultipathChannel:
    """Sparse multipath layout of one user.

    ``taps`` has shape ``(num_symbols + 2, L_p)``: row ``i + 1`` is the tap
    vector ``h[i]`` so that symbols ``-1`` and ``num_symbols`` (needed for the
    ISI window) are available.
    """

    path_delays: np.ndarray
    relative_powers_db: np.ndarray
    taps: np.ndarray

    def at(self, i):
        return self.taps[i + 1]


@dataclass
class UserEnsemble:
    """K users observed over ``num_symbols`` symbol intervals.

    ``symbols`` and the channel taps carry one extra interval on each side
    (index ``i + 1`` holds symbol ``i``). User 0 is the desired user.
    """

    n: int
    lp: int
    codes: np.ndarray  # (K, N)
    constraints: np.ndarray  # (K, M, L_p)
    channels: list
    amplitudes: np.ndarray  # (K,)
    symbols: np.ndarray  # (K, num_symbols + 2)
    normalized_doppler: float = 0.0
    modulation: str = "qpsk"

    @property
    def k(self):
        return self.codes.shape[0]

    @property
    def m(self):
        return self.n + self.lp - 1

    @property
    def num_symbols(self):
        return self.symbols.shape[1] - 2

    def taps(self, user, i):
        return self.channels[user].at(i)

    def signatures(self):
        """Effective signatures for every user and interval, shape ``(K, Q + 2, M)``."""
        if self.k == 0:
            return np.zeros((0, self.num_symbols + 2, self.m), dtype=complex)
        taps = np.stack([ch.taps for ch in self.channels])
        return np.einsum("kml,kql->kqm", self.constraints, taps)

    def desired_signature(self, i):
        return self.constraints[0] @ self.taps(0, i)


@dataclass
class ReceivedFrame:
    r: np.ndarray
    truth: complex
    noise_var: float
    taps: np.ndarray = field(default=None, repr=False)


def draw_symbols(rng, shape, modulation="qpsk"):
    """Unit-modulus symbols: QPSK ``(+-1 +- 1j)/sqrt(2)`` or BPSK ``+-1``."""
    if modulation == "qpsk":
        re = rng.choice((-1.0, 1.0), size=shape)
        im = rng.choice((-1.0, 1.0), size=shape)
        return (re + 1j * im) / np.sqrt(2.0)
    if modulation == "bpsk":
        return rng.choice((-1.0, 1.0), size=shape).astype(complex)
    raise ValueError(f"unknown modulation {modulation!r}")


def _path_layout(rng, lp, num_paths=3):
    # Spacings of 1 or 2 chips; redraw until the layout fits in L_p taps.
    # Short windows that cannot hold every path keep only the leading ones.
    num_paths = min(num_paths, lp)
    for _ in range(1000):
        spacing = rng.integers(1, 3, size=num_paths - 1)
        delays = np.concatenate([[0], np.cumsum(spacing)]).astype(int)
        if delays[-1] <= lp - 1:
            return delays
    return np.arange(num_paths)


def draw_user_ensemble(
    k,
    n,
    lp,
    power_std_db,
    seed,
    num_symbols=1,
    normalized_doppler=0.0,
    modulation="qpsk",
    num_oscillators=16,
    fading="clarke",
):
    """Draw codes, channels, amplitudes and symbols for ``k`` users.

    Each user gets an i.i.d. binary code, a 3-path channel with relative
    powers 0/-3/-6 dB (normalized to unit total power) whose path spacings
    are uniform on {1, 2} chips, a log-normal amplitude
    ``A = 10^(X/20)``, ``X ~ N(0, power_std_db^2)``, and a symbol stream.
    The first path of every user sits at delay 0.

    Parameters
    ----------
    k, n, lp : int
        Users, chips per symbol, channel span in chips.
    power_std_db : float
    seed : int or numpy.random.SeedSequence
    num_symbols : int
    normalized_doppler : float
    modulation : {"qpsk", "bpsk"}
    fading : {"clarke", "static"}
        ``"static"`` replaces the Rayleigh gains by real path amplitudes
        ``sqrt(power)``, i.e. a fixed, known channel.
    """
    if k < 1:
        raise ValueError("need at least one user")
    if n < 1 or lp < 1:
        raise ValueError("n and lp must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    layout_ss, code_ss, amp_ss, sym_ss, fade_ss = ss.spawn(5)
    layout_rng = np.random.default_rng(layout_ss)
    code_rng = np.random.default_rng(code_ss)
    amp_rng = np.random.default_rng(amp_ss)
    sym_rng = np.random.default_rng(sym_ss)

    codes = np.stack([random_code(n, code_rng) for _ in range(k)])
    constraints = np.stack([build_constraint_matrix(c, lp) for c in codes])
    amplitudes = 10.0 ** (amp_rng.normal(0.0, power_std_db, size=k) / 20.0) if power_std_db > 0 else np.ones(k)
    symbols = draw_symbols(sym_rng, (k, num_symbols + 2), modulation)

    channels = []
    for user, fss in enumerate(fade_ss.spawn(k)):
        delays = _path_layout(layout_rng, lp)
        powers_db = np.asarray(PATH_POWERS_DB[: delays.size])
        powers = 10.0 ** (powers_db / 10.0)
        powers /= powers.sum()
        if fading == "clarke":
            gains = clarke_fading(normalized_doppler, num_symbols + 2, delays.size, fss, num_oscillators).gains
        elif fading == "static":
            gains = np.ones((num_symbols + 2, delays.size), dtype=complex)
        else:
            raise ValueError(f"unknown fading model {fading!r}")
        taps = np.zeros((num_symbols + 2, lp), dtype=complex)
        taps[:, delays] = gains * np.sqrt(powers)
        channels.append(MultipathChannel(delays, powers_db, taps))
    return UserEnsemble(
        n=n,
        lp=lp,
        codes=codes,
        constraints=constraints,
        channels=channels,
        amplitudes=amplitudes,
        symbols=symbols,
        normalized_doppler=float(normalized_doppler),
        modulation=modulation,
    )


def complex_noise(rng, shape, noise_var):
    """Circularly-symmetric Gaussian samples with variance ``noise_var``."""
    return np.sqrt(noise_var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _isi_fold(sig_prev, sig_cur, sig_next, n):
    # sig_* are (..., M) chip-level responses of consecutive symbols.
    out = sig_cur.copy()
    tail = sig_cur.shape[-1] - n
    if tail > 0:
        out[..., :tail] += sig_prev[..., n:]
        out[..., n:] += sig_next[..., :tail]
    return out


def signal_frame(ensemble, i):
    """Noise-free received window for symbol ``i``."""
    m = ensemble.m
    r = np.zeros(m, dtype=complex)
    for k in range(ensemble.k):
        c = ensemble.constraints[k]
        a = ensemble.amplitudes[k]
        sig = [a * ensemble.symbols[k, j + 1] * (c @ ensemble.taps(k, j)) for j in (i - 1, i, i + 1)]
        r += _isi_fold(sig[0], sig[1], sig[2], ensemble.n)
    return r


def signal_block(ensemble):
    """Noise-free windows for every symbol, shape ``(num_symbols, M)``."""
    if ensemble.k == 0:
        return np.zeros((ensemble.num_symbols, ensemble.m), dtype=complex)
    sig = ensemble.signatures()  # (K, Q+2, M)
    scaled = sig * (ensemble.amplitudes[:, None, None] * ensemble.symbols[:, :, None])
    folded = _isi_fold(scaled[:, :-2], scaled[:, 1:-1], scaled[:, 2:], ensemble.n)
    return folded.sum(axis=0)


def synthesize_received(ensemble, symbol_index, noise_var, rng):
    """One received window ``r[i]`` with additive noise of variance ``noise_var``."""
    if not 0 <= symbol_index < ensemble.num_symbols:
        raise IndexError(f"symbol index {symbol_index} outside [0, {ensemble.num_symbols})")
    r = signal_frame(ensemble, symbol_index)
    if noise_var > 0:
        r = r + complex_noise(rng, r.shape, noise_var)
    truth = ensemble.symbols[0, symbol_index + 1] if ensemble.k else 0j
    taps = ensemble.taps(0, symbol_index) if ensemble.k else None
    return ReceivedFrame(r=r, truth=truth, noise_var=float(noise_var), taps=taps)


def synthesize_block(ensemble, noise_var, rng):
    """All received windows, shape ``(num_symbols, M)``."""
    r = signal_block(ensemble)
    if noise_var > 0:
        r = r + complex_noise(rng, r.shape, noise_var)
    return r
