"""Scalar and vectorized kernels for the NB / CRT / logarithmic family.

Log-PMFs are exact (Stirling numbers are tabulated in log space). Samplers take
a ``numpy.random.Generator`` and never touch the Stirling table; they are pure
functions of their parameters and the generator state.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

P_EPS = 1e-12
TINY = np.finfo(np.float64).tiny
DEFAULT_MAX_M = 1000


class DomainError(ValueError):
    """A distribution parameter is outside its support."""


def _check_prob(p, name="p"):
    if not np.all((np.asarray(p) > 0) & (np.asarray(p) < 1)):
        raise DomainError(f"{name} must lie in (0, 1), got {p!r}")


def _check_positive(x, name):
    if not np.all(np.asarray(x) > 0):
        raise DomainError(f"{name} must be positive, got {x!r}")


def clamp_probability(p):
    """Clip ``p`` into ``[P_EPS, 1 - P_EPS]``; returns ``(clipped, n_clipped)``."""
    p = np.asarray(p, dtype=float)
    out = np.clip(p, P_EPS, 1.0 - P_EPS)
    return out, int(np.count_nonzero(out != p))


# ---------------------------------------------------------------------------
# Stirling numbers of the first kind


class StirlingTable:
    """``log|s(m, l)|`` for ``0 <= l <= m <= max_m``; ``-inf`` encodes zero.

    Built from ``|s(m+1, l)| = m |s(m, l)| + |s(m, l-1)|`` with log-sum-exp.
    The array is read-only after construction.
    """

    def __init__(self, max_m: int = DEFAULT_MAX_M):
        if max_m < 0:
            raise ValueError("max_m must be nonnegative")
        self.max_m = int(max_m)
        log_s = np.full((max_m + 1, max_m + 1), -np.inf)
        log_s[0, 0] = 0.0
        with np.errstate(divide="ignore"):
            for m in range(max_m):
                prev = log_s[m, : m + 1]
                row = np.full(m + 2, -np.inf)
                row[: m + 1] = prev + math.log(m) if m > 0 else -np.inf
                row[1:] = np.logaddexp(row[1:], prev)
                log_s[m + 1, : m + 2] = row
        log_s.setflags(write=False)
        self.log_s = log_s

    def __call__(self, m, l):
        m = np.asarray(m)
        l = np.asarray(l)
        if np.any(m > self.max_m):
            raise IndexError(f"m={m.max()} exceeds table size max_m={self.max_m}")
        if np.any(m < 0) or np.any(l < 0):
            raise IndexError("negative index into Stirling table")
        out = np.where(l <= m, self.log_s[m, np.minimum(l, m)], -np.inf)
        return out[()] if out.ndim == 0 else out


@lru_cache(maxsize=4)
def stirling_table(max_m: int = DEFAULT_MAX_M) -> StirlingTable:
    return StirlingTable(max_m)


# ---------------------------------------------------------------------------
# Log-PMFs


def nb_log_pmf(m, r, p):
    """log NB(m; r, p) = log[Gamma(r+m) / (m! Gamma(r)) (1-p)^r p^m]."""
    _check_positive(r, "r")
    _check_prob(p)
    m = np.asarray(m, dtype=float)
    out = gammaln(r + m) - gammaln(m + 1) - gammaln(r) + r * np.log1p(-p) + m * np.log(p)
    return out[()] if np.ndim(out) == 0 else out


def poisson_log_pmf(k, lam):
    _check_positive(lam, "lam")
    k = np.asarray(k, dtype=float)
    out = k * np.log(lam) - lam - gammaln(k + 1)
    return out[()] if np.ndim(out) == 0 else out


def log_series_log_pmf(k, p):
    """Logarithmic distribution: P(k) = -p^k / (k ln(1-p)), k >= 1."""
    _check_prob(p)
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(k >= 1, k * np.log(p) - np.log(k) - np.log(-np.log1p(-p)), -np.inf)
    return out[()] if np.ndim(out) == 0 else out


def crt_log_pmf(l, m, r, table: StirlingTable | None = None):
    """log CRT(l; m, r) = log[Gamma(r)/Gamma(m+r) |s(m,l)| r^l]."""
    _check_positive(r, "r")
    table = table or stirling_table()
    m_arr = np.asarray(m)
    l_arr = np.asarray(l)
    out = gammaln(r) - gammaln(m_arr + r) + table(m_arr, l_arr) + l_arr * np.log(r)
    return out[()] if np.ndim(out) == 0 else out


def poislog_log_pmf(m, l, r, p, table: StirlingTable | None = None):
    """Joint (customers, tables) law: |s(m,l)| r^l / m! (1-p)^r p^m."""
    _check_positive(r, "r")
    _check_prob(p)
    table = table or stirling_table()
    m_arr = np.asarray(m)
    l_arr = np.asarray(l)
    out = (table(m_arr, l_arr) + l_arr * np.log(r) - gammaln(m_arr + 1.0)
           + r * np.log1p(-p) + m_arr * np.log(p))
    return out[()] if np.ndim(out) == 0 else out


def sumlog_log_pmf(m, l, p, table: StirlingTable | None = None):
    """Law of a sum of ``l`` iid Log(p): p^m l! |s(m,l)| / (m! (-ln(1-p))^l)."""
    _check_prob(p)
    table = table or stirling_table()
    m_arr = np.asarray(m)
    l_arr = np.asarray(l)
    out = (m_arr * np.log(p) + gammaln(l_arr + 1.0) + table(m_arr, l_arr)
           - gammaln(m_arr + 1.0) - l_arr * np.log(-np.log1p(-p)))
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Continuous kernels


def sample_log_gamma(shape, rng: np.random.Generator, size=None):
    """Log of a Gamma(shape, 1) draw, stable for tiny shapes.

    For shape < 1 uses G(a) = G(a + 1) * U^(1/a), evaluated as
    log G(a + 1) + log(U) / a, so the result never underflows.
    """
    shape = np.asarray(shape, dtype=float)
    _check_positive(shape, "shape")
    if size is not None:
        shape = np.broadcast_to(shape, size)
    small = shape < 1.0
    g = rng.standard_gamma(np.where(small, shape + 1.0, shape))
    out = np.log(g)
    if np.any(small):
        u = rng.random(np.shape(shape))
        # shapes near the smallest double send the log to -inf, i.e. a zero draw
        with np.errstate(over="ignore", divide="ignore"):
            out = np.where(small, out + np.log(u) / shape, out)
    return out[()] if np.ndim(out) == 0 else out


def sample_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Gamma(shape, scale); results are floored at the smallest normal double."""
    _check_positive(scale, "scale")
    out = np.maximum(np.exp(sample_log_gamma(shape, rng, size)) * scale, TINY)
    return out[()] if np.ndim(out) == 0 else out


def sample_beta(a, b, rng: np.random.Generator, size=None):
    """Beta(a, b) through two log-gamma draws (no underflow for small a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if size is None:
        size = np.broadcast_shapes(a.shape, b.shape)
    la = sample_log_gamma(np.broadcast_to(a, size), rng)
    lb = sample_log_gamma(np.broadcast_to(b, size), rng)
    out = np.exp(la - np.logaddexp(la, lb))
    return out[()] if np.ndim(out) == 0 else out


def sample_dirichlet(alpha, rng: np.random.Generator, axis: int = -1):
    """Dirichlet draw(s); ``alpha`` may be a matrix, normalized along ``axis``."""
    lg = sample_log_gamma(np.asarray(alpha, dtype=float), rng)
    lg = np.atleast_1d(lg)
    lg = lg - lg.max(axis=axis, keepdims=True)
    w = np.exp(lg)
    return w / w.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Discrete kernels


def sample_poisson(lam, rng: np.random.Generator, size=None):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise DomainError(f"Poisson rate must be finite and nonnegative, got {lam!r}")
    out = rng.poisson(lam, size)
    return out[()] if np.ndim(out) == 0 else out


def sample_categorical(weights, rng: np.random.Generator) -> int:
    """One index drawn proportionally to nonnegative ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise DomainError("weights must be a vector")
    return int(sample_categorical_rows(w[None, :], rng)[0])


def sample_categorical_rows(weights, rng: np.random.Generator):
    """Row-wise categorical draws by inverse CDF with one uniform per row.

    If rounding pushes the cursor past the running total, the last index with
    positive weight is returned.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and nonnegative")
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    if np.any(total <= 0):
        raise DomainError("weight vector sums to zero")
    u = rng.random(w.shape[0]) * total
    idx = (cum <= u[:, None]).sum(axis=1)
    over = idx >= w.shape[1]
    if np.any(over):
        last_pos = w.shape[1] - 1 - np.argmax(w[over, ::-1] > 0, axis=1)
        idx[over] = last_pos
    return idx


def sample_nb(r, p, rng: np.random.Generator, size=None):
    """NB(r, p) as a gamma-Poisson mixture: lambda ~ Gamma(r, p/(1-p))."""
    _check_positive(r, "r")
    _check_prob(p)
    lam = sample_gamma(r, np.asarray(p) / (1.0 - np.asarray(p)), rng, size)
    out = rng.poisson(lam)
    return out[()] if np.ndim(out) == 0 else out


class _LogSeriesCdf:
    """Cumulative Log(p) table, grown in chunks on demand."""

    CHUNK = 256
    CAP = 1 << 20

    def __init__(self, p: float):
        self.p = p
        self.log_norm = math.log(-math.log1p(-p))
        self.cdf = np.empty(0)

    def extend_to(self, target: float) -> None:
        while (self.cdf.size == 0 or self.cdf[-1] < target) and self.cdf.size < self.CAP:
            start = self.cdf.size + 1
            k = np.arange(start, start + self.CHUNK, dtype=float)
            pmf = np.exp(k * math.log(self.p) - np.log(k) - self.log_norm)
            base = self.cdf[-1] if self.cdf.size else 0.0
            chunk = base + np.cumsum(pmf)
            self.cdf = np.concatenate([self.cdf, chunk])
            if pmf[-1] == 0.0 or chunk[-1] == base:
                break


_LOG_CACHE: dict[float, _LogSeriesCdf] = {}


def _log_cdf(p: float) -> _LogSeriesCdf:
    tab = _LOG_CACHE.get(p)
    if tab is None:
        if len(_LOG_CACHE) > 256:
            _LOG_CACHE.clear()
        tab = _LOG_CACHE[p] = _LogSeriesCdf(p)
    return tab


def sample_log(p, rng: np.random.Generator, size=None):
    """Logarithmic Log(p) draws by inverse CDF over a cached cumulative table.

    Uniforms falling beyond the tabulated range (possible only for p very
    close to one) are resolved exactly by rejection from the tail.
    """
    _check_prob(p)
    p = float(p)
    tab = _log_cdf(p)
    u = rng.random(size)
    u_arr = np.atleast_1d(u)
    tab.extend_to(float(u_arr.max()) if u_arr.size else 0.0)
    k = np.searchsorted(tab.cdf, u_arr, side="right") + 1
    beyond = k > tab.cdf.size
    if np.any(beyond):
        n = tab.cdf.size
        for i in np.flatnonzero(beyond):
            while True:
                draw = int(rng.logseries(p))
                if draw > n:
                    k[i] = draw
                    break
    return int(k[0]) if size is None else k


def sample_crt(m: int, r: float, rng: np.random.Generator) -> int:
    """Number of occupied tables after seating ``m`` customers with concentration ``r``."""
    _check_positive(r, "r")
    if m < 0:
        raise DomainError("m must be nonnegative")
    if m == 0:
        return 0
    n = np.arange(m)
    return int(np.count_nonzero(rng.random(m) < r / (n + r)))


def sample_crt_array(m, r, rng: np.random.Generator):
    """Elementwise CRT(m, r) for integer array ``m`` and broadcastable ``r``.

    Cost is linear in ``m.sum()``; one uniform per customer, drawn in
    row-major order of the nonzero cells.
    """
    m = np.asarray(m)
    r = np.broadcast_to(np.asarray(r, dtype=float), m.shape)
    out = np.zeros(m.shape, dtype=np.int64)
    flat_m = m.ravel()
    cells = np.flatnonzero(flat_m)
    if cells.size == 0:
        return out
    reps = flat_m[cells].astype(np.int64)
    r_cells = r.ravel()[cells]
    if np.any(r_cells <= 0):
        raise DomainError("CRT concentration must be positive")
    total = int(reps.sum())
    owner = np.repeat(np.arange(cells.size), reps)
    offsets = np.repeat(np.cumsum(reps) - reps, reps)
    seat = np.arange(total) - offsets
    rr = r_cells[owner]
    hit = rng.random(total) < rr / (seat + rr)
    out.ravel()[cells] = np.bincount(owner, weights=hit, minlength=cells.size).astype(np.int64)
    return out


def sample_sumlog(l: int, p: float, rng: np.random.Generator) -> int:
    """Sum of ``l`` iid Log(p) draws."""
    _check_prob(p)
    if l < 0:
        raise DomainError("l must be nonnegative")
    if l == 0:
        return 0
    return int(np.sum(sample_log(p, rng, size=l)))
