"""Self-checks of the distribution kernels: exact identities and sampler frequencies.

Each check returns a :class:`CheckResult`; :func:`run_all` runs the suite on a
single seeded stream and is what ``nbprocess dist-check`` reports.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import distributions as D


@dataclass
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _result(name, stat, threshold, detail=""):
    stat = float(stat)
    return CheckResult(name, stat, float(threshold), bool(stat < threshold), detail)


def empirical_pmf(draws, support_max: int) -> np.ndarray:
    """Frequencies of 0..support_max; mass above support_max is dropped."""
    draws = np.asarray(draws)
    return np.bincount(draws[draws <= support_max], minlength=support_max + 1) / draws.size


def total_variation(p, q) -> float:
    """TV distance on a common finite support; unmatched mass counts fully."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    tail = abs((1.0 - p.sum()) - (1.0 - q.sum()))
    return 0.5 * (np.abs(p - q).sum() + tail)


# ---------------------------------------------------------------------------
# Exact identities


def check_poislog_factorizations(m_max: int = 15, rs=(0.1, 1.0, 5.0), ps=(0.1, 0.5, 0.9),
                                 tol: float = 1e-10) -> CheckResult:
    """Joint (m, l) PMF against the CRT x NB and SumLog x Poisson products."""
    table = D.stirling_table()
    m, l = np.meshgrid(np.arange(m_max + 1), np.arange(m_max + 1), indexing="ij")
    ok = l <= m
    m, l = m[ok], l[ok]
    worst = 0.0
    for r in rs:
        for p in ps:
            joint = D.poislog_log_pmf(m, l, r, p, table)
            crt_nb = D.crt_log_pmf(l, m, r, table) + D.nb_log_pmf(m, r, p)
            lam = -r * np.log1p(-p)
            # l = 0 forces m = 0 under SumLog; Poisson handles l = 0 exactly
            sum_pois = D.sumlog_log_pmf(m, l, p, table) + D.poisson_log_pmf(l, lam)
            fin = np.isfinite(joint)
            if not (np.array_equal(fin, np.isfinite(crt_nb)) and np.array_equal(fin, np.isfinite(sum_pois))):
                return CheckResult("poislog_factorizations", np.inf, tol, False,
                                   f"zero pattern differs at r={r}, p={p}")
            for other in (crt_nb, sum_pois):
                rel = np.abs(np.expm1(other[fin] - joint[fin]))
                worst = max(worst, float(rel.max()))
    return CheckResult("poislog_factorizations", worst, tol, worst <= tol,
                       f"m<={m_max}, r in {list(rs)}, p in {list(ps)}")


def check_stirling_rows(max_m: int = D.DEFAULT_MAX_M, rs=(0.01, 0.5, 1.0, 7.3, 50.0), tol: float = 1e-9) -> CheckResult:
    """sum_l |s(m,l)| r^l equals the rising factorial Gamma(m+r)/Gamma(r)."""
    table = D.stirling_table()
    worst = 0.0
    l = np.arange(max_m + 1)
    for m in range(max_m + 1):
        for r in rs:
            lhs = np.logaddexp.reduce(table.log_s[m, : m + 1] + l[: m + 1] * np.log(r))
            rhs = gammaln(m + r) - gammaln(r)
            worst = max(worst, float(abs(np.expm1(lhs - rhs))))
    return CheckResult("stirling_row_identity", worst, tol, worst <= tol, f"m<={max_m}")


# ---------------------------------------------------------------------------
# Sampler frequencies


def check_crt_sampler(rng, m: int = 10, r: float = 2.0, n: int = 100_000) -> CheckResult:
    draws = D.sample_crt_array(np.full(n, m), r, rng)
    pmf = np.exp(D.crt_log_pmf(np.arange(m + 1), m, r))
    err = np.abs(empirical_pmf(draws, m) - pmf).max()
    return _result("crt_sampler", err, 0.01, f"m={m}, r={r}, max abs error")


def check_log_sampler(rng, p: float = 0.3, n: int = 100_000, k_max: int = 20) -> CheckResult:
    draws = D.sample_log(p, rng, size=n)
    k = np.arange(1, k_max + 1)
    err = np.abs(empirical_pmf(draws, k_max)[1:] - np.exp(D.log_series_log_pmf(k, p))).max()
    return _result("log_sampler", err, 0.005, f"p={p}, max abs error over k<={k_max}")


def check_nb_sampler(rng, r: float = 3.0, p: float = 0.4, n: int = 100_000, k_max: int = 50) -> CheckResult:
    draws = D.sample_nb(r, p, rng, size=n)
    tv = total_variation(empirical_pmf(draws, k_max), np.exp(D.nb_log_pmf(np.arange(k_max + 1), r, p)))
    return _result("nb_gamma_poisson", tv, 0.01, f"r={r}, p={p}, TV over 0..{k_max}")


def compound_poisson_draws(r: float, p: float, n: int, rng) -> np.ndarray:
    """m = sum of l iid Log(p) with l ~ Pois(-r ln(1-p))."""
    l = rng.poisson(-r * np.log1p(-p), n)
    u = D.sample_log(p, rng, size=int(l.sum()))
    return np.bincount(np.repeat(np.arange(n), l), weights=u, minlength=n).astype(np.int64)


def check_compound_poisson(rng, r: float = 3.0, p: float = 0.4, n: int = 100_000, k_max: int = 50) -> CheckResult:
    draws = compound_poisson_draws(r, p, n, rng)
    tv = total_variation(empirical_pmf(draws, k_max), np.exp(D.nb_log_pmf(np.arange(k_max + 1), r, p)))
    return _result("nb_compound_poisson", tv, 0.01, f"r={r}, p={p}, TV over 0..{k_max}")


def mixed_table_prob(p: float, c1: float) -> float:
    """p' = -ln(1-p) / (c1 - ln(1-p))."""
    q = -np.log1p(-p)
    return q / (c1 + q)


def check_gamma_mixed_tables(rng, r1: float = 2.0, c1: float = 1.0, p: float = 0.5,
                             n: int = 100_000, k_max: int = 60) -> CheckResult:
    """l ~ Pois(-r ln(1-p)) with r ~ Gamma(r1, 1/c1) is NB(r1, p')."""
    r = D.sample_gamma(r1, 1.0 / c1, rng, size=n)
    l = rng.poisson(-r * np.log1p(-p))
    pp = mixed_table_prob(p, c1)
    tv = total_variation(empirical_pmf(l, k_max), np.exp(D.nb_log_pmf(np.arange(k_max + 1), r1, pp)))
    return _result("gamma_mixed_table_count", tv, 0.01, f"r1={r1}, c1={c1}, p={p}, p'={pp:.6f}")


def check_poisson_multinomial(rng, theta=(0.7, 2.0, 4.5), n: int = 100_000, k_max: int = 40) -> CheckResult:
    """Splitting N ~ Pois(sum theta) multinomially gives independent Pois(theta_k)."""
    theta = np.asarray(theta, dtype=float)
    total = rng.poisson(theta.sum(), n)
    counts = rng.multinomial(total, theta / theta.sum())
    worst = 0.0
    for k, t in enumerate(theta):
        pmf = stats.poisson.pmf(np.arange(k_max + 1), t)
        worst = max(worst, total_variation(empirical_pmf(counts[:, k], k_max), pmf))
    return _result("poisson_multinomial", worst, 0.02, f"theta={theta.tolist()}, worst per-atom TV")


def check_nb_poisson_limit(rng, lam: float = 2.0, r: float = 1e4, n: int = 100_000, k_max: int = 30) -> CheckResult:
    draws = D.sample_nb(r, lam / (lam + r), rng, size=n)
    tv = total_variation(empirical_pmf(draws, k_max), stats.poisson.pmf(np.arange(k_max + 1), lam))
    return _result("nb_poisson_limit", tv, 0.01, f"lambda={lam}, r={r}")


def check_small_shape_gamma(rng, shape: float = 0.01, n: int = 1_000_000) -> CheckResult:
    draws = D.sample_gamma(shape, 1.0, rng, size=n)
    z = abs(draws.mean() - shape) / np.sqrt(shape / n)
    return _result("gamma_small_shape_mean", z, 3.0, f"shape={shape}, |z| of the mean")


SUITE = (
    check_crt_sampler,
    check_log_sampler,
    check_nb_sampler,
    check_compound_poisson,
    check_gamma_mixed_tables,
    check_poisson_multinomial,
    check_nb_poisson_limit,
    check_small_shape_gamma,
)


def run_all(rng) -> list[CheckResult]:
    """Exact identities first, then every frequency check on ``rng`` in a fixed order."""
    results = [check_poislog_factorizations(), check_stirling_rows()]
    results += [check(rng) for check in SUITE]
    return results
