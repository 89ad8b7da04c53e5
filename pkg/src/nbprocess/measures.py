"""Truncated random measures and forward simulation of every model variant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distributions as D
from .corpus import SparseCountMatrix
from .model import (HAS_GAMMA0, ModelSpec, ModelState, TokenData, check_variant)


@dataclass
class TruncatedMeasure:
    """K weighted atoms; ``atoms`` is V x K with simplex columns."""

    weights: np.ndarray
    atoms: np.ndarray
    marks: np.ndarray | None = None

    @property
    def K(self) -> int:
        return int(self.weights.size)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


def draw_topics(eta: float, V: int, K: int, rng) -> np.ndarray:
    """K atoms from the symmetric Dirichlet base, as a V x K matrix."""
    return D.sample_dirichlet(np.full((V, K), float(eta)), rng, axis=0)


def draw_gamma_process(gamma0: float, c: float, K: int, eta: float, V: int, rng) -> TruncatedMeasure:
    """K-atom truncation: r_k ~ Gamma(gamma0/K, 1/c), so the total mass is Gamma(gamma0, 1/c)."""
    D._check_positive(gamma0, "gamma0")
    D._check_positive(c, "c")
    if K < 1:
        raise D.DomainError("K must be >= 1")
    r = D.sample_gamma(np.full(K, gamma0 / K), 1.0 / c, rng)
    return TruncatedMeasure(weights=np.atleast_1d(r), atoms=draw_topics(eta, V, K, rng))


def draw_beta_process(gamma0: float, c: float, K: int, eta: float, V: int, rng,
                      marked: bool = False, mark_c: float = 1.0) -> TruncatedMeasure:
    """K-atom beta process: p_k ~ Beta(c*gamma0/K, c*(1 - gamma0/K)).

    With ``marked`` each atom also carries r_k ~ Gamma(gamma0/K, 1/mark_c).
    """
    D._check_positive(gamma0, "gamma0")
    D._check_positive(c, "c")
    if not 0 < gamma0 < K:
        raise D.DomainError("beta-process truncation needs 0 < gamma0 < K")
    p, _ = D.clamp_probability(D.sample_beta(np.full(K, c * gamma0 / K), c * (1 - gamma0 / K), rng))
    marks = None
    if marked:
        marks = np.atleast_1d(D.sample_gamma(np.full(K, gamma0 / K), 1.0 / mark_c, rng))
    return TruncatedMeasure(weights=np.atleast_1d(p), atoms=draw_topics(eta, V, K, rng), marks=marks)


def draw_nb_process(gamma0: float, p: float, eta: float, V: int, rng) -> list[tuple[np.ndarray, int]]:
    """Draw from NBP(G0, p) with Dir(eta) atoms.

    The number of atoms is Pois(-gamma0 ln(1-p)) and each atom carries a
    Log(p) count, so the total count is NB(gamma0, p).
    """
    D._check_positive(gamma0, "gamma0")
    D._check_prob(p)
    k_plus = int(rng.poisson(-gamma0 * np.log1p(-p)))
    if k_plus == 0:
        return []
    counts = np.atleast_1d(D.sample_log(p, rng, size=k_plus))
    atoms = draw_topics(eta, V, k_plus, rng)
    return [(atoms[:, k], int(counts[k])) for k in range(k_plus)]


# ---------------------------------------------------------------------------
# Prior draws and data generation for the topic-model variants


def theta_prior(state: ModelState, rng, hp) -> np.ndarray:
    """Draw theta given the state's shape/probability parameters."""
    v = state.variant
    J, K = state.theta.shape
    if v == "dir-pfa":
        return D.sample_dirichlet(np.full((J, K), hp.alpha / K), rng, axis=1)
    if v == "nb":
        return np.broadcast_to(state.r_atom, (J, K)).copy()
    shape, prob = theta_shape_prob(state)
    scale = prob / (1.0 - prob)
    if v == "nb-ftm":
        theta = np.zeros((J, K))
        on = shape > 0
        theta[on] = D.sample_gamma(shape[on], np.broadcast_to(scale, (J, K))[on], rng)
        return theta
    return D.sample_gamma(np.broadcast_to(shape, (J, K)), np.broadcast_to(scale, (J, K)), rng)


def theta_shape_prob(state: ModelState):
    """Gamma shape and NB probability of theta_jk, broadcastable to J x K."""
    v = state.variant
    if v in ("gamma-nb", "nb-hdp"):
        return state.r_atom[None, :], state.p_group[:, None]
    if v == "nb-ftm":
        return state.r_atom[None, :] * state.b, state.p_group[:, None]
    if v == "marked-beta-nb":
        return state.r_atom[None, :], state.p_atom[None, :]
    if v in ("beta-nb", "beta-geometric"):
        return state.r_group[:, None], state.p_atom[None, :]
    if v == "nb-lda":
        return state.r_group[:, None], state.p_group[:, None]
    raise ValueError(f"theta of variant {v!r} is not NB-parameterized")


def _beta(a, b, rng, size):
    p, n = D.clamp_probability(D.sample_beta(a, b, rng, size=size))
    return p, n


def draw_prior(spec: ModelSpec, J: int, V: int, rng) -> ModelState:
    """All parameters of ``spec.variant`` drawn from the prior; no tokens yet."""
    v = check_variant(spec.variant)
    hp = spec.hp
    K = hp.K
    st = ModelState(variant=v, K=K, phi=draw_topics(hp.eta, V, K, rng), theta=np.zeros((J, K)),
                    z=np.zeros(0, dtype=np.int64), n_jk=np.zeros((J, K), dtype=np.int64),
                    n_vk=np.zeros((V, K), dtype=np.int64))
    if v in HAS_GAMMA0:
        st.gamma0 = float(D.sample_gamma(hp.e0, 1.0 / hp.f0, rng))
    if v == "nb":
        st.p_shared = float(_beta(hp.a0, hp.b0, rng, None)[0])
        st.r_atom = D.sample_gamma(np.full(K, st.gamma0 / K), st.p_shared / (J * (1 - st.p_shared)), rng)
    if v in ("gamma-nb", "nb-hdp", "nb-ftm", "marked-beta-nb"):
        st.r_atom = D.sample_gamma(np.full(K, st.gamma0 / K), 1.0 / hp.c, rng)
    if v in ("nb-lda", "beta-nb"):
        st.r_group = D.sample_gamma(np.full(J, st.gamma0), 1.0 / hp.c, rng)
    if v == "beta-geometric":
        st.r_group = np.ones(J)
    if v in ("gamma-nb", "nb-lda"):
        st.p_group = _beta(hp.a0, hp.b0, rng, J)[0]
    if v in ("nb-hdp", "nb-ftm"):
        st.p_group = np.full(J, 0.5)
    if v in ("beta-geometric", "beta-nb", "marked-beta-nb"):
        st.p_atom = _beta(hp.a0, hp.b0, rng, K)[0]
    if v == "nb-ftm":
        a = hp.bp_c * hp.bp_mass / K
        st.pi = _beta(a, hp.bp_c - a, rng, K)[0]
        st.b = rng.random((J, K)) < st.pi[None, :]
    st.theta = theta_prior(st, rng, hp)
    return st


def draw_data(state: ModelState, rng, doc_lengths=None, count_mode: str = "poisson"):
    """Draw tokens given the state's theta and phi.

    ``count_mode='poisson'`` draws n_jk ~ Pois(theta_jk) independently;
    ``'multinomial'`` draws N_j ~ Pois(sum_k theta_jk) and splits it with
    Mult(N_j; theta_j / theta_j.sum()). ``doc_lengths`` fixes N_j (required
    for ``dir-pfa``, whose theta rows are proportions). Returns the count
    matrix and a copy of ``state`` with z and counts filled in.
    """
    theta = state.theta
    J, K = theta.shape
    V = state.phi.shape[0]
    if doc_lengths is not None or state.variant == "dir-pfa":
        if doc_lengths is None:
            raise ValueError("dir-pfa data generation needs fixed document lengths")
        n_jk = _split_rows(np.asarray(doc_lengths), theta, rng)
    elif count_mode == "poisson":
        n_jk = rng.poisson(theta)
    elif count_mode == "multinomial":
        n_jk = _split_rows(rng.poisson(theta.sum(axis=1)), theta, rng)
    else:
        raise ValueError(f"unknown count_mode {count_mode!r}")
    pieces = []
    for k in range(K):
        col = n_jk[:, k]
        if not col.any():
            continue
        m_k = rng.multinomial(col, state.phi[:, k])
        j, w = np.nonzero(m_k)
        pieces.append((j, w, np.full(j.size, k), m_k[j, w]))
    if pieces:
        j, w, kk, c = (np.concatenate(x) for x in zip(*pieces))
    else:
        j = w = kk = c = np.zeros(0, dtype=np.int64)
    order = np.lexsort((kk, w, j))
    j, w, kk, c = j[order], w[order], kk[order], c[order]
    tok_doc = np.repeat(j, c)
    tok_word = np.repeat(w, c)
    matrix = SparseCountMatrix.from_tokens(tok_doc, tok_word, V, J)
    out = state.copy()
    out.z = np.repeat(kk, c).astype(np.int64)
    out.recount(TokenData(matrix))
    return matrix, out


def _split_rows(totals, theta, rng):
    rows = theta.sum(axis=1, keepdims=True)
    probs = np.where(rows > 0, theta / np.where(rows > 0, rows, 1.0), 1.0 / theta.shape[1])
    return np.stack([rng.multinomial(int(n), pr / pr.sum()) for n, pr in zip(totals, probs)])


@dataclass
class SyntheticCorpus:
    counts: SparseCountMatrix
    truth: ModelState
    seed: int | None = None

    def truth_json(self) -> dict:
        t = self.truth
        out = {"variant": t.variant, "seed": self.seed, "K": t.K,
               "topics": t.phi.T.tolist(), "theta": t.theta.tolist(), "gamma0": t.gamma0}
        for name in ("r_atom", "r_group", "p_atom", "p_group", "pi"):
            val = getattr(t, name)
            if val is not None:
                out[name] = np.asarray(val).tolist()
        if t.p_shared is not None:
            out["p_shared"] = t.p_shared
        return out


def simulate_corpus(spec: ModelSpec, V: int, J: int, rng, seed: int | None = None,
                    doc_length: float = 100.0) -> SyntheticCorpus:
    """Draw a truth state from the variant prior (``spec.hp.K`` atoms) and a corpus from it.

    ``doc_length`` is only used by ``dir-pfa``, whose lengths are Pois(doc_length).
    """
    if V < 1 or J < 1:
        raise ValueError("V and J must be >= 1")
    truth = draw_prior(spec, J, V, rng)
    lengths = rng.poisson(doc_length, J) if spec.variant == "dir-pfa" else None
    counts, truth = draw_data(truth, rng, doc_lengths=lengths)
    return SyntheticCorpus(counts=counts, truth=truth, seed=seed)
