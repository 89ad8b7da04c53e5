"""A small overdispersed benchmark corpus with a known Marked-Beta-NB truth."""
from __future__ import annotations

import numpy as np

from .corpus import drop_empty_documents
from .measures import SyntheticCorpus, simulate_corpus
from .model import Hyperparams, ModelSpec


def overdispersed_truth(K: int = 5, r: float = 0.5, doc_length: float = 100.0,
                        eta: float = 0.05) -> ModelSpec:
    """Marked-Beta-NB hyperparameters concentrated on a chosen truth.

    Every atom gets r_k close to ``r`` and a p_k with odds p/(1-p) close to
    doc_length/(K r), so each theta_jk has mean doc_length/K and variance to
    mean ratio 1 + doc_length/(K r). The gamma0 prior is tight around 10 K so
    the truncation keeps all K atoms alive.
    """
    odds = doc_length / (K * r)
    p = odds / (1.0 + odds)
    gamma0 = 10.0 * K
    hp = Hyperparams(a0=1000.0 * p, b0=1000.0 * (1.0 - p), e0=100.0 * gamma0, f0=100.0,
                     c=gamma0 / (K * r), eta=eta, K=K)
    return ModelSpec("marked-beta-nb", hp)


def benchmark_corpus(rng, V: int = 50, J: int = 100, seed: int | None = None,
                     **truth) -> SyntheticCorpus:
    """Draw the benchmark corpus; empty documents are dropped."""
    sc = simulate_corpus(overdispersed_truth(**truth), V, J, rng, seed=seed)
    kept = sc.truth.n_jk.sum(axis=1) > 0
    truth_state = sc.truth
    if not kept.all():
        truth_state = truth_state.copy()
        truth_state.theta = truth_state.theta[kept]
        truth_state.n_jk = truth_state.n_jk[kept]
    return SyntheticCorpus(counts=drop_empty_documents(sc.counts), truth=truth_state, seed=seed)


def greedy_topic_match(truth_phi, fit_phi):
    """Greedily pair truth and fitted topics (V x K columns) by cosine similarity.

    Returns a list of (truth index, fitted index, cosine), best pair first.
    """
    t = np.asarray(truth_phi, dtype=float)
    f = np.asarray(fit_phi, dtype=float)
    cos = (t / np.linalg.norm(t, axis=0)).T @ (f / np.linalg.norm(f, axis=0))
    pairs = []
    for _ in range(min(cos.shape)):
        i, j = np.unravel_index(np.argmax(cos), cos.shape)
        pairs.append((int(i), int(j), float(cos[i, j])))
        cos[i, :] = -np.inf
        cos[:, j] = -np.inf
    return pairs
