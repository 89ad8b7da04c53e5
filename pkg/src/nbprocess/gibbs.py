"""Block Gibbs sweeps for the NB process topic models.

Every variant shares the token-assignment update (step 1) and the topic update
(step 9); they differ in how the gamma prior of theta_jk is built, so each has
its own parameter block. Sweeps mutate the state in place and return it.

Scan order inside a sweep is fixed: z, counts, tables, top-level tables,
probability parameters, gamma0, dispersions, theta, phi.
"""
from __future__ import annotations

import numpy as np

from . import distributions as D
from .measures import draw_topics
from .model import (FIXED_HALF_P, Hyperparams, ModelSpec, ModelState, NumericalError,
                    TokenData, check_variant)

_TOKEN_BLOCK = 1 << 16


# ---------------------------------------------------------------------------
# Shared steps


def assignment_weights(state: ModelState, data: TokenData, start: int = 0, stop: int | None = None):
    """Unnormalized Pr(z_ji = k) = phi[v_ji, k] * theta[j, k] for a token slice."""
    sl = slice(start, stop)
    return state.phi[data.words[sl]] * state.theta[data.docs[sl]]


def assignment_probabilities(state: ModelState, data: TokenData) -> np.ndarray:
    w = assignment_weights(state, data)
    return w / w.sum(axis=1, keepdims=True)


def sample_assignments(state: ModelState, data: TokenData, rng) -> None:
    """Step 1: redraw every z_ji, tokens in stored order, then recount."""
    z = np.empty(data.T, dtype=np.int64)
    for start in range(0, data.T, _TOKEN_BLOCK):
        stop = min(start + _TOKEN_BLOCK, data.T)
        w = assignment_weights(state, data, start, stop)
        try:
            z[start:stop] = D.sample_categorical_rows(w, rng)
        except D.DomainError as exc:
            raise NumericalError(f"token assignment failed: {exc}", state.summary()) from None
    state.z = z
    state.recount(data)


def sample_topics(state: ModelState, hp: Hyperparams, rng) -> None:
    """Step 9: phi_k ~ Dir(eta + n_{1.k}, ..., eta + n_{V.k})."""
    state.phi = D.sample_dirichlet(hp.eta + state.n_vk, rng, axis=0)


def _beta(state: ModelState, a, b, rng, size=None):
    p, n = D.clamp_probability(D.sample_beta(a, b, rng, size=size))
    state.clamped += n
    return p


def _gamma(shape, rate, rng, state: ModelState, what: str):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if not (np.all(np.isfinite(shape)) and np.all(shape > 0)
            and np.all(np.isfinite(rate)) and np.all(rate > 0)):
        raise NumericalError(f"invalid gamma posterior for {what}", state.summary())
    return D.sample_gamma(shape, 1.0 / rate, rng)


def _prob_prime(s, c, state: ModelState):
    """p' = s / (c + s) with s = -sum ln(1 - p); returns -ln(1 - p') = log1p(s / c)."""
    s = np.asarray(s, dtype=float)
    pp = s / (c + s)
    if not (np.all(np.isfinite(pp)) and np.all((pp >= 0) & (pp < 1))):
        raise NumericalError("p' left [0, 1)", state.summary())
    return pp, np.log1p(s / c)


def _theta_gamma(shape, prob, rng):
    return D.sample_gamma(shape, prob, rng)


# ---------------------------------------------------------------------------
# Variant parameter blocks (steps 3-8)


def _update_gamma_nb(state: ModelState, data: TokenData, hp: Hyperparams, rng, fix_p: bool = False):
    K = hp.K
    r = state.r_atom
    state.tables = D.sample_crt_array(state.n_jk, r[None, :], rng)
    l_k = state.tables.sum(axis=0)
    state.tables_top = D.sample_crt_array(l_k, state.gamma0 / K, rng)
    if not fix_p:
        state.p_group = _beta(state, hp.a0 + data.doc_lengths, hp.b0 + r.sum(), rng, size=data.J)
    s = -np.log1p(-state.p_group).sum()
    state.p_prime, neg_log = _prob_prime(s, hp.c, state)
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 + neg_log, rng, state, "gamma0"))
    state.r_atom = _gamma(state.gamma0 / K + l_k, hp.c + s, rng, state, "r_k")
    state.theta = _theta_gamma(state.r_atom[None, :] + state.n_jk, state.p_group[:, None], rng)


def _update_nb_hdp(state, data, hp, rng):
    _update_gamma_nb(state, data, hp, rng, fix_p=True)


def _update_nb(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    # theta_jk = r_k shared by all documents; r ~ GaP(J(1-p)/p, G0) with one p.
    K, J = hp.K, data.J
    n_k = state.n_k
    state.tables = None
    state.tables_top = D.sample_crt_array(n_k, state.gamma0 / K, rng)
    state.p_shared = float(_beta(state, hp.a0 + n_k.sum(), hp.b0 + state.gamma0, rng))
    state.p_prime = state.p_shared
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 - np.log1p(-state.p_shared),
                                rng, state, "gamma0"))
    state.r_atom = _gamma(state.gamma0 / K + n_k, J / state.p_shared, rng, state, "r_k")
    state.theta = np.broadcast_to(state.r_atom, (J, K)).copy()


def _update_nb_lda(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    K = hp.K
    r = state.r_group
    state.tables = D.sample_crt_array(state.n_jk, r[:, None], rng)
    l_j = state.tables.sum(axis=1)
    state.tables_top = D.sample_crt_array(l_j, state.gamma0, rng)
    state.p_group = _beta(state, hp.a0 + data.doc_lengths, hp.b0 + K * r, rng, size=data.J)
    s = -K * np.log1p(-state.p_group)
    state.p_prime, neg_log = _prob_prime(s, hp.c, state)
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 + neg_log.sum(), rng, state, "gamma0"))
    state.r_group = _gamma(state.gamma0 + l_j, hp.c + s, rng, state, "r_j")
    state.theta = _theta_gamma(state.r_group[:, None] + state.n_jk, state.p_group[:, None], rng)


def zero_inflation_posterior(pi, r, p):
    """P(b = 1 | n = 0) with theta integrated out.

    pi (1-p)^r / (pi (1-p)^r + 1 - pi), evaluated in log space.
    """
    log_on = np.log(pi) + r * np.log1p(-p)
    log_off = np.log1p(-pi)
    return np.exp(log_on - np.logaddexp(log_on, log_off))


def _update_nb_ftm(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    K, J = hp.K, data.J
    r, p, pi = state.r_atom, state.p_group, state.pi
    prob_on = zero_inflation_posterior(pi[None, :], r[None, :], p[:, None])
    u = rng.random((J, K))
    state.b = (state.n_jk > 0) | (u < prob_on)
    used = state.b.sum(axis=0)
    a = hp.bp_c * hp.bp_mass / K
    state.pi = _beta(state, a + used, hp.bp_c - a + J - used, rng, size=K)
    state.tables = D.sample_crt_array(state.n_jk, r[None, :], rng)
    l_k = state.tables.sum(axis=0)
    state.tables_top = D.sample_crt_array(l_k, state.gamma0 / K, rng)
    s_k = -(state.b * np.log1p(-p)[:, None]).sum(axis=0)
    state.p_prime, neg_log = _prob_prime(s_k, hp.c, state)
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 + neg_log.sum() / K,
                                rng, state, "gamma0"))
    state.r_atom = _gamma(state.gamma0 / K + l_k, hp.c + s_k, rng, state, "r_k")
    theta = np.zeros((J, K))
    on = state.b
    shape = (state.r_atom[None, :] + state.n_jk)[on]
    theta[on] = _theta_gamma(shape, np.broadcast_to(p[:, None], (J, K))[on], rng)
    state.theta = theta


def _update_beta_geometric(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    J = data.J
    state.p_atom = _beta(state, hp.a0 + state.n_k, hp.b0 + J, rng, size=hp.K)
    state.theta = _theta_gamma(1.0 + state.n_jk, state.p_atom[None, :], rng)


def _update_beta_nb(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    J = data.J
    r = state.r_group
    state.tables = D.sample_crt_array(state.n_jk, r[:, None], rng)
    l_j = state.tables.sum(axis=1)
    state.tables_top = D.sample_crt_array(l_j, state.gamma0, rng)
    state.p_atom = _beta(state, hp.a0 + state.n_k, hp.b0 + r.sum(), rng, size=hp.K)
    s = -np.log1p(-state.p_atom).sum()
    state.p_prime, neg_log = _prob_prime(s, hp.c, state)
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 + J * neg_log, rng, state, "gamma0"))
    state.r_group = _gamma(state.gamma0 + l_j, hp.c + s, rng, state, "r_j")
    state.theta = _theta_gamma(state.r_group[:, None] + state.n_jk, state.p_atom[None, :], rng)


def _update_marked_beta_nb(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    K, J = hp.K, data.J
    r = state.r_atom
    state.tables = D.sample_crt_array(state.n_jk, r[None, :], rng)
    l_k = state.tables.sum(axis=0)
    state.tables_top = D.sample_crt_array(l_k, state.gamma0 / K, rng)
    state.p_atom = _beta(state, hp.a0 + state.n_k, hp.b0 + J * r, rng, size=K)
    s_k = -J * np.log1p(-state.p_atom)
    state.p_prime, neg_log = _prob_prime(s_k, hp.c, state)
    state.gamma0 = float(_gamma(hp.e0 + state.tables_top.sum(), hp.f0 + neg_log.sum() / K,
                                rng, state, "gamma0"))
    state.r_atom = _gamma(state.gamma0 / K + l_k, hp.c + s_k, rng, state, "r_k")
    state.theta = _theta_gamma(state.r_atom[None, :] + state.n_jk, state.p_atom[None, :], rng)


def _update_dir_pfa(state: ModelState, data: TokenData, hp: Hyperparams, rng):
    state.theta = D.sample_dirichlet(hp.alpha / hp.K + state.n_jk, rng, axis=1)


PARAMETER_UPDATES = {
    "gamma-nb": _update_gamma_nb,
    "nb-hdp": _update_nb_hdp,
    "nb": _update_nb,
    "nb-lda": _update_nb_lda,
    "nb-ftm": _update_nb_ftm,
    "beta-geometric": _update_beta_geometric,
    "beta-nb": _update_beta_nb,
    "marked-beta-nb": _update_marked_beta_nb,
    "dir-pfa": _update_dir_pfa,
}


def update_parameters(state: ModelState, data: TokenData, hp: Hyperparams, rng) -> ModelState:
    """Steps 3-8 of a sweep for ``state.variant``, holding z fixed."""
    PARAMETER_UPDATES[check_variant(state.variant)](state, data, hp, rng)
    return state


# ---------------------------------------------------------------------------
# Sweeps


def sweep_variant(state: ModelState, data: TokenData, hp: Hyperparams, rng) -> ModelState:
    """One systematic-scan sweep for any variant."""
    if state.K != hp.K:
        raise ValueError("state and hyperparameters disagree on K")
    sample_assignments(state, data, rng)
    update_parameters(state, data, hp, rng)
    sample_topics(state, hp, rng)
    state.iteration += 1
    return state


def sweep(state: ModelState, data: TokenData, hp: Hyperparams, rng) -> ModelState:
    """The canonical gamma-NB sweep."""
    if state.variant != "gamma-nb":
        raise ValueError(f"sweep() is the gamma-nb sweep; got variant {state.variant!r}")
    return sweep_variant(state, data, hp, rng)


def predictive_weights(state: ModelState, j: int, hp: Hyperparams | None = None) -> np.ndarray:
    """Unnormalized predictive weights of a new token in document ``j``.

    Slot k holds the posterior mean of theta_jk (up to a factor common to the
    document); the final slot is the mass reserved for unseen atoms, which is
    zero under a finite truncation. ``dir-pfa`` needs ``hp`` for its alpha.
    """
    v = state.variant
    n_j = state.n_jk[j].astype(float)
    K = state.K
    if v in ("gamma-nb", "nb-hdp", "marked-beta-nb"):
        w = state.r_atom + n_j
    elif v == "nb-ftm":
        w = state.r_atom * state.b[j] + n_j
    elif v in ("nb-lda", "beta-nb", "beta-geometric"):
        w = state.r_group[j] + n_j
    elif v == "nb":
        w = state.gamma0 / K + state.n_k.astype(float)
    else:
        if hp is None:
            raise ValueError("dir-pfa predictive weights need the hyperparameters")
        w = hp.alpha / K + n_j
    if v in ("beta-nb", "beta-geometric", "marked-beta-nb"):
        w = w * state.p_atom
    return np.append(w, 0.0)


# ---------------------------------------------------------------------------
# Initialization


WARMUP_R_TOTAL = 50.0


def initial_state(data: TokenData, spec: ModelSpec, rng) -> ModelState:
    """Uniform z, Phi from the Dir(eta) prior, pinned gamma-NB theta."""
    hp = spec.hp
    K = hp.K
    z = rng.integers(K, size=data.T).astype(np.int64)
    st = ModelState(variant=spec.variant, K=K, phi=draw_topics(hp.eta, data.V, K, rng),
                    theta=np.zeros((data.J, K)), z=z, n_jk=np.zeros((data.J, K), dtype=np.int64),
                    n_vk=np.zeros((data.V, K), dtype=np.int64))
    st.recount(data)
    st.theta = _theta_gamma(WARMUP_R_TOTAL / K + st.n_jk, 0.5, rng)
    return st


def warmup_sweep(state: ModelState, data: TokenData, hp: Hyperparams, rng) -> ModelState:
    """Gamma-NB sweep with r_k = 50/K and p_j = 0.5 pinned."""
    sample_assignments(state, data, rng)
    state.theta = _theta_gamma(WARMUP_R_TOTAL / hp.K + state.n_jk, 0.5, rng)
    sample_topics(state, hp, rng)
    state.iteration += 1
    return state


def unpin(state: ModelState, data: TokenData, hp: Hyperparams, rng) -> ModelState:
    """Attach the target variant's parameters and refresh them once given z."""
    v = check_variant(state.variant)
    K, J = hp.K, data.J
    r0 = WARMUP_R_TOTAL / K
    state.gamma0 = 1.0 if v not in ("beta-geometric", "dir-pfa") else None
    if v in ("nb", "nb-hdp", "nb-ftm", "gamma-nb", "marked-beta-nb"):
        state.r_atom = np.full(K, r0)
    if v in ("nb-lda", "beta-nb"):
        state.r_group = np.full(J, r0)
    if v == "beta-geometric":
        state.r_group = np.ones(J)
    if v in ("nb-lda", "gamma-nb", "nb-hdp", "nb-ftm"):
        state.p_group = np.full(J, 0.5)
    if v in ("beta-geometric", "beta-nb", "marked-beta-nb"):
        state.p_atom = np.full(K, 0.5)
    if v == "nb":
        state.p_shared = 0.5
    if v == "nb-ftm":
        state.pi = np.full(K, 0.5)
        state.b = np.ones((J, K), dtype=bool)
    if v in FIXED_HALF_P:
        state.p_group = np.full(J, 0.5)
    return update_parameters(state, data, hp, rng)


def init_schedule(data: TokenData, spec: ModelSpec, rng) -> ModelState:
    """Random start, ``spec.schedule.warmup`` pinned gamma-NB sweeps, then unpin."""
    state = initial_state(data, spec, rng)
    for _ in range(spec.schedule.warmup):
        warmup_sweep(state, data, spec.hp, rng)
    return unpin(state, data, spec.hp, rng)
