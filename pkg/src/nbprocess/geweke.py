"""Joint-distribution ("getting it right") tests for the Gibbs sweeps.

The marginal-conditional simulator draws parameters from the prior and data
given them, independently each round. The successive-conditional simulator
alternates one Gibbs sweep with a fresh data draw given the current
parameters. Both target the same joint law, so any statistic of the
parameters must have matching means; a mismatch exposes a wrong conditional.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import sweep_variant
from .measures import draw_data, draw_prior
from .model import ModelSpec, ModelState, TokenData


def parameter_stats(state: ModelState) -> dict[str, float]:
    out = {}
    if state.gamma0 is not None:
        out["gamma0"] = state.gamma0
    if state.r_atom is not None:
        out["sum_r_k"] = float(state.r_atom.sum())
    if state.r_group is not None and state.variant != "beta-geometric":
        out["mean_r_j"] = float(state.r_group.mean())
    if state.p_group is not None and state.variant not in ("nb-hdp", "nb-ftm"):
        out["mean_p_j"] = float(state.p_group.mean())
    if state.p_atom is not None:
        out["mean_p_k"] = float(state.p_atom.mean())
    if state.p_shared is not None:
        out["p"] = state.p_shared
    if state.pi is not None:
        out["mean_pi_k"] = float(state.pi.mean())
    out["mean_theta"] = float(state.theta.mean())
    out["theta_00"] = float(state.theta[0, 0])
    out["phi_00"] = float(state.phi[0, 0])
    return out


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    size = x.size // n_batches
    batches = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


@dataclass
class GewekeResult:
    z: dict[str, float]
    marginal_mean: dict[str, float]
    successive_mean: dict[str, float]

    @property
    def max_abs_z(self) -> float:
        return max(abs(v) for v in self.z.values())


def geweke_test(spec: ModelSpec, J: int, V: int, rounds: int, rng,
                doc_lengths=None, burn: int = 100) -> GewekeResult:
    """Run both simulators for ``rounds`` rounds each and z-score every statistic."""
    fixed = None
    if spec.variant == "dir-pfa":
        fixed = np.asarray(doc_lengths if doc_lengths is not None else np.full(J, 8))

    marginal = []
    for _ in range(rounds):
        marginal.append(parameter_stats(draw_prior(spec, J, V, rng)))

    state = draw_prior(spec, J, V, rng)
    matrix, state = draw_data(state, rng, doc_lengths=fixed)
    successive = []
    for it in range(rounds + burn):
        sweep_variant(state, TokenData(matrix), spec.hp, rng)
        if it >= burn:
            successive.append(parameter_stats(state))
        matrix, state = draw_data(state, rng, doc_lengths=fixed)

    z, mm, sm = {}, {}, {}
    for key in marginal[0]:
        a = np.array([s[key] for s in marginal])
        b = np.array([s[key] for s in successive])
        se = np.sqrt(a.var(ddof=1) / a.size + batch_means_se(b) ** 2)
        mm[key], sm[key] = float(a.mean()), float(b.mean())
        z[key] = float((a.mean() - b.mean()) / se) if se > 0 else 0.0
    return GewekeResult(z=z, marginal_mean=mm, successive_mean=sm)
