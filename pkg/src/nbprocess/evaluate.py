"""Posterior-averaged predictive probabilities and held-out perplexity."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import SparseCountMatrix
from .model import ModelState


class EvaluationError(RuntimeError):
    pass


class PosteriorAccumulator:
    """Running sum over samples of sum_k phi_vk theta_jk, one row per document.

    Row j is stored as ``exp(log_scale[j]) * sums[j]`` so that rows with huge
    theta cannot overflow; the relative weight of samples is unchanged.
    """

    def __init__(self, J: int, V: int):
        self.J, self.V = J, V
        self.sums = np.zeros((J, V))
        self.log_scale = np.full(J, -np.inf)
        self.S = 0

    def accumulate(self, state: ModelState) -> None:
        rate = state.theta @ state.phi.T
        if rate.shape != (self.J, self.V):
            raise EvaluationError(f"sample has shape {rate.shape}, expected {(self.J, self.V)}")
        if not np.all(np.isfinite(rate)) or np.any(rate < 0):
            raise EvaluationError("non-finite or negative predictive rate")
        peak = rate.max(axis=1)
        with np.errstate(divide="ignore"):
            log_peak = np.log(peak)
        new_scale = np.maximum(self.log_scale, log_peak)
        keep = np.isfinite(new_scale)
        old = np.where(keep, np.exp(self.log_scale - np.where(keep, new_scale, 0.0)), 0.0)
        add = np.where(keep, np.exp(-np.where(keep, new_scale, 0.0)), 0.0)
        self.sums = self.sums * old[:, None] + rate * add[:, None]
        self.log_scale = np.where(keep, new_scale, self.log_scale)
        self.S += 1

    def finalize(self) -> np.ndarray:
        """f_jv = sum_s sum_k phi_vk theta_jk / sum_s sum_v sum_k phi_vk theta_jk."""
        if self.S == 0:
            raise EvaluationError("no collected samples; the chain has not left burn-in")
        totals = self.sums.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = self.sums / totals
        # a document with theta = 0 in every sample has no predictive mass
        f[totals[:, 0] == 0] = np.nan
        return f


def average_f(fs) -> np.ndarray:
    """Merge chains by averaging their finalized f matrices."""
    fs = [np.asarray(f) for f in fs]
    if not fs:
        raise EvaluationError("nothing to average")
    return np.mean(fs, axis=0)


def perplexity(f: np.ndarray, heldout: SparseCountMatrix) -> float:
    """exp(-sum_jv y_jv log f_jv / y..) over held-out counts y."""
    if heldout.total == 0:
        raise EvaluationError("held-out set is empty")
    if f.shape != (heldout.J, heldout.V):
        raise EvaluationError(f"f has shape {f.shape}, held-out matrix is {(heldout.J, heldout.V)}")
    probs = f[heldout.docs, heldout.terms]
    bad = ~(probs > 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"zero predictive probability at held-out (doc={heldout.docs[i]}, "
                              f"term={heldout.terms[i]})")
    y = heldout.counts
    return float(np.exp(-np.dot(y, np.log(probs)) / y.sum()))


def parameter_dumps(state: ModelState) -> dict[str, np.ndarray]:
    """Final-iteration parameters sorted by decreasing usage.

    Atom-level arrays follow decreasing n_.k, group-level arrays follow
    decreasing document length.
    """
    atom_order = np.argsort(-state.n_k, kind="stable")
    doc_order = np.argsort(-state.n_jk.sum(axis=1), kind="stable")
    out = {}
    for name, order in (("r_atom", atom_order), ("p_atom", atom_order), ("pi", atom_order),
                        ("r_group", doc_order), ("p_group", doc_order)):
        val = getattr(state, name)
        if val is not None:
            out[name] = np.asarray(val, dtype=float)[order]
    out["n_k"] = state.n_k[atom_order]
    return out


@dataclass
class PerplexityReport:
    S: int
    f: np.ndarray
    perplexity: float
    k_active_trace: list[int] = field(default_factory=list)
    param_dumps: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"S": self.S, "perplexity": self.perplexity,
                "k_active_final": self.k_active_trace[-1] if self.k_active_trace else None,
                "k_active_trace": [int(k) for k in self.k_active_trace],
                "param_dumps": {k: np.asarray(v).tolist() for k, v in self.param_dumps.items()},
                **self.meta}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def write_trace(path, rows) -> None:
    """CSV of (iteration, k_active, perplexity so far); missing perplexity is blank."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "k_active", "perplexity"])
        for it, k, ppl in rows:
            w.writerow([it, k, "" if ppl is None else repr(float(ppl))])


def write_dumps(path, dumps: dict[str, np.ndarray]) -> None:
    """One CSV column per dumped array; shorter columns are padded with blanks."""
    names = sorted(dumps)
    n = max((len(dumps[k]) for k in names), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rank"] + names)
        for i in range(n):
            w.writerow([i] + [repr(float(dumps[k][i])) if i < len(dumps[k]) else "" for k in names])
