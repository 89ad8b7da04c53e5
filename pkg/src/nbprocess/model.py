"""Hyperparameters, model variants and the mutable state of one Gibbs chain."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .corpus import SparseCountMatrix

VARIANTS = (
    "nb",
    "nb-lda",
    "nb-hdp",
    "nb-ftm",
    "beta-geometric",
    "beta-nb",
    "gamma-nb",
    "marked-beta-nb",
    "dir-pfa",
)

# Which latent blocks each variant carries.
R_ATOM = {"nb", "nb-hdp", "nb-ftm", "gamma-nb", "marked-beta-nb"}
R_GROUP = {"nb-lda", "beta-nb", "beta-geometric"}
P_ATOM = {"beta-geometric", "beta-nb", "marked-beta-nb"}
P_GROUP = {"nb-lda", "nb-hdp", "nb-ftm", "gamma-nb"}
HAS_GAMMA0 = {"nb", "nb-lda", "nb-hdp", "nb-ftm", "beta-nb", "gamma-nb", "marked-beta-nb"}
FIXED_HALF_P = {"nb-hdp", "nb-ftm"}


class UnknownVariantError(ValueError):
    pass


class NumericalError(RuntimeError):
    """A posterior update left its domain; carries a state summary."""

    def __init__(self, message: str, snapshot: dict | None = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


def check_variant(name: str) -> str:
    if name not in VARIANTS:
        raise UnknownVariantError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return name


@dataclass(frozen=True)
class Hyperparams:
    """Prior settings shared by all variants.

    ``bp_c`` and ``bp_mass`` parameterize the finite beta-process prior
    Beta(bp_c*bp_mass/K, bp_c*(1 - bp_mass/K)) of the zero-inflation
    probabilities; ``alpha`` is the Dirichlet concentration of ``dir-pfa``.
    """

    a0: float = 0.01
    b0: float = 0.01
    e0: float = 0.01
    f0: float = 0.01
    c: float = 1.0
    eta: float = 0.05
    K: int = 400
    alpha: float = 50.0
    bp_c: float = 1.0
    bp_mass: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"hyperparameter {f.name} must be positive")
        if int(self.K) != self.K:
            raise ValueError("K must be an integer")
        object.__setattr__(self, "K", int(self.K))
        if self.bp_mass >= self.K:
            raise ValueError("bp_mass must be smaller than K")

    def replace(self, **kw) -> "Hyperparams":
        d = asdict(self)
        d.update(kw)
        return Hyperparams(**d)


@dataclass(frozen=True)
class Schedule:
    iterations: int = 2500
    burn_in: int = 1000
    warmup: int = 50
    thin: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if not 0 <= self.warmup <= self.burn_in:
            raise ValueError("warmup must satisfy 0 <= warmup <= burn_in")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def collected(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    def collects(self, iteration: int) -> bool:
        """Whether the 0-based ``iteration`` contributes to the posterior average."""
        return iteration >= self.burn_in and (iteration - self.burn_in) % self.thin == 0


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    hp: Hyperparams = field(default_factory=Hyperparams)
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self):
        check_variant(self.variant)


class TokenData:
    """Training tokens of a count matrix, one (doc, term) pair per token."""

    def __init__(self, m: SparseCountMatrix):
        self.matrix = m
        self.J, self.V = m.J, m.V
        self.docs, self.words = m.tokens()
        self.doc_lengths = m.doc_lengths()

    @property
    def T(self) -> int:
        return int(self.docs.size)


@dataclass
class ModelState:
    """All latent variables of one chain.

    ``phi`` is V x K (columns on the simplex), ``theta`` is J x K. Parameters a
    variant does not use are ``None``. ``tables`` (l_jk) and ``tables_top``
    (l'_k or l'_j) hold the last sweep's augmentation draws.
    """

    variant: str
    K: int
    phi: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    n_jk: np.ndarray
    n_vk: np.ndarray
    gamma0: float | None = None
    r_atom: np.ndarray | None = None
    r_group: np.ndarray | None = None
    p_atom: np.ndarray | None = None
    p_group: np.ndarray | None = None
    p_shared: float | None = None
    pi: np.ndarray | None = None
    b: np.ndarray | None = None
    tables: np.ndarray | None = None
    tables_top: np.ndarray | None = None
    p_prime: float | np.ndarray | None = None
    iteration: int = 0
    clamped: int = 0

    @property
    def n_k(self) -> np.ndarray:
        return self.n_jk.sum(axis=0)

    @property
    def k_active(self) -> int:
        return int(np.count_nonzero(self.n_k))

    def copy(self) -> "ModelState":
        return copy.deepcopy(self)

    def recount(self, data: TokenData) -> None:
        K = self.K
        self.n_jk = np.bincount(data.docs * K + self.z, minlength=data.J * K).reshape(data.J, K)
        self.n_vk = np.bincount(data.words * K + self.z, minlength=data.V * K).reshape(data.V, K)

    def summary(self) -> dict:
        """Small JSON-friendly snapshot for diagnostics."""
        out = {"variant": self.variant, "iteration": self.iteration, "k_active": self.k_active,
               "gamma0": self.gamma0, "clamped": self.clamped}
        for name in ("r_atom", "r_group", "p_atom", "p_group", "pi"):
            v = getattr(self, name)
            if v is not None:
                out[name] = {"min": float(np.min(v)), "max": float(np.max(v)),
                             "finite": bool(np.all(np.isfinite(v)))}
        if self.p_shared is not None:
            out["p_shared"] = self.p_shared
        return out

    def check_invariants(self, data: TokenData) -> None:
        """Raise AssertionError if count bookkeeping or parameter domains are broken."""
        K = self.K
        n_jk = np.bincount(data.docs * K + self.z, minlength=data.J * K).reshape(data.J, K)
        n_vk = np.bincount(data.words * K + self.z, minlength=data.V * K).reshape(data.V, K)
        assert np.array_equal(n_jk, self.n_jk), "n_jk out of sync with z"
        assert np.array_equal(n_vk, self.n_vk), "n_vk out of sync with z"
        assert np.array_equal(self.n_jk.sum(axis=1), data.doc_lengths), "sum_k n_jk != N_j"
        assert np.array_equal(self.n_jk.sum(axis=0), self.n_vk.sum(axis=0)), "n_.k mismatch"
        assert np.allclose(self.phi.sum(axis=0), 1.0, atol=1e-12), "phi off the simplex"
        assert np.all(self.theta >= 0) and np.all(np.isfinite(self.theta)), "bad theta"
        if self.variant != "nb-ftm":
            assert np.all(self.theta > 0), "theta must be positive"
        for name in ("p_atom", "p_group", "pi"):
            v = getattr(self, name)
            if v is not None:
                assert np.all((v > 0) & (v < 1)), f"{name} outside (0, 1)"
        if self.b is not None:
            assert np.all(self.b[self.n_jk > 0]), "b_jk = 0 on a positive count"


def spec_to_dict(spec: ModelSpec) -> dict:
    return {"variant": spec.variant, "hp": asdict(spec.hp), "schedule": asdict(spec.schedule)}


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(variant=d["variant"], hp=Hyperparams(**d["hp"]), schedule=Schedule(**d["schedule"]))
