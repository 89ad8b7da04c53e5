"""Driving a chain through warm-up, burn-in and collection, with checkpoints."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import SparseCountMatrix
from .evaluate import PosteriorAccumulator, perplexity
from .gibbs import initial_state, sweep_variant, unpin, warmup_sweep
from .model import ModelSpec, ModelState, TokenData, spec_from_dict, spec_to_dict
from .rng import chain_stream, get_state, set_state

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Chain:
    """Everything needed to continue a chain exactly where it stopped."""

    spec: ModelSpec
    state: ModelState
    accumulator: PosteriorAccumulator
    rng: np.random.Generator
    trace: list[tuple[int, int, float | None]] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.state.iteration >= self.spec.schedule.iterations


def start_chain(data: TokenData, spec: ModelSpec, rng) -> Chain:
    state = initial_state(data, spec, rng)
    return Chain(spec=spec, state=state, accumulator=PosteriorAccumulator(data.J, data.V), rng=rng)


def step(chain: Chain, data: TokenData, heldout: SparseCountMatrix | None = None,
         trace_every: int = 1) -> None:
    """Run iteration ``chain.state.iteration`` and record it."""
    spec, state, rng = chain.spec, chain.state, chain.rng
    i = state.iteration
    if i < spec.schedule.warmup:
        warmup_sweep(state, data, spec.hp, rng)
    else:
        if i == spec.schedule.warmup:
            unpin(state, data, spec.hp, rng)
        sweep_variant(state, data, spec.hp, rng)
    ppl = None
    if spec.schedule.collects(i):
        chain.accumulator.accumulate(state)
        last = i == spec.schedule.iterations - 1
        if heldout is not None and heldout.total and ((i + 1) % trace_every == 0 or last):
            ppl = perplexity(chain.accumulator.finalize(), heldout)
    chain.trace.append((i, state.k_active, ppl))


def run_chain(chain: Chain, data: TokenData, heldout: SparseCountMatrix | None = None,
              stop_at: int | None = None, checkpoint_path=None, checkpoint_every: int = 0,
              trace_every: int = 1) -> Chain:
    """Advance ``chain`` to ``stop_at`` (default: the end of its schedule).

    With ``checkpoint_path`` a checkpoint is written every ``checkpoint_every``
    iterations and when the run stops.
    """
    end = spec_end = chain.spec.schedule.iterations
    if stop_at is not None:
        end = min(stop_at, spec_end)
    while chain.state.iteration < end:
        step(chain, data, heldout, trace_every)
        if checkpoint_path and checkpoint_every and chain.state.iteration % checkpoint_every == 0:
            save_checkpoint(chain, checkpoint_path)
    if checkpoint_path:
        save_checkpoint(chain, checkpoint_path)
    return chain


# ---------------------------------------------------------------------------
# Checkpoints


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def save_checkpoint(chain: Chain, path) -> None:
    """Write ``chain`` to a single ``.npz`` file, atomically."""
    arrays, scalars = {}, {}
    for f in fields(ModelState):
        val = getattr(chain.state, f.name)
        if isinstance(val, np.ndarray):
            arrays["state." + f.name] = val
        else:
            scalars[f.name] = _jsonable(val)
    acc = chain.accumulator
    arrays["acc.sums"] = acc.sums
    arrays["acc.log_scale"] = acc.log_scale
    trace = np.array([(it, k, np.nan if p is None else p) for it, k, p in chain.trace],
                     dtype=float).reshape(-1, 3)
    arrays["trace"] = trace
    meta = {"version": CHECKPOINT_VERSION, "spec": spec_to_dict(chain.spec), "scalars": scalars,
            "acc": {"J": acc.J, "V": acc.V, "S": acc.S}, "rng": get_state(chain.rng)}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path) -> Chain:
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            arrays = {k: z[k] for k in z.files if k != "meta"}
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from None
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')!r}")
    spec = spec_from_dict(meta["spec"])
    kw = dict(meta["scalars"])
    for name, val in arrays.items():
        if name.startswith("state."):
            kw[name[len("state."):]] = val
    state = ModelState(**kw)
    acc = PosteriorAccumulator(meta["acc"]["J"], meta["acc"]["V"])
    acc.sums = arrays["acc.sums"]
    acc.log_scale = arrays["acc.log_scale"]
    acc.S = meta["acc"]["S"]
    rng = np.random.Generator(np.random.PCG64())
    set_state(rng, meta["rng"])
    trace = [(int(it), int(k), None if np.isnan(p) else float(p)) for it, k, p in arrays["trace"]]
    return Chain(spec=spec, state=state, accumulator=acc, rng=rng, trace=trace)


# ---------------------------------------------------------------------------
# Several chains


def _run_one(args):
    train, heldout, spec, seed, c, ckpt, every, trace_every = args
    data = TokenData(train)
    chain = start_chain(data, spec, chain_stream(seed, c))
    return run_chain(chain, data, heldout, checkpoint_path=ckpt, checkpoint_every=every,
                     trace_every=trace_every)


def run_chains(train: SparseCountMatrix, spec: ModelSpec, seed: int, n_chains: int = 1,
               heldout: SparseCountMatrix | None = None, workers: int = 1,
               checkpoint_paths=None, checkpoint_every: int = 0, trace_every: int = 1) -> list[Chain]:
    """Run independent chains, chain c on stream ``chain_stream(seed, c)``.

    Results do not depend on ``workers``.
    """
    paths = list(checkpoint_paths) if checkpoint_paths is not None else [None] * n_chains
    jobs = [(train, heldout, spec, seed, c, paths[c], checkpoint_every, trace_every)
            for c in range(n_chains)]
    if workers > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]
