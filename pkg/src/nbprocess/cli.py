"""Command-line front end: ``nbprocess {fit,eval,simulate,dist-check}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print one JSON object to stderr.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import checks
from .corpus import CorpusError, drop_empty_documents, filter_min_df, load_uci, split_holdout, write_uci
from .distributions import DomainError
from .evaluate import (EvaluationError, PerplexityReport, average_f, parameter_dumps, perplexity,
                       write_dumps, write_trace)
from .measures import simulate_corpus
from .model import VARIANTS, Hyperparams, ModelSpec, NumericalError, Schedule, TokenData
from .rng import chain_stream, named_stream
from .runner import CheckpointError, load_checkpoint, run_chain, run_chains, start_chain
from .synthetic import benchmark_corpus

LAYOUT_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    variant: str = "gamma-nb"
    K: int = 400
    iterations: int = 2500
    burn_in: int = 1000
    warmup: int = 50
    thin: int = 1
    a0: float = 0.01
    b0: float = 0.01
    e0: float = 0.01
    f0: float = 0.01
    c: float = 1.0
    eta: float = 0.05
    alpha: float = 50.0
    bp_c: float = 1.0
    bp_mass: float = 1.0
    fraction: float = 0.6
    seed: int = 0
    chains: int = 1
    workers: int = 1
    min_df: int = 1
    checkpoint_every: int = 100
    trace_every: int = 1

    def validate(self) -> "RunConfig":
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.K < 1:
            raise UsageError("K must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise UsageError("burn_in must satisfy 0 <= burn_in < iterations")
        if not 0 <= self.warmup <= self.burn_in:
            raise UsageError("warmup must satisfy 0 <= warmup <= burn_in")
        if not 0.0 < self.fraction < 1.0:
            raise UsageError("fraction must lie in (0, 1)")
        for name in ("chains", "workers", "thin", "min_df", "trace_every"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if self.checkpoint_every < 0 or self.seed < 0:
            raise UsageError("checkpoint_every and seed must be nonnegative")
        try:
            self.hyperparams()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return self

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(a0=self.a0, b0=self.b0, e0=self.e0, f0=self.f0, c=self.c, eta=self.eta,
                           K=self.K, alpha=self.alpha, bp_c=self.bp_c, bp_mass=self.bp_mass)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.variant, self.hyperparams(),
                         Schedule(self.iterations, self.burn_in, self.warmup, self.thin))


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _cast(name: str, raw):
    kind = {"int": int, "float": float, "str": str}[_FIELD_TYPES[name]]
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"config value {name}={raw!r} is not a valid {kind.__name__}") from None


def read_config(path) -> dict:
    """Read the ``[run]`` section of an INI file; keys are RunConfig field names."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not cp.has_section("run"):
        raise UsageError(f"config {path} has no [run] section")
    out = {}
    for key, raw in cp.items("run"):
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise UsageError(f"config {path}: unknown key {key!r}")
        out[name] = _cast(name, raw)
    return out


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = read_config(args.config) if args.config else {}
    for name in _FIELD_TYPES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return RunConfig(**values).validate()


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for f in fields(RunConfig):
        kind = {"int": int, "float": float, "str": str}[f.type]
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None,
                       help=f"(default {f.default})")


# ---------------------------------------------------------------------------
# Subcommands


def _load_corpus(args, cfg: RunConfig):
    m = load_uci(args.docword, args.vocab)
    if cfg.min_df > 1:
        m = filter_min_df(m, cfg.min_df)
    n_docs = m.J
    m = drop_empty_documents(m)
    if m.J == 0:
        raise CorpusError("corpus has no nonempty documents")
    return m, n_docs - m.J


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    spec = cfg.model_spec()
    corpus, dropped = _load_corpus(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = split_holdout(corpus, cfg.fraction, named_stream(cfg.seed, "split"), seed=cfg.seed)
    write_uci(split.heldout, out / "heldout.docword.txt")
    write_uci(split.train, out / "train.docword.txt")
    config_doc = {"layout_version": LAYOUT_VERSION, "config": asdict(cfg),
                  "docword": str(args.docword), "vocab": None if args.vocab is None else str(args.vocab)}
    (out / "config.json").write_text(json.dumps(config_doc, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")

    ckpts = []
    for c in range(cfg.chains):
        (out / f"chain{c}").mkdir(exist_ok=True)
        ckpts.append(out / f"chain{c}" / "checkpoint.npz")
    if args.resume:
        chains = []
        data = TokenData(split.train)
        for c, path in enumerate(ckpts):
            if path.exists():
                chain = load_checkpoint(path)
                if chain.spec != spec:
                    raise UsageError(f"{path} was written with a different configuration")
            else:
                chain = start_chain(data, spec, chain_stream(cfg.seed, c))
            chains.append(run_chain(chain, data, split.heldout, checkpoint_path=path,
                                    checkpoint_every=cfg.checkpoint_every, trace_every=cfg.trace_every))
    else:
        chains = run_chains(split.train, spec, cfg.seed, cfg.chains, split.heldout, cfg.workers,
                            ckpts, cfg.checkpoint_every, cfg.trace_every)

    fs, per_chain = [], []
    for c, chain in enumerate(chains):
        f = chain.accumulator.finalize()
        fs.append(f)
        dumps = parameter_dumps(chain.state)
        write_trace(out / f"chain{c}" / "trace.csv", chain.trace)
        write_dumps(out / f"chain{c}" / "dumps.csv", dumps)
        per_chain.append({"chain": c, "perplexity": perplexity(f, split.heldout),
                          "k_active_final": chain.state.k_active, "S": chain.accumulator.S,
                          "clamped": chain.state.clamped})
    f = average_f(fs)
    report = PerplexityReport(
        S=sum(ch.accumulator.S for ch in chains), f=f, perplexity=perplexity(f, split.heldout),
        k_active_trace=[k for _, k, _ in chains[0].trace], param_dumps=parameter_dumps(chains[0].state),
        meta={"layout_version": LAYOUT_VERSION, "variant": cfg.variant, "config": asdict(cfg),
              "schedule": {**asdict(spec.schedule), "collected_per_chain": spec.schedule.collected},
              "chains": per_chain, "V": corpus.V, "J": corpus.J, "dropped_empty_documents": dropped,
              "train_tokens": split.train.total, "heldout_tokens": split.heldout.total})
    report.write(out / "report.json")
    print(json.dumps({"perplexity": report.perplexity, "S": report.S,
                      "k_active_final": report.k_active_trace[-1], "report": str(out / "report.json")}))
    return EXIT_OK


def cmd_eval(args) -> int:
    chain = load_checkpoint(args.checkpoint)
    held = load_uci(args.heldout)
    if chain.accumulator.S == 0:
        raise EvaluationError(f"checkpoint at iteration {chain.state.iteration} has no collected samples "
                              f"(burn-in ends at {chain.spec.schedule.burn_in})")
    f = chain.accumulator.finalize()
    if (held.J, held.V) != f.shape:
        raise CorpusError(f"held-out matrix is {held.J} x {held.V}, the checkpoint covers {f.shape[0]} x {f.shape[1]}")
    report = PerplexityReport(S=chain.accumulator.S, f=f, perplexity=perplexity(f, held),
                              k_active_trace=[k for _, k, _ in chain.trace],
                              param_dumps=parameter_dumps(chain.state),
                              meta={"variant": chain.spec.variant, "iteration": chain.state.iteration})
    if args.out:
        report.write(args.out)
    print(json.dumps({"perplexity": report.perplexity, "S": report.S, "iteration": chain.state.iteration}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    rng = named_stream(args.seed, "simulate")
    if args.preset == "benchmark":
        sc = benchmark_corpus(rng, V=args.V, J=args.J, seed=args.seed)
    else:
        hp = Hyperparams(a0=args.a0, b0=args.b0, e0=args.e0, f0=args.f0, c=args.c, eta=args.eta,
                         K=args.K, alpha=args.alpha, bp_c=args.bp_c, bp_mass=args.bp_mass)
        sc = simulate_corpus(ModelSpec(args.variant, hp), args.V, args.J, rng, seed=args.seed,
                             doc_length=args.doc_length)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_uci(sc.counts, out / "docword.txt", out / "vocab.txt")
    (out / "truth.json").write_text(json.dumps(sc.truth_json(), sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps({"J": sc.counts.J, "V": sc.counts.V, "tokens": sc.counts.total, "out": str(out)}))
    return EXIT_OK


def cmd_dist_check(args) -> int:
    results = checks.run_all(named_stream(args.seed, "dist-check"))
    ok = all(r.passed for r in results)
    doc = {"passed": ok, "seed": args.seed, "checks": [r.to_dict() for r in results]}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nbprocess", description="Negative binomial process topic models.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    fit = sub.add_parser("fit", help="fit a model variant and report held-out perplexity")
    fit.add_argument("--config", help="INI file with a [run] section")
    fit.add_argument("--docword", required=True, help="UCI docword file")
    fit.add_argument("--vocab", help="vocabulary file, one term per line")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--resume", action="store_true", help="continue from chain checkpoints in --out")
    _add_run_flags(fit)
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("eval", help="held-out perplexity from a chain checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--heldout", required=True, help="UCI docword file of held-out counts")
    ev.add_argument("--out", help="write the JSON report here")
    ev.set_defaults(func=cmd_eval)

    sim = sub.add_parser("simulate", help="draw a synthetic corpus from a variant prior")
    sim.add_argument("--out", required=True)
    sim.add_argument("--preset", choices=("benchmark",), help="the overdispersed Marked-Beta-NB benchmark")
    sim.add_argument("--variant", choices=VARIANTS, default="gamma-nb")
    sim.add_argument("--V", type=int, default=50)
    sim.add_argument("--J", type=int, default=100)
    sim.add_argument("--K", type=int, default=10)
    sim.add_argument("--doc-length", type=float, default=100.0, help="mean length (dir-pfa only)")
    sim.add_argument("--seed", type=int, default=0)
    for name, default in (("a0", 2.0), ("b0", 2.0), ("e0", 10.0), ("f0", 1.0), ("c", 1.0),
                          ("eta", 0.05), ("alpha", 50.0), ("bp_c", 1.0), ("bp_mass", 1.0)):
        sim.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=default)
    sim.set_defaults(func=cmd_simulate)

    dc = sub.add_parser("dist-check", help="run the distribution identity and frequency suite")
    dc.add_argument("--seed", type=int, default=0)
    dc.add_argument("--out", help="also write the JSON report here")
    dc.set_defaults(func=cmd_dist_check)
    return p


def _fail(code: int, exc: BaseException) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    snapshot = getattr(exc, "snapshot", None)
    if snapshot:
        doc["snapshot"] = snapshot
    print(json.dumps(doc, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) is not None and getattr(args, "seed", 0) < 0:
            raise UsageError("seed must be nonnegative")
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (CorpusError, CheckpointError, EvaluationError, OSError) as exc:
        return _fail(EXIT_DATA, exc)
    except (NumericalError, DomainError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except ValueError as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
