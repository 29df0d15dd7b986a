"""Command-line interface: suggest, eval, precompute, and an interactive repl.

Data goes to stdout (TSV, or a JSON document with ``--format doc``);
diagnostics go to stderr.  Exit codes: 0 success, 1 internal error,
2 unresolvable query entity, 3 unconceptualizable query, 4 empty evaluation,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from dataclasses import replace

from .evaluation import (
    EmptyEvaluationError,
    VariantSummary,
    evaluate_variants,
    load_lists,
)
from .granularity import (
    HittingTimeStore,
    load_hitting_store,
    precompute_hitting,
)
from .inference import EntityResolutionError, Query, posterior_noisy_or, extend_noisy_or
from .ranking import (
    ALL_VARIANTS,
    ModelConfig,
    RankedSuggestions,
    UnconceptualizableQueryError,
    build_context,
    suggest,
)
from .taxonomy import Taxonomy, TaxonomyError, UnknownTermError, load_taxonomy

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_UNRESOLVABLE = 2
EXIT_UNCONCEPTUALIZABLE = 3
EXIT_EMPTY_EVAL = 4
EXIT_USAGE = 64

TAXONOMY_ENV = "SETEXPAND_TAXONOMY"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


def _cap_value(text: str) -> float:
    value = float(text)
    if value <= 1.0:
        raise argparse.ArgumentTypeError(f"cap must exceed 1, got {value}")
    return value


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("prm", "rem", "knn"), default=None)
    p.add_argument("--concept-model", choices=("no", "ba"), default=None)
    p.add_argument("--granularity", choices=("pp", "fg"), default=None)
    p.add_argument("--k", type=_positive_int, default=None,
                   help="fine-grained concept budget (granularity fg only)")
    p.add_argument("--lambda", dest="lam", type=_open_unit, default=None,
                   help="smoothing weight (concept model ba only)")
    p.add_argument("--cap", type=_cap_value, default=None,
                   help="hitting-time truncation cap")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=_positive_int, default=None)
    p.add_argument("--top", type=_positive_int, default=None,
                   help="number of suggestions to emit")
    p.add_argument("--concept-filter-ratio", type=float, default=None,
                   help="suppress terms whose hypernym mass exceeds this "
                        "multiple of their hyponym mass (default 1.0)")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--taxonomy", default=None,
                   help=f"taxonomy TSV path (default: ${TAXONOMY_ENV})")
    p.add_argument("--format", choices=("tsv", "doc"), default="tsv")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="setexpand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_suggest = sub.add_parser("suggest", help="rank completion entities for seed entities")
    _add_common_flags(p_suggest)
    _add_model_flags(p_suggest)
    p_suggest.add_argument("--query", required=True,
                           help="comma-separated seed entities")
    p_suggest.add_argument("--explain", action="store_true",
                           help="also emit the effective concept support")
    p_suggest.add_argument("--hitting-index", default=None,
                           help="precomputed hitting-time index file")

    p_eval = sub.add_parser("eval", help="score model variants against ground-truth lists")
    _add_common_flags(p_eval)
    _add_model_flags(p_eval)
    p_eval.add_argument("--truth", required=True, help="ground-truth list file")
    p_eval.add_argument("--alpha", type=_open_unit, default=0.5,
                        help="seed fraction per list")
    p_eval.add_argument("--trials", type=_positive_int, default=1)
    p_eval.add_argument("--variants", default="all",
                        help="comma-separated variants, or 'all' (8 models + knn)")
    p_eval.add_argument("--rng-seed", type=int, default=0)
    p_eval.add_argument("--hitting-index", default=None)

    p_pre = sub.add_parser("precompute", help="build the offline hitting-time index")
    _add_common_flags(p_pre)
    p_pre.add_argument("--targets", default="all",
                       help="'all' or a file with one concept name per line")
    p_pre.add_argument("--cap", type=_cap_value, default=20.0)
    p_pre.add_argument("--tol", type=float, default=1e-9)
    p_pre.add_argument("--max-iter", type=_positive_int, default=200)
    p_pre.add_argument("--prune", type=float, default=None,
                       help="store only entries below this value (default: cap)")
    p_pre.add_argument("--out", required=True, help="output index path")

    p_repl = sub.add_parser("repl", help="interactive seed refinement session")
    _add_common_flags(p_repl)
    _add_model_flags(p_repl)
    p_repl.add_argument("--hitting-index", default=None)

    return parser


def _validate_model_flags(parser: _Parser, args: argparse.Namespace) -> ModelConfig:
    """Cross-flag checks before any file is loaded, then fill defaults."""
    defaults = ModelConfig()
    concept_model = args.concept_model or defaults.concept_model
    granularity = args.granularity or defaults.granularity
    if args.lam is not None and concept_model != "ba":
        parser.error("--lambda requires --concept-model ba")
    if args.k is not None and granularity != "fg":
        parser.error("--k requires --granularity fg")
    return ModelConfig(
        model=args.model or defaults.model,
        concept_model=concept_model,
        granularity=granularity,
        k=args.k if args.k is not None else defaults.k,
        lam=args.lam if args.lam is not None else defaults.lam,
        cap=args.cap if args.cap is not None else defaults.cap,
        tol=args.tol if args.tol is not None else defaults.tol,
        max_iter=args.max_iter if args.max_iter is not None else defaults.max_iter,
        top_n=args.top if args.top is not None else defaults.top_n,
    )


def _load_taxonomy(parser: _Parser, args: argparse.Namespace) -> Taxonomy:
    path = args.taxonomy or os.environ.get(TAXONOMY_ENV)
    if not path:
        parser.error(f"--taxonomy is required (or set ${TAXONOMY_ENV})")
    return load_taxonomy(path)


def _load_store(args: argparse.Namespace, t: Taxonomy) -> HittingTimeStore | None:
    path = getattr(args, "hitting_index", None)
    if path is None:
        return None
    return load_hitting_store(path, t)


def _print_suggestions(
    t: Taxonomy,
    result: RankedSuggestions,
    fmt: str,
    explain_effective: dict | None,
    out,
) -> None:
    if fmt == "tsv":
        for rank, (e, score) in enumerate(result.items, start=1):
            out.write(f"{rank}\t{t.name(e)}\t{score:.6f}\n")
        if explain_effective is not None:
            out.write("#effective concepts\n")
            for c in sorted(explain_effective, key=t.name):
                out.write(f"{t.name(c)}\t{explain_effective[c]:.6f}\n")
    else:
        doc = {
            "query": [t.name(e) for e in result.query_echo.entities],
            "model": result.model_echo.variant,
            "suggestions": [
                {"rank": i, "entity": t.name(e), "score": round(score, 6)}
                for i, (e, score) in enumerate(result.items, start=1)
            ],
        }
        if explain_effective is not None:
            doc["concepts"] = [
                {"concept": t.name(c), "weight": round(w, 6)}
                for c, w in sorted(explain_effective.items(), key=lambda cw: t.name(cw[0]))
            ]
        json.dump(doc, out, sort_keys=True)
        out.write("\n")


def _run_suggest(parser: _Parser, args: argparse.Namespace) -> int:
    cfg = _validate_model_flags(parser, args)
    names = [s for s in args.query.split(",") if s.strip()]
    if not names:
        parser.error("--query must name at least one entity")
    t = _load_taxonomy(parser, args)
    store = _load_store(args, t)
    q = Query.from_names(t, names)
    result = suggest(t, q, cfg, store=store)
    effective = None
    if args.explain and cfg.model != "knn":
        effective = build_context(t, q, cfg, store=store).effective
    _print_suggestions(t, result, args.format, effective, sys.stdout)
    return EXIT_OK


def _summary_rows(summary: VariantSummary, ks: list[int]):
    for r in summary.reports:
        yield (
            [r.variant, r.list_name, str(r.trial), f"{r.precision:.6f}",
             f"{r.recall:.6f}", f"{r.f1:.6f}", f"{r.ndcg:.6f}"]
            + [f"{r.precision_at[k]:.6f}" for k in ks]
        )
    yield (
        [summary.variant, "AGGREGATE", "-", f"{summary.mean('precision'):.6f}",
         f"{summary.mean('recall'):.6f}", f"{summary.mean('f1'):.6f}",
         f"{summary.mndcg:.6f}"]
        + [f"{summary.mean_precision_at(k):.6f}" for k in ks]
    )


def _run_eval(parser: _Parser, args: argparse.Namespace) -> int:
    cfg = _validate_model_flags(parser, args)
    if args.variants.strip().lower() == "all":
        variants = list(ALL_VARIANTS)
    else:
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        if not variants:
            parser.error("--variants must name at least one variant")
    try:
        lists = load_lists(args.truth)
    except OSError as exc:
        print(f"setexpand: cannot read truth file: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    t = _load_taxonomy(parser, args)
    store = _load_store(args, t)
    ks = [1, 2, 3, 5, 10]
    summaries = evaluate_variants(
        t, lists, variants, alpha=args.alpha, rng_seed=args.rng_seed,
        trials=args.trials, base=cfg, ks=ks, store=store,
    )
    out = sys.stdout
    if args.format == "tsv":
        header = ["variant", "list", "trial", "precision", "recall", "f1", "ndcg"]
        header += [f"p@{k}" for k in ks]
        out.write("#" + "\t".join(header) + "\n")
        for summary in summaries:
            for row in _summary_rows(summary, ks):
                out.write("\t".join(row) + "\n")
    else:
        doc = {
            "alpha": args.alpha,
            "rng_seed": args.rng_seed,
            "trials": args.trials,
            "variants": [
                {
                    "variant": s.variant,
                    "mndcg": round(s.mndcg, 6),
                    "precision": round(s.mean("precision"), 6),
                    "recall": round(s.mean("recall"), 6),
                    "f1": round(s.mean("f1"), 6),
                    "precision_at": {str(k): round(s.mean_precision_at(k), 6) for k in ks},
                    "queries": len(s.reports),
                }
                for s in summaries
            ],
        }
        json.dump(doc, out, sort_keys=True)
        out.write("\n")
    return EXIT_OK


def _run_precompute(parser: _Parser, args: argparse.Namespace) -> int:
    t = _load_taxonomy(parser, args)
    if args.targets.strip().lower() == "all":
        targets = t.concept_ids()
    else:
        with open(args.targets, "r", encoding="utf-8") as fh:
            names = [line.strip() for line in fh if line.strip()]
        targets = [t.term_id(n) for n in names]
    store = precompute_hitting(
        t, targets, cap=args.cap, tol=args.tol, max_iter=args.max_iter, prune=args.prune
    )
    try:
        store.save(args.out, t)
    except OSError as exc:
        print(f"setexpand: cannot write index: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"wrote {len(store)} sections to {args.out}", file=sys.stderr)
    return EXIT_OK


_REPL_HELP = """\
commands:
  add <entity>      add a seed entity
  remove <entity>   remove a seed entity
  show              print seeds and the effective concept support
  suggest [n]       rank suggestions for the current seeds
  model <flags>     change model flags (e.g. model --model rem --k 3)
  quit              leave the session
"""


class ReplSession:
    """Interactive seed refinement; keeps the Noisy-Or posterior incremental.

    Under the `no` concept model the posterior is extended on `add` (exact
    incremental identity) and rebuilt from scratch on `remove` or on a model
    change; `ba` always recomputes.  Suggestions therefore match the
    equivalent one-shot invocation exactly.
    """

    def __init__(self, t: Taxonomy, cfg: ModelConfig, store=None,
                 out=sys.stdout, err=sys.stderr):
        self.t = t
        self.cfg = cfg
        self.store = store
        self.out = out
        self.err = err
        self.seeds: list[int] = []
        self.posterior = None  # maintained Noisy-Or posterior, when applicable

    def _rebuild_posterior(self) -> None:
        if self.cfg.concept_model == "no" and self.seeds:
            self.posterior = posterior_noisy_or(self.t, Query(tuple(self.seeds)))
        else:
            self.posterior = None

    def cmd_add(self, name: str) -> None:
        try:
            tid = self.t.term_id(name)
        except UnknownTermError:
            self.err.write(f"unknown entity: {name!r}\n")
            return
        if self.t.n_hypo(tid) == 0:
            self.err.write(f"{name!r} has no concepts; not usable as a seed\n")
            return
        if tid in self.seeds:
            self.err.write(f"{self.t.name(tid)!r} is already a seed\n")
            return
        if self.cfg.concept_model == "no" and self.posterior is not None:
            self.posterior = extend_noisy_or(self.posterior, self.t, tid)
        self.seeds.append(tid)
        if self.cfg.concept_model == "no" and self.posterior is None:
            self._rebuild_posterior()
        self.err.write(f"seeds: {', '.join(self.t.name(s) for s in self.seeds)}\n")

    def cmd_remove(self, name: str) -> None:
        try:
            tid = self.t.term_id(name)
        except UnknownTermError:
            self.err.write(f"unknown entity: {name!r}\n")
            return
        if tid not in self.seeds:
            self.err.write(f"{name!r} is not a seed; nothing removed\n")
            return
        self.seeds.remove(tid)
        self._rebuild_posterior()
        shown = ", ".join(self.t.name(s) for s in self.seeds) or "(none)"
        self.err.write(f"seeds: {shown}\n")

    def cmd_show(self) -> None:
        if not self.seeds:
            self.err.write("no seeds yet\n")
            return
        q = Query(tuple(self.seeds))
        self.out.write("#seeds\n")
        for s in self.seeds:
            self.out.write(f"{self.t.name(s)}\n")
        try:
            ctx = build_context(self.t, q, self.cfg, store=self.store,
                                posterior=self.posterior)
        except UnconceptualizableQueryError:
            self.err.write("query is unconceptualizable under current settings\n")
            return
        self.out.write("#effective concepts\n")
        for c in sorted(ctx.effective, key=self.t.name):
            self.out.write(f"{self.t.name(c)}\t{ctx.effective[c]:.6f}\n")

    def cmd_suggest(self, n: int | None) -> None:
        if not self.seeds:
            self.err.write("no seeds yet; use `add <entity>`\n")
            return
        cfg = replace(self.cfg, top_n=n) if n else self.cfg
        q = Query(tuple(self.seeds))
        try:
            result = suggest(self.t, q, cfg, store=self.store, posterior=self.posterior)
        except UnconceptualizableQueryError:
            self.err.write("query is unconceptualizable under current settings\n")
            return
        _print_suggestions(self.t, result, "tsv", None, self.out)

    def cmd_model(self, tokens: list[str]) -> None:
        sub = _Parser(prog="model", add_help=False)
        _add_model_flags(sub)
        try:
            ns = sub.parse_args(tokens)
            self.cfg = _validate_model_flags(sub, ns)
        except SystemExit:
            return  # message already on stderr; session continues
        self._rebuild_posterior()
        self.err.write(f"model: {self.cfg.variant}\n")

    def handle(self, line: str) -> bool:
        """Process one command line; returns False when the session should end."""
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            self.err.write(f"cannot parse command: {exc}\n")
            return True
        if not tokens:
            return True
        cmd, rest = tokens[0].lower(), tokens[1:]
        if cmd in ("quit", "exit"):
            return False
        if cmd == "add" and rest:
            self.cmd_add(" ".join(rest))
        elif cmd == "remove" and rest:
            self.cmd_remove(" ".join(rest))
        elif cmd == "show":
            self.cmd_show()
        elif cmd == "suggest":
            n = None
            if rest:
                try:
                    n = int(rest[0])
                except ValueError:
                    self.err.write("usage: suggest [n]\n")
                    return True
                if n < 1:
                    self.err.write("n must be >= 1\n")
                    return True
            self.cmd_suggest(n)
        elif cmd == "model":
            self.cmd_model(rest)
        else:
            self.err.write(_REPL_HELP)
        return True

    def run(self, stream) -> int:
        self.err.write(f"model: {self.cfg.variant}; type commands (quit to leave)\n")
        while True:
            self.err.write("> ")
            line = stream.readline()
            if not line or not self.handle(line):
                break
        return EXIT_OK


def _run_repl(parser: _Parser, args: argparse.Namespace) -> int:
    cfg = _validate_model_flags(parser, args)
    t = _load_taxonomy(parser, args)
    store = _load_store(args, t)
    session = ReplSession(t, cfg, store=store)
    return session.run(sys.stdin)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )

    runners = {
        "suggest": _run_suggest,
        "eval": _run_eval,
        "precompute": _run_precompute,
        "repl": _run_repl,
    }
    try:
        return runners[args.subcommand](parser, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except EntityResolutionError as exc:
        print(f"setexpand: unresolvable query entities: {', '.join(exc.names)}",
              file=sys.stderr)
        return EXIT_UNRESOLVABLE
    except UnconceptualizableQueryError as exc:
        print(f"setexpand: {exc}", file=sys.stderr)
        return EXIT_UNCONCEPTUALIZABLE
    except EmptyEvaluationError as exc:
        print(f"setexpand: {exc}", file=sys.stderr)
        return EXIT_EMPTY_EVAL
    except (TaxonomyError, UnknownTermError, OSError, ValueError) as exc:
        print(f"setexpand: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
