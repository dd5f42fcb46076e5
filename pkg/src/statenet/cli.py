"""Command-line pipeline: validate, train, beta-search, decode, align,
composition, graph, report, trace, and the enumeration oracle self-tests.

Every output-producing subcommand writes a run manifest (inputs, seed,
version, output hashes) beside its outputs; identical argv and seed in
single-threaded mode reproduce byte-identical files.

Exit codes: 0 success, 1 bad arguments, 2 data errors, 3 numeric failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, crf, trainer
from . import numerics as nm
from .analysis import StateAssignment, _index_paths
from .corpus_io import (
    DataError,
    TagLayer,
    load_corpus,
    load_embeddings,
    load_function_words,
    load_tags,
)
from .numerics import NumericsError
from .trainer import Checkpoint, TrainConfig, TrainingDiverged

log = logging.getLogger(__name__)

ASSIGNMENT_FILE = "states.tsv"
MANIFEST_FILE = "manifest.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, argv, inputs, outputs, seed) -> None:
    doc = {
        "command": command,
        "argv": list(argv),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
        "seed": seed,
        "version": __version__,
    }
    path = out_dir / MANIFEST_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def _tag_pairs(values) -> list[tuple[str, str]]:
    pairs = []
    for v in values or []:
        if "=" not in v:
            raise DataError(f"--tags expects name=path, got {v!r}")
        name, path = v.split("=", 1)
        pairs.append((name, path))
    return pairs


def _load_assignment(path, corpus) -> StateAssignment:
    layer = load_tags(path, corpus, name="STATES")
    try:
        paths = [[int(t) for t in sent] for sent in layer.tags]
    except ValueError:
        raise DataError(f"{path}: assignment tags must be integer state ids") from None
    n_states = max(max(p) for p in paths) + 1
    return _index_paths(paths, n_states)


def _save_assignment(assign: StateAssignment, corpus, path) -> None:
    layer = TagLayer("STATES", tuple(tuple(str(z) for z in p) for p in assign.paths))
    from .corpus_io import save_tags

    save_tags(layer, corpus, path)


def _add_data_args(p, tags_required=False):
    p.add_argument("--corpus", required=True, help="corpus file (one sentence per line)")
    p.add_argument("--embeddings", required=True, help="LSE1 embedding file")
    p.add_argument(
        "--tags",
        action="append",
        metavar="NAME=PATH",
        required=tags_required,
        help="tag layer file, repeatable",
    )


def _add_train_args(p):
    p.add_argument("--states", type=int, default=2000, help="number of latent states")
    p.add_argument("--beta", type=float, default=0.005, help="entropy weight")
    p.add_argument("--tau", type=float, default=1.0, help="relaxation temperature")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=200, help="decoder hidden size")
    p.add_argument("--checkpoint-every", type=int, default=0, help="epochs between checkpoints")
    p.add_argument(
        "--entropy-sign",
        choices=["plus", "minus"],
        default="plus",
        help="sign of the entropy term in the objective",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statenet",
        description="Induce and analyze a latent state network over embedding sequences.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = command("validate", "check a corpus/embeddings/tags triple")
    _add_data_args(p)

    p = command("train", "train the state bank and decoder")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--out", required=True)

    p = command("beta-search", "two-stage beta grid search")
    _add_data_args(p, tags_required=True)
    _add_train_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--stage1", type=float, nargs="*", default=None, help="stage-1 beta grid")
    p.add_argument("--threshold", type=float, default=0.9)

    p = command("decode", "Viterbi-decode a corpus under a checkpoint")
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = command("align", "align states with a tag layer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--assignment", required=True, help="states.tsv from decode")
    p.add_argument("--tags", action="append", metavar="NAME=PATH", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--out", required=True)

    p = command("composition", "function/content decomposition per state")
    p.add_argument("--corpus", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--function-words", default=None)
    p.add_argument("--top-k", type=int, default=50)
    p.add_argument("--out", required=True)

    p = command("graph", "transition graph export")
    p.add_argument("--corpus", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--function-words", default=None)
    p.add_argument("--format", choices=["json", "dot", "both"], default="json")
    p.add_argument("--out", required=True)

    p = command("report", "top words per state")
    p.add_argument("--corpus", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--max-states", type=int, default=100)
    p.add_argument("--out", required=True)

    p = command("trace", "sentence traversal traces")
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentences", required=True, help="comma-separated sentence indices")
    p.add_argument("--out", required=True)

    p = command("oracle", "enumeration self-tests of the CRF engine")
    p.add_argument("--trials", type=int, default=200)
    return parser


def _load_triple(args):
    corpus = load_corpus(args.corpus)
    store = load_embeddings(args.embeddings, corpus)
    layers = [load_tags(path, corpus, name=name) for name, path in _tag_pairs(args.tags)]
    return corpus, store, layers


def cmd_validate(args, argv) -> int:
    corpus, store, layers = _load_triple(args)
    print(f"corpus: {len(corpus.sentences)} sentences, {corpus.n_tokens} tokens, vocab {corpus.vocab_size}")
    print(f"embeddings: dim {store.dim}")
    for layer in layers:
        print(f"tags[{layer.name}]: alphabet {len(layer.alphabet())}")
    print("ok")
    return 0


def _config_from(args) -> TrainConfig:
    return TrainConfig(
        n_states=args.states,
        beta=args.beta,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
        tau=args.tau,
        hidden_dim=args.hidden,
        checkpoint_every=args.checkpoint_every,
        entropy_sign=1.0 if args.entropy_sign == "plus" else -1.0,
        threads=args.threads,
        corpus_path=args.corpus,
        embeddings_path=args.embeddings,
        tag_paths=dict(_tag_pairs(getattr(args, "tags", None))),
    )


def _save_checkpoints(checkpoints, out_dir: Path) -> list[Path]:
    outputs = []
    for ck in checkpoints:
        path = out_dir / f"checkpoint_epoch{ck.epoch:04d}.lsp"
        ck.save(path)
        outputs.append(path)
    return outputs


def cmd_train(args, argv) -> int:
    corpus, store, _ = _load_triple(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _config_from(args)
    try:
        checkpoints = trainer.fit(corpus, store, config)
    except TrainingDiverged as e:
        outputs = _save_checkpoints(e.checkpoints, out_dir)
        _write_manifest(out_dir, "train", argv, [args.corpus, args.embeddings], outputs, args.seed)
        print(f"training diverged: {e}", file=sys.stderr)
        return 3
    outputs = _save_checkpoints(checkpoints, out_dir)
    _write_manifest(out_dir, "train", argv, [args.corpus, args.embeddings], outputs, args.seed)
    print(f"trained {config.epochs} epochs; {len(outputs)} checkpoints in {out_dir}")
    return 0


def cmd_beta_search(args, argv) -> int:
    corpus, store, layers = _load_triple(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _config_from(args)
    best = trainer.beta_search(config, corpus, store, layers, stage1=args.stage1, threshold=args.threshold)
    path = out_dir / "beta_search.json"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"best_beta": best}, f, sort_keys=True)
        f.write("\n")
    inputs = [args.corpus, args.embeddings] + [p for _, p in _tag_pairs(args.tags)]
    _write_manifest(out_dir, "beta-search", argv, inputs, [path], args.seed)
    print(f"best beta: {best}")
    return 0


def cmd_decode(args, argv) -> int:
    corpus, store, _ = _load_triple(args)
    ck = Checkpoint.load(args.checkpoint)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    assign = analysis.decode_corpus(ck.bank, store, corpus, threads=args.threads)
    path = out_dir / ASSIGNMENT_FILE
    _save_assignment(assign, corpus, path)
    _write_manifest(
        out_dir, "decode", argv, [args.corpus, args.embeddings, args.checkpoint], [path], args.seed
    )
    print(f"decoded {len(corpus.sentences)} sentences into {path}")
    return 0


def cmd_align(args, argv) -> int:
    corpus = load_corpus(args.corpus)
    assign = _load_assignment(args.assignment, corpus)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    outputs = []
    for name, path in _tag_pairs(args.tags):
        layer = load_tags(path, corpus, name=name)
        report = analysis.align_states(assign, layer, args.threshold)
        results[name] = {
            "n_aligned": report.n_aligned,
            "coverage_pct": report.coverage_pct,
            "aligned": [
                {"state": a.state, "tag": a.tag, "fraction": a.fraction} for a in report.aligned
            ],
            "non_aligned": list(report.non_aligned),
        }
        text = out_dir / f"alignment_{name}.txt"
        with open(text, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"layer {name} threshold {args.threshold}\n")
            f.write(f"aligned states: {report.n_aligned}\n")
            f.write(f"coverage pct: {report.coverage_pct:.4f}\n")
            for a in report.aligned:
                f.write(f"{a.state}\t{a.tag}\t{a.fraction:.6f}\n")
        outputs.append(text)
    jpath = out_dir / "alignment.json"
    with open(jpath, "w", encoding="utf-8", newline="\n") as f:
        json.dump(results, f, indent=1, sort_keys=True)
        f.write("\n")
    outputs.append(jpath)
    inputs = [args.corpus, args.assignment] + [p for _, p in _tag_pairs(args.tags)]
    _write_manifest(out_dir, "align", argv, inputs, outputs, args.seed)
    for name, res in results.items():
        print(f"{name}: {res['n_aligned']} aligned states, {res['coverage_pct']:.2f}% coverage")
    return 0


def cmd_composition(args, argv) -> int:
    corpus = load_corpus(args.corpus)
    assign = _load_assignment(args.assignment, corpus)
    fw = load_function_words(args.function_words)
    comp = analysis.state_composition(assign, corpus, fw, top_k=args.top_k)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "composition.tsv"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# head_states\t{','.join(str(s) for s in comp.head_states)}\n")
        f.write(f"# head_concentration\t{comp.head_concentration:.6f}\n")
        for s in range(len(comp.frequency)):
            f.write(f"{s}\t{comp.frequency[s]}\t{comp.function_fraction[s]:.6f}\n")
    inputs = [args.corpus, args.assignment] + ([args.function_words] if args.function_words else [])
    _write_manifest(out_dir, "composition", argv, inputs, [path], args.seed)
    print(f"head concentration (top {args.top_k}): {comp.head_concentration:.4f}")
    return 0


def cmd_graph(args, argv) -> int:
    corpus = load_corpus(args.corpus)
    assign = _load_assignment(args.assignment, corpus)
    fw = load_function_words(args.function_words)
    graph = analysis.transition_stats(assign, corpus, fw)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.format in ("json", "both"):
        path = out_dir / "graph.json"
        analysis.export_graph(graph, "json", path)
        outputs.append(path)
    if args.format in ("dot", "both"):
        path = out_dir / "graph.dot"
        analysis.export_graph(graph, "dot", path)
        outputs.append(path)
    inputs = [args.corpus, args.assignment] + ([args.function_words] if args.function_words else [])
    _write_manifest(out_dir, "graph", argv, inputs, outputs, args.seed)
    print(f"{len(graph.nodes)} nodes, {len(graph.edges)} edges, {graph.n_transitions} transitions")
    return 0


def cmd_report(args, argv) -> int:
    corpus = load_corpus(args.corpus)
    assign = _load_assignment(args.assignment, corpus)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = np.lexsort((np.arange(assign.n_states), -assign.frequency))
    path = out_dir / "report.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in order[: args.max_states]:
            s = int(s)
            if assign.frequency[s] == 0:
                continue
            words = analysis.top_words(assign, corpus, s, k=args.top_k)
            rendered = " | ".join(f"{w}_{c}" for w, c in words)
            f.write(f"state {s} (n={assign.frequency[s]}): {rendered}\n")
    _write_manifest(out_dir, "report", argv, [args.corpus, args.assignment], [path], args.seed)
    print(f"report written to {path}")
    return 0


def cmd_trace(args, argv) -> int:
    corpus, store, _ = _load_triple(args)
    ck = Checkpoint.load(args.checkpoint)
    try:
        indices = [int(i) for i in args.sentences.split(",") if i != ""]
    except ValueError:
        raise DataError(f"--sentences expects comma-separated integers, got {args.sentences!r}") from None
    trace = analysis.traversal_trace(ck.bank, store, corpus, indices)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "trace.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i in indices:
            chain = " ".join(f"{w}/{z}" for w, z in trace.chains[i])
            f.write(f"sentence {i}: {chain}\n")
        for (a, b), shared in sorted(trace.shared.items()):
            f.write(f"shared {a}-{b}: {' '.join(str(z) for z in shared)}\n")
    _write_manifest(
        out_dir, "trace", argv, [args.corpus, args.embeddings, args.checkpoint], [path], args.seed
    )
    print(path.read_text(encoding="utf-8"), end="")
    return 0


def cmd_oracle(args, argv) -> int:
    rng = np.random.default_rng(args.seed)
    worst = {"log_partition": 0.0, "unary": 0.0, "pairwise": 0.0, "entropy": 0.0}
    viterbi_mismatches = 0
    for _ in range(args.trials):
        T = int(rng.integers(1, 7))
        N = int(rng.integers(2, 6))
        em = rng.uniform(-1, 1, (T, N))
        tr = rng.uniform(-1, 1, (N, N))
        st = rng.uniform(-1, 1, N)
        lat = crf.LatticeScores(nm.constant(em), nm.constant(tr), nm.constant(st))
        post = crf.enumerate_posterior(lat)
        got = crf.marginals(lat)
        worst["log_partition"] = max(worst["log_partition"], abs(got.log_z - post.log_z))
        worst["unary"] = max(worst["unary"], float(np.abs(got.unary - post.unary_marginals()).max()))
        if T > 1:
            worst["pairwise"] = max(
                worst["pairwise"], float(np.abs(got.pairwise - post.pairwise_marginals()).max())
            )
        worst["entropy"] = max(worst["entropy"], abs(got.entropy - post.entropy()))
        vpath, _ = crf.viterbi(lat)
        epath, _ = post.argmax_path()
        if vpath != epath:
            viterbi_mismatches += 1
    ok = True
    for name, err in worst.items():
        good = err <= 1e-8
        ok = ok and good
        print(f"{name}: max abs err {err:.3e} {'PASS' if good else 'FAIL'}")
    print(f"viterbi: {viterbi_mismatches} mismatches over {args.trials} trials "
          f"{'PASS' if viterbi_mismatches == 0 else 'FAIL'}")
    ok = ok and viterbi_mismatches == 0
    return 0 if ok else 3


COMMANDS = {
    "validate": cmd_validate,
    "train": cmd_train,
    "beta-search": cmd_beta_search,
    "decode": cmd_decode,
    "align": cmd_align,
    "composition": cmd_composition,
    "graph": cmd_graph,
    "report": cmd_report,
    "trace": cmd_trace,
    "oracle": cmd_oracle,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help, 2 for usage errors; remap usage to 1
        return 0 if e.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args, argv)
    except (DataError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except (NumericsError, TrainingDiverged) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
