"""Analyses over a trained state bank: decoding, alignment, composition,
transition topology, top-word reports, traversal traces, and graph export.

Everything here is pure over an immutable `StateAssignment`; decoding
parallelizes per sentence when asked to.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from . import crf
from .corpus_io import UNTAGGED, Corpus, DataError, EmbeddingStore, FunctionWordList, TagLayer, is_function_word
from .crf import StateBank

__all__ = [
    "StateAssignment",
    "AlignmentReport",
    "AlignedState",
    "TransitionGraph",
    "decode_corpus",
    "align_states",
    "state_composition",
    "transition_stats",
    "hub_scores",
    "top_words",
    "traversal_trace",
    "export_graph",
    "import_graph",
    "many_to_one_purity",
]


@dataclass(frozen=True)
class StateAssignment:
    """Viterbi paths for a corpus plus the inverted state -> occurrences index."""

    paths: tuple[tuple[int, ...], ...]
    n_states: int
    occurrences: dict[int, tuple[tuple[int, int], ...]]  # state -> ((sentence, position), ...)
    frequency: np.ndarray  # (n_states,) int

    @property
    def n_tokens(self) -> int:
        return int(self.frequency.sum())


def _index_paths(paths, n_states) -> StateAssignment:
    occ: dict[int, list[tuple[int, int]]] = {}
    freq = np.zeros(n_states, dtype=np.int64)
    for si, path in enumerate(paths):
        for ti, z in enumerate(path):
            occ.setdefault(z, []).append((si, ti))
            freq[z] += 1
    return StateAssignment(
        tuple(tuple(p) for p in paths),
        n_states,
        {z: tuple(v) for z, v in sorted(occ.items())},
        freq,
    )


def decode_corpus(
    bank: StateBank, store: EmbeddingStore, corpus: Corpus, threads: int = 1
) -> StateAssignment:
    """Viterbi-decode every sentence and build the inverted index."""
    if store.dim != bank.dim:
        raise DataError(f"decode_corpus: store dim {store.dim} != bank dim {bank.dim}")
    if len(store.sequences) != len(corpus.sentences):
        raise DataError("decode_corpus: store and corpus sentence counts differ")

    def decode_one(emb):
        return crf.viterbi(crf.build_lattice(emb, bank))[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            paths = list(pool.map(decode_one, store.sequences))
    else:
        paths = [decode_one(emb) for emb in store.sequences]
    return _index_paths(paths, bank.n_states)


@dataclass(frozen=True)
class AlignedState:
    state: int
    tag: str
    fraction: float


@dataclass(frozen=True)
class AlignmentReport:
    layer: str
    threshold: float
    aligned: tuple[AlignedState, ...]
    non_aligned: tuple[int, ...]
    coverage_pct: float  # share of all corpus tokens inside aligned states

    @property
    def n_aligned(self) -> int:
        return len(self.aligned)


def align_states(assign: StateAssignment, layer: TagLayer, threshold: float = 0.9) -> AlignmentReport:
    """States whose dominant tag share reaches the threshold.

    Untagged occurrences stay in the denominator but can never be the
    dominant tag, so a state cannot align by absence of annotation.
    """
    if not 0 < threshold <= 1:
        raise DataError(f"align_states: threshold {threshold} outside (0, 1]")
    if not assign.occurrences:
        raise DataError("align_states: empty assignment")
    aligned = []
    non_aligned = []
    covered = 0
    for state, occ in assign.occurrences.items():
        counts: dict[str, int] = {}
        for si, ti in occ:
            tag = layer.tags[si][ti]
            if tag != UNTAGGED:
                counts[tag] = counts.get(tag, 0) + 1
        if counts:
            # deterministic winner: largest count, ties alphabetically
            tag, count = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            share = count / len(occ)
            if share >= threshold:
                aligned.append(AlignedState(state, tag, share))
                covered += len(occ)
                continue
        non_aligned.append(state)
    total = assign.n_tokens
    return AlignmentReport(
        layer.name,
        threshold,
        tuple(aligned),
        tuple(non_aligned),
        100.0 * covered / total if total else 0.0,
    )


@dataclass(frozen=True)
class CompositionReport:
    frequency: np.ndarray  # (n_states,) int
    function_fraction: np.ndarray  # (n_states,) float, NaN-free: 0 where empty
    head_states: tuple[int, ...]  # top-k states by frequency
    head_concentration: float  # share of all function-word occurrences in head states


def state_composition(
    assign: StateAssignment, corpus: Corpus, fw: FunctionWordList, top_k: int = 50
) -> CompositionReport:
    """Per-state function-word fraction plus the head-concentration statistic."""
    n = assign.n_states
    func = np.zeros(n, dtype=np.int64)
    for state, occ in assign.occurrences.items():
        for si, ti in occ:
            if is_function_word(corpus.sentences[si].surfaces[ti], fw):
                func[state] += 1
    freq = assign.frequency
    frac = np.zeros(n, dtype=np.float64)
    nz = freq > 0
    frac[nz] = func[nz] / freq[nz]
    order = np.lexsort((np.arange(n), -freq))  # frequency desc, id asc on ties
    head = tuple(int(s) for s in order[: min(top_k, n)])
    total_func = int(func.sum())
    concentration = float(func[list(head)].sum() / total_func) if total_func else 0.0
    return CompositionReport(freq.copy(), frac, head, concentration)


@dataclass(frozen=True)
class TransitionGraph:
    """Induced latent network: nodes carry frequency and function fraction,
    edges carry bigram counts plus their top word bigrams."""

    nodes: dict[int, tuple[int, float]]  # state -> (frequency, function fraction)
    edges: dict[tuple[int, int], int]  # (src, dst) -> count
    bigrams: dict[tuple[int, int], tuple[tuple[str, int], ...]] = field(default_factory=dict)

    @property
    def n_transitions(self) -> int:
        return sum(self.edges.values())


def transition_stats(
    assign: StateAssignment,
    corpus: Corpus,
    fw: FunctionWordList,
    top_bigrams: int = 10,
) -> TransitionGraph:
    """Count adjacent state pairs within sentences (never across)."""
    edges: dict[tuple[int, int], int] = {}
    words: dict[tuple[int, int], dict[str, int]] = {}
    for si, path in enumerate(assign.paths):
        surfaces = corpus.sentences[si].surfaces
        for t in range(len(path) - 1):
            key = (path[t], path[t + 1])
            edges[key] = edges.get(key, 0) + 1
            bigram = f"{surfaces[t]}-{surfaces[t + 1]}"
            bucket = words.setdefault(key, {})
            bucket[bigram] = bucket.get(bigram, 0) + 1
    comp = state_composition(assign, corpus, fw)
    nodes = {
        int(s): (int(comp.frequency[s]), float(comp.function_fraction[s]))
        for s in range(assign.n_states)
        if comp.frequency[s] > 0
    }
    bigrams = {
        key: tuple(sorted(bucket.items(), key=lambda kv: (-kv[1], kv[0]))[:top_bigrams])
        for key, bucket in words.items()
    }
    return TransitionGraph(nodes, dict(sorted(edges.items())), bigrams)


@dataclass(frozen=True)
class HubReport:
    degree: dict[int, int]  # distinct in+out neighbours (self-loop counts once)
    strength: dict[int, int]  # total incident transition count
    func_strength_correlation: float  # Spearman rank corr, NaN when degenerate


def hub_scores(graph: TransitionGraph) -> HubReport:
    if not graph.nodes:
        raise DataError("hub_scores: empty graph")
    neighbours: dict[int, set[int]] = {s: set() for s in graph.nodes}
    strength: dict[int, int] = {s: 0 for s in graph.nodes}
    for (a, b), count in graph.edges.items():
        neighbours[a].add(b)
        neighbours[b].add(a)
        strength[a] += count
        if b != a:
            strength[b] += count
    degree = {s: len(v) for s, v in neighbours.items()}
    states = sorted(graph.nodes)
    fracs = [graph.nodes[s][1] for s in states]
    strengths = [strength[s] for s in states]
    if len(states) > 1 and len(set(fracs)) > 1 and len(set(strengths)) > 1:
        corr = float(spearmanr(fracs, strengths).statistic)
    else:
        corr = float("nan")
    return HubReport(degree, strength, corr)


def top_words(assign: StateAssignment, corpus: Corpus, state: int, k: int = 10) -> list[tuple[str, int]]:
    """Most frequent surfaces in a state, ties broken alphabetically."""
    if state not in assign.occurrences:
        raise DataError(f"top_words: state {state} has no occurrences")
    counts: dict[str, int] = {}
    for si, ti in assign.occurrences[state]:
        s = corpus.sentences[si].surfaces[ti]
        counts[s] = counts.get(s, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def _longest_common_substring(a, b) -> tuple[int, ...]:
    """Longest common contiguous subsequence of two state paths."""
    best_len, best_end = 0, 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best_len:
                    best_len, best_end = cur[j], i
        prev = cur
    return tuple(a[best_end - best_len : best_end])


@dataclass(frozen=True)
class TraversalTrace:
    chains: dict[int, tuple[tuple[str, int], ...]]  # sentence -> ((surface, state), ...)
    shared: dict[tuple[int, int], tuple[int, ...]]  # pair -> longest common state run


def traversal_trace(
    bank: StateBank,
    store: EmbeddingStore,
    corpus: Corpus,
    sentence_indices,
    decoder=None,
) -> TraversalTrace:
    """Token/state chains for chosen sentences plus pairwise shared subpaths.

    The decoder is accepted for signature compatibility but unused: traces
    only need the inference side.
    """
    del decoder
    indices = [int(i) for i in sentence_indices]
    for i in indices:
        if not 0 <= i < len(corpus.sentences):
            raise DataError(f"traversal_trace: sentence index {i} out of range")
    chains = {}
    paths = {}
    for i in indices:
        path, _ = crf.viterbi(crf.build_lattice(store.sequences[i], bank))
        paths[i] = path
        chains[i] = tuple(zip(corpus.sentences[i].surfaces, path))
    shared = {}
    for ai in range(len(indices)):
        for bi in range(ai + 1, len(indices)):
            a, b = indices[ai], indices[bi]
            shared[(a, b)] = _longest_common_substring(paths[a], paths[b])
    return TraversalTrace(chains, shared)


def export_graph(graph: TransitionGraph, fmt: str, path) -> None:
    """Write the graph as JSON or DOT with deterministic ordering."""
    if fmt == "json":
        doc = {
            "nodes": [
                {"id": s, "freq": graph.nodes[s][0], "func_frac": graph.nodes[s][1]}
                for s in sorted(graph.nodes)
            ],
            "edges": [
                {
                    "src": a,
                    "dst": b,
                    "count": graph.edges[(a, b)],
                    "bigrams": [[w, c] for w, c in graph.bigrams.get((a, b), ())],
                }
                for a, b in sorted(graph.edges)
            ],
        }
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")
    elif fmt == "dot":
        lines = ["digraph states {"]
        for s in sorted(graph.nodes):
            freq, frac = graph.nodes[s]
            size = 0.3 + 0.15 * np.log1p(freq)
            lines.append(
                f'  s{s} [label="{s}", width={size:.4f}, func_frac={frac:.6f}];'
            )
        for a, b in sorted(graph.edges):
            lines.append(f'  s{a} -> s{b} [label="{graph.edges[(a, b)]}"];')
        lines.append("}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines))
            f.write("\n")
    else:
        raise DataError(f"export_graph: unknown format {fmt!r}")


def import_graph(path) -> TransitionGraph:
    """Read a JSON export back into a graph (round-trip partner)."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    nodes = {int(n["id"]): (int(n["freq"]), float(n["func_frac"])) for n in doc["nodes"]}
    edges = {}
    bigrams = {}
    for e in doc["edges"]:
        key = (int(e["src"]), int(e["dst"]))
        edges[key] = int(e["count"])
        if e.get("bigrams"):
            bigrams[key] = tuple((str(w), int(c)) for w, c in e["bigrams"])
    return TransitionGraph(nodes, edges, bigrams)


def many_to_one_purity(assign: StateAssignment, gold: TagLayer) -> float:
    """Map each state to its majority gold label and score accuracy."""
    correct = 0
    for state, occ in assign.occurrences.items():
        counts: dict[str, int] = {}
        for si, ti in occ:
            g = gold.tags[si][ti]
            counts[g] = counts.get(g, 0) + 1
        correct += max(counts.values())
    total = assign.n_tokens
    return correct / total if total else 0.0
