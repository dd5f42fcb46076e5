"""Analyze a trained state network: alignment, composition, hubs, traversals.

Trains briefly on synthetic data, then runs every downstream analysis: state
against gold-tag alignment with the 90% dominance rule, function/content
composition, the transition graph with hub scores and JSON/DOT export, and
sentence-as-traversal traces with shared subpaths.
"""

import tempfile
from pathlib import Path

import numpy as np

from statenet import analysis, trainer
from statenet.corpus_io import load_function_words
from statenet.synthetic import make_hmm_dataset
from statenet.trainer import TrainConfig

ds = make_hmm_dataset(n_sentences=400, length_range=(8, 20), n_states=5, dim=16, seed=1)
config = TrainConfig(n_states=8, hidden_dim=32, epochs=8, batch_size=32, lr=1e-4, seed=3)
bank = trainer.fit(ds.corpus, ds.store, config)[-1].bank
assign = analysis.decode_corpus(bank, ds.store, ds.corpus)

# alignment: a state counts as aligned when >= 90% of its occurrences carry one tag
report = analysis.align_states(assign, ds.gold, threshold=0.9)
print(f"aligned states: {report.n_aligned}, covering {report.coverage_pct:.1f}% of tokens")
for a in report.aligned:
    print(f"  state {a.state} -> {a.tag} ({100 * a.fraction:.1f}% dominant)")

# function/content composition; the synthetic function words live in cluster S0
fw = load_function_words()
comp = analysis.state_composition(assign, ds.corpus, fw, top_k=3)
print(f"\nfunction-word share of the top-3 states: {comp.head_concentration:.2f}")
for s in comp.head_states:
    print(f"  state {s}: freq {comp.frequency[s]}, function fraction {comp.function_fraction[s]:.2f}")

# transition topology and hubs
graph = analysis.transition_stats(assign, ds.corpus, fw)
hubs = analysis.hub_scores(graph)
busiest = max(hubs.strength, key=hubs.strength.get)
print(f"\n{len(graph.nodes)} nodes, {len(graph.edges)} edges, {graph.n_transitions} transitions")
print(f"strongest hub: state {busiest} (degree {hubs.degree[busiest]}, "
      f"strength {hubs.strength[busiest]})")
print(f"function-fraction vs strength rank correlation: {hubs.func_strength_correlation:.2f}")
example_edge = max(graph.edges, key=graph.edges.get)
print(f"busiest edge {example_edge}: " + " | ".join(
    f"{w}_{c}" for w, c in graph.bigrams[example_edge][:4]))

out = Path(tempfile.mkdtemp())
analysis.export_graph(graph, "json", out / "graph.json")
analysis.export_graph(graph, "dot", out / "graph.dot")
print(f"\ngraph exported to {out}/graph.json and .dot")

# sentences as traversals over the network
trace = analysis.traversal_trace(bank, ds.store, ds.corpus, [0, 1, 2])
for i, chain in trace.chains.items():
    print(f"sentence {i}: " + " ".join(f"{w}/{z}" for w, z in chain[:8]) + " ...")
for (a, b), shared in trace.shared.items():
    print(f"longest shared state run of {a} and {b}: {list(shared)}")
