"""Exact inference on a small state lattice, checked against brute force.

Builds a bank of latent states, scores a toy sentence against it, and walks
through the inference toolbox: partition function, marginals, entropy,
Viterbi, posterior sampling, and the exhaustive enumeration oracle that
everything is tested against.
"""

import numpy as np

from statenet import crf
from statenet.crf import StateBank

rng = np.random.default_rng(0)

# five latent states in a 8-dimensional embedding space, plus a start vector
bank = StateBank(rng.normal(scale=0.6, size=(5, 8)), rng.normal(scale=0.6, size=8))

# a "sentence" of four precomputed token embeddings
sentence = rng.normal(size=(4, 8))

lat = crf.build_lattice(sentence, bank)
print("emission scores (T x N):")
print(np.round(lat.emission.data, 2))

# the partition function sums over all 5^4 = 625 state paths in O(T N^2)
logz = crf.log_partition(lat).item()
post = crf.enumerate_posterior(lat)  # same thing the slow way
print(f"\nlog Z  forward: {logz:.10f}")
print(f"log Z  enumerated: {post.log_z:.10f}")

marg = crf.marginals(lat)
print("\nposition-wise state marginals:")
print(np.round(marg.unary, 3))
print(f"posterior entropy: {marg.entropy:.4f} (max possible {4 * np.log(5):.4f})")

path, score = crf.viterbi(lat)
print(f"\nViterbi path {path} with score {score:.4f}")
print(f"enumeration argmax {post.argmax_path()[0]} (must agree)")
print(f"posterior probability of that path: {np.exp(crf.posterior_log_prob(lat, path)):.4f}")

# exact posterior samples via forward-filtering backward-sampling
draws = [tuple(crf.sample_posterior(lat, rng, tau=1.0)[0]) for _ in range(2000)]
top = sorted({d: draws.count(d) for d in set(draws)}.items(), key=lambda kv: -kv[1])[:3]
print("\nmost sampled paths vs exact probabilities:")
for d, c in top:
    idx = next(i for i, p in enumerate(post.paths) if tuple(p) == d)
    print(f"  {list(d)}: sampled {c / len(draws):.3f}, exact {post.probs[idx]:.3f}")
