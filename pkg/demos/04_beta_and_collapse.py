"""The entropy weight and the two collapse modes of the posterior.

The objective adds beta times the posterior entropy to the reconstruction
term. With beta too small the posterior collapses to a near-deterministic
(Dirac) assignment; with beta very large it is pushed to uniform. This demo
trains at three weights and prints where the posterior lands, then runs the
two-stage grid search that picks beta on held-out alignment counts.
"""

import numpy as np

from statenet import trainer
from statenet.synthetic import make_hmm_dataset
from statenet.trainer import TrainConfig, refine_beta_grid

ds = make_hmm_dataset(n_sentences=200, length_range=(8, 16), n_states=4, dim=12, seed=2)
base = TrainConfig(n_states=6, hidden_dim=24, epochs=6, batch_size=16, seed=3)

print(f"uniform posterior entropy per token would be log N = {np.log(6):.3f}\n")
for beta, lr in [(0.0, 1e-3), (0.005, 1e-3), (10.0, 5e-3)]:
    config = TrainConfig(
        n_states=6, hidden_dim=24, epochs=6, batch_size=16, seed=3, beta=beta, lr=lr
    )
    bank0 = trainer.init_bank(ds.store, 6, np.random.default_rng(3))
    h0 = trainer.mean_token_entropy(bank0, ds.store)
    ck = trainer.fit(ds.corpus, ds.store, config)[-1]
    h1 = trainer.mean_token_entropy(ck.bank, ds.store)
    print(f"beta={beta:<6} entropy per token: {h0:.3f} -> {h1:.3f}")

# the staged search: orders of magnitude first, then linear refinement
print("\nstage-2 refinement between 0.001 and 0.01:", refine_beta_grid(0.001, 0.01))
best = trainer.beta_search(
    TrainConfig(n_states=6, hidden_dim=24, epochs=2, batch_size=16, seed=3, lr=3e-4),
    ds.corpus,
    ds.store,
    [ds.gold],
    stage1=[0.1, 0.01, 0.001],
)
print(f"search winner on this corpus: beta = {best}")
