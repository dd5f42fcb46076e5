"""statenet: induce and analyze a latent state network in an embedding space.

A linear-chain CRF encoder over precomputed per-token embeddings, trained as
a structured variational autoencoder against a small recurrent decoder, plus
the downstream analyses: state-tag alignment, function/content composition,
transition topology, and sentence traversal traces.
"""

__version__ = "0.1.0"
