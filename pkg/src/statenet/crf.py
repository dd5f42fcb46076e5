"""Exact linear-chain CRF inference over the state lattice.

Potentials are plain dot products between token embeddings and the learnable
state embeddings (plus a dedicated start vector for the first transition).
The module provides the partition function, marginals, entropy, Viterbi,
forward-filtering backward-sampling, and a brute-force path enumeration that
serves as the oracle for everything else.

Gradient-bearing paths (``log_partition``, ``posterior_entropy``,
``sample_posterior``) are built from tape primitives; the decode/analysis
paths (``viterbi``, ``marginals``, ``enumerate_posterior``) run on plain
arrays so the two routes stay independent checks of each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import xlogy

from . import numerics as nm
from .numerics import NumericsError, Tape, Tensor

__all__ = [
    "StateBank",
    "LatticeScores",
    "Posteriors",
    "EnumeratedPosterior",
    "build_lattice",
    "log_partition",
    "viterbi",
    "marginals",
    "posterior_entropy",
    "posterior_log_prob",
    "sample_posterior",
    "enumerate_posterior",
]


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class StateBank:
    """The inference model: N state embeddings plus the start vector."""

    states: np.ndarray | Tensor  # (N, D)
    start: np.ndarray | Tensor  # (D,)

    def __post_init__(self):
        s, s0 = _data(self.states), _data(self.start)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise NumericsError(f"StateBank: states must be (N, D), got {s.shape}")
        if s0.shape != (s.shape[1],):
            raise NumericsError(f"StateBank: start must be ({s.shape[1]},), got {s0.shape}")
        if not (np.isfinite(s).all() and np.isfinite(s0).all()):
            raise NumericsError("StateBank: non-finite parameter")

    @property
    def n_states(self) -> int:
        return _data(self.states).shape[0]

    @property
    def dim(self) -> int:
        return _data(self.states).shape[1]

    def tracked(self, tape: Tape) -> "StateBank":
        return replace(
            self,
            states=tape.leaf(_data(self.states), name="bank.states"),
            start=tape.leaf(_data(self.start), name="bank.start"),
        )

    def arrays(self) -> "StateBank":
        return replace(self, states=_data(self.states).copy(), start=_data(self.start).copy())


@dataclass(frozen=True)
class LatticeScores:
    """Per-sentence log-potentials: emission (T, N), transition (N, N), start (N,)."""

    emission: Tensor
    transition: Tensor
    start: Tensor

    @property
    def T(self) -> int:
        return self.emission.data.shape[0]

    @property
    def N(self) -> int:
        return self.emission.data.shape[1]


@dataclass(frozen=True)
class Posteriors:
    log_z: float
    unary: np.ndarray  # (T, N)
    pairwise: np.ndarray  # (T-1, N, N)
    entropy: float


def build_lattice(seq_emb, bank: StateBank) -> LatticeScores:
    """Score a sentence against the bank: emissions r_t . s_n, transitions s_i . s_j."""
    emb = seq_emb if isinstance(seq_emb, Tensor) else nm.constant(np.asarray(seq_emb, dtype=np.float64))
    if emb.data.ndim != 2 or emb.data.shape[1] != bank.dim:
        raise NumericsError(
            f"build_lattice: embeddings {emb.data.shape} do not match bank dim {bank.dim}"
        )
    states = nm.constant(bank.states)
    start = nm.constant(bank.start)
    states_t = nm.transpose(states)
    emission = nm.matmul(emb, states_t)  # (T, N)
    transition = nm.matmul(states, states_t)  # (N, N)
    start_scores = nm.matmul(states, start)  # (N,)
    return LatticeScores(emission, transition, start_scores)


def _require_steps(lat: LatticeScores, op: str) -> None:
    if lat.T == 0:
        raise NumericsError(f"{op}: empty lattice (T == 0)")


# ---------------------------------------------------------------------------
# tape-tracked recursions
# ---------------------------------------------------------------------------


def _forward_tensors(lat: LatticeScores) -> tuple[list[Tensor], Tensor]:
    """Forward messages alpha_t (each (N,)) and log Z, on the tape."""
    n = lat.N
    alphas = [nm.add(lat.start, nm.take_row(lat.emission, 0))]
    for t in range(1, lat.T):
        prev = nm.reshape(alphas[-1], (n, 1))
        moved = nm.logsumexp(nm.add(prev, lat.transition), axis=0)
        alphas.append(nm.add(moved, nm.take_row(lat.emission, t)))
    return alphas, nm.logsumexp(alphas[-1])


def _backward_tensors(lat: LatticeScores) -> list[Tensor]:
    """Backward messages beta_t (each (N,)), on the tape."""
    n = lat.N
    betas = [nm.constant(np.zeros(n))] * lat.T
    for t in range(lat.T - 2, -1, -1):
        nxt = nm.add(nm.take_row(lat.emission, t + 1), betas[t + 1])
        betas[t] = nm.logsumexp(nm.add(lat.transition, nm.reshape(nxt, (1, n))), axis=1)
    return betas


def log_partition(lat: LatticeScores) -> Tensor:
    """log Z by the forward recursion; tape-tracked."""
    _require_steps(lat, "log_partition")
    _, logz = _forward_tensors(lat)
    return logz


def posterior_entropy(lat: LatticeScores, _forward=None) -> Tensor:
    """H(q) = log Z - E_q[path score], assembled from tracked marginals."""
    _require_steps(lat, "posterior_entropy")
    T, n = lat.T, lat.N
    alphas, logz = _forward if _forward is not None else _forward_tensors(lat)
    betas = _backward_tensors(lat)
    alpha = nm.stack_rows(alphas)  # (T, N)
    beta = nm.stack_rows(betas)  # (T, N)
    unary = nm.exp(nm.sub(nm.add(alpha, beta), logz))
    expected = nm.add(
        nm.total(nm.mul(unary, lat.emission)),
        nm.total(nm.mul(nm.take_row(unary, 0), lat.start)),
    )
    if T > 1:
        # log pairwise weights for all steps at once: (T-1, N, N)
        ahead = nm.add(nm.gather_rows(lat.emission, range(1, T)), nm.gather_rows(beta, range(1, T)))
        logw = nm.sub(
            nm.add(
                nm.add(
                    nm.reshape(nm.gather_rows(alpha, range(T - 1)), (T - 1, n, 1)),
                    nm.reshape(lat.transition, (1, n, n)),
                ),
                nm.reshape(ahead, (T - 1, 1, n)),
            ),
            logz,
        )
        expected = nm.add(expected, nm.total(nm.mul(nm.exp(logw), lat.transition)))
    return nm.sub(logz, expected)


def sample_posterior(
    lat: LatticeScores, rng: np.random.Generator, tau: float, _forward=None
) -> tuple[list[int], list[Tensor]]:
    """Draw an exact posterior path with relaxed rows for straight-through grads.

    Forward-filtering backward-sampling: the hard path comes from the
    Gumbel-argmax of each step's conditional logits (an exact draw from
    q(z|x)); the relaxed row is the temperature-``tau`` softmax of the same
    perturbed logits, so its argmax is the hard choice and gradients reach
    the bank through the filtering recursion.
    """
    _require_steps(lat, "sample_posterior")
    if not tau > 0:
        raise NumericsError(f"sample_posterior: tau must be positive, got {tau}")
    alphas, _ = _forward if _forward is not None else _forward_tensors(lat)
    path = [0] * lat.T
    rows: list[Tensor] = [None] * lat.T  # type: ignore[list-item]
    logits = alphas[-1]
    for t in range(lat.T - 1, -1, -1):
        perturbed = nm.add(logits, rng.gumbel(size=lat.N))
        z = int(np.argmax(perturbed.data))
        path[t] = z
        rows[t] = nm.softmax_row(nm.mul(perturbed, 1.0 / tau))
        if t > 0:
            logits = nm.add(alphas[t - 1], nm.take_col(lat.transition, z))
    return path, rows


# ---------------------------------------------------------------------------
# plain-array inference (decode/analysis/oracle side)
# ---------------------------------------------------------------------------


def _lse(x: np.ndarray, axis=None) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    out = m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def _forward_plain(em: np.ndarray, tr: np.ndarray, st: np.ndarray) -> tuple[np.ndarray, float]:
    T, N = em.shape
    alpha = np.empty((T, N))
    alpha[0] = st + em[0]
    for t in range(1, T):
        alpha[t] = _lse(alpha[t - 1][:, None] + tr, axis=0) + em[t]
    return alpha, float(_lse(alpha[-1]))


def marginals(lat: LatticeScores) -> Posteriors:
    """Forward-backward marginals, log Z, and exact posterior entropy."""
    _require_steps(lat, "marginals")
    em, tr, st = lat.emission.data, lat.transition.data, lat.start.data
    T, N = em.shape
    alpha, logz = _forward_plain(em, tr, st)
    beta = np.zeros((T, N))
    for t in range(T - 2, -1, -1):
        beta[t] = _lse(tr + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    unary = np.exp(alpha + beta - logz)
    pairwise = np.empty((max(T - 1, 0), N, N))
    for t in range(T - 1):
        pairwise[t] = np.exp(
            alpha[t][:, None] + tr + (em[t + 1] + beta[t + 1])[None, :] - logz
        )
    expected = float((unary * em).sum() + (unary[0] * st).sum() + (pairwise * tr).sum())
    return Posteriors(logz, unary, pairwise, logz - expected)


def viterbi(lat: LatticeScores) -> tuple[list[int], float]:
    """Highest-scoring path; ties resolve to the lexicographically smallest.

    Backward max messages give the best completion from every state, then a
    greedy forward pass picks the smallest state index achieving the optimum
    at each step, which realises the lexicographic tie-break exactly.
    """
    _require_steps(lat, "viterbi")
    em, tr, st = lat.emission.data, lat.transition.data, lat.start.data
    T, N = em.shape
    best_ahead = np.zeros((T, N))
    for t in range(T - 2, -1, -1):
        best_ahead[t] = (tr + (em[t + 1] + best_ahead[t + 1])[None, :]).max(axis=1)

    z = int(np.argmax(st + em[0] + best_ahead[0]))
    path = [z]
    score = float(st[z] + em[0, z])
    for t in range(1, T):
        cand = tr[z] + em[t] + best_ahead[t]
        z = int(np.argmax(cand))
        score += float(tr[path[-1], z] + em[t, z])
        path.append(z)
    return path, score


def posterior_log_prob(lat: LatticeScores, path) -> float:
    """log q(z|x) of one path: its score minus log Z (never positive)."""
    _require_steps(lat, "posterior_log_prob")
    em, tr, st = lat.emission.data, lat.transition.data, lat.start.data
    T, N = em.shape
    path = [int(z) for z in path]
    if len(path) != T:
        raise NumericsError(f"posterior_log_prob: path length {len(path)} != T {T}")
    if any(z < 0 or z >= N for z in path):
        raise NumericsError(f"posterior_log_prob: state id out of range [0, {N})")
    score = st[path[0]] + em[0, path[0]]
    for t in range(1, T):
        score += tr[path[t - 1], path[t]] + em[t, path[t]]
    _, logz = _forward_plain(em, tr, st)
    return min(float(score - logz), 0.0)


@dataclass(frozen=True)
class EnumeratedPosterior:
    """Exact path distribution; the oracle behind the DP implementations."""

    paths: np.ndarray  # (P, T) int, lexicographic order
    scores: np.ndarray  # (P,)
    log_z: float

    @property
    def log_probs(self) -> np.ndarray:
        return self.scores - self.log_z

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.scores - self.log_z)

    def argmax_path(self) -> tuple[list[int], float]:
        i = int(np.argmax(self.scores))  # first max = lexicographically smallest
        return [int(z) for z in self.paths[i]], float(self.scores[i])

    def unary_marginals(self) -> np.ndarray:
        P, T = self.paths.shape
        N = int(self.paths.max()) + 1 if P else 0
        out = np.zeros((T, max(N, 1)))
        p = self.probs
        for t in range(T):
            np.add.at(out[t], self.paths[:, t], p)
        return out

    def pairwise_marginals(self) -> np.ndarray:
        P, T = self.paths.shape
        N = int(self.paths.max()) + 1 if P else 0
        out = np.zeros((max(T - 1, 0), max(N, 1), max(N, 1)))
        p = self.probs
        for t in range(T - 1):
            np.add.at(out[t], (self.paths[:, t], self.paths[:, t + 1]), p)
        return out

    def entropy(self) -> float:
        return float(-xlogy(self.probs, self.probs).sum())


def enumerate_posterior(lat: LatticeScores, limit: int = 100_000) -> EnumeratedPosterior:
    """Score every one of the N^T paths explicitly (test oracle)."""
    _require_steps(lat, "enumerate_posterior")
    em, tr, st = lat.emission.data, lat.transition.data, lat.start.data
    T, N = em.shape
    n_paths = N**T
    if n_paths > limit:
        raise NumericsError(f"enumerate_posterior: N^T = {n_paths} exceeds limit {limit}")
    paths = np.array(list(itertools.product(range(N), repeat=T)), dtype=np.intp)
    scores = st[paths[:, 0]] + em[0, paths[:, 0]]
    for t in range(1, T):
        scores = scores + tr[paths[:, t - 1], paths[:, t]] + em[t, paths[:, t]]
    log_z = float(_lse(scores))
    return EnumeratedPosterior(paths, scores, log_z)
