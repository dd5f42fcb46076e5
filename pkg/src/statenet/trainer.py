"""Training loop for the entropy-weighted ELBO, checkpoints, model selection,
and the two-stage beta search.

The objective per sentence is log p(x, z) with z drawn by relaxed
forward-filtering backward-sampling, plus ``beta`` times the exact posterior
entropy. Gradients reach the decoder exactly and the state bank through the
straight-through relaxation plus the exact entropy term. ``entropy_sign``
can flip the bonus into a penalty for replication experiments; the default
(+1) is the direction that keeps a large beta pushing the posterior towards
uniform instead of towards a point mass.
"""

from __future__ import annotations

import itertools
import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.cluster.vq import kmeans2

from . import analysis, crf, generator as gen
from . import numerics as nm
from .corpus_io import Corpus, DataError, EmbeddingStore, load_corpus, load_embeddings
from .crf import StateBank
from .generator import DecoderParams
from .numerics import NumericsError, Tape

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "TrainingDiverged",
    "Adam",
    "STAGE1_BETA_GRID",
    "init_bank",
    "elbo_estimate",
    "exact_elbo",
    "fit",
    "train",
    "select_model",
    "beta_search",
    "mean_token_entropy",
]

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"LSP1"
STAGE1_BETA_GRID = (0.1, 0.01, 0.001, 0.0001, 0.00001)

_BANK_FIELDS = ("states", "start")
_DEC_FIELDS = tuple(f.name for f in fields(DecoderParams))


@dataclass(frozen=True)
class TrainConfig:
    n_states: int = 64
    beta: float = 0.005
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    tau: float = 1.0
    hidden_dim: int = 200
    checkpoint_every: int = 0  # epochs between checkpoints; 0 = final only
    entropy_sign: float = 1.0
    threads: int = 1
    corpus_path: str | None = None
    embeddings_path: str | None = None
    tag_paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.beta < 0:
            raise DataError(f"TrainConfig: beta must be >= 0, got {self.beta}")
        if not self.tau > 0:
            raise DataError(f"TrainConfig: tau must be > 0, got {self.tau}")
        if self.n_states < 1:
            raise DataError(f"TrainConfig: n_states must be >= 1, got {self.n_states}")
        if self.entropy_sign not in (1.0, -1.0):
            raise DataError(f"TrainConfig: entropy_sign must be +1 or -1, got {self.entropy_sign}")


class TrainingDiverged(RuntimeError):
    """Raised when the objective turns non-finite; carries the survivors."""

    def __init__(self, message: str, checkpoints: list["Checkpoint"]):
        super().__init__(message)
        self.checkpoints = checkpoints


def _params_dict(bank: StateBank, dec: DecoderParams) -> dict[str, np.ndarray]:
    out = {"states": np.asarray(bank.states), "start": np.asarray(bank.start)}
    for name in _DEC_FIELDS:
        out[name] = np.asarray(getattr(dec, name))
    return out


def _params_structs(params: dict[str, np.ndarray]) -> tuple[StateBank, DecoderParams]:
    bank = StateBank(params["states"], params["start"])
    dec = DecoderParams(**{name: params[name] for name in _DEC_FIELDS})
    return bank, dec


class Adam:
    """Adam with the usual moment decays; step descends the given gradient."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.t += 1
        out = {}
        for k, p in params.items():
            g = grads[k]
            m = self._m.get(k)
            v = self._v.get(k)
            m = g * (1 - self.beta1) if m is None else self.beta1 * m + (1 - self.beta1) * g
            v = g * g * (1 - self.beta2) if v is None else self.beta2 * v + (1 - self.beta2) * g * g
            self._m[k], self._v[k] = m, v
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            out[k] = p - self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


def init_bank(
    store: EmbeddingStore,
    n_states: int,
    rng: np.random.Generator,
    emission_scale: float = 3.0,
    max_rows: int = 50_000,
) -> StateBank:
    """Cluster-seeded state bank: k-means centroids rescaled to mild potentials.

    Moment-matched Gaussian states fail at both extremes: at data norm the
    self-transition potentials saturate the posterior before any gradient can
    act, and shrunk copies leave the objective flat and the bank drifts. A
    few Lloyd iterations put states on cluster directions, and the rescale
    pins the typical own-cluster emission near ``emission_scale`` so that
    emissions stay sharp while pairwise transition potentials stay mild.
    """
    rows = np.concatenate(store.sequences, axis=0)
    if rows.shape[0] > max_rows:
        rows = rows[rng.choice(rows.shape[0], size=max_rows, replace=False)]
    if rows.shape[0] >= n_states:
        centroids, _ = kmeans2(rows, n_states, minit="++", iter=10, seed=rng)
    else:
        centroids = rows[rng.integers(0, rows.shape[0], size=n_states)]
    # empty clusters come back as zero rows; reseed them from random data rows
    dead = np.linalg.norm(centroids, axis=1) < 1e-12
    if dead.any():
        centroids[dead] = rows[rng.choice(rows.shape[0], size=int(dead.sum()), replace=False)]
    gamma = emission_scale / float((centroids**2).sum(axis=1).mean())
    states = gamma * centroids
    start = gamma * rows.mean(axis=0) + 0.01 * rng.standard_normal(store.dim)
    return StateBank(states, start)


class EstimateResult(NamedTuple):
    value: float
    grads: dict[str, np.ndarray]


def elbo_estimate(
    tokens,
    emb: np.ndarray,
    bank: StateBank,
    dec: DecoderParams,
    beta: float,
    tau: float,
    rng: np.random.Generator,
    entropy_sign: float = 1.0,
) -> EstimateResult:
    """Single-sample objective value and gradients into all parameters."""
    tape = Tape()
    bank_t = bank.tracked(tape)
    dec_t = dec.tracked(tape)
    lat = crf.build_lattice(emb, bank_t)
    forward = crf._forward_tensors(lat)  # shared by the sampler and the entropy
    path, rows = crf.sample_posterior(lat, rng, tau, _forward=forward)
    n = bank_t.n_states
    inputs = []
    for z, row in zip(path, rows):
        onehot = np.zeros(n)
        onehot[z] = 1.0
        inputs.append(nm.matmul(nm.straight_through(onehot, row), bank_t.states))
    try:
        objective = gen.sequence_log_prob(dec_t, bank_t, tokens, path, inputs)
    except NumericsError as e:
        raise NumericsError(f"elbo_estimate: reconstruction term failed: {e}") from e
    if beta != 0.0:
        try:
            entropy = crf.posterior_entropy(lat, _forward=forward)
        except NumericsError as e:
            raise NumericsError(f"elbo_estimate: entropy term failed: {e}") from e
        objective = nm.add(objective, nm.mul(entropy, entropy_sign * beta))
    tape.backward(objective)
    grads = {"states": tape.grad(bank_t.states), "start": tape.grad(bank_t.start)}
    for name in _DEC_FIELDS:
        grads[name] = tape.grad(getattr(dec_t, name))
    return EstimateResult(objective.item(), grads)


def exact_elbo(
    tokens,
    emb: np.ndarray,
    bank: StateBank,
    dec: DecoderParams,
    beta: float,
    entropy_sign: float = 1.0,
    limit: int = 100_000,
):
    """Enumerated E_q[log p(x, z)] + beta H(q); tape-differentiable.

    Works on tracked or plain parameters; returns a scalar tensor.
    """
    lat = crf.build_lattice(emb, bank)
    T, N = lat.T, lat.N
    if T == 0:
        raise NumericsError("exact_elbo: empty sentence")
    if N**T > limit:
        raise NumericsError(f"exact_elbo: N^T = {N**T} exceeds limit {limit}")
    logz = crf.log_partition(lat)
    expected = None
    for path in itertools.product(range(N), repeat=T):
        score = nm.add(nm.take(lat.start, path[0]), nm.take(lat.emission, (0, path[0])))
        for t in range(1, T):
            score = nm.add(
                score,
                nm.add(
                    nm.take(lat.transition, (path[t - 1], path[t])),
                    nm.take(lat.emission, (t, path[t])),
                ),
            )
        weight = nm.exp(nm.sub(score, logz))
        term = nm.mul(weight, gen.joint_log_prob(dec, bank, tokens, list(path)))
        expected = term if expected is None else nm.add(expected, term)
    if beta != 0.0:
        expected = nm.add(expected, nm.mul(crf.posterior_entropy(lat), entropy_sign * beta))
    return expected


@dataclass(frozen=True)
class Checkpoint:
    bank: StateBank
    decoder: DecoderParams
    epoch: int
    elbo_trace: tuple[tuple[int, float], ...]
    seed: int
    beta: float

    def save(self, path) -> None:
        header = {
            "n_states": self.bank.n_states,
            "dim": self.bank.dim,
            "hidden": self.decoder.hidden_dim,
            "vocab": self.decoder.vocab_size,
            "epoch": self.epoch,
            "seed": self.seed,
            "beta": self.beta,
            "elbo_trace": [[int(s), float(v)] for s, v in self.elbo_trace],
        }
        hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
        params = _params_dict(self.bank, self.decoder)
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<II", 1, len(hbytes)))
            f.write(hbytes)
            f.write(struct.pack("<I", len(params)))
            for name in sorted(params):
                arr = np.ascontiguousarray(params[name], dtype="<f8")
                nb = name.encode("utf-8")
                f.write(struct.pack("<H", len(nb)))
                f.write(nb)
                f.write(struct.pack("<B", arr.ndim))
                for d in arr.shape:
                    f.write(struct.pack("<I", d))
                f.write(arr.tobytes(order="C"))

    @staticmethod
    def load(path) -> "Checkpoint":
        raw = Path(path).read_bytes()
        if raw[:4] != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad checkpoint magic {raw[:4]!r}")
        version, hlen = struct.unpack_from("<II", raw, 4)
        if version != 1:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        offset = 12
        header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
        offset += hlen
        (count,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            name = raw[offset : offset + nlen].decode("utf-8")
            offset += nlen
            (ndim,) = struct.unpack_from("<B", raw, offset)
            offset += 1
            shape = []
            for _ in range(ndim):
                (d,) = struct.unpack_from("<I", raw, offset)
                offset += 4
                shape.append(d)
            size = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape)
            params[name] = arr.astype(np.float64)
            offset += 8 * size
        if offset != len(raw):
            raise DataError(f"{path}: {len(raw) - offset} trailing bytes")
        bank, dec = _params_structs(params)
        return Checkpoint(
            bank,
            dec,
            int(header["epoch"]),
            tuple((int(s), float(v)) for s, v in header["elbo_trace"]),
            int(header["seed"]),
            float(header["beta"]),
        )


def _estimate_batch(sentences, params, config, rngs, threads):
    """Sum of per-sentence gradients, objective values, and token count."""
    bank, dec = _params_structs(params)

    def one(args):
        (tokens, emb), rng = args
        return elbo_estimate(tokens, emb, bank, dec, config.beta, config.tau, rng, config.entropy_sign)

    jobs = list(zip(sentences, rngs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    grad_sum: dict[str, np.ndarray] = {}
    value_sum = 0.0
    for res in results:
        value_sum += res.value
        for k, g in res.grads.items():
            acc = grad_sum.get(k)
            grad_sum[k] = g if acc is None else acc + g
    tokens = sum(len(t) for (t, _) in sentences)
    return grad_sum, value_sum, tokens


def fit(
    corpus: Corpus,
    store: EmbeddingStore,
    config: TrainConfig,
) -> list[Checkpoint]:
    """Maximize the objective with Adam; deterministic given seed at threads=1."""
    if len(store.sequences) != len(corpus.sentences):
        raise DataError("fit: store and corpus sentence counts differ")
    rng = np.random.default_rng(config.seed)
    bank = init_bank(store, config.n_states, rng)
    dec = gen.init_decoder(store.dim, config.hidden_dim, corpus.vocab_size, rng)
    params = _params_dict(bank, dec)
    adam = Adam(lr=config.lr)
    data = [
        (list(corpus.sentences[i].tokens), store.sequences[i])
        for i in range(len(corpus.sentences))
    ]
    checkpoints: list[Checkpoint] = []
    trace: list[tuple[int, float]] = []
    step = 0

    def snapshot(epoch):
        bank_s, dec_s = _params_structs({k: v.copy() for k, v in params.items()})
        checkpoints.append(
            Checkpoint(bank_s, dec_s, epoch, tuple(trace), config.seed, config.beta)
        )

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        epoch_value = 0.0
        epoch_tokens = 0
        for lo in range(0, len(order), config.batch_size):
            batch = [data[i] for i in order[lo : lo + config.batch_size]]
            rngs = rng.spawn(len(batch)) if config.threads > 1 else [rng] * len(batch)
            try:
                grad_sum, value_sum, n_tok = _estimate_batch(
                    batch, params, config, rngs, config.threads
                )
                loss_grads = {k: -g / n_tok for k, g in grad_sum.items()}
                params = adam.step(params, loss_grads)
                _params_structs(params)  # validates finiteness of the update
            except NumericsError as e:
                log.error("divergence at epoch %d step %d: %s", epoch, step, e)
                snapshot(epoch)
                raise TrainingDiverged(str(e), checkpoints) from e
            trace.append((step, value_sum / n_tok))
            epoch_value += value_sum
            epoch_tokens += n_tok
            step += 1
        log.info("epoch %d: mean elbo per token %.6f", epoch, epoch_value / epoch_tokens)
        if (config.checkpoint_every and epoch % config.checkpoint_every == 0) or epoch == config.epochs:
            snapshot(epoch)
    return checkpoints


def train(config: TrainConfig) -> list[Checkpoint]:
    """File-driven entry: load corpus/embeddings named in the config, fit."""
    if not config.corpus_path or not config.embeddings_path:
        raise DataError("train: config must name corpus and embeddings paths")
    corpus = load_corpus(config.corpus_path)
    store = load_embeddings(config.embeddings_path, corpus)
    return fit(corpus, store, config)


def select_model(
    checkpoints,
    corpus: Corpus,
    store: EmbeddingStore,
    tag_layers,
    threshold: float = 0.9,
) -> Checkpoint:
    """Checkpoint with the most states aligned to the union of the layers.

    A state counts once if it aligns in at least one layer; ties go to the
    earliest epoch.
    """
    checkpoints = list(checkpoints)
    tag_layers = list(tag_layers)
    if not checkpoints or not tag_layers:
        raise DataError("select_model: need at least one checkpoint and one tag layer")
    best = None
    best_count = -1
    for ck in checkpoints:
        assign = analysis.decode_corpus(ck.bank, store, corpus)
        aligned: set[int] = set()
        for layer in tag_layers:
            report = analysis.align_states(assign, layer, threshold)
            aligned.update(a.state for a in report.aligned)
        if len(aligned) > best_count:
            best, best_count = ck, len(aligned)
    return best


def aligned_union_count(
    ck: Checkpoint, corpus: Corpus, store: EmbeddingStore, tag_layers, threshold: float = 0.9
) -> int:
    assign = analysis.decode_corpus(ck.bank, store, corpus)
    aligned: set[int] = set()
    for layer in tag_layers:
        aligned.update(a.state for a in analysis.align_states(assign, layer, threshold).aligned)
    return len(aligned)


def refine_beta_grid(lo: float, hi: float, points: int = 4) -> list[float]:
    """Linear refinement between two magnitudes: keep the lower endpoint and
    quarter-steps of the upper one (0.001/0.01 -> 0.001, 0.0025, ..., 0.01)."""
    if lo > hi:
        lo, hi = hi, lo
    grid = {lo}
    for k in range(1, points + 1):
        grid.add(hi * k / points)
    return sorted(grid)


def beta_search(
    config: TrainConfig,
    corpus: Corpus,
    store: EmbeddingStore,
    tag_layers,
    stage1=None,
    threshold: float = 0.9,
) -> float:
    """Two-stage search: magnitudes first, then linear refinement between the
    two best; candidates scored by the aligned-union model-selection count."""
    candidates = list(stage1) if stage1 is not None else list(STAGE1_BETA_GRID)
    if not candidates:
        raise DataError("beta_search: empty grid")

    def score(beta: float):
        cfg = replace(config, beta=beta)
        try:
            cks = fit(corpus, store, cfg)
        except TrainingDiverged:
            return None
        best = select_model(cks, corpus, store, tag_layers, threshold)
        return aligned_union_count(best, corpus, store, tag_layers, threshold)

    if len(candidates) == 1:
        return candidates[0]

    stage1_scores = {b: score(b) for b in candidates}
    alive = {b: s for b, s in stage1_scores.items() if s is not None}
    if not alive:
        raise TrainingDiverged("beta_search: every stage-1 candidate diverged", [])
    # two best magnitudes; ties resolve towards smaller beta for determinism
    ranked = sorted(alive.items(), key=lambda kv: (-kv[1], kv[0]))
    top = [b for b, _ in ranked[:2]]
    if len(top) == 1:
        return top[0]
    stage2 = refine_beta_grid(min(top), max(top))
    results = {}
    for b in stage2:
        s = stage1_scores.get(b)
        if b not in stage1_scores:
            s = score(b)
        if s is not None:
            results[b] = s
    if not results:
        raise TrainingDiverged("beta_search: every stage-2 candidate diverged", [])
    best_beta = min(results, key=lambda b: (-results[b], b))
    return best_beta


def mean_token_entropy(bank: StateBank, store: EmbeddingStore) -> float:
    """Mean per-token posterior entropy over a store (collapse diagnostic)."""
    total_h = 0.0
    total_t = 0
    for emb in store.sequences:
        post = crf.marginals(crf.build_lattice(emb, bank))
        total_h += post.entropy
        total_t += emb.shape[0]
    return total_h / total_t
