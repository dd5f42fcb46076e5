"""Autoregressive generative model over tokens and state paths.

An LSTM cell consumes the embedding of the previous state and carries the
history; two heads read its hidden state: an affine token head over the
corpus vocabulary, and a small feed-forward state head that scores each
candidate state embedding concatenated with the hidden state. The state head
needs its hidden layer: a purely affine score of [s_n ; h_t] would make the
h_t contribution constant across states and cancel inside the softmax.

The decoder exists to make the latent states predictive; it is dropped after
training.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from . import numerics as nm
from .crf import StateBank
from .numerics import NumericsError, Tape, Tensor

__all__ = [
    "DecoderParams",
    "DecoderState",
    "init_decoder",
    "initial_state",
    "decode_step",
    "state_prior_logits",
    "token_logits",
    "joint_log_prob",
    "sequence_log_prob",
]


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class DecoderParams:
    """LSTM cell plus token and state heads (gate order: i, f, g, o)."""

    w_ih: np.ndarray | Tensor  # (4H, D)
    w_hh: np.ndarray | Tensor  # (4H, H)
    b: np.ndarray | Tensor  # (4H,)
    h0: np.ndarray | Tensor  # (H,)
    c0: np.ndarray | Tensor  # (H,)
    token_w: np.ndarray | Tensor  # (V, H)
    token_b: np.ndarray | Tensor  # (V,)
    state_w1: np.ndarray | Tensor  # (H, D + H)
    state_b1: np.ndarray | Tensor  # (H,)
    state_w2: np.ndarray | Tensor  # (H,)
    state_b2: np.ndarray | Tensor  # ()

    @property
    def hidden_dim(self) -> int:
        return _data(self.w_hh).shape[1]

    @property
    def input_dim(self) -> int:
        return _data(self.w_ih).shape[1]

    @property
    def vocab_size(self) -> int:
        return _data(self.token_w).shape[0]

    def tracked(self, tape: Tape) -> "DecoderParams":
        return replace(
            self,
            **{f.name: tape.leaf(_data(getattr(self, f.name)), name=f"dec.{f.name}") for f in fields(self)},
        )

    def arrays(self) -> "DecoderParams":
        return replace(self, **{f.name: _data(getattr(self, f.name)).copy() for f in fields(self)})


class DecoderState(NamedTuple):
    h: Tensor
    c: Tensor


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


def init_decoder(dim: int, hidden: int, vocab: int, rng: np.random.Generator) -> DecoderParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero recurrent state."""
    if dim < 1 or hidden < 1 or vocab < 1:
        raise NumericsError(f"init_decoder: dims must be positive, got D={dim} H={hidden} V={vocab}")
    return DecoderParams(
        w_ih=_uniform(rng, (4 * hidden, dim), dim),
        w_hh=_uniform(rng, (4 * hidden, hidden), hidden),
        b=_uniform(rng, 4 * hidden, hidden),
        h0=np.zeros(hidden),
        c0=np.zeros(hidden),
        token_w=_uniform(rng, (vocab, hidden), hidden),
        token_b=_uniform(rng, vocab, hidden),
        state_w1=_uniform(rng, (hidden, dim + hidden), dim + hidden),
        state_b1=_uniform(rng, hidden, dim + hidden),
        state_w2=_uniform(rng, hidden, hidden),
        state_b2=_uniform(rng, (), hidden),
    )


def initial_state(params: DecoderParams) -> DecoderState:
    return DecoderState(nm.constant(params.h0), nm.constant(params.c0))


def _cell_step(params: DecoderParams, in_proj, state: DecoderState) -> DecoderState:
    """LSTM body given the already-projected input contribution w_ih @ s."""
    hidden = params.hidden_dim
    gates = nm.add(nm.add(in_proj, nm.matmul(nm.constant(params.w_hh), state.h)), params.b)
    i = nm.sigmoid(nm.narrow(gates, 0, hidden))
    f = nm.sigmoid(nm.narrow(gates, hidden, hidden))
    g = nm.tanh(nm.narrow(gates, 2 * hidden, hidden))
    o = nm.sigmoid(nm.narrow(gates, 3 * hidden, hidden))
    c = nm.add(nm.mul(f, state.c), nm.mul(i, g))
    h = nm.mul(o, nm.tanh(c))
    return DecoderState(h, c)


def decode_step(params: DecoderParams, s_prev, state: DecoderState) -> DecoderState:
    """One LSTM application on the previous state's embedding."""
    s_prev = nm.constant(s_prev)
    if s_prev.data.shape != (params.input_dim,):
        raise NumericsError(
            f"decode_step: input shape {s_prev.data.shape}, expected ({params.input_dim},)"
        )
    return _cell_step(params, nm.matmul(nm.constant(params.w_ih), s_prev), state)


def _state_head_bank_proj(params: DecoderParams, bank: StateBank) -> Tensor:
    """Bank side of the state head's first layer, constant across timesteps."""
    w_states = nm.narrow_cols(nm.constant(params.state_w1), 0, params.input_dim)  # (H, D)
    return nm.matmul(nm.constant(bank.states), nm.transpose(w_states))  # (N, H)


def state_prior_logits(params: DecoderParams, h_t, bank: StateBank, _bank_proj=None) -> Tensor:
    """Scores of every candidate next state given the decoder history.

    The head evaluates FF([s_n ; h_t]) for every state; the first layer is
    split into its bank and hidden blocks so the bank projection can be
    computed once per sentence.
    """
    h_t = nm.constant(h_t)
    if h_t.data.shape != (params.hidden_dim,):
        raise NumericsError(
            f"state_prior_logits: hidden shape {h_t.data.shape}, expected ({params.hidden_dim},)"
        )
    if bank.dim != params.input_dim:
        raise NumericsError(
            f"state_prior_logits: bank dim {bank.dim} != decoder input dim {params.input_dim}"
        )
    if _bank_proj is None:
        _bank_proj = _state_head_bank_proj(params, bank)
    w_hidden = nm.narrow_cols(nm.constant(params.state_w1), params.input_dim, params.hidden_dim)
    h_proj = nm.matmul(w_hidden, h_t)  # (H,)
    mid = nm.tanh(nm.add(nm.add(_bank_proj, h_proj), params.state_b1))  # (N, H)
    return nm.add(nm.matmul(mid, nm.constant(params.state_w2)), params.state_b2)  # (N,)


def token_logits(params: DecoderParams, h_t) -> Tensor:
    """Unnormalized token scores; softmax gives p(x_t | z_{1:t})."""
    h_t = nm.constant(h_t)
    if h_t.data.shape != (params.hidden_dim,):
        raise NumericsError(
            f"token_logits: hidden shape {h_t.data.shape}, expected ({params.hidden_dim},)"
        )
    return nm.add(nm.matmul(nm.constant(params.token_w), h_t), params.token_b)


def sequence_log_prob(
    params: DecoderParams, bank: StateBank, tokens, path, state_inputs
) -> Tensor:
    """Teacher-forced log p(x, z) with caller-supplied decoder input vectors.

    ``state_inputs[t]`` is the embedding fed to the cell when moving past
    step t (hard bank rows for evaluation, straight-through rows during
    training); the first input is always the bank's start vector.
    """
    T = len(tokens)
    if len(path) != T or len(state_inputs) != T:
        raise NumericsError(
            f"sequence_log_prob: lengths differ (tokens {T}, path {len(path)}, inputs {len(state_inputs)})"
        )
    if T == 0:
        raise NumericsError("sequence_log_prob: empty sentence")
    vocab = params.vocab_size
    n = bank.n_states
    path = [int(z) for z in path]
    tokens = [int(x) for x in tokens]
    if any(z < 0 or z >= n for z in path):
        raise NumericsError(f"sequence_log_prob: state id out of range [0, {n})")
    if any(x < 0 or x >= vocab for x in tokens):
        raise NumericsError(f"sequence_log_prob: token id out of range [0, {vocab})")

    # the cell input at step t is s_0, then the caller's rows; project them all at once
    inputs = nm.stack_rows([nm.constant(bank.start)] + list(state_inputs[:-1]))  # (T, D)
    input_proj = nm.matmul(inputs, nm.transpose(nm.constant(params.w_ih)))  # (T, 4H)
    state = initial_state(params)
    hidden_rows = []
    for t in range(T):
        state = _cell_step(params, nm.take_row(input_proj, t), state)
        hidden_rows.append(state.h)
    hs = nm.stack_rows(hidden_rows)  # (T, H)

    tok_logits = nm.add(nm.matmul(hs, nm.transpose(nm.constant(params.token_w))), params.token_b)
    token_ll = nm.total(
        nm.sub(nm.gather_elements(tok_logits, tokens), nm.logsumexp(tok_logits, axis=1))
    )

    hid = params.hidden_dim
    bank_proj = _state_head_bank_proj(params, bank)  # (N, H)
    w_hidden = nm.narrow_cols(nm.constant(params.state_w1), params.input_dim, hid)
    h_proj = nm.matmul(hs, nm.transpose(w_hidden))  # (T, H)
    mid = nm.tanh(
        nm.add(
            nm.add(nm.reshape(bank_proj, (1, n, hid)), nm.reshape(h_proj, (T, 1, hid))),
            params.state_b1,
        )
    )  # (T, N, H)
    state_logits = nm.add(
        nm.reshape(nm.matmul(nm.reshape(mid, (T * n, hid)), nm.constant(params.state_w2)), (T, n)),
        params.state_b2,
    )
    state_ll = nm.total(
        nm.sub(nm.gather_elements(state_logits, path), nm.logsumexp(state_logits, axis=1))
    )
    return nm.add(token_ll, state_ll)


def joint_log_prob(params: DecoderParams, bank: StateBank, tokens, path) -> Tensor:
    """log p(x, z) of a token sequence and a hard state path (always <= 0)."""
    states = nm.constant(bank.states)
    inputs = [nm.take_row(states, int(z)) for z in path]
    return sequence_log_prob(params, bank, tokens, path, inputs)
