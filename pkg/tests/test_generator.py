import itertools

import numpy as np
import pytest

from statenet import generator as gen, numerics as nm
from statenet.crf import StateBank
from statenet.generator import DecoderParams, DecoderState
from statenet.numerics import NumericsError, Tape


def tiny_setup(rng, n=2, d=3, h=4, v=2):
    bank = StateBank(rng.uniform(-1, 1, (n, d)), rng.uniform(-1, 1, d))
    dec = gen.init_decoder(d, h, v, rng)
    return bank, dec


class TestInitDecoder:
    def test_same_seed_identical(self):
        a = gen.init_decoder(4, 3, 5, np.random.default_rng(11))
        b = gen.init_decoder(4, 3, 5, np.random.default_rng(11))
        for name in ("w_ih", "w_hh", "b", "token_w", "token_b", "state_w1", "state_w2"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_shapes(self):
        dec = gen.init_decoder(4, 3, 5, np.random.default_rng(0))
        assert dec.token_w.shape == (5, 3)
        assert dec.w_ih.shape == (12, 4)
        assert dec.state_w1.shape == (3, 7)
        assert dec.hidden_dim == 3 and dec.input_dim == 4 and dec.vocab_size == 5

    def test_weight_mean_within_3_sigma(self):
        dec = gen.init_decoder(50, 40, 50, np.random.default_rng(123))
        draws = np.concatenate([np.ravel(dec.w_ih), np.ravel(dec.w_hh), np.ravel(dec.token_w)])
        assert draws.size >= 10_000
        bound = 1.0 / np.sqrt(40)  # widest bound among the stacked blocks
        sigma = bound / np.sqrt(3)
        assert abs(draws.mean()) <= 3 * sigma / np.sqrt(draws.size)

    def test_zero_dims_rejected(self):
        with pytest.raises(NumericsError):
            gen.init_decoder(0, 3, 5, np.random.default_rng(0))


class TestDecodeStep:
    def test_zero_weights_fixed_point(self):
        h = 3
        dec = DecoderParams(
            w_ih=np.zeros((4 * h, 2)),
            w_hh=np.zeros((4 * h, h)),
            b=np.zeros(4 * h),
            h0=np.zeros(h),
            c0=np.zeros(h),
            token_w=np.zeros((2, h)),
            token_b=np.zeros(2),
            state_w1=np.zeros((h, 2 + h)),
            state_b1=np.zeros(h),
            state_w2=np.zeros(h),
            state_b2=np.zeros(()),
        )
        out = gen.decode_step(dec, np.ones(2), gen.initial_state(dec))
        # all-zero weights: gates i=f=o=1/2, g=0, so c stays 0 and h = tanh(0)/2 = 0
        np.testing.assert_array_equal(out.h.data, np.zeros(h))
        np.testing.assert_array_equal(out.c.data, np.zeros(h))

    def test_purity(self, rng):
        bank, dec = tiny_setup(rng)
        s = rng.uniform(-1, 1, 3)
        a = gen.decode_step(dec, s, gen.initial_state(dec))
        b = gen.decode_step(dec, s, gen.initial_state(dec))
        np.testing.assert_array_equal(a.h.data, b.h.data)

    def test_fd_gradient_wrt_input(self, rng):
        bank, dec = tiny_setup(rng)
        s = rng.uniform(-1, 1, 3)

        def loss(ts):
            out = gen.decode_step(dec, ts["s"], gen.initial_state(dec))
            return nm.total(nm.mul(out.h, out.h))

        rep = nm.grad_check(loss, {"s": s}, eps=1e-5)
        assert rep.max_rel_error <= 1e-5

    def test_dim_mismatch(self, rng):
        bank, dec = tiny_setup(rng)
        with pytest.raises(NumericsError):
            gen.decode_step(dec, np.ones(5), gen.initial_state(dec))


class TestStatePriorLogits:
    def test_identical_rows_uniform(self, rng):
        row = rng.uniform(-1, 1, 3)
        bank = StateBank(np.tile(row, (4, 1)), rng.uniform(-1, 1, 3))
        dec = gen.init_decoder(3, 4, 2, rng)
        h = rng.uniform(-1, 1, 4)
        probs = nm.softmax_row(gen.state_prior_logits(dec, h, bank)).data
        np.testing.assert_allclose(probs, np.full(4, 0.25), atol=1e-12)

    def test_single_state_probability_one(self, rng):
        bank = StateBank(rng.uniform(-1, 1, (1, 3)), rng.uniform(-1, 1, 3))
        dec = gen.init_decoder(3, 4, 2, rng)
        probs = nm.softmax_row(gen.state_prior_logits(dec, rng.uniform(-1, 1, 4), bank)).data
        assert probs[0] == pytest.approx(1.0, abs=1e-15)

    def test_history_matters(self, rng):
        # the hidden layer keeps h_t from cancelling inside the softmax
        bank, dec = tiny_setup(rng, n=3)
        p1 = nm.softmax_row(gen.state_prior_logits(dec, rng.uniform(-1, 1, 4), bank)).data
        p2 = nm.softmax_row(gen.state_prior_logits(dec, rng.uniform(-1, 1, 4), bank)).data
        assert np.abs(p1 - p2).max() > 1e-6

    def test_unused_bank_rows_get_zero_grad(self, rng):
        tape = Tape()
        bank = StateBank(rng.uniform(-1, 1, (3, 3)), rng.uniform(-1, 1, 3)).tracked(tape)
        dec = gen.init_decoder(3, 4, 2, rng)
        h = rng.uniform(-1, 1, 4)
        logits = gen.state_prior_logits(dec, h, bank)
        tape.backward(nm.take(logits, 1))  # touch only row 1's score
        g = tape.grad(bank.states)
        assert np.array_equal(g[0], np.zeros(3)) and np.array_equal(g[2], np.zeros(3))
        assert np.abs(g[1]).max() > 0


class TestTokenLogits:
    def test_zero_head_uniform(self, rng):
        from dataclasses import replace

        bank, dec = tiny_setup(rng, v=4)
        dec = replace(dec, token_w=np.zeros((4, 4)), token_b=np.zeros(4))
        probs = nm.softmax_row(gen.token_logits(dec, rng.uniform(-1, 1, 4))).data
        np.testing.assert_allclose(probs, np.full(4, 0.25), atol=1e-15)

    def test_vocab_one(self, rng):
        dec = gen.init_decoder(3, 4, 1, rng)
        probs = nm.softmax_row(gen.token_logits(dec, rng.uniform(-1, 1, 4))).data
        assert probs[0] == pytest.approx(1.0, abs=1e-15)

    def test_fd_gradient_cross_entropy_wrt_head(self, rng):
        bank, dec = tiny_setup(rng, v=3)
        h = rng.uniform(-1, 1, 4)

        def loss(ts):
            logits = nm.add(nm.matmul(ts["w"], nm.constant(h)), ts["b"])
            return nm.neg(nm.sub(nm.take(logits, 1), nm.logsumexp(logits)))

        rep = nm.grad_check(loss, {"w": np.asarray(dec.token_w), "b": np.asarray(dec.token_b)}, eps=1e-5)
        assert rep.max_rel_error <= 1e-5


class TestJointLogProb:
    def test_degenerate_single_everything(self, rng):
        bank = StateBank(rng.uniform(-1, 1, (1, 3)), rng.uniform(-1, 1, 3))
        dec = gen.init_decoder(3, 4, 1, rng)
        assert gen.joint_log_prob(dec, bank, [0], [0]).item() == pytest.approx(0.0, abs=1e-12)

    def test_equals_stepwise_recomputation(self, rng):
        bank, dec = tiny_setup(rng, n=3, v=4)
        tokens, path = [2, 0, 3], [1, 1, 2]
        got = gen.joint_log_prob(dec, bank, tokens, path).item()
        state = gen.initial_state(dec)
        s_prev = nm.constant(bank.start)
        expect = 0.0
        for t in range(3):
            state = gen.decode_step(dec, s_prev, state)
            zl = gen.state_prior_logits(dec, state.h, bank).data
            xl = gen.token_logits(dec, state.h).data
            expect += zl[path[t]] - np.log(np.exp(zl).sum())
            expect += xl[tokens[t]] - np.log(np.exp(xl).sum())
            s_prev = nm.take_row(nm.constant(bank.states), path[t])
        assert got == pytest.approx(expect, abs=1e-10)

    def test_full_enumeration_normalizes(self, rng):
        bank, dec = tiny_setup(rng, n=2, v=2)
        total = 0.0
        for tokens in itertools.product(range(2), repeat=2):
            for path in itertools.product(range(2), repeat=2):
                total += np.exp(gen.joint_log_prob(dec, bank, list(tokens), list(path)).item())
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_always_nonpositive(self, rng):
        for _ in range(10):
            bank, dec = tiny_setup(rng, n=3, v=4)
            tokens = [int(x) for x in rng.integers(0, 4, 5)]
            path = [int(z) for z in rng.integers(0, 3, 5)]
            assert gen.joint_log_prob(dec, bank, tokens, path).item() <= 0.0

    def test_permutation_sensitive(self, rng):
        bank, dec = tiny_setup(rng, n=2, v=5)
        a = gen.joint_log_prob(dec, bank, [1, 3], [0, 1]).item()
        b = gen.joint_log_prob(dec, bank, [3, 1], [0, 1]).item()
        assert a != b

    def test_length_mismatch(self, rng):
        bank, dec = tiny_setup(rng)
        with pytest.raises(NumericsError):
            gen.joint_log_prob(dec, bank, [0, 1], [0])

    def test_fd_gradients_all_params(self, rng):
        n, d, h, v = 2, 2, 3, 2
        bank, dec = tiny_setup(rng, n=n, d=d, h=h, v=v)
        tokens, path = [1, 0], [0, 1]
        params = {"states": np.asarray(bank.states), "start": np.asarray(bank.start)}
        from dataclasses import fields

        params.update({f.name: np.asarray(getattr(dec, f.name)) for f in fields(dec)})

        def loss(ts):
            b = StateBank(ts["states"], ts["start"])
            dp = DecoderParams(**{f.name: ts[f.name] for f in fields(dec)})
            return gen.joint_log_prob(dp, b, tokens, path)

        rep = nm.grad_check(loss, params, eps=1e-5)
        assert rep.max_rel_error <= 1e-5
