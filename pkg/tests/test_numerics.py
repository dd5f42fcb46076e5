import numpy as np
import pytest

from statenet import numerics as nm
from statenet.numerics import NumericsError, Tape, Tensor


def fd_grad(f, x, eps=1e-6):
    """Central finite differences of scalar f at array x."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def tape_grad(build, x):
    """Gradient of build(leaf)->scalar Tensor at array x."""
    tape = Tape()
    leaf = tape.leaf(x)
    loss = build(leaf)
    tape.backward(loss)
    return tape.grad(leaf)


def check_primitive(build, x, tol=1e-5):
    g_tape = tape_grad(build, x)
    g_fd = fd_grad(lambda v: build(nm.constant(v)).item(), x)
    assert rel_err(g_tape, g_fd).max() <= tol


class TestLogsumexp:
    def test_uniform_pair(self):
        assert nm.logsumexp(nm.constant([0.0, 0.0])).item() == pytest.approx(np.log(2), abs=1e-12)

    def test_singleton_identity(self):
        assert nm.logsumexp(nm.constant([5.0])).item() == 5.0

    def test_max_shift_avoids_overflow(self):
        got = nm.logsumexp(nm.constant([1000.0, 1000.0])).item()
        assert got == pytest.approx(1000.0 + np.log(2), abs=1e-9)

    def test_shift_invariance(self, rng):
        for _ in range(50):
            v = rng.uniform(-3, 3, size=rng.integers(1, 9))
            c = float(rng.uniform(-100, 100))
            a = nm.logsumexp(nm.constant(v + c)).item()
            b = nm.logsumexp(nm.constant(v)).item() + c
            assert a == pytest.approx(b, abs=1e-12 * max(1, abs(b)))

    def test_empty_rejected(self):
        with pytest.raises(NumericsError):
            nm.logsumexp(nm.constant(np.zeros(0)))

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericsError):
            nm.logsumexp(nm.constant([1.0, np.nan]))


class TestSoftmax:
    def test_symmetry(self):
        out = nm.softmax_row(nm.constant([0.0, 0.0, 0.0])).data
        np.testing.assert_allclose(out, [1 / 3] * 3, atol=1e-15)

    def test_shift_invariance_pair(self, rng):
        for c in [-1000.0, 0.0, 3.7, 250.0]:
            out = nm.softmax_row(nm.constant([c, c + np.log(3)])).data
            np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-12)

    def test_matches_naive(self, rng):
        v = rng.uniform(-2, 2, 8)
        naive = np.exp(v) / np.exp(v).sum()
        got = nm.softmax_row(nm.constant(v)).data
        assert np.abs(got - naive).max() <= 1e-12
        assert abs(got.sum() - 1.0) <= 1e-12

    def test_order_preserving(self, rng):
        v = rng.uniform(-2, 2, 6)
        out = nm.softmax_row(nm.constant(v)).data
        assert np.array_equal(np.argsort(out), np.argsort(v))

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericsError):
            nm.softmax_row(nm.constant([np.inf, 0.0]))


class TestPrimitiveGradients:
    """Every primitive against central finite differences, inputs in [-2, 2]."""

    def test_add_broadcast(self, rng):
        a = rng.uniform(-2, 2, (4, 3))
        b = rng.uniform(-2, 2, 3)
        check_primitive(lambda t: nm.total(nm.mul(nm.add(t, b), nm.add(t, b))), a)
        check_primitive(lambda t: nm.total(nm.mul(nm.add(a, t), nm.add(a, t))), b)

    def test_sub_neg(self, rng):
        a = rng.uniform(-2, 2, (3, 3))
        check_primitive(lambda t: nm.total(nm.mul(nm.sub(t, 1.5), nm.neg(t))), a)

    def test_mul(self, rng):
        a = rng.uniform(-2, 2, (2, 5))
        b = rng.uniform(-2, 2, (2, 5))
        check_primitive(lambda t: nm.total(nm.mul(t, b)), a)

    @pytest.mark.parametrize("sa,sb", [((3, 4), (4, 2)), ((4,), (4, 2)), ((3, 4), (4,)), ((4,), (4,))])
    def test_matmul(self, rng, sa, sb):
        a = rng.uniform(-2, 2, sa)
        b = rng.uniform(-2, 2, sb)
        check_primitive(lambda t: nm.total(nm.matmul(t, b)), a)
        check_primitive(lambda t: nm.total(nm.matmul(a, t)), b)

    def test_concat(self, rng):
        a = rng.uniform(-2, 2, (2, 3))
        b = rng.uniform(-2, 2, (2, 2))
        check_primitive(lambda t: nm.total(nm.mul(nm.concat([t, b], axis=1), nm.concat([t, b], axis=1))), a)

    def test_sigmoid(self, rng):
        a = rng.uniform(-2, 2, 7)
        check_primitive(lambda t: nm.total(nm.sigmoid(t)), a)

    def test_tanh(self, rng):
        a = rng.uniform(-2, 2, 7)
        check_primitive(lambda t: nm.total(nm.tanh(t)), a)

    def test_exp(self, rng):
        a = rng.uniform(-2, 2, 5)
        check_primitive(lambda t: nm.total(nm.exp(t)), a)

    def test_logsumexp_full_and_axis(self, rng):
        a = rng.uniform(-2, 2, (4, 3))
        check_primitive(lambda t: nm.logsumexp(t), a)
        check_primitive(lambda t: nm.total(nm.logsumexp(t, axis=0)), a)
        check_primitive(lambda t: nm.total(nm.logsumexp(t, axis=1)), a)

    def test_softmax(self, rng):
        a = rng.uniform(-2, 2, 6)
        w = rng.uniform(-2, 2, 6)
        check_primitive(lambda t: nm.total(nm.mul(nm.softmax_row(t), w)), a)

    def test_gather_rows(self, rng):
        a = rng.uniform(-2, 2, (5, 3))
        idx = [4, 0, 0, 2]
        check_primitive(lambda t: nm.total(nm.mul(nm.gather_rows(t, idx), nm.gather_rows(t, idx))), a)

    def test_take_row_col_scalar(self, rng):
        a = rng.uniform(-2, 2, (4, 3))
        check_primitive(lambda t: nm.total(nm.mul(nm.take_row(t, 2), nm.take_row(t, 2))), a)
        check_primitive(lambda t: nm.total(nm.mul(nm.take_col(t, 1), nm.take_col(t, 1))), a)
        check_primitive(lambda t: nm.mul(nm.take(t, (1, 2)), nm.take(t, (1, 2))), a)

    def test_narrow(self, rng):
        a = rng.uniform(-2, 2, 8)
        check_primitive(lambda t: nm.total(nm.mul(nm.narrow(t, 2, 4), nm.narrow(t, 2, 4))), a)

    def test_narrow_cols(self, rng):
        a = rng.uniform(-2, 2, (3, 6))
        check_primitive(
            lambda t: nm.total(nm.mul(nm.narrow_cols(t, 1, 3), nm.narrow_cols(t, 1, 3))), a
        )

    def test_stack_rows(self, rng):
        a = rng.uniform(-2, 2, 4)
        b = rng.uniform(-2, 2, 4)
        w = rng.uniform(-2, 2, (2, 4))
        check_primitive(lambda t: nm.total(nm.mul(nm.stack_rows([t, b]), w)), a)
        check_primitive(lambda t: nm.total(nm.mul(nm.stack_rows([a, t]), w)), b)

    def test_gather_elements(self, rng):
        a = rng.uniform(-2, 2, (4, 3))
        idx = [2, 0, 0, 1]
        check_primitive(
            lambda t: nm.total(nm.mul(nm.gather_elements(t, idx), nm.gather_elements(t, idx))), a
        )

    def test_repeat_row(self, rng):
        a = rng.uniform(-2, 2, 4)
        w = rng.uniform(-2, 2, (3, 4))
        check_primitive(lambda t: nm.total(nm.mul(nm.repeat_row(t, 3), w)), a)

    def test_transpose_reshape(self, rng):
        a = rng.uniform(-2, 2, (3, 4))
        w = rng.uniform(-2, 2, (4, 3))
        check_primitive(lambda t: nm.total(nm.mul(nm.transpose(t), w)), a)
        check_primitive(lambda t: nm.total(nm.mul(nm.reshape(t, (12,)), nm.reshape(t, (12,)))), a)

    def test_sum_axis_and_mean(self, rng):
        a = rng.uniform(-2, 2, (3, 4))
        check_primitive(lambda t: nm.total(nm.mul(nm.total(t, axis=0), nm.total(t, axis=0))), a)
        check_primitive(lambda t: nm.mean(nm.mul(t, t)), a)


class TestTape:
    def test_quadratic_gradient(self):
        tape = Tape()
        p = tape.leaf(np.ones(4))
        loss = nm.total(nm.mul(p, p))
        tape.backward(loss)
        np.testing.assert_array_equal(tape.grad(p), 2 * np.ones(4))

    def test_off_path_gradient_is_exactly_zero(self, rng):
        tape = Tape()
        p = tape.leaf(rng.uniform(-1, 1, 3))
        q = tape.leaf(rng.uniform(-1, 1, 3))
        side = nm.total(nm.mul(q, q))  # recorded but unused by the loss
        loss = nm.total(nm.mul(p, p))
        tape.backward(loss)
        assert np.array_equal(tape.grad(q), np.zeros(3))
        assert side.tape is tape

    def test_detach_blocks_gradient(self, rng):
        tape = Tape()
        p = tape.leaf(rng.uniform(-1, 1, 3))
        loss = nm.total(nm.mul(nm.detach(p), p))
        tape.backward(loss)
        np.testing.assert_allclose(tape.grad(p), p.data)  # only the live factor

    def test_straight_through_forwards_hard_and_routes_grad(self, rng):
        tape = Tape()
        p = tape.leaf(rng.uniform(-1, 1, 4))
        soft = nm.softmax_row(p)
        hard = np.zeros(4)
        hard[int(np.argmax(soft.data))] = 1.0
        st = nm.straight_through(hard, soft)
        np.testing.assert_array_equal(st.data, hard)
        w = rng.uniform(-1, 1, 4)
        loss = nm.total(nm.mul(st, w))
        tape.backward(loss)
        # gradient equals d/dp of sum(softmax(p) * w)
        g_ref = tape_grad(lambda t: nm.total(nm.mul(nm.softmax_row(t), w)), p.data)
        np.testing.assert_allclose(tape.grad(p), g_ref, atol=1e-12)

    def test_mixed_tapes_rejected(self):
        t1, t2 = Tape(), Tape()
        a = t1.leaf(np.ones(2))
        b = t2.leaf(np.ones(2))
        with pytest.raises(NumericsError):
            nm.add(a, b)

    def test_nonscalar_loss_rejected(self):
        tape = Tape()
        p = tape.leaf(np.ones(2))
        with pytest.raises(NumericsError):
            tape.backward(nm.mul(p, p))

    def test_nonfinite_result_names_op(self):
        with pytest.raises(NumericsError, match="exp"):
            nm.exp(nm.constant([800.0]))


class TestMatmulAssociativity:
    def test_8x8(self, rng):
        a, b, c = (rng.standard_normal((8, 8)) for _ in range(3))
        left = nm.matmul(nm.matmul(nm.constant(a), nm.constant(b)), nm.constant(c)).data
        right = nm.matmul(nm.constant(a), nm.matmul(nm.constant(b), nm.constant(c))).data
        assert np.abs(left - right).max() <= 1e-9


class TestGradCheck:
    def test_quadratic(self):
        rep = nm.grad_check(
            lambda ts: nm.total(nm.mul(ts["p"], ts["p"])), {"p": np.ones(5)}, eps=1e-4
        )
        assert rep.max_rel_error <= 1e-8

    def test_logsumexp_softmax_derivative(self, rng):
        p = rng.uniform(-2, 2, 8)
        # analytic gradient is softmax(p); grad_check compares tape vs FD
        rep = nm.grad_check(lambda ts: nm.logsumexp(ts["p"]), {"p": p}, eps=1e-5)
        assert rep.max_rel_error <= 1e-6
        tape = Tape()
        leaf = tape.leaf(p)
        tape.backward(nm.logsumexp(leaf))
        np.testing.assert_allclose(tape.grad(leaf), nm.softmax_row(nm.constant(p)).data, atol=1e-12)

    def test_eps_range_enforced(self):
        with pytest.raises(NumericsError):
            nm.grad_check(lambda ts: nm.total(ts["p"]), {"p": np.ones(2)}, eps=1e-2)


def test_tensor_is_float64_row_major(rng):
    t = Tensor(np.asarray(rng.uniform(size=(3, 2)), dtype=np.float32).T)
    assert t.data.dtype == np.float64
    assert t.data.flags.c_contiguous
