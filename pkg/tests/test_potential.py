import numpy as np
import pytest

from bnmap.potential import Potential, max_out, multiply, multiply_all, sum_out


def test_row_major_layout_last_variable_fastest():
    p = Potential.from_flat((3, 7), (2, 3), [0, 1, 2, 3, 4, 5])
    assert p.values[0, 2] == 2
    assert p.values[1, 0] == 3
    np.testing.assert_array_equal(p.flat(), np.arange(6))


def test_multiply_disjoint_is_outer_product():
    a = Potential((0,), np.array([0.2, 0.8]))
    b = Potential((1,), np.array([0.5, 0.25, 0.25]))
    out = multiply(a, b)
    assert out.scope == (0, 1)
    np.testing.assert_allclose(out.values, np.outer(a.values, b.values))


def test_multiply_aligns_shared_variables():
    a = Potential((0, 1), np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = Potential((1, 2), np.array([[10.0, 20.0, 30.0], [40.0, 50.0, 60.0]]))
    out = multiply(a, b)
    assert out.scope == (0, 1, 2)
    for i in range(2):
        for j in range(2):
            for k in range(3):
                assert out.values[i, j, k] == a.values[i, j] * b.values[j, k]


def test_multiply_reversed_scope_order():
    a = Potential((0, 1), np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = Potential((1, 0), np.array([[5.0, 6.0], [7.0, 8.0]]))
    out = multiply(a, b)
    np.testing.assert_array_equal(out.values, a.values * b.values.T)


def test_sum_out_of_cpt_gives_ones():
    cpt = Potential((0, 1), np.array([[0.3, 0.7], [0.9, 0.1]]))
    np.testing.assert_allclose(sum_out(cpt, 1).values, [1.0, 1.0])


def test_max_out_records_argmax():
    p = Potential((0, 1), np.array([[0.1, 0.9], [0.7, 0.3]]))
    out, arg = max_out(p, 0)
    assert out.scope == (1,)
    np.testing.assert_array_equal(out.values, [0.7, 0.9])
    np.testing.assert_array_equal(arg, [1, 0])


def test_max_out_ties_to_lowest_state():
    _, arg = max_out(Potential((0,), np.array([0.5, 0.5])), 0)
    assert int(arg) == 0


def test_missing_variable_is_an_error():
    p = Potential((0,), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        sum_out(p, 5)
    with pytest.raises(ValueError):
        max_out(p, 5)


def test_reduce_slices_evidence():
    p = Potential((0, 1), np.array([[0.1, 0.9], [0.7, 0.3]]))
    r = p.reduce({0: 1})
    assert r.scope == (1,)
    np.testing.assert_array_equal(r.values, [0.7, 0.3])


def test_rejects_negative_and_nonfinite():
    with pytest.raises(ValueError):
        Potential((0,), np.array([0.5, -0.1]))
    with pytest.raises(ValueError):
        Potential((0,), np.array([np.nan, 1.0]))


def test_values_are_read_only():
    p = Potential((0,), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        p.values[0] = 1.0


def test_multiply_all_empty_is_unit_scalar():
    assert float(multiply_all([]).values) == 1.0
