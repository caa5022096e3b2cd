import numpy as np
import pytest
from scipy.linalg import subspace_angles

from pufe.core.exceptions import ContractViolationError
from pufe.services.sketch import (
    FrequentDirections,
    RowSpaceBasis,
    default_sketch_rows,
    exact_row_space,
    sketch_row_space,
)


def test_covariance_error_bound_on_random_matrices():
    rng = np.random.default_rng(7)
    ell = 10
    violations = 0
    for _ in range(50):
        a = rng.standard_normal((100, 20))
        sketch = FrequentDirections(ell, 20).extend(a)
        gap = a.T @ a - sketch.buffer.T @ sketch.buffer
        error = np.linalg.norm(gap, 2)
        frobenius = np.linalg.norm(a, "fro") ** 2
        for k in range(ell):
            if error > frobenius / (ell - k) * (1 + 1e-9):
                violations += 1
        # The sketch never overestimates any direction
        assert np.min(np.linalg.eigvalsh(gap)) > -1e-8 * frobenius
    assert violations == 0


def test_sketch_counts_rows_and_shrinks():
    rng = np.random.default_rng(3)
    sketch = FrequentDirections(4, 6).extend(rng.standard_normal((9, 6)))
    assert sketch.rows_seen == 9
    assert sketch.shrinks >= 1


def test_lossless_sketch_matches_exact_row_space():
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((60, 3)) @ rng.standard_normal((3, 12))
    sketched = sketch_row_space(rows)
    exact = exact_row_space(rows, 3)
    assert sketched.rank == 3
    assert np.max(subspace_angles(sketched.basis, exact.basis)) < 1e-8


def test_small_sketch_recovers_low_rank_subspace():
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((200, 2)) @ rng.standard_normal((2, 15))
    basis = sketch_row_space(rows, rank=2)
    assert np.max(subspace_angles(basis.basis, exact_row_space(rows, 2).basis)) < 1e-8


def test_default_sketch_rows():
    assert default_sketch_rows(3, 30) == 8
    assert default_sketch_rows(10, 30) == 20
    assert default_sketch_rows(None, 30) == 31


def test_row_space_validates_rank():
    sketch = FrequentDirections(4, 6).extend(np.eye(6)[:3])
    with pytest.raises(ContractViolationError):
        sketch.row_space(5)
    with pytest.raises(ContractViolationError):
        sketch.row_space(0)


def test_basis_must_be_orthonormal():
    with pytest.raises(ContractViolationError):
        RowSpaceBasis(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))
    basis = RowSpaceBasis(np.eye(3)[:, :2])
    np.testing.assert_allclose(basis.project([1.0, 2.0, 3.0]), [1.0, 2.0, 0.0])
    assert not basis.basis.flags.writeable


def test_first_row_lands_in_the_first_slot():
    sketch = FrequentDirections(4, 3).insert([1.0, 0.0, 0.0])
    np.testing.assert_array_equal(sketch.buffer[0], [1.0, 0.0, 0.0])
    assert sketch.shrinks == 0


def test_repeated_row_sketch_keeps_its_direction():
    sketch = FrequentDirections(4, 3)
    for _ in range(5):
        sketch.insert([1.0, 0.0, 0.0])
    assert sketch.shrinks == 1
    np.testing.assert_allclose(sketch.row_space(1).basis[:, 0], [1.0, 0.0, 0.0], atol=1e-12)
    assert sketch.estimate_rank() == 1


def test_row_order_does_not_change_the_subspace():
    rng = np.random.default_rng(4)
    rows = rng.standard_normal((120, 3)) @ rng.standard_normal((3, 12))
    forward = FrequentDirections(6, 12).extend(rows)
    shuffled = FrequentDirections(6, 12).extend(rows[rng.permutation(len(rows))])
    assert forward.estimate_rank() == shuffled.estimate_rank() == 3
    assert np.max(subspace_angles(forward.row_space(3).basis, shuffled.row_space(3).basis)) < 1e-6


def test_empty_sketch_has_rank_one():
    assert FrequentDirections(4, 3).estimate_rank() == 1
