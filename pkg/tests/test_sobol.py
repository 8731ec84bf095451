import numpy as np
import pytest

from rwyguard.sobol import (MAX_DIMENSIONS, DimensionLimit, scale_to_bounds,
                            sobol_sequence)


def scipy_reference(dims: int, count: int) -> np.ndarray:
    """Independent oracle; the leading zero point is skipped to match."""
    from scipy.stats import qmc
    eng = qmc.Sobol(dims, scramble=False)
    return eng.random(count + 1)[1:]


class TestSequence:
    def test_first_point_is_center(self):
        assert sobol_sequence(1, 1)[0, 0] == 0.5
        assert np.all(sobol_sequence(6, 1)[0] == 0.5)

    @pytest.mark.parametrize("dims", [1, 2, 3, 4, 5, 6])
    def test_matches_reference_first_32(self, dims):
        mine = sobol_sequence(dims, 32)
        ref = scipy_reference(dims, 32)
        assert np.max(np.abs(mine - ref)) < 1e-12

    def test_matches_reference_at_table_limit(self):
        mine = sobol_sequence(MAX_DIMENSIONS, 64)
        ref = scipy_reference(MAX_DIMENSIONS, 64)
        assert np.max(np.abs(mine - ref)) < 1e-12

    def test_deterministic(self):
        assert np.array_equal(sobol_sequence(4, 100), sobol_sequence(4, 100))

    def test_within_unit_cube(self):
        pts = sobol_sequence(5, 500)
        assert np.all(pts > 0.0) and np.all(pts < 1.0)

    def test_dimension_limit(self):
        with pytest.raises(DimensionLimit):
            sobol_sequence(MAX_DIMENSIONS + 1, 4)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            sobol_sequence(0, 4)
        with pytest.raises(ValueError):
            sobol_sequence(2, -1)


class TestScaling:
    def test_maps_bounds(self):
        pts = sobol_sequence(2, 64)
        scaled = scale_to_bounds(pts, [(10.0, 20.0), (-1.0, 1.0)])
        assert np.all(scaled[:, 0] >= 10.0) and np.all(scaled[:, 0] <= 20.0)
        assert np.all(scaled[:, 1] >= -1.0) and np.all(scaled[:, 1] <= 1.0)
        assert scaled[0, 0] == pytest.approx(15.0)
        assert scaled[0, 1] == pytest.approx(0.0)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            scale_to_bounds(sobol_sequence(1, 2), [(5.0, 5.0)])
