import numpy as np
import pytest

from levelgeom import errors
from levelgeom import fields
from levelgeom import morse
from levelgeom import parser


def test_sphere_has_one_minimum(sphere, box):
    cps = morse.find_critical_points(sphere, box, seed_grid=8)
    assert len(cps) == 1
    (cp,) = cps
    np.testing.assert_allclose(cp.location, 0.0, atol=1e-9)
    assert cp.value == pytest.approx(0.0, abs=1e-12)
    assert cp.morse_index == 0
    np.testing.assert_allclose(cp.hessian_eigenvalues, [2.0, 2.0, 2.0])


def test_double_well_critical_points(double_well, box):
    cps = morse.find_critical_points(double_well, box, seed_grid=8)
    assert len(cps) == 3
    assert [cp.morse_index for cp in cps] == [0, 0, 1]
    np.testing.assert_allclose(cps.values, [0.0, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose([cp.location[0] for cp in cps], [-1.0, 1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(cps[2].hessian_eigenvalues, [-4.0, 2.0, 2.0])


def test_found_points_reverify(double_well, box):
    for cp in morse.find_critical_points(double_well, box, seed_grid=8):
        jet = double_well.eval_jet(cp.location)
        assert np.linalg.norm(jet.gradient) <= morse.CONVERGED_GRAD


def test_dedup_collapses_clusters_to_their_first_point(box, rng):
    centers = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.5, -0.5]])
    jitter = rng.uniform(-1e-8, 1e-8, size=(len(centers), 400, 3))
    points = (centers[:, None] + jitter).reshape(-1, 3)
    kept = morse._dedup(points[rng.permutation(len(points))], box)
    assert len(kept) == 3
    np.testing.assert_allclose(kept, centers[np.lexsort(centers.T[::-1])], atol=1e-7)
    for point in kept:
        near = points[np.linalg.norm(points - point, axis=-1) < 1e-6]
        assert tuple(point) == min(map(tuple, near))


def test_dedup_chains_keep_every_other_point(box):
    spacing = 0.6 * morse.DEDUP_RADIUS * box.size[0]
    points = np.zeros((9, 3))
    points[:, 0] = spacing * np.arange(9)
    np.testing.assert_array_equal(morse._dedup(points, box), points[::2])
    assert len(morse._dedup(np.zeros((0, 3)), box)) == 0


def test_index_is_stable_under_refinement(double_well, box):
    coarse = morse.find_critical_points(double_well, box, seed_grid=8)
    fine = morse.find_critical_points(double_well, box, seed_grid=16)
    assert [cp.morse_index for cp in coarse] == [cp.morse_index for cp in fine]


def test_linear_field_has_no_critical_points():
    field = parser.parse_field("x + 0*y")
    cps = morse.find_critical_points(field, fields.BoundingBox.uniform(-1, 1, 3), seed_grid=8)
    assert len(cps) == 0


def test_saddle_field_indices():
    field = parser.parse_field("x^4 + y^4 - 2*x^2 - 2*y^2 + z^2")
    cps = morse.find_critical_points(field, fields.BoundingBox.uniform(-2, 2, 3), seed_grid=8)
    assert len(cps) == 9
    assert sorted(cp.morse_index for cp in cps) == [0] * 4 + [1] * 4 + [2]
    np.testing.assert_allclose(sorted(set(np.round(cps.values, 9))), [-2.0, -1.0, 0.0])


def test_degenerate_circle_of_minima(torus):
    box = fields.BoundingBox([-3.25, -3.25, -1.25], [3.25, 3.25, 1.25])
    with pytest.raises(errors.NotMorseError) as info:
        morse.find_critical_points(torus, box, seed_grid=8)
    assert len(info.value.location) == 3
    cps = morse.find_critical_points(torus, box, seed_grid=8, interval=fields.Interval(0.25, 1.0))
    assert len(cps) == 0
    assert cps.notes and "degenerate" in cps.notes[0]


def test_seed_grid_floor(sphere, box):
    with pytest.raises(errors.ConfigError):
        morse.find_critical_points(sphere, box, seed_grid=4)


def test_regular_decomposition_across_saddle(double_well, box):
    cps = morse.find_critical_points(double_well, box, seed_grid=8)
    decomposition = morse.regular_decomposition(cps, fields.Interval(0.5, 1.5))
    assert decomposition.critical_values == pytest.approx((1.0,))
    assert not decomposition.regular
    assert len(decomposition.intervals) == 2
    assert decomposition.intervals[0] == pytest.approx((0.5, 1.0))
    assert decomposition.intervals[1] == pytest.approx((1.0, 1.5))


def test_regular_decomposition_cases(sphere, box):
    cps = morse.find_critical_points(sphere, box, seed_grid=8)
    regular = morse.regular_decomposition(cps, fields.Interval(1.0, 4.0))
    assert regular.regular and regular.intervals == ((1.0, 4.0),)
    point = morse.regular_decomposition(cps, fields.Interval(2.0, 2.0))
    assert point.regular and point.intervals == ()
    # Both minima of the double well share value 0.
    minima = [
        morse.CriticalPoint(np.array([s, 0.0, 0.0]), 0.0, 0, np.array([8.0, 2.0, 2.0])) for s in (-1.0, 1.0)
    ]
    assert morse.regular_decomposition(minima, fields.Interval(0.0, 1.0)).critical_values == (0.0,)


def test_probe_at_sphere_minimum(sphere, box):
    (cp,) = morse.find_critical_points(sphere, box, seed_grid=8)
    table = morse.singularity_probe(sphere, cp, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    assert [row.radius for row in table.rows] == [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    for row in table.rows:
        assert row.mean_rate == pytest.approx(1.0, rel=1e-6)
        assert row.grad_rate == pytest.approx(2.0, rel=1e-6)
        assert row.gauss_rate == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize(
    "field",
    [fields.Sphere(3), fields.DoubleWell(3), fields.Quadric([1.0, 2.0, 3.0])],
    ids=["sphere", "double_well", "ellipsoid"],
)
def test_probe_rates_stay_bounded(field):
    box = fields.BoundingBox.uniform(-2.0, 2.0, 3)
    cps = morse.find_critical_points(field, box, seed_grid=8)
    assert cps
    for cp in cps:
        table = morse.singularity_probe(field, cp, [1e-1, 1e-2, 1e-3, 1e-4], others=cps)
        mean, gauss, grad = table.growth()
        assert mean < 10 and gauss < 10
        assert grad > 0.1


def test_probe_refuses_balls_with_other_critical_points(double_well, box):
    cps = morse.find_critical_points(double_well, box, seed_grid=8)
    with pytest.raises(errors.PreconditionError):
        morse.singularity_probe(double_well, cps[2], [1.5, 0.1], others=cps)
