import random

import numpy as np
import pytest

from tubelink.geometry import area, box_area, iou, iou_matrix, paired_iou, validate_boxes

from conftest import random_box


def test_area_rectangle():
    assert area([0, 0, 10, 10]) == 100.0


def test_area_unit_box():
    assert area([0, 0, 1, 1]) == 1.0


def test_area_subpixel():
    assert area([2.5, 1.0, 7.5, 3.0]) == pytest.approx(10.0)


def test_iou_identical_boxes():
    assert iou([0, 0, 10, 10], [0, 0, 10, 10]) == 1.0


def test_iou_disjoint():
    assert iou([0, 0, 10, 10], [20, 20, 30, 30]) == 0.0


def test_iou_partial_overlap():
    # intersection 50, union 150
    assert iou([0, 0, 10, 10], [5, 0, 15, 10]) == pytest.approx(1 / 3, abs=1e-12)


def test_iou_properties_randomized():
    rng = random.Random(7)
    for _ in range(300):
        a = random_box(rng)
        b = random_box(rng)
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert iou(b, a) == v
        assert iou(a, a) == 1.0
        # translation invariance
        t = [rng.uniform(-50, 50), rng.uniform(-50, 50)]
        at = [a[0] + t[0], a[1] + t[1], a[2] + t[0], a[3] + t[1]]
        bt = [b[0] + t[0], b[1] + t[1], b[2] + t[0], b[3] + t[1]]
        assert iou(at, bt) == pytest.approx(v, abs=1e-12)
        # scale invariance
        s = rng.uniform(0.1, 10.0)
        assert iou([s * x for x in a], [s * x for x in b]) == pytest.approx(v, abs=1e-12)


def test_iou_matrix_matches_scalar():
    rng = random.Random(8)
    a = np.array([random_box(rng) for _ in range(5)])
    b = np.array([random_box(rng) for _ in range(7)])
    m = iou_matrix(a, b)
    assert m.shape == (5, 7)
    for i in range(5):
        for j in range(7):
            assert m[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)


def test_iou_matrix_empty():
    assert iou_matrix(np.zeros((0, 4)), np.zeros((3, 4)) + [0, 0, 1, 1]).shape == (0, 3)


def test_paired_iou():
    rng = random.Random(9)
    a = np.array([random_box(rng) for _ in range(6)])
    b = np.array([random_box(rng) for _ in range(6)])
    pv = paired_iou(a, b)
    for i in range(6):
        assert pv[i] == pytest.approx(iou(a[i], b[i]), abs=1e-12)
    with pytest.raises(ValueError):
        paired_iou(a, b[:3])


def test_box_area_vectorized():
    arr = np.array([[0, 0, 10, 10], [2.5, 1.0, 7.5, 3.0]])
    assert box_area(arr).tolist() == [100.0, 10.0]


@pytest.mark.parametrize(
    "bad",
    [
        [0, 0, 0, 10],          # zero width
        [0, 0, 10, 0],          # zero height
        [5, 5, 4, 10],          # inverted x
        [0, 0, float("nan"), 10],
        [0, 0, float("inf"), 10],
    ],
)
def test_validate_boxes_rejects_degenerate(bad):
    with pytest.raises(ValueError):
        validate_boxes([bad])


def test_validate_boxes_accepts_valid():
    out = validate_boxes([[0, 0, 1, 1], [5.5, 2.25, 9.75, 3.5]])
    assert out.shape == (2, 4)
