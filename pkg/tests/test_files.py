import json

import numpy as np
import pytest

from radiloc import files
from radiloc.errors import InputError
from radiloc.imgcore import BoundingBox, Heatmap, RoiMask


def test_gray_round_trip(tmp_path, rng):
    a = rng.integers(0, 256, (5, 7))
    files.save_gray_png(tmp_path / "a.png", a)
    assert np.array_equal(files.load_gray(tmp_path / "a.png").pixels, a)
    b = rng.integers(0, 65536, (4, 3))
    files.save_gray_png(tmp_path / "b.png", b, bits=16)
    assert np.array_equal(files.load_gray(tmp_path / "b.png").pixels, b)


def test_pgm(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P5\n3 2\n255\n" + bytes([0, 10, 20, 30, 40, 255]))
    assert files.load_gray(tmp_path / "a.pgm").pixels.tolist() == [[0, 10, 20], [30, 40, 255]]


def test_mask(tmp_path):
    m = np.zeros((4, 4), bool)
    m[1:3, 2] = True
    files.save_mask_png(tmp_path / "m.png", RoiMask(m))
    assert np.array_equal(files.load_mask(tmp_path / "m.png").bits, m)


def test_heatmap_raw(tmp_path, rng):
    v = rng.normal(size=(6, 5)).astype(np.float32)
    files.save_heatmap_raw(tmp_path / "h.f32", Heatmap(v.astype(float), class_id=3))
    h = files.load_heatmap(tmp_path / "h.f32")
    assert h.class_id == 3 and np.array_equal(h.values, v)
    assert files.load_heatmap(tmp_path / "h.f32", class_id=5).class_id == 5
    (tmp_path / "h.f32").write_bytes(b"\0" * 8)
    with pytest.raises(InputError, match="bytes"):
        files.load_heatmap(tmp_path / "h.f32")
    (tmp_path / "g.f32").write_bytes(b"\0" * 4)
    with pytest.raises(InputError, match="no such file"):
        files.load_heatmap(tmp_path / "g.f32")


def test_heatmap_png_is_prenormalized(tmp_path):
    files.save_gray_png(tmp_path / "h.png", np.array([[10, 20]]))
    h = files.load_heatmap(tmp_path / "h.png")
    assert h.prenormalized and h.values.tolist() == [[10, 20]]


def test_missing_and_bad(tmp_path):
    with pytest.raises(InputError, match="no such file"):
        files.load_gray(tmp_path / "nope.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(InputError):
        files.load_gray(tmp_path / "junk.png")


def test_dumps():
    text = files.dumps({"a": 0.1, "b": 2.0, "c": [1, None, True], "d": float("nan"), "e": "x"})
    assert text == '{"a": 0.10000000000000001, "b": 2.0, "c": [1, null, true], "d": null, "e": "x"}'
    v = 1 / 3
    assert json.loads(files.dumps([v]))[0] == v


def test_box_records():
    recs = files.boxes_to_records([(60, BoundingBox(1, 2, 3, 4))], 2)
    assert recs == [{"class_id": 2, "threshold": 60, "x": 1, "y": 2, "w": 3, "h": 4}]
