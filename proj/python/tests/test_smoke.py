import math

import numpy as np
import pytest

import curvndf

TINY = {
    "net.hidden_width": "16",
    "net.hidden_layers": "2",
    "encoding.bands": "4",
    "train.epochs": "1",
    "train.rays_per_batch": "64",
    "train.samples_per_ray": "8",
    "box.size": "4",
    "box.center": "0 0 0",
    "scanner.beams": "16",
}


def test_encode_length_and_values():
    out = np.asarray(curvndf.encode(np.array([0.5, 0.0, 0.0]), 30))
    assert out.shape == (183,)
    assert out[:3].tolist() == [0.5, 0.0, 0.0]


def test_sample_ray_ends_at_endpoint():
    pts, t, dist = curvndf.sample_ray(np.zeros(3), np.array([2.0, 0.0, 0.0]), 40)
    assert pts.shape == (40, 3)
    assert t[38] == 0.0
    assert all(a > b for a, b in zip(t, t[1:]))


def test_curvature_distance_is_exact_on_unit_circle():
    # Query two units from the centre, so the level-set radius there is 2.
    # The normal points from the query toward the surface.
    origin = np.array([3.0, 0.0])
    endpoint = np.array([1.0, 0.0])
    x = np.array([2.0, 0.0])
    d = curvndf.curvature_distance(2.0, origin, endpoint, x, np.array([-1.0, 0.0]))
    assert d == pytest.approx(1.0, abs=1e-12)


def test_sample_weight_table():
    assert [curvndf.sample_weight(v, 2.0, 3.0) for v in (0.0, 1.0, 2.0)] == pytest.approx([8.0, 1.0, 0.0])


def test_scene_sdf_and_mesh():
    scene = curvndf.Scene.from_text("sphere 0 0 0 1\n")
    assert scene.dim == 3 and len(scene) == 1
    d = scene.sdf(np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    assert d.tolist() == pytest.approx([1.0, -1.0])
    verts, faces = curvndf.marching_cubes_scene(scene, -2 * np.ones(3), 2 * np.ones(3), 24)
    radii = np.linalg.norm(verts, axis=1)
    assert faces.shape[1] == 3
    assert np.abs(radii - 1.0).max() < 0.05


def test_fieldnet_jet_matches_eval():
    net = curvndf.FieldNet.init(dim=2, seed=3, hidden_width=16, hidden_layers=2, bands=4)
    x = np.array([0.1, -0.2])
    value, grad, hess = net.jet(x)
    assert value == pytest.approx(net.eval(x[None, :])[0], abs=1e-12)
    h = 1e-5
    fd = (net.eval((x + [h, 0])[None, :])[0] - net.eval((x - [h, 0])[None, :])[0]) / (2 * h)
    assert grad[0] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    assert np.allclose(hess, hess.T)


def test_config_rejects_unknown_key():
    assert "mcl.particles = 10000" in curvndf.default_config()
    with pytest.raises(ValueError):
        curvndf.config_text(overrides={"no.such.key": "1"})


def test_pipeline_round_trip(tmp_path):
    scene_path = tmp_path / "sphere.txt"
    scene_path.write_text("sphere 0 0 0 1\n")
    scans, points = curvndf.synth(str(scene_path), "sphere:6:1.8", str(tmp_path / "ds"), overrides=TINY)
    assert scans == 6 and points > 0
    model = str(tmp_path / "model.bin")
    history = curvndf.train(str(tmp_path / "ds"), model, overrides=TINY)
    assert len(history) == 1 and math.isfinite(history[0]["total"])
    net, center, scale = curvndf.load_model(model)
    assert net.dim == 3 and scale > 0
    stats = curvndf.eval_sdf(model, str(scene_path), samples=200)
    assert stats["count"] == 200 and math.isfinite(stats["mae"])
    with pytest.raises(OSError):
        curvndf.load_model(str(tmp_path / "missing.bin"))
