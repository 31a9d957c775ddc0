"""Normal calibration, inference and Poisson heightmap integration."""

import numpy as np
import pytest

from gripsense import geometry, sim
from gripsense.core import DiffFrame, HeightMap, NormalMap, diff_image
from oracles import cap_normals_fd

rng = np.random.default_rng(5)


def _press_fixture(resolution=64, n=4, noise=0.0, seed=0):
    return sim.make_calibration_presses(n, rng=np.random.default_rng(seed),
                                        resolution=resolution,
                                        noise_sigma=noise)


class TestCalibrationDataset:
    def test_labels_match_analytic_cap_normals(self):
        presses = _press_fixture(n=1)
        frame, (cx, cy), contact_px, r_mm, ppm = presses[0]
        data = geometry.build_calibration_dataset(presses)
        h, w, _ = frame.values.shape
        xm, ym = np.meshgrid(np.arange(w), np.arange(h))
        dx = (xm.ravel() - cx) / ppm
        dy = (ym.ravel() - cy) / ppm
        inside = dx ** 2 + dy ** 2 <= (contact_px / ppm) ** 2
        n_in = int(inside.sum())
        got = data.normals[:n_in]                  # in-contact rows come first
        want = np.column_stack([dx[inside] / r_mm, dy[inside] / r_mm,
                                np.sqrt(r_mm ** 2 - dx[inside] ** 2
                                        - dy[inside] ** 2) / r_mm])
        assert np.allclose(got, want, atol=1e-12)

    def test_background_rows_are_flat_normals(self):
        data = geometry.build_calibration_dataset(_press_fixture(n=1))
        flat = data.normals[np.isclose(data.normals[:, 2], 1.0)]
        assert len(flat) >= len(data) // 3
        assert np.allclose(flat[:, :2], 0.0)

    def test_analytic_labels_agree_with_fd_oracle(self):
        xs = np.linspace(-2.5, 2.5, 21)
        want = cap_normals_fd(xs, xs, 5.0, 1.0)
        rho2 = np.add.outer(xs ** 2, xs ** 2)
        inside = rho2 < 1.0 * (2 * 5.0 - 1.0) - 0.5   # away from the rim
        xm, ym = np.meshgrid(xs, xs)
        got = np.dstack([xm / 5.0, ym / 5.0,
                         np.sqrt(np.maximum(25.0 - xm ** 2 - ym ** 2, 0)) / 5.0])
        assert np.max(np.abs(got[inside] - want[inside])) < 1e-4

    def test_rejects_bad_presses(self):
        with pytest.raises(ValueError):
            geometry.build_calibration_dataset([])
        frame, center, contact_px, r_mm, ppm = _press_fixture(n=1)[0]
        with pytest.raises(ValueError, match="center"):
            geometry.build_calibration_dataset(
                [(frame, (1e4, 1e4), contact_px, r_mm, ppm)])
        with pytest.raises(ValueError, match="contact radius"):
            geometry.build_calibration_dataset(
                [(frame, center, r_mm * ppm + 1.0, r_mm, ppm)])

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            geometry.CalibrationDataset(np.zeros((3, 4)), np.zeros((3, 3)))
        bad_n = np.zeros((3, 3))       # zero vectors are not unit normals
        with pytest.raises(ValueError):
            geometry.CalibrationDataset(np.zeros((3, 5)), bad_n)


@pytest.fixture(scope="module")
def data():
    return geometry.build_calibration_dataset(_press_fixture(n=3))


@pytest.fixture(scope="module")
def model(data):
    return geometry.fit_rgb2normal(data, epochs=200, seed=0)


class TestFit:
    def test_deterministic(self, data, model):
        again = geometry.fit_rgb2normal(data, epochs=200, seed=0)
        assert np.array_equal(model.w1, again.w1)
        assert model.final_loss == again.final_loss

    def test_seed_changes_init(self, data, model):
        other = geometry.fit_rgb2normal(data, epochs=200, seed=1)
        assert not np.array_equal(model.w1, other.w1)

    def test_loss_history_non_increasing(self, model):
        hist = np.array(model.loss_history)
        assert hist.shape == (201,)
        assert np.all(np.diff(hist) <= 1e-12)
        assert model.final_loss == hist[-1]
        assert model.final_loss < hist[0]

    def test_epoch_validation(self, data):
        with pytest.raises(ValueError):
            geometry.fit_rgb2normal(data, epochs=0)

    def test_predictions_are_unit_normals(self, model):
        frame = _press_fixture(n=1, seed=3)[0][0]
        nm = geometry.predict_normals(frame, model)
        assert isinstance(nm, NormalMap)
        assert nm.values.shape == frame.values.shape
        norms = np.linalg.norm(nm.values, axis=2)
        assert np.max(np.abs(norms - 1.0)) < 1e-9
        assert nm.values[:, :, 2].min() > 0


class TestIntegration:
    def test_recovers_smooth_zero_boundary_surface(self):
        n = 48
        x = np.linspace(0, np.pi, n)
        h_true = 0.5 * np.outer(np.sin(x), np.sin(x))
        gy, gx = np.gradient(h_true)               # slope in mm per pixel
        nx = -gx / np.sqrt(1 + gx ** 2 + gy ** 2)
        ny = -gy / np.sqrt(1 + gx ** 2 + gy ** 2)
        nz = 1.0 / np.sqrt(1 + gx ** 2 + gy ** 2)
        nm = NormalMap(np.dstack([nx, ny, nz]))
        hm = geometry.integrate_normals(nm, 1.0)
        err = hm.values - (h_true - h_true.min())
        assert np.sqrt(np.mean(err ** 2)) < 0.02

    def test_flat_normals_give_flat_heightmap(self):
        n = np.zeros((24, 24, 3))
        n[:, :, 2] = 1.0
        hm = geometry.integrate_normals(NormalMap(n), 4.0)
        assert np.max(np.abs(hm.values)) < 1e-9

    def test_output_gauge_min_zero(self):
        presses = _press_fixture(n=1)
        data = geometry.build_calibration_dataset(presses)
        model = geometry.fit_rgb2normal(data, epochs=150, seed=0)
        nm = geometry.predict_normals(presses[0][0], model)
        hm = geometry.integrate_normals(nm, presses[0][4])
        assert hm.values.min() == 0.0

    def test_px_per_mm_validation(self):
        n = np.zeros((8, 8, 3))
        n[:, :, 2] = 1.0
        with pytest.raises(ValueError):
            geometry.integrate_normals(NormalMap(n), 0.0)


class TestReconstructionError:
    def test_gauge_invariant(self):
        a = HeightMap(rng.random((6, 6)), 1.0)
        b = HeightMap(a.values + 3.0, 1.0)
        assert geometry.reconstruction_error(a, b) < 1e-18

    def test_constant_offset_after_gauge(self):
        base = rng.random((5, 5))
        base -= base.min()
        lifted = base.copy()
        lifted[base > 0] += 0.1                    # offset the non-min region
        a = HeightMap(base, 1.0)
        b = HeightMap(lifted, 1.0)
        frac = np.mean(base > 0)
        assert geometry.reconstruction_error(a, b) == pytest.approx(
            0.01 * frac)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            geometry.reconstruction_error(HeightMap(np.zeros((4, 4)), 1.0),
                                          HeightMap(np.zeros((5, 5)), 1.0))


class TestPersistence:
    def test_roundtrip_bitexact_predictions(self, tmp_path):
        data = geometry.build_calibration_dataset(_press_fixture(n=2))
        model = geometry.fit_rgb2normal(data, epochs=100, seed=0)
        path = tmp_path / "m.txt"
        geometry.save_rgb2normal(model, path)
        back = geometry.load_rgb2normal(path)
        frame = _press_fixture(n=1, seed=4)[0][0]
        a = geometry.predict_normals(frame, model)
        b = geometry.predict_normals(frame, back)
        assert np.array_equal(a.values, b.values)
        assert back.final_loss is None

    def test_corrupt_file_raises(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("5 32 32 2\n1.0 2.0\n")
        with pytest.raises(ValueError):
            geometry.load_rgb2normal(p)
        p.write_text("7 9\n")
        with pytest.raises(ValueError):
            geometry.load_rgb2normal(p)


class TestEndToEnd:
    def test_sphere_press_reconstructs_to_low_error(self):
        res = 64
        gel = sim.GelModel()
        ppm = res / gel.gel_size_mm
        presses = _press_fixture(resolution=res, n=6)
        data = geometry.build_calibration_dataset(presses)
        model = geometry.fit_rgb2normal(data, epochs=400, seed=0)
        truth = sim.indent_heightmap(sim.Sphere(5.0), (15.0, 15.0), 0.9,
                                     (res, res), gel)
        img = sim.render_tactile(truth, sim.default_rig(), gel)
        flat = sim.render_tactile(HeightMap(np.zeros((res, res)), ppm),
                                  sim.default_rig(), gel)
        nm = geometry.predict_normals(diff_image(img, flat), model)
        hm = geometry.integrate_normals(nm, ppm)
        assert geometry.reconstruction_error(hm, truth) < 0.02
