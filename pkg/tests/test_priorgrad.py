import numpy as np
import pytest

from asyncdsb import imaging, priorgrad
from asyncdsb.errors import ConfigurationError, ValidationError


class TestSobel:
    def test_constant_image_zero(self):
        assert np.all(priorgrad.sobel_magnitude(np.full((16, 16), 0.3)) == 0.0)

    def test_step_edge_support(self):
        img = np.zeros((16, 16))
        img[:, 8:] = 1.0
        g = priorgrad.sobel_magnitude(img)
        assert np.all(g[:, 7] > 0) and np.all(g[:, 8] > 0)
        assert np.all(g[:, :6] == 0) and np.all(g[:, 10:] == 0)

    def test_hand_convolution_center(self):
        patch = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        g = priorgrad.sobel_magnitude(patch)
        assert g[1, 1] == pytest.approx(4.0)

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            priorgrad.sobel_magnitude(np.zeros((2, 5)))

    def test_rgb_uses_luminance(self):
        rgb = np.zeros((8, 8, 3))
        rgb[:, 4:, :] = 1.0
        gray = imaging.luminance(rgb)
        assert np.allclose(priorgrad.sobel_magnitude(rgb),
                           priorgrad.sobel_magnitude(gray))


class TestGaussianFilter:
    def test_constant_preserved(self):
        c = np.full((20, 20), 1.7)
        assert np.allclose(priorgrad.gaussian_filter(c, 2.0), 1.7, rtol=1e-12)

    def test_impulse_response_matches_kernel(self):
        sigma = 1.3
        radius = int(np.ceil(3 * sigma))
        imp = np.zeros((41, 41))
        imp[20, 20] = 1.0
        out = priorgrad.gaussian_filter(imp, sigma)
        x = np.arange(-radius, radius + 1, dtype=np.float64)
        g1 = np.exp(-x * x / (2 * sigma * sigma))
        g1 /= g1.sum()
        kernel = np.outer(g1, g1)
        patch = out[20 - radius:20 + radius + 1, 20 - radius:20 + radius + 1]
        assert np.allclose(patch, kernel, atol=1e-12)
        assert out[20, 0] == 0.0  # outside the kernel radius

    def test_interior_mass_preserved(self):
        rng = np.random.default_rng(0)
        values = np.zeros((64, 64))
        values[20:44, 20:44] = rng.random((24, 24))
        out = priorgrad.gaussian_filter(values, 2.0)
        assert out.sum() == pytest.approx(values.sum(), rel=1e-9)

    def test_nonnegative(self):
        values = np.random.default_rng(1).random((32, 32))
        assert np.all(priorgrad.gaussian_filter(values, 3.0) >= 0)

    def test_bad_sigma(self):
        with pytest.raises(ValidationError):
            priorgrad.gaussian_filter(np.zeros((8, 8)), 0.0)


class TestCompleteGradient:
    def setup_method(self):
        self.img = imaging.synth_one(2, 0, 48, 48)
        self.mask = imaging.make_mask("center", 48, 48)
        self.x_c = imaging.apply_mask(self.img, self.mask)
        self.x_cg = priorgrad.sobel_magnitude(self.x_c)

    def test_empty_mask_returns_input(self):
        empty = np.zeros((48, 48), dtype=bool)
        out = priorgrad.complete_gradient(self.img, empty, self.x_cg, "harmonic")
        assert np.array_equal(out, self.x_cg)

    def test_oracle_copies_truth_in_hole(self):
        out = priorgrad.complete_gradient(self.x_c, self.mask, self.x_cg,
                                          "oracle", x_g=self.img)
        truth = priorgrad.sobel_magnitude(self.img)
        assert np.array_equal(out[self.mask], truth[self.mask])
        assert np.array_equal(out[~self.mask], self.x_cg[~self.mask])

    def test_oracle_without_truth_rejected(self):
        with pytest.raises(ConfigurationError):
            priorgrad.complete_gradient(self.x_c, self.mask, self.x_cg, "oracle")

    def test_harmonic_constant_boundary(self):
        values = np.full((32, 32), 2.0)
        mask = imaging.make_mask("center", 32, 32)
        out = priorgrad.complete_gradient(np.zeros((32, 32)), mask, values,
                                          "harmonic")
        assert np.allclose(out[mask], 2.0, atol=1e-4)

    def test_harmonic_maximum_principle(self):
        out = priorgrad.complete_gradient(self.x_c, self.mask, self.x_cg,
                                          "harmonic")
        from scipy.ndimage import binary_dilation
        boundary = binary_dilation(self.mask) & ~self.mask
        lo, hi = self.x_cg[boundary].min(), self.x_cg[boundary].max()
        assert out[self.mask].min() >= lo - 1e-9
        assert out[self.mask].max() <= hi + 1e-9

    def test_harmonic_visible_untouched(self):
        out = priorgrad.complete_gradient(self.x_c, self.mask, self.x_cg,
                                          "harmonic")
        assert np.array_equal(out[~self.mask], self.x_cg[~self.mask])

    def test_unknown_completer(self):
        with pytest.raises(ConfigurationError):
            priorgrad.complete_gradient(self.x_c, self.mask, self.x_cg, "learned")


class TestTauFromGradient:
    def setup_method(self):
        self.cfg = priorgrad.AsyncConfig(tau_min=0.2, tau_max=0.5)

    def test_extremes_map_exactly(self):
        g = np.random.default_rng(2).random((32, 32))
        tau = priorgrad.tau_from_gradient(g, self.cfg)
        filtered = priorgrad.gaussian_filter(g, self.cfg.gauss_sigma)
        assert tau.flat[np.argmax(filtered)] == 0.5
        assert tau.flat[np.argmin(filtered)] == 0.2

    def test_constant_map_degenerates_to_midpoint(self):
        tau = priorgrad.tau_from_gradient(np.full((16, 16), 0.4), self.cfg)
        assert np.all(tau == pytest.approx(0.35))

    def test_affine_invariance(self):
        g = np.random.default_rng(3).random((32, 32))
        a = priorgrad.tau_from_gradient(g, self.cfg)
        b = priorgrad.tau_from_gradient(2.5 * g + 0.7, self.cfg)
        assert np.abs(a - b).max() <= 1e-12

    def test_monotone_in_filtered_value(self):
        g = np.random.default_rng(4).random((24, 24))
        tau = priorgrad.tau_from_gradient(g, self.cfg)
        filtered = priorgrad.gaussian_filter(g, self.cfg.gauss_sigma)
        order = np.argsort(filtered.ravel())
        assert np.all(np.diff(tau.ravel()[order]) >= -1e-15)

    def test_range_respected(self):
        g = np.random.default_rng(5).random((24, 24))
        tau = priorgrad.tau_from_gradient(g, self.cfg)
        assert tau.min() >= 0.2 and tau.max() <= 0.5

    def test_region_restricted_normalization(self):
        g = np.zeros((32, 32))
        g[8:24, 8:24] = np.random.default_rng(6).random((16, 16))
        g[0, 0] = 100.0  # extreme value outside the region
        region = np.zeros((32, 32), dtype=bool)
        region[8:24, 8:24] = True
        tau = priorgrad.tau_from_gradient(g, self.cfg, region=region)
        assert tau[region].min() >= 0.2 and tau[region].max() <= 0.5
        filtered = priorgrad.gaussian_filter(g, self.cfg.gauss_sigma)
        inside = filtered[region]
        peak = np.unravel_index(np.argmax(np.where(region, filtered, -np.inf)),
                                filtered.shape)
        assert tau[peak] == 0.5

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValidationError):
            priorgrad.AsyncConfig(tau_min=0.6, tau_max=0.4)

    def test_paper_recommended_ranges_accepted(self):
        priorgrad.AsyncConfig(tau_min=0.2, tau_max=0.5)    # regular masks
        priorgrad.AsyncConfig(tau_min=0.001, tau_max=0.4)  # irregular masks
