"""Tests for integration contours and test functions.

Verifies that:
- Rectangle quadrature integrates simple closed integrals exactly
- The default contour clears the support bound and test-function singularities
- The dilated contour strictly encloses the first
- Built-in test functions parse and carry consistent derivatives
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from specgram.spectral.contour import (
    Contour,
    check_nested,
    closed_integral,
    default_contour,
    dilate_contour,
    identity_function,
    log1p_scaled,
    parse_test_function,
    square_function,
    validate_contour,
    zero_function,
)
from specgram.spectral.detequiv import spectral_support_bound, spectral_support_lower_bound
from specgram.spectral.errors import ConfigError, ContourError


class TestContour:
    def test_residue_of_inverse(self):
        nodes, weights = Contour(-1.0, 1.0, 1.0, nodes_per_edge=24).upper_path()
        assert closed_integral(1.0 / nodes, weights) == pytest.approx(2j * math.pi, abs=1e-12)

    def test_polynomials_integrate_to_zero(self):
        nodes, weights = Contour(-1.0, 3.0, 0.5).upper_path()
        assert abs(closed_integral(nodes**3 - 2 * nodes, weights)) < 1e-12

    def test_full_path_mirrors_upper(self):
        contour = Contour(-0.5, 2.0, 1.0, nodes_per_edge=12)
        upper, _ = contour.upper_path()
        full, weights = contour.full_path()
        assert full.size == 2 * upper.size
        assert np.allclose(full[upper.size:], np.conj(upper))
        assert np.sum(weights) == pytest.approx(0.0, abs=1e-12)

    def test_nodes_avoid_real_axis(self):
        nodes, _ = Contour(-0.5, 2.0, 1.0).upper_path()
        assert np.all(nodes.imag > 0)

    def test_doubling(self):
        contour = Contour(-1.0, 1.0, 1.0, nodes_per_edge=12)
        assert contour.doubled().nodes_per_edge == 24

    @pytest.mark.parametrize("args", [(1.0, 0.0, 1.0), (0.0, 1.0, 0.0), (0.0, 1.0, 1.0, 1)])
    def test_rejects_bad_geometry(self, args):
        with pytest.raises(ContourError):
            Contour(*args)

    def test_contains(self):
        contour = Contour(-1.0, 1.0, 0.5)
        assert contour.contains(0.5 + 0.25j)
        assert not contour.contains(-2.0)


class TestDefaultContour:
    def test_clears_support(self, mp_profile):
        contour = default_contour(mp_profile)
        assert contour.x_right == pytest.approx(1.2 * spectral_support_bound(mp_profile))
        assert contour.x_left < 0
        validate_contour(contour, mp_profile)

    def test_log_branch_point_clamps_left_edge(self, mp_profile):
        f = log1p_scaled(0.05)
        contour = default_contour(mp_profile, [f])
        assert contour.x_left == pytest.approx(-0.025)
        validate_contour(contour, mp_profile, [f])

    def test_settings_feed_nodes(self, mp_profile):
        from specgram.config import update_settings

        update_settings({"nodes_per_edge": 20, "v0": 0.5})
        contour = default_contour(mp_profile)
        assert contour.nodes_per_edge == 20 and contour.v0 == 0.5

    def test_dilation_encloses(self, mp_profile):
        first = default_contour(mp_profile)
        second = dilate_contour(first)
        assert second.strictly_encloses(first)
        check_nested(first, second)

    def test_dilation_stays_clear_of_branch_point(self, mp_profile):
        f = log1p_scaled(1.0)
        first = default_contour(mp_profile, [f])
        second = dilate_contour(first, [f])
        assert -1.0 < second.x_left < first.x_left
        validate_contour(second, mp_profile, [f])

    def test_overlap_is_rejected(self):
        with pytest.raises(ContourError):
            check_nested(Contour(-1.0, 2.0, 1.0), Contour(-0.5, 3.0, 1.5))

    def test_short_right_edge(self, mp_profile):
        with pytest.raises(ContourError):
            validate_contour(Contour(-0.5, 2.0, 1.0), mp_profile)

    def test_left_edge_beyond_support_edge(self, mp_profile):
        with pytest.raises(ContourError):
            validate_contour(Contour(0.1, 4.0, 1.0), mp_profile)

    def test_positive_left_edge_below_support_edge(self, mp_profile):
        # (1 - sqrt(1/2))^2 ~ 0.0858
        assert spectral_support_lower_bound(mp_profile) == pytest.approx((1 - math.sqrt(0.5)) ** 2)
        validate_contour(Contour(0.05, 4.0, 1.0), mp_profile)

    def test_positive_left_edge_needs_separable_profile(self, small_dense_profile):
        assert spectral_support_lower_bound(small_dense_profile) == 0.0
        with pytest.raises(ContourError):
            validate_contour(Contour(0.01, 40.0, 1.0), small_dense_profile)

    def test_square_profile_reaches_zero(self, tiny_dense_profile):
        assert spectral_support_lower_bound(tiny_dense_profile) == 0.0

    def test_singularity_inside(self, mp_profile):
        f = log1p_scaled(0.1)
        with pytest.raises(ContourError):
            validate_contour(Contour(-0.5, 4.0, 1.0), mp_profile, [f])

    def test_bad_dilation(self):
        with pytest.raises(ContourError):
            dilate_contour(Contour(-1.0, 1.0, 1.0), factor=0.9)


class TestTestFunctions:
    @pytest.mark.parametrize("spec, label", [
        ("x", "x"),
        ("x2", "x2"),
        ("zero", "zero"),
        ("log1p_scaled:0.5", "log1p_scaled:0.5"),
        ("log1p_scaled", "log1p_scaled:1"),
    ])
    def test_parse(self, spec, label):
        assert parse_test_function(spec).label == label

    @pytest.mark.parametrize("spec", ["cos", "log1p_scaled:abc", "log1p_scaled:-1"])
    def test_parse_errors(self, spec):
        with pytest.raises(ConfigError):
            parse_test_function(spec)

    @pytest.mark.parametrize("f", [identity_function(), square_function(), log1p_scaled(0.7)])
    def test_derivatives_match_differences(self, f):
        points = [0.5 + 0.5j, 2.0 + 1.0j, -0.2 + 0.1j]
        assert f.derivative_error(points) < 1e-6

    def test_linear_trace_flags(self):
        assert identity_function().is_linear_trace
        assert zero_function().is_linear_trace
        assert not square_function().is_linear_trace

    def test_zero_function(self):
        z = np.array([1.0 + 1.0j, 2.0])
        assert np.all(zero_function().value(z) == 0)
