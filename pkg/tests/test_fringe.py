import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathqunit.analysis import AnalysisError, FringeScan, fringe_extrema, visibility
from pathqunit.analysis.fringe import FlooredMinimumWarning, two_point_visibility
from pathqunit.analysis.report import fringe_scans
from pathqunit.counting import RatesConfig
from pathqunit.experiments import fringe_phases, simulate_fringe
from pathqunit.sourcesim import SourceConfig

PHASES = fringe_phases(200)


class TestVisibility:
    def test_examples(self):
        assert visibility(150, 0) == 1.0
        assert visibility(100, 100) == 0.0

    def test_zero_undefined(self):
        with pytest.raises(AnalysisError):
            visibility(0, 0)

    def test_ordering(self):
        with pytest.raises(AnalysisError):
            visibility(1, 2)

    def test_negative_minimum_floored(self):
        with pytest.warns(FlooredMinimumWarning):
            assert visibility(100, -3) == 1.0

    @given(st.floats(0, 1e6), st.floats(0, 1e6))
    def test_range(self, a, b):
        if a + b == 0:
            return
        v = visibility(max(a, b), min(a, b))
        assert 0.0 <= v <= 1.0

    def test_two_point(self):
        v, sigma = two_point_visibility(1478.0, 34.0)
        assert v == pytest.approx(1444 / 1512)
        assert 0 < sigma < 0.01


class TestFringeFit:
    def test_noiseless_cosine(self):
        fit = fringe_extrema(FringeScan(PHASES, 50 + 47.8 * np.cos(PHASES), 10.0))
        assert fit.cc_max == pytest.approx(97.8, abs=1e-9)
        assert fit.cc_min == pytest.approx(2.2, abs=1e-9)
        assert fit.phi_max == pytest.approx(0.0, abs=1e-9) or fit.phi_max == pytest.approx(2 * math.pi)
        assert fit.phi_min == pytest.approx(math.pi, abs=1e-9)
        assert fit.visibility == pytest.approx(47.8 / 50)
        assert not fit.degenerate

    @given(st.floats(-math.pi, math.pi), st.floats(10, 1e4), st.floats(0.01, 0.99))
    def test_recovers_phase_and_visibility(self, phi0, a, v):
        fit = fringe_extrema(FringeScan(PHASES, a + v * a * np.cos(PHASES + phi0), 1.0))
        assert fit.visibility == pytest.approx(v, abs=1e-9)
        assert math.cos(fit.phase0 - phi0) == pytest.approx(1.0, abs=1e-9)

    def test_constant_scan_flagged(self):
        fit = fringe_extrema(FringeScan(PHASES, np.full(PHASES.size, 40.0), 1.0))
        assert fit.amplitude == pytest.approx(0.0, abs=1e-9)
        assert fit.degenerate and fit.visibility == 0.0

    def test_noisy_flat_scan_flagged(self, rng):
        counts = rng.poisson(500, PHASES.size).astype(float)
        fit = fringe_extrema(FringeScan(PHASES, counts, 1.0, variances=counts))
        assert fit.degenerate

    def test_two_points_match_fit(self):
        # At phases 0 and pi the fit reduces to the two-point estimator.
        fit = fringe_extrema(FringeScan([0.0, math.pi], [1478.0, 34.0], 10.0))
        assert fit.visibility == pytest.approx(two_point_visibility(1478.0, 34.0)[0])

    def test_floor_flag(self):
        counts = 50 + 52 * np.cos(PHASES)
        fit = fringe_extrema(FringeScan(PHASES, counts, 1.0))
        assert fit.floored and fit.visibility == 1.0

    def test_invalid_scan(self):
        with pytest.raises(AnalysisError):
            FringeScan([0.0], [1.0], 1.0)
        with pytest.raises(AnalysisError):
            FringeScan([0.0, 1.0], [1.0], 1.0)


class TestSimulatedFringes:
    def test_recovered_within_3_sigma(self):
        src = SourceConfig(distinguishability=0.956)
        rates = RatesConfig(150.0, 0.0)
        hits = 0
        for seed in range(100):
            raw, _ = fringe_scans(simulate_fringe(src, rates, 200, 10.0, seed))
            fit = fringe_extrema(raw)
            hits += abs(fit.visibility - 0.956) < 3 * fit.sigma_visibility
        assert hits >= 95

    def test_error_bar_calibrated(self):
        src = SourceConfig(distinguishability=0.956)
        fits = [fringe_extrema(fringe_scans(simulate_fringe(src, RatesConfig(150.0, 1.47), 200, 10.0, s))[0])
                for s in range(60)]
        spread = np.std([f.visibility for f in fits], ddof=1)
        quoted = np.mean([f.sigma_visibility for f in fits])
        assert 0.7 < spread / quoted < 1.3

    def test_corrected_exceeds_raw(self):
        src = SourceConfig(distinguishability=0.956)
        wins = 0
        for seed in range(100):
            raw, corr = fringe_scans(simulate_fringe(src, RatesConfig(150.0, 1.47), 200, 10.0, seed))
            wins += fringe_extrema(corr).visibility > fringe_extrema(raw).visibility
        assert wins == 100

    def test_fit_no_warnings(self):
        src = SourceConfig(distinguishability=0.956)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            raw, corr = fringe_scans(simulate_fringe(src, RatesConfig(150.0, 1.47), 50, 10.0, 3))
            fringe_extrema(raw)
            fringe_extrema(corr)
