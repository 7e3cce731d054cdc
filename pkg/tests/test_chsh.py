import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathqunit.analysis import AnalysisError, ChshRecord, chsh_S, correlation_E
from pathqunit.analysis.chsh import (
    CHSH_PHASES,
    chsh_from_cycled,
    chsh_from_probabilities,
    chsh_setting_pairs,
)
from pathqunit.counting import CountRecord, RatesConfig
from pathqunit.experiments import balanced_analyzer, chsh_probability_tables, simulate_chsh
from pathqunit.sourcesim import SourceConfig, coincidence_probs
from pathqunit.statecore import dephase, target_state

NOMINAL = RatesConfig(150.0, 1.47)


def _rec(counts, acc=0.0):
    return CountRecord("x", np.asarray(counts).reshape(2, 2), 10.0, np.full((2, 2), acc))


class TestCorrelation:
    def test_examples(self):
        assert correlation_E([100, 0, 0, 100])[0] == 1.0
        assert correlation_E([50, 50, 50, 50])[0] == 0.0

    def test_zero_total(self):
        with pytest.raises(AnalysisError):
            correlation_E([0, 0, 0, 0])

    def test_error_matches_binomial(self):
        # With Poisson counts the propagated error is sqrt((1 - E^2) / N).
        e, sigma = correlation_E([400, 100, 100, 400])
        assert sigma == pytest.approx(math.sqrt((1 - e**2) / 1000))

    @given(st.floats(0, 1), st.floats(-3, 3))
    def test_expectation_level(self, p, chi):
        rho = dephase(target_state(0.0), p)
        probs = coincidence_probs(rho, balanced_analyzer(chi), balanced_analyzer(0.0))
        assert correlation_E(probs)[0] == pytest.approx(p * math.cos(chi), abs=1e-12)


class TestChsh:
    def test_tsirelson_at_p1(self):
        s = chsh_from_probabilities(chsh_probability_tables(SourceConfig(distinguishability=1.0)))
        assert s == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("p", np.linspace(0, 1, 20))
    def test_linear_in_p(self, p):
        s = chsh_from_probabilities(chsh_probability_tables(SourceConfig(distinguishability=float(p))))
        assert s == pytest.approx(2 * math.sqrt(2) * p, abs=1e-12)

    def test_nominal_expectation(self):
        s = chsh_from_probabilities(chsh_probability_tables(SourceConfig()))
        assert abs(s - 2 * math.sqrt(2) * 0.956) < 1e-6
        assert s == pytest.approx(2.704, abs=5e-4)

    def test_simulated_within_band(self):
        hits = 0
        for seed in range(30):
            recs = simulate_chsh(SourceConfig(), NOMINAL, 10.0, seed)
            rec = ChshRecord(tuple(chsh_setting_pairs()), tuple(recs))
            s, sigma = chsh_S(rec)
            hits += abs(s - 2.70) <= 0.09
            assert s <= 2 * math.sqrt(2) + 3 * sigma
            assert 0.01 < sigma < 0.05
        assert hits >= 27

    def test_corrected_larger(self):
        recs = simulate_chsh(SourceConfig(), NOMINAL, 100.0, 5)
        rec = ChshRecord(tuple(chsh_setting_pairs()), tuple(recs))
        assert chsh_S(rec, corrected=True)[0] > chsh_S(rec)[0]

    def test_cycled_matches_outputs_mode(self):
        src = SourceConfig(distinguishability=0.9)
        rates = RatesConfig(1e9, 0.0)
        s_out = chsh_S(ChshRecord(tuple(chsh_setting_pairs()), tuple(simulate_chsh(src, rates, 10.0, 1))))[0]
        s_cyc = chsh_S(chsh_from_cycled(simulate_chsh(src, rates, 10.0, 1, mode="cycled")))[0]
        assert s_out == pytest.approx(2 * math.sqrt(2) * 0.9, abs=1e-3)
        assert s_cyc == pytest.approx(s_out, abs=1e-3)

    def test_record_validation(self):
        with pytest.raises(AnalysisError):
            ChshRecord(((0.0, 0.0),) * 3, (_rec([1, 0, 0, 1]),) * 3)
        with pytest.raises(AnalysisError):
            chsh_from_cycled([_rec([1, 0, 0, 1])] * 4, CHSH_PHASES)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            simulate_chsh(SourceConfig(), NOMINAL, 1.0, 0, mode="twelve")
