import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from pathqunit.multiport import AnalyzerSetting, analyzer_unitary, haar_unitary
from pathqunit.sourcesim import (
    ConfigError,
    SourceConfig,
    SpectralModel,
    coincidence_probs,
    config_from_dict,
    config_to_dict,
    effective_density,
    epr_correlation_table,
    epr_phases,
    ideal_state,
    is_perfectly_correlated,
    overlap_visibility,
)
from pathqunit.statecore import StateError, dephase, target_state


def quadrature_overlap(model: SpectralModel) -> float:
    """|<f_A|f_B>| by direct numerical integration of the two amplitude spectra."""
    sigma = model.filter_bandwidth_ghz * 1e9 / (2 * math.sqrt(2 * math.log(2)))
    d, tau = model.detuning_hz, model.delay_s
    # Frequencies in units of sigma keep the integrand well scaled.
    x_d, w = d / sigma, 2 * math.pi * sigma * tau

    def amp(x, centre):
        return math.exp(-((x - centre) ** 2) / 4)

    lo, hi = min(0.0, x_d) - 12, max(0.0, x_d) + 12
    kw = dict(limit=500, epsabs=1e-13, epsrel=1e-12)
    re = integrate.quad(lambda x: amp(x, 0) * amp(x, x_d) * math.cos(w * x), lo, hi, **kw)[0]
    im = integrate.quad(lambda x: amp(x, 0) * amp(x, x_d) * math.sin(w * x), lo, hi, **kw)[0]
    return math.hypot(re, im) / math.sqrt(2 * math.pi)


def trapezoid_overlap(model: SpectralModel, points: int = 20001) -> float:
    sigma = model.filter_bandwidth_ghz * 1e9 / (2 * math.sqrt(2 * math.log(2)))
    d, tau = model.detuning_hz, model.delay_s
    nu = np.linspace(min(0, d) - 12 * sigma, max(0, d) + 12 * sigma, points)
    f_a = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-(nu**2) / (4 * sigma**2))
    f_b = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-((nu - d) ** 2) / (4 * sigma**2)) * np.exp(2j * np.pi * nu * tau)
    return float(abs(integrate.trapezoid(f_a * f_b.conj(), nu)))


class TestSpectral:
    def test_identical_filters(self):
        assert overlap_visibility(SpectralModel()) == 1.0

    def test_tolerance_budget(self):
        m = SpectralModel(100.0, 0.005, 20.0)
        v = overlap_visibility(m)
        assert v > 0.999
        assert abs(v - quadrature_overlap(m)) < 1e-6
        assert abs(v - trapezoid_overlap(m)) < 1e-6

    @pytest.mark.parametrize("offset,delay,bw", [(0.1, 0, 100), (0, 500, 100), (0.3, 300, 50), (-0.2, -800, 200)])
    def test_against_quadrature(self, offset, delay, bw):
        m = SpectralModel(bw, offset, delay)
        assert abs(overlap_visibility(m) - quadrature_overlap(m)) < 1e-8

    def test_sign_symmetry(self):
        a = overlap_visibility(SpectralModel(100, 0.2, 300))
        assert a == pytest.approx(overlap_visibility(SpectralModel(100, -0.2, -300)), abs=1e-15)

    def test_monotone_in_delay(self):
        vals = [overlap_visibility(SpectralModel(100, 0, d)) for d in (0, 100, 500, 1000, 3000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_coherence_length_scale(self):
        # Millimetre-scale mismatch visibly degrades interference at 100 GHz filtering.
        assert overlap_visibility(SpectralModel(100, 0, 1000)) < 0.7
        assert overlap_visibility(SpectralModel(100, 0, 3000)) < 0.05

    @pytest.mark.parametrize("kw", [{"filter_bandwidth_ghz": 0}, {"filter_shape": "box"},
                                    {"center_offset_nm": float("nan")}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SpectralModel(**kw)


class TestSourceConfig:
    def test_defaults(self):
        cfg = SourceConfig()
        assert cfg.pump_split == (1 + 0j, 1 + 0j)
        assert cfg.set_phases == (0.0,)
        assert cfg.coherence == 0.956
        assert cfg.arm_transmission == pytest.approx(10 ** -0.19)

    def test_spectral_coherence(self):
        m = SpectralModel(100, 0.005, 20)
        assert SourceConfig(distinguishability=m).coherence == overlap_visibility(m)

    @pytest.mark.parametrize(
        "kw,field",
        [
            ({"dim": 1}, "dim"),
            ({"pump_split": (1, 1, 1)}, "pump_split"),
            ({"pump_split": (0, 0)}, "pump_split"),
            ({"set_phases": (0.0, 1.0)}, "set_phases"),
            ({"distinguishability": 1.2}, "distinguishability"),
            ({"arm_loss_db": -1}, "arm_loss_db"),
            ({"pair_rate_hz": -1}, "pair_rate_hz"),
        ],
    )
    def test_invalid(self, kw, field):
        with pytest.raises(ConfigError) as info:
            SourceConfig(**kw)
        assert info.value.field == field

    def test_ideal_state_phases(self):
        state = ideal_state(SourceConfig(set_phases=(math.pi,)))
        assert np.allclose(state.amps, target_state(math.pi).amps)

    def test_dict_roundtrip(self):
        cfg = SourceConfig(dim=3, pump_split=(1, 1j, 0.5), set_phases=(0.1, 0.2),
                           distinguishability=SpectralModel(80, 0.01, 5))
        assert config_from_dict(config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize(
        "data,field",
        [
            ({"dim": "2"}, "source.dim"),
            ({"dim": True}, "source.dim"),
            ({"colour": 1}, "source.colour"),
            ({"set_phases": ["x"]}, "source.set_phases"),
            ({"pump_split": [[1, 2, 3], 1]}, "source.pump_split"),
            ({"distinguishability": {"bandwidth": 1}}, "source.distinguishability"),
            ({"arm_loss_db": None}, "source.arm_loss_db"),
            ({"dim": 3, "set_phases": [0.0]}, "source.set_phases"),
        ],
    )
    def test_dict_errors_name_field(self, data, field):
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.field == field


class TestCoincidences:
    def test_shape_errors(self):
        rho = effective_density(SourceConfig())
        with pytest.raises(StateError):
            coincidence_probs(rho, np.eye(3), np.eye(3))
        with pytest.raises(StateError):
            coincidence_probs(rho, np.eye(2), np.eye(3))

    @given(st.integers(2, 4), st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_probs_sum_to_one(self, n, p, seed):
        rng = np.random.default_rng(seed)
        split = rng.normal(size=n) + 1j * rng.normal(size=n)
        cfg = SourceConfig(dim=n, pump_split=tuple(split), set_phases=tuple(rng.uniform(0, 6, n - 1)),
                           distinguishability=p)
        probs = coincidence_probs(effective_density(cfg), haar_unitary(n, rng), haar_unitary(n, rng))
        assert abs(probs.sum() - 1) < 1e-12
        assert probs.min() >= 0

    def test_direct_measurement_is_correlated(self):
        rho = effective_density(SourceConfig())
        probs = coincidence_probs(rho, np.eye(2), np.eye(2))
        assert np.allclose(probs, np.diag([0.5, 0.5]))

    @given(st.floats(0, 1), st.floats(-4, 4), st.floats(-4, 4))
    def test_balanced_correlation(self, p, a, b):
        rho = dephase(target_state(0.0), p)
        probs = coincidence_probs(rho, analyzer_unitary(AnalyzerSetting(0.5, a)),
                                  analyzer_unitary(AnalyzerSetting(0.5, b)))
        e = probs[0, 0] + probs[1, 1] - probs[0, 1] - probs[1, 0]
        assert abs(e - p * math.cos(a + b)) < 1e-12

    def test_exchange_symmetry(self, rng):
        # The correlated state is symmetric under swapping the photons.
        rho = effective_density(SourceConfig(dim=3, set_phases=(0.4, 1.1)))
        u, v = haar_unitary(3, rng), haar_unitary(3, rng)
        assert np.allclose(coincidence_probs(rho, u, v), coincidence_probs(rho, v, u).T, atol=1e-14)


class TestEpr:
    def test_phases(self):
        assert epr_phases(4, 1) == pytest.approx((math.pi / 2, math.pi, 3 * math.pi / 2))

    @pytest.mark.parametrize("n", range(2, 7))
    def test_perfect_and_distinct(self, n):
        tables = [epr_correlation_table(n, k) for k in range(n)]
        assert all(is_perfectly_correlated(t) for t in tables)
        patterns = {tuple(map(tuple, np.argwhere(t > 0.5 / n))) for t in tables}
        assert len(patterns) == n

    def test_pattern_rule(self):
        n = 5
        for k in range(n):
            t = epr_correlation_table(n, k)
            for a, b in np.argwhere(t > 0.1):
                assert (a + b) % n == k

    def test_predicate_rejects(self):
        assert not is_perfectly_correlated(np.full((2, 2), 0.25))
        t = np.diag([0.5, 0.5])
        t[0, 1] = 1e-9
        assert not is_perfectly_correlated(t)

    def test_bad_k(self):
        with pytest.raises(ConfigError):
            epr_correlation_table(3, 3)
        with pytest.raises(ConfigError):
            epr_correlation_table(1, 0)
