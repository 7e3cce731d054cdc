import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathqunit.statecore import (
    DensityMatrix,
    QuNitPair,
    StateError,
    basis_order,
    concurrence,
    dephase,
    fidelity,
    format_matrix,
    from_tensor_order,
    load_density,
    make_pair_state,
    parse_matrix,
    pure_density,
    save_density,
    tangle,
    target_state,
    to_tensor_order,
    trace_distance,
)

BELL = make_pair_state([1, 1])


def _dense_bell_dephased(p):
    # Independent construction in Kronecker order: (|00> + |11>)/sqrt2 with
    # coherence p between the two correlated terms.
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5
    rho[0, 3] = rho[3, 0] = 0.5 * p
    return rho


def _wootters_oracle(rho_kron):
    # Concurrence via the eigenvalues of the Hermitian R = sqrt(sqrt(rho) rho~ sqrt(rho)).
    sy = np.array([[0, -1j], [1j, 0]])
    flip = np.kron(sy, sy)
    rho_tilde = flip @ rho_kron.conj() @ flip
    w, v = np.linalg.eigh(rho_kron)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    m = sqrt_rho @ rho_tilde @ sqrt_rho
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


class TestPairState:
    def test_two_equal_amplitudes(self):
        s = make_pair_state([1, 1])
        assert np.allclose(s.amps, [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_balanced_ququart(self):
        s = make_pair_state([1, 1, 1, 1])
        assert s.dim == 4
        assert np.allclose(s.amps, 0.5)

    def test_three_four_five(self):
        s = make_pair_state([3, 4j])
        assert np.allclose(s.amps, [0.6, 0.8j], atol=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(StateError, match="degenerate amplitude vector"):
            make_pair_state([0, 0, 0])

    def test_unnormalized_direct_construction_rejected(self):
        with pytest.raises(StateError):
            QuNitPair(2, np.array([1.0, 1.0]))

    def test_amps_are_read_only(self):
        s = make_pair_state([1, 2])
        with pytest.raises(ValueError):
            s.amps[0] = 3

    @given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                    min_size=2, max_size=6))
    def test_normalization_property(self, amps):
        if np.linalg.norm(amps) < 1e-6:
            with pytest.raises(StateError):
                make_pair_state(np.array(amps) * 0)
            return
        s = make_pair_state(amps)
        assert abs(np.sum(np.abs(s.amps) ** 2) - 1) < 1e-12


class TestDensity:
    def test_bell_corners(self):
        rho = pure_density(BELL).entries
        expected = np.zeros((4, 4))
        expected[:2, :2] = 0.5
        assert np.allclose(rho, expected, atol=1e-15)

    def test_basis_order(self):
        assert basis_order(2) == ((0, 0), (1, 1), (0, 1), (1, 0))
        assert basis_order(3)[:3] == ((0, 0), (1, 1), (2, 2))
        assert len(basis_order(3)) == 9

    def test_tensor_order_roundtrip(self, rng):
        m = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
        assert np.array_equal(from_tensor_order(to_tensor_order(m, 3), 3), m)

    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=8))
    def test_pure_state_is_projector(self, parts):
        n = len(parts) // 2
        amps = np.array(parts[:n]) + 1j * np.array(parts[n: 2 * n])
        if np.linalg.norm(amps) < 1e-3:
            return
        rho = pure_density(make_pair_state(amps)).entries
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.abs(rho @ rho - rho).max() < 1e-12

    def test_invariants_enforced(self):
        with pytest.raises(StateError, match="Hermitian"):
            DensityMatrix(2, np.array([[0.5, 0.1], [0.0, 0.5]]))
        with pytest.raises(StateError, match="trace"):
            DensityMatrix(2, np.diag([0.5, 0.6]))
        with pytest.raises(StateError, match="semidefinite"):
            DensityMatrix(2, np.diag([1.1, -0.1]))
        DensityMatrix(2, np.diag([1 + 5e-10, -5e-10]))  # within the PSD tolerance

    def test_dephase_identity_and_full(self):
        assert np.allclose(dephase(BELL, 1.0).entries, pure_density(BELL).entries)
        assert np.allclose(dephase(BELL, 0.0).entries, np.diag([0.5, 0.5, 0, 0]))

    def test_dephase_range(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(StateError):
                dephase(BELL, bad)

    def test_dephase_only_touches_coherences(self):
        s = make_pair_state([1, 2j, -1])
        a, b = pure_density(s).entries, dephase(s, 0.3).entries
        assert np.allclose(np.diag(a), np.diag(b))
        off = ~np.eye(9, dtype=bool)
        assert np.allclose(b[off], 0.3 * a[off])


class TestMeasures:
    def test_self_fidelity(self):
        s = make_pair_state([1, 1j])
        assert fidelity(pure_density(s), s) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        mixed = DensityMatrix(4, np.eye(4) / 4)
        assert fidelity(mixed, BELL) == pytest.approx(0.25)
        assert tangle(mixed) == pytest.approx(0.0, abs=1e-12)

    def test_dephased_fidelity_against_dense_oracle(self):
        p = 0.956
        rho = dephase(BELL, p)
        psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
        oracle = np.real(psi.conj() @ _dense_bell_dephased(p) @ psi)
        assert fidelity(rho, BELL) == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.978, abs=1e-12)

    def test_bell_tangle(self):
        assert tangle(pure_density(BELL)) == pytest.approx(1.0, abs=1e-10)

    def test_dephased_tangle(self):
        rho = dephase(BELL, 0.956)
        assert tangle(rho) == pytest.approx(0.956**2, abs=1e-10)
        assert tangle(rho) == pytest.approx(0.9139, abs=1e-4)
        assert concurrence(rho) == pytest.approx(_wootters_oracle(_dense_bell_dephased(0.956)), abs=1e-10)

    def test_tangle_random_p(self, rng):
        for p in rng.uniform(0, 1, 100):
            assert abs(tangle(dephase(BELL, p)) - p**2) < 1e-10

    def test_tangle_matches_oracle_on_random_states(self, rng):
        from conftest import random_density

        for rank in (1, 2, 4):
            for _ in range(10):
                kron = random_density(rng, rank)
                rho = DensityMatrix(4, from_tensor_order(kron, 2))
                assert concurrence(rho) == pytest.approx(_wootters_oracle(kron), abs=1e-7)

    def test_tangle_rejects_qutrits(self):
        with pytest.raises(StateError, match="two qubits only"):
            tangle(pure_density(make_pair_state([1, 1, 1])))

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(StateError, match="dimension"):
            fidelity(pure_density(BELL), make_pair_state([1, 1, 1]))

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_fidelity_monotone_in_p(self, p1, p2):
        if abs(p1 - p2) < 1e-9:
            return
        lo, hi = sorted((p1, p2))
        assert fidelity(dephase(BELL, lo), BELL) < fidelity(dephase(BELL, hi), BELL)

    @given(st.floats(0, 2 * math.pi), st.floats(0, 1))
    def test_global_phase_invariance(self, phase, p):
        s = make_pair_state([0.6, 0.8j])
        s2 = make_pair_state(np.exp(1j * phase) * s.amps)
        assert fidelity(dephase(s2, p), s2) == pytest.approx(fidelity(dephase(s, p), s), abs=1e-12)
        assert tangle(dephase(s2, p)) == pytest.approx(tangle(dephase(s, p)), abs=1e-10)

    def test_target_state_phase(self):
        assert np.allclose(target_state().amps, [1 / math.sqrt(2), -1 / math.sqrt(2)])
        assert np.allclose(target_state(0.0).amps, BELL.amps)

    def test_trace_distance(self):
        a = np.diag([1.0, 0, 0, 0])
        b = np.diag([0, 1.0, 0, 0])
        assert trace_distance(a, b) == pytest.approx(1.0)
        assert trace_distance(a, a) == 0.0


class TestSerialization:
    def test_roundtrip_exact(self, tmp_path, rng):
        from conftest import random_density

        rho = DensityMatrix(4, random_density(rng))
        path = tmp_path / "rho.txt"
        save_density(rho, path)
        assert np.array_equal(load_density(path).entries, rho.entries)

    def test_format(self):
        text = format_matrix(np.eye(2))
        assert text.splitlines()[0] == "dim=2"
        assert text.splitlines()[1] == "1+0j 0+0j"

    @pytest.mark.parametrize("text", ["", "2\n1 0\n0 1\n", "dim=2\n1 0\n", "dim=2\n1 0\n0\n"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            parse_matrix(text)
