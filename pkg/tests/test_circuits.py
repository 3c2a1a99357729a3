import numpy as np
import pytest

from spinbench.circuits import (
    Circuit,
    CircuitError,
    Measure,
    MatrixGate,
    NoiseModel,
    PauliGate,
    PhXZ,
    TwoQubit5Angle,
    decompose_controlled_pauli,
    fsim5_matrix,
    gate_matrix,
    output_distribution,
    sample,
    simulate,
    simulate_noisy,
    trotter_circuit,
    uniform_confusion,
)
from spinbench.models import BondTopology, build_heisenberg, preset, build_hamiltonian
from spinbench.oracle import propagator
from spinbench.pauli import PauliSum, PauliTerm, basis_state, dense_matrix


def circuit_unitary(c: Circuit) -> np.ndarray:
    dim = 2 ** c.n_qubits
    return np.column_stack(
        [simulate(c, np.eye(dim, dtype=complex)[:, k]) for k in range(dim)])


def controlled_unitary(P: PauliTerm, n: int) -> np.ndarray:
    """Controlled-P with the control on the last qubit (LSB)."""
    dim = 2 ** (n + 1)
    Pm = dense_matrix(PauliSum([P], n_qubits=n))
    out = np.zeros((dim, dim), dtype=complex)
    for r in range(dim):
        for s in range(dim):
            if (r & 1) != (s & 1):
                continue
            blk = np.eye(2 ** n)[r >> 1, s >> 1] if (r & 1) == 0 else Pm[r >> 1, s >> 1]
            out[r, s] = blk
    return out


class TestGateMatrices:
    def test_phxz_x(self):
        assert np.allclose(PhXZ(0, x_exp=1.0).matrix(), [[0, 1], [1, 0]])

    def test_phxz_is_unitary(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            m = PhXZ(0, *rng.uniform(-2, 2, 3)).matrix()
            assert np.abs(m.conj().T @ m - np.eye(2)).max() < 1e-12

    def test_fsim_identity_at_zero(self):
        assert np.allclose(fsim5_matrix(0, 0, 0, 0, 0), np.eye(4))

    def test_fsim_ideal_squares_to_iswap_dag(self):
        s = fsim5_matrix(np.pi / 4, 0, 0, 0, 0)
        iswap_dag = np.array([[1, 0, 0, 0], [0, 0, -1j, 0],
                              [0, -1j, 0, 0], [0, 0, 0, 1]])
        assert np.abs(s @ s - iswap_dag).max() < 1e-12

    def test_fsim_unitary_and_excitation_conserving(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            u = fsim5_matrix(*rng.uniform(-np.pi, np.pi, 5))
            assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-12
            assert u[1, 0] == 0 and u[2, 0] == 0  # no excitation from |00>
            assert u[0, 1] == 0 and u[0, 2] == 0

    def test_measure_has_no_matrix(self):
        with pytest.raises(CircuitError):
            gate_matrix(Measure((0,)))

    def test_two_qubit_needs_distinct(self):
        with pytest.raises(CircuitError):
            TwoQubit5Angle(1, 1)


class TestCircuit:
    def test_moment_disjointness(self):
        c = Circuit(2)
        with pytest.raises(CircuitError):
            c.append_moment([PhXZ(0), PhXZ(0)])

    def test_out_of_range(self):
        c = Circuit(2)
        with pytest.raises(CircuitError):
            c.append(PhXZ(5))

    def test_earliest_packing(self):
        c = Circuit(3)
        c.append(PhXZ(0))
        c.append(PhXZ(1))       # same moment
        c.append(PhXZ(0))       # new moment
        c.append(PhXZ(2))       # slots into the first moment
        assert len(c.moments) == 2
        assert {g.qubit for g in c.moments[0]} == {0, 1, 2}

    def test_json_roundtrip(self):
        c = Circuit(3)
        c.append_moment([PhXZ(0, 0.3, -0.2, 0.1), PauliGate(1, "Y")])
        c.append_moment([TwoQubit5Angle(0, 1, 0.7, 0.1, 0, 0, 0)])
        c.append_moment([MatrixGate((2,), np.array([[0, 1], [1, 0]]))])
        c.append_moment([Measure((0, 1, 2))])
        c2 = Circuit.from_json(c.to_json())
        assert len(c2.moments) == len(c.moments)
        u1, u2 = circuit_unitary(c), circuit_unitary(c2)
        assert np.abs(u1 - u2).max() < 1e-12

    def test_gate_counts(self):
        c = Circuit(2)
        c.append_moment([PhXZ(0), PhXZ(1)])
        c.append_moment([TwoQubit5Angle(0, 1)])
        c.append_moment([Measure((0, 1))])
        counts = c.gate_counts()
        assert counts == {"single_qubit": 2, "two_qubit": 1, "measure": 1,
                          "matrix": 0}


class TestSimulate:
    def test_empty_circuit(self):
        psi = basis_state(2, 1)
        assert np.allclose(simulate(Circuit(2), psi), psi)

    def test_x_flips(self):
        c = Circuit(1)
        c.append(PhXZ(0, x_exp=1.0))
        assert np.allclose(simulate(c, basis_state(1, 0)), basis_state(1, 1))

    def test_random_circuit_against_dense_product(self):
        rng = np.random.default_rng(8)
        n = 4
        c = Circuit(n)
        ref = np.eye(2 ** n, dtype=complex)
        for _ in range(6):
            gates = [PhXZ(q, *rng.uniform(-1, 1, 3)) for q in range(n)]
            c.append_moment(gates)
            layer = np.array([[1]], dtype=complex)
            for g in gates:
                layer = np.kron(layer, g.matrix())
            ref = layer @ ref
            pair = (int(rng.integers(0, n - 1)),)
            g2 = TwoQubit5Angle(pair[0], pair[0] + 1, *rng.uniform(-1, 1, 5))
            c.append_moment([g2])
            emb = np.kron(np.kron(np.eye(2 ** pair[0]), g2.matrix()),
                          np.eye(2 ** (n - pair[0] - 2)))
            ref = emb @ ref
        psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
        psi /= np.linalg.norm(psi)
        assert np.abs(simulate(c, psi) - ref @ psi).max() < 1e-10
        assert abs(np.linalg.norm(simulate(c, psi)) - 1.0) < 1e-12

    def test_angle_map_substitution(self):
        c = Circuit(2)
        c.append_moment([TwoQubit5Angle(0, 1)])
        psi = (basis_state(2, 1) + basis_state(2, 2)) / np.sqrt(2)
        sub = {(0, 1): (np.pi / 3, 0.1, 0.0, 0.0, 0.0)}
        out = simulate(c, psi, angle_map=sub)
        ref = fsim5_matrix(np.pi / 3, 0.1, 0, 0, 0) @ psi
        assert np.abs(out - ref).max() < 1e-12


class TestNoisyBackend:
    def test_ideal_noise_matches_pure(self):
        rng = np.random.default_rng(12)
        for n in (2, 3, 5):
            c = Circuit(n)
            for _ in range(3):
                c.append_moment([PhXZ(q, *rng.uniform(-1, 1, 3)) for q in range(n)])
                if n >= 2:
                    c.append_moment([TwoQubit5Angle(0, 1, *rng.uniform(-1, 1, 5))])
            psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
            psi /= np.linalg.norm(psi)
            rho = simulate_noisy(c, psi, NoiseModel.ideal())
            pure = simulate(c, psi)
            assert np.abs(rho - np.outer(pure, pure.conj())).max() < 1e-10

    def test_single_moment_z_decay(self):
        p = 0.0125
        c = Circuit(1)
        c.append_moment([PhXZ(0)])  # identity gate, one noisy moment
        rho = simulate_noisy(c, basis_state(1, 0), NoiseModel(depol_p=p))
        z = (rho[0, 0] - rho[1, 1]).real
        assert abs(z - (1 - 4 * p)) < 1e-12

    def test_z_decays_monotonically_with_depth(self):
        p = 0.01
        values = []
        for depth in (1, 3, 6, 10):
            c = Circuit(1)
            for _ in range(depth):
                c.append_moment([PhXZ(0)])
            rho = simulate_noisy(c, basis_state(1, 0), NoiseModel(depol_p=p))
            values.append((rho[0, 0] - rho[1, 1]).real)
        assert all(values[k + 1] < values[k] for k in range(len(values) - 1))

    def test_channel_is_cptp(self):
        rng = np.random.default_rng(21)
        n = 3
        c = Circuit(n)
        for _ in range(4):
            c.append_moment([PhXZ(q, *rng.uniform(-1, 1, 3)) for q in range(n)])
            c.append_moment([TwoQubit5Angle(0, 2, *rng.uniform(-1, 1, 5))])
        rho = simulate_noisy(c, basis_state(n, 3), NoiseModel(depol_p=0.02))
        assert abs(np.trace(rho).real - 1.0) < 1e-10
        assert np.linalg.eigvalsh(rho).min() > -1e-9

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            NoiseModel(depol_p=0.5)

    def test_gate_angle_offsets_applied(self):
        off = (0.07, 0.14, 0.0, 0.0, 0.0)
        nm = NoiseModel(gate_angle_offsets={(0, 1): off})
        c = Circuit(2)
        c.append_moment([TwoQubit5Angle(0, 1)])
        psi = (basis_state(2, 1) + 1j * basis_state(2, 2)) / np.sqrt(2)
        rho = simulate_noisy(c, psi, nm)
        ref = fsim5_matrix(np.pi / 4 + 0.07, 0.14, 0, 0, 0) @ psi
        assert np.abs(rho - np.outer(ref, ref.conj())).max() < 1e-10


class TestSampling:
    def test_requires_measurement(self):
        with pytest.raises(CircuitError):
            sample(Circuit(1), 10)

    def test_all_zeros_ideal(self):
        c = Circuit(1)
        c.append_moment([Measure((0,))])
        assert sample(c, 100, seed=1) == {"0": 100}

    def test_seed_reproducibility(self):
        c = Circuit(2)
        c.append_moment([PhXZ(0, x_exp=0.5), PhXZ(1, x_exp=0.25)])
        c.append_moment([Measure((0, 1))])
        a = sample(c, 5000, seed=123)
        b = sample(c, 5000, seed=123)
        assert a == b
        assert sample(c, 5000, seed=124) != a

    def test_readout_flip_statistics(self):
        c = Circuit(1)
        c.append_moment([Measure((0,))])
        nm = NoiseModel(readout_confusion=uniform_confusion(1, 0.1))
        shots = 40000
        counts = sample(c, shots, nm, seed=7)
        freq = counts.get("1", 0) / shots
        sigma = np.sqrt(0.1 * 0.9 / shots)
        assert abs(freq - 0.1) < 3 * sigma

    def test_plus_state_balanced(self):
        c = Circuit(1)
        c.append_moment([PhXZ(0, x_exp=0.5, z_exp=1.0, axis_phase=-0.5)])  # H
        c.append_moment([Measure((0,))])
        shots = 40000
        counts = sample(c, shots, seed=11)
        freq = counts["0"] / shots
        assert abs(freq - 0.5) < 3 * np.sqrt(0.25 / shots)

    def test_measured_qubit_order(self):
        # ancilla-style listing: qubit 1 first in the bitstring
        c = Circuit(2)
        c.append_moment([PhXZ(0, x_exp=1.0)])  # |1> on qubit 0
        c.append_moment([Measure((1, 0))])
        counts = sample(c, 10, seed=0)
        assert counts == {"01": 10}


class TestControlledPauli:
    @pytest.mark.parametrize("letters", ["Z", "X", "Y", "ZZ", "XY", "ZXZ"])
    def test_matches_dense_controlled_unitary(self, letters):
        n = len(letters)
        P = PauliTerm(1.0, letters)
        c = decompose_controlled_pauli(P, ancilla=n, n_qubits=n + 1)
        u = circuit_unitary(c)
        ref = controlled_unitary(P, n)
        phase = u[0, 0]
        assert abs(abs(phase) - 1) < 1e-9
        assert np.abs(u / phase - ref).max() < 1e-8

    def test_identity_is_empty(self):
        c = decompose_controlled_pauli(PauliTerm(1.0, "II"), 2, 3)
        assert len(c.moments) == 0

    def test_negative_coefficient(self):
        P = PauliTerm(-1.0, "Z")
        c = decompose_controlled_pauli(P, 1, 2)
        u = circuit_unitary(c)
        ref = controlled_unitary(P, 1)
        assert np.abs(u / u[0, 0] - ref).max() < 1e-8

    def test_two_qubit_cost(self):
        # weight w costs 2 gates per CZ and per CNOT: 4w - 2 in total
        for letters, cost in (("Z", 2), ("ZZ", 6), ("ZZZ", 10)):
            c = decompose_controlled_pauli(PauliTerm(1.0, letters),
                                           len(letters), len(letters) + 1)
            assert c.gate_counts()["two_qubit"] == cost

    def test_ancilla_overlap_rejected(self):
        with pytest.raises(CircuitError):
            decompose_controlled_pauli(PauliTerm(1.0, "ZZ"), 1, 2)


class TestTrotter:
    def test_single_term_exact_at_any_dt(self):
        H = PauliSum([PauliTerm(0.3, "XX")])
        for dt in (0.5, 0.1):
            c = trotter_circuit(H, 1.0, dt)
            u = circuit_unitary(c)
            ref = propagator(H, 1.0)
            phase = np.vdot(ref.ravel(), u.ravel())
            phase /= abs(phase)
            assert np.abs(u - phase * ref).max() < 1e-9

    def test_two_site_heisenberg_terms_commute_exactly(self):
        # all three bond terms commute, so the product formula is exact;
        # the first-order scaling check lives on the 3-site chain below
        topo = BondTopology(2, ((0, 1, "generic"),))
        H = build_heisenberg(topo, 1.0)
        u = circuit_unitary(trotter_circuit(H, 1.0, 0.1))
        ref = propagator(H, 1.0)
        phase = np.vdot(ref.ravel(), u.ravel())
        phase /= abs(phase)
        assert np.abs(u - phase * ref).max() < 1e-10

    def test_first_order_halving_on_chain(self):
        topo = BondTopology(3, ((0, 1, "generic"), (1, 2, "generic")))
        H = build_heisenberg(topo, 1.0)
        ref = propagator(H, 1.0)

        def err(dt):
            u = circuit_unitary(trotter_circuit(H, 1.0, dt))
            phase = np.vdot(ref.ravel(), u.ravel())
            phase /= abs(phase)
            return np.linalg.norm(u - phase * ref, 2)

        ratio = err(0.05) / err(0.1)
        assert 0.4 < ratio < 0.6

    def test_kitaev6_gate_count_at_t3(self):
        topo, params = preset("kitaev6")
        H = build_hamiltonian(topo, params)
        c = trotter_circuit(H, 3.0, 0.1)
        assert c.gate_counts()["two_qubit"] > 500

    def test_partial_last_step(self):
        H = PauliSum([PauliTerm(0.4, "ZZ"), PauliTerm(0.2, "XI")])
        c = trotter_circuit(H, 0.25, 0.1)  # two full steps + 0.05 remainder
        u = circuit_unitary(c)
        ref = propagator(H, 0.25)
        phase = np.vdot(ref.ravel(), u.ravel())
        phase /= abs(phase)
        assert np.abs(u - phase * ref).max() < 0.02
