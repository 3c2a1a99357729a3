import numpy as np
import pytest

from spinbench.models import BondTopology, build_heisenberg, preset, build_hamiltonian
from spinbench.oracle import (
    EigenSystem,
    LabeledSpectrum,
    dynamic_corr_exact,
    eigensystem,
    propagator,
    spin_matrices,
    spin_s_eigensystem,
    static_corr_exact,
    thermal_state,
)
from spinbench.pauli import PauliSum, PauliTerm, dense_matrix, is_density_matrix


def fes4_system():
    topo, params = preset("fes4")
    H = build_heisenberg(topo, params.J, params.J_prime)
    return H, eigensystem(H)


class TestEigensystem:
    def test_fes4_levels_and_spins(self):
        H, es = fes4_system()
        exc = es.spectrum.excitations()
        # (excitation, multiplets, S) from the double-pair recoupling
        expected = [(0.0, 1, 0.0), (0.340, 1, 0.0), (1.170, 2, 1.0),
                    (1.340, 1, 1.0), (3.340, 1, 2.0)]
        assert len(exc) == len(expected)
        for (e, d, s), (ee, dd, ss) in zip(exc, expected):
            assert abs(e - ee) < 1e-9
            assert d == dd and s == ss

    def test_fes4_ground_energy(self):
        # cross-check via the pair-recoupling formula: E(s12=s34=s=0) =
        # -(3/4) J' - ... evaluates to -1.755 for J=1, J'=1.17
        _, es = fes4_system()
        assert abs(es.spectrum.ground_energy - (-1.755)) < 1e-10

    def test_fes8_multiplet_bookkeeping(self):
        topo, params = preset("fes8")
        H = build_heisenberg(topo, params.J)
        es = eigensystem(H)
        levels = {(round(e - es.spectrum.ground_energy, 3), d, s)
                  for e, d, s in es.spectrum.levels}
        assert (0.917, 1, 1.0) in levels
        assert (1.07, 4, 0.0) in levels     # four degenerate singlet multiplets
        assert (1.463, 4, 1.0) in levels
        assert (2.779, 1, 2.0) in levels

    def test_dimension_bookkeeping(self):
        _, es = fes4_system()
        assert es.spectrum.dimension == 16

    def test_site_relabeling_invariance(self):
        # swapping the two J' pairs is a graph automorphism
        topo, params = preset("fes4")
        perm = {0: 2, 1: 3, 2: 0, 3: 1}
        bonds = tuple((perm[i], perm[j], l) for i, j, l in topo.bonds)
        H1 = build_heisenberg(topo, params.J, params.J_prime)
        H2 = build_heisenberg(BondTopology(4, bonds), params.J, params.J_prime)
        e1 = np.linalg.eigvalsh(dense_matrix(H1))
        e2 = np.linalg.eigvalsh(dense_matrix(H2))
        assert np.abs(e1 - e2).max() < 1e-10

    def test_kh_levels_unlabeled(self):
        topo, params = preset("kh6")
        H = build_hamiltonian(topo, params)
        es = eigensystem(H)
        assert all(s is None for _, _, s in es.spectrum.levels)

    def test_csv_export(self):
        _, es = fes4_system()
        csv = es.spectrum.to_csv()
        lines = csv.strip().splitlines()
        assert lines[0] == "energy,degeneracy,two_s"
        assert len(lines) == len(es.spectrum.levels) + 1


class TestSpinS:
    def test_spin_matrices_su2(self):
        for s in (0.5, 1.0, 2.5):
            sx, sy, sz = spin_matrices(s)
            comm = sx @ sy - sy @ sx
            assert np.abs(comm - 1j * sz).max() < 1e-12
            casimir = sx @ sx + sy @ sy + sz @ sz
            assert np.abs(casimir - s * (s + 1) * np.eye(len(sx))).max() < 1e-12

    def test_two_site_spin1_levels(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        spec = spin_s_eigensystem(topo, 1.0, 0.0, 1.0)
        # J S1.S2 with S=1: E = (S(S+1) - 4)/2 for S = 0,1,2
        energies = [round(e, 9) for e, _, _ in spec.levels]
        assert np.allclose(energies, [-2.0, -1.0, 1.0])
        spins = [s for _, _, s in spec.levels]
        assert spins == [0.0, 1.0, 2.0]

    def test_spin_half_matches_pauli_path(self):
        topo, params = preset("fes4")
        spec = spin_s_eigensystem(topo, params.J, params.J_prime, 0.5)
        H, es = fes4_system()
        flat_s = [e for e, d, s in spec.levels
                  for _ in range(d * int(round(2 * s + 1)))]
        assert np.abs(np.array(flat_s) - es.energies).max() < 1e-9

    def test_fes4_spin_52_low_excitations(self):
        topo, params = preset("fes4")
        spec = spin_s_eigensystem(topo, params.J, params.J_prime, 2.5)
        e0 = spec.ground_energy
        exc = [(round(e - e0, 4), d, s) for e, d, s in spec.levels[:6]]
        assert exc[0] == (0.0, 1, 0.0)
        assert exc[1] == (0.34, 1, 0.0)
        assert exc[2] == (1.02, 1, 0.0)
        assert exc[3] == (1.17, 2, 1.0)
        assert exc[4] == (1.34, 1, 1.0)

    def test_iterative_matches_dense(self):
        topo = BondTopology(3, ((0, 1, "generic"), (1, 2, "generic")))
        dense = spin_s_eigensystem(topo, 1.0, 0.0, 1.0, mode="dense")
        lanczos = spin_s_eigensystem(topo, 1.0, 0.0, 1.0, mode="iterative", k=8)
        dense_flat = [e for e, d, s in dense.levels
                      for _ in range(d * int(round(2 * s + 1)))]
        # labels are best-effort for Ritz clusters cut at the k boundary;
        # the contract is about the lowest energies
        lanc_flat = sorted(e for e, d, s in lanczos.levels
                           for _ in range(d * (int(round(2 * s + 1))
                                               if s is not None else 1)))
        m = min(len(lanc_flat), 6)
        assert np.abs(np.array(dense_flat[:m]) - np.array(lanc_flat[:m])).max() < 1e-8


class TestThermalState:
    def test_infinite_temperature(self):
        H, _ = fes4_system()
        rho = thermal_state(H, 0.0)
        assert np.abs(rho - np.eye(16) / 16).max() < 1e-12

    def test_ground_state_limit(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        H = build_heisenberg(topo, 1.0)
        rho = thermal_state(H, 50.0)
        singlet = (np.array([0, 1, -1, 0], dtype=complex)) / np.sqrt(2)
        proj = np.outer(singlet, singlet.conj())
        assert np.abs(rho - proj).max() < 1e-8

    def test_valid_density_matrix(self):
        H, _ = fes4_system()
        assert is_density_matrix(thermal_state(H, 2.0))

    def test_energy_matches_partition_function(self):
        H, es = fes4_system()
        rho = es.thermal_state(2.0)
        e_rho = np.trace(rho @ dense_matrix(H)).real
        w = np.exp(-2.0 * (es.energies - es.energies[0]))
        e_part = np.sum(es.energies * w) / np.sum(w)
        assert abs(e_rho - e_part) < 1e-10

    def test_energy_monotone_in_temperature(self):
        H, es = fes4_system()
        temps = np.linspace(0.2, 20, 40)
        energies = [es.thermal_energy(t) for t in temps]
        assert np.all(np.diff(energies) > -1e-12)

    def test_negative_beta_rejected(self):
        H, _ = fes4_system()
        with pytest.raises(ValueError):
            thermal_state(H, -1.0)


class TestCorrelations:
    def test_static_infinite_temperature(self):
        H, es = fes4_system()
        zz = PauliSum([PauliTerm(1.0, "ZZII")])
        assert abs(static_corr_exact(H, 0.0, zz, es=es)) < 1e-12

    def test_fes8_low_t_pairing_signs(self):
        topo, params = preset("fes8")
        H = build_heisenberg(topo, params.J)
        es = eigensystem(H)
        z23 = PauliSum([PauliTerm(1.0, "IZZIIIII")])   # sites 2,3 (1-indexed)
        assert static_corr_exact(H, 2.0, z23, es=es) < 0  # anti-aligned pair

    def test_dynamic_t0_equals_static_product(self):
        H, es = fes4_system()
        A = PauliSum([PauliTerm(1.0, "ZIII")])
        B = PauliSum([PauliTerm(1.0, "IZII")])
        ser = dynamic_corr_exact(H, 2.0, A, B, np.array([0.0]), es=es)
        ab = A @ B
        assert abs(ser.values[0] - static_corr_exact(H, 2.0, ab, es=es)) < 1e-10

    def test_dynamic_against_direct_trace(self):
        H, es = fes4_system()
        A = PauliSum([PauliTerm(1.0, "ZIII")])
        B = PauliSum([PauliTerm(1.0, "IZII")])
        ts = np.array([0.0, 0.7, 1.4])
        ser = dynamic_corr_exact(H, 2.0, A, B, ts, es=es)
        rho = es.thermal_state(2.0)
        Am, Bm = dense_matrix(A), dense_matrix(B)
        for k, t in enumerate(ts):
            u = es.propagator(t)
            val = np.trace(rho @ u.conj().T @ Am @ u @ Bm)
            assert abs(ser.values[k] - val) < 1e-10

    def test_kms_reflection(self):
        # C(-t) = C(t)* for hermitian A = B at thermal equilibrium
        H, es = fes4_system()
        A = PauliSum([PauliTerm(1.0, "ZIII")])
        ts = np.array([0.4, 1.1])
        fwd = dynamic_corr_exact(H, 2.0, A, A, ts, es=es)
        bwd = dynamic_corr_exact(H, 2.0, A, A, -ts, es=es)
        assert np.abs(bwd.values - fwd.values.conj()).max() < 1e-8


class TestPropagator:
    def test_identity_at_zero(self):
        H, es = fes4_system()
        assert np.abs(es.propagator(0.0) - np.eye(16)).max() < 1e-12

    def test_unitarity(self):
        H, es = fes4_system()
        u = es.propagator(1.3)
        assert np.abs(u.conj().T @ u - np.eye(16)).max() < 1e-10

    def test_imaginary_time_weights_sum_to_partition_function(self):
        # sum_i |c_i|^2 = Tr e^{-beta H} with c_i the column norms
        H, es = fes4_system()
        beta = 2.0
        prop = es.propagator(beta / 2, imaginary=True)
        total = np.sum(np.linalg.norm(prop, axis=0) ** 2)
        part = np.sum(np.exp(-beta * es.energies))
        assert abs(total - part) < 1e-8 * part

    def test_matches_expm(self):
        import scipy.linalg

        H, es = fes4_system()
        t = 0.9
        ref = scipy.linalg.expm(-1j * t * dense_matrix(H))
        assert np.abs(es.propagator(t) - ref).max() < 1e-10
        ref_im = scipy.linalg.expm(-t * dense_matrix(H))
        assert np.abs(es.propagator(t, imaginary=True) - ref_im).max() < 1e-9
