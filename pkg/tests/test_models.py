import numpy as np
import pytest

from spinbench.models import (
    BondTopology,
    ModelParams,
    TopologyError,
    bond_matching,
    build_heisenberg,
    build_kitaev_heisenberg,
    commuting_reference,
    find_symmetry,
    parity_candidates,
    preset,
)
from spinbench.oracle import propagator
from spinbench.pauli import PauliSum, PauliTerm, commutes, dense_matrix


class TestBondTopology:
    def test_validation(self):
        with pytest.raises(TopologyError):
            BondTopology(2, ((0, 0, "generic"),))
        with pytest.raises(TopologyError):
            BondTopology(2, ((0, 3, "generic"),))
        with pytest.raises(TopologyError):
            BondTopology(3, ((0, 1, "generic"), (1, 0, "generic")))
        with pytest.raises(TopologyError):
            BondTopology(2, ((0, 1, "quartic"),))

    def test_kitaev_coloring_constraint(self):
        # site 1 would touch two X bonds
        with pytest.raises(TopologyError):
            BondTopology(3, ((0, 1, "kitaev-x"), (1, 2, "kitaev-x")))

    def test_json_roundtrip(self):
        topo, _ = preset("kh6")
        topo2 = BondTopology.from_json(topo.to_json())
        assert topo2 == topo


class TestBuildHeisenberg:
    def test_two_site_spectrum(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        H = build_heisenberg(topo, 1.0)
        ev = np.linalg.eigvalsh(dense_matrix(H))
        assert np.allclose(sorted(ev), [-0.75, 0.25, 0.25, 0.25], atol=1e-12)
        assert abs((ev[1] - ev[0]) - 1.0) < 1e-12

    def test_fes4_excitations(self):
        topo, params = preset("fes4")
        H = build_heisenberg(topo, params.J, params.J_prime)
        ev = np.linalg.eigvalsh(dense_matrix(H))
        exc = ev - ev[0]
        assert abs(ev[0] - (-1.755)) < 1e-10
        for target in (0.340, 1.170, 1.340, 3.340):
            assert np.min(np.abs(exc - target)) < 1e-9

    def test_zero_coupling_is_zero_operator(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        H = build_heisenberg(topo, 0.0)
        assert len(H) == 0

    def test_rejects_kitaev_bonds(self):
        topo = BondTopology(2, ((0, 1, "kitaev-z"),))
        with pytest.raises(TopologyError):
            build_heisenberg(topo, 1.0)

    def test_three_terms_per_bond(self):
        topo, params = preset("fes4")
        H = build_heisenberg(topo, params.J, params.J_prime)
        assert len(H) == 3 * len(topo.bonds)

    def test_isotropy_under_global_spin_rotation(self):
        # cyclic relabeling X->Y->Z->X on every site leaves the spectrum alone
        topo, params = preset("fes4")
        H = build_heisenberg(topo, params.J, params.J_prime)
        rot = {"X": "Y", "Y": "Z", "Z": "X", "I": "I"}
        rotated = PauliSum(
            [PauliTerm(t.coefficient, "".join(rot[c] for c in t.letters))
             for t in H.terms])
        ev1 = np.linalg.eigvalsh(dense_matrix(H))
        ev2 = np.linalg.eigvalsh(dense_matrix(rotated))
        assert np.abs(ev1 - ev2).max() < 1e-10


class TestBuildKitaevHeisenberg:
    def test_kitaev_point_single_bond(self):
        topo = BondTopology(2, ((0, 1, "kitaev-z"),))
        H = build_kitaev_heisenberg(topo, ModelParams(K=(0, 0, -1.0)))
        assert len(H) == 1
        assert abs(H.coefficient_of("ZZ") - (-0.25)) < 1e-15

    def test_eq2_parity_symmetry_on_hexagon(self):
        topo, params = preset("kh6")
        eq2 = ModelParams(J=params.J, K=params.K)  # Gamma terms off
        H = build_kitaev_heisenberg(topo, eq2)
        Hm = dense_matrix(H)
        for axis in "XYZ":
            pi = dense_matrix(PauliSum([PauliTerm(1.0, axis * 6)]))
            assert np.abs(Hm @ pi - pi @ Hm).max() < 1e-10

    def test_full_coupling_term_count(self):
        # per bond: 3 exchange + 1 Kitaev + 2 Gamma + 4 Gamma' = 10, with the
        # Kitaev letter merging into one of the exchange strings
        topo, params = preset("kh6")
        H = build_kitaev_heisenberg(topo, params)
        assert len(H) == 6 * 9

    def test_coefficients_read_back(self):
        topo, params = preset("kh6")
        H = build_kitaev_heisenberg(topo, params)
        # X-colored bond (0,1): XX carries (J + K_x)/4, YY and ZZ carry J/4
        assert abs(H.coefficient_of("XX" + "I" * 4)
                   - (params.J + params.K[0]) / 4) < 1e-12
        assert abs(H.coefficient_of("YY" + "I" * 4) - params.J / 4) < 1e-12
        # Gamma on the X bond couples Y and Z
        assert abs(H.coefficient_of("YZ" + "I" * 4) - params.Gamma / 4) < 1e-12
        # Gamma' couples X with each other axis
        assert abs(H.coefficient_of("XY" + "I" * 4)
                   - params.Gamma_prime / 4) < 1e-12

    def test_uncolored_bond_rejected(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        with pytest.raises(TopologyError):
            build_kitaev_heisenberg(topo, ModelParams(K=(1, 1, 1)))

    def test_hermitian(self):
        for name in ("kh6", "kh10", "kh-aniso", "kitaev6"):
            topo, params = preset(name)
            H = build_kitaev_heisenberg(topo, params)
            assert H.is_hermitian


class TestPresets:
    def test_fes4_shape(self):
        topo, params = preset("fes4")
        assert topo.n_sites == 4 and len(topo.bonds) == 6
        assert params.J == 1.0 and params.J_prime == 1.17
        jp = [b for b in topo.bonds if b[2] == "j-prime"]
        assert sorted((i, j) for i, j, _ in jp) == [(0, 1), (2, 3)]

    def test_kh6_shape(self):
        topo, _ = preset("kh6")
        assert topo.n_sites == 6 and len(topo.bonds) == 6
        colors = [b[2] for b in topo.bonds]
        for c in ("kitaev-x", "kitaev-y", "kitaev-z"):
            assert colors.count(c) == 2

    def test_kh10_shape(self):
        topo, params = preset("kh10")
        assert topo.n_sites == 10 and len(topo.bonds) == 11
        assert params.K == (-24.4, -24.4, -24.4)

    def test_aniso_parameters(self):
        topo, params = preset("kh-aniso")
        assert topo.n_sites == 10
        assert params.J == 0.4
        assert params.K[0] == -8.0
        assert abs(params.K[1] - (-8.0 / 6.0)) < 1e-15
        assert params.K[1] == params.K[2]

    def test_fes8_spectrum_signature(self):
        # bundled edge list must reproduce the double-cubane level structure
        topo, params = preset("fes8")
        assert topo.n_sites == 8 and len(topo.bonds) == 21
        H = build_heisenberg(topo, params.J)
        ev = np.linalg.eigvalsh(dense_matrix(H))
        exc = ev - ev[0]
        assert abs(exc[1] - 0.917) < 1e-3
        for target, states in ((1.070, 4), (1.463, 12), (2.779, 5),
                               (5.614, 7), (9.436, 9)):
            hits = np.sum(np.abs(exc - target) < 1.5e-3)
            assert hits == states, (target, hits)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            preset("fes16")


class TestCommutingReference:
    def test_kh6_matching_bonds(self):
        topo, params = preset("kh6")
        match = bond_matching(topo)
        assert [(i, j) for i, j, _ in match] == [(0, 1), (2, 3), (4, 5)]

    def test_two_site_reference_is_full(self):
        topo = BondTopology(2, ((0, 1, "generic"),))
        params = ModelParams(J=1.0)
        Hp = commuting_reference(topo, params)
        H = build_heisenberg(topo, 1.0)
        assert Hp.terms == H.terms

    def test_fes4_matching_disjoint(self):
        topo, params = preset("fes4")
        match = bond_matching(topo)
        assert [(i, j) for i, j, _ in match] == [(0, 1), (2, 3)]
        used = [s for i, j, _ in match for s in (i, j)]
        assert len(used) == len(set(used))

    def test_blocks_pairwise_commute(self):
        # terms living on different matched bonds have disjoint support and
        # commute; same-bond terms form one two-site block (they need not
        # commute termwise once Gamma' couplings are present)
        for name in ("fes4", "kh6", "kh10", "fes8"):
            topo, params = preset(name)
            Hp = commuting_reference(topo, params)
            terms = list(Hp.terms)
            for a in range(len(terms)):
                for b in range(a + 1, len(terms)):
                    sa, sb = set(terms[a].support), set(terms[b].support)
                    if sa != sb and not (sa & sb):
                        assert terms[a].commutes_with(terms[b])
                    elif sa != sb:
                        raise AssertionError("terms straddle matched bonds")

    def test_propagator_factorizes(self):
        # exact e^{-iH't} equals the product of per-bond propagators
        topo, params = preset("kh6")
        Hp = commuting_reference(topo, params)
        t = 0.37
        full = propagator(Hp, t)
        prod = np.eye(2 ** 6, dtype=complex)
        for i, j, label in bond_matching(topo):
            bond = BondTopology(6, ((i, j, label),))
            Hb = build_kitaev_heisenberg(bond, params)
            prod = prod @ propagator(Hb, t)
        assert np.abs(full - prod).max() < 1e-12


class TestFindSymmetry:
    def test_fes4_keeps_z_parity(self):
        topo, params = preset("fes4")
        H = build_heisenberg(topo, params.J, params.J_prime)
        kept = find_symmetry(H, parity_candidates(4))
        assert any(t.letters == "ZZZZ" for t in kept)

    def test_single_site_flip_rejected(self):
        topo, params = preset("fes4")
        H = build_heisenberg(topo, params.J, params.J_prime)
        kept = find_symmetry(H, [PauliTerm(1.0, "XIII")])
        assert kept == []

    def test_kitaev6_parities(self):
        topo, params = preset("kitaev6")
        H = build_kitaev_heisenberg(topo, params)
        kept = find_symmetry(H, parity_candidates(6))
        letters = {t.letters for t in kept}
        assert "ZZZZZZ" in letters

    def test_full_coupling_set_breaks_global_parity(self):
        # the Gamma' terms spoil every global Pauli product; post-selection
        # must therefore be disabled for this model
        topo, params = preset("kh6")
        H = build_kitaev_heisenberg(topo, params)
        assert find_symmetry(H, parity_candidates(6)) == []
