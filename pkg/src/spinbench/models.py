"""Spin-model Hamiltonians on bond topologies.

Two families are covered:

* Heisenberg exchange models of iron-sulfur cubane clusters, built from
  ``generic`` (J) and ``j-prime`` (J') bonds, with spin operators S = sigma/2;
* Kitaev-Heisenberg models of edge-sharing honeycomb fragments, where each
  bond carries a color ``kitaev-x|y|z`` selecting the Ising axis of the K
  term, optionally augmented by symmetric off-diagonal Gamma and Gamma'
  couplings.

Energies are in units of |J| for the cubane models and taken as given for
the honeycomb parameter sets; times elsewhere in the package are in the
corresponding inverse energy units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .pauli import PauliSum, PauliTerm, commutes

GENERIC = "generic"
J_PRIME = "j-prime"
KITAEV = {"kitaev-x": "X", "kitaev-y": "Y", "kitaev-z": "Z"}
LABELS = {GENERIC, J_PRIME, *KITAEV}

_AXES = "XYZ"

PRESET_NAMES = ("fes4", "fes8", "kh6", "kh10", "kh-aniso", "kitaev6")


class TopologyError(ValueError):
    """Malformed bond topology."""


@dataclass(frozen=True)
class BondTopology:
    """Sites on vertices, exchange pathways on edges."""

    n_sites: int
    bonds: tuple[tuple[int, int, str], ...]

    def __post_init__(self):
        seen = set()
        color_count: dict[tuple[int, str], int] = {}
        norm = []
        for i, j, label in self.bonds:
            label = label.lower()
            if label not in LABELS:
                raise TopologyError(f"unknown bond label {label!r}")
            if i == j:
                raise TopologyError(f"self-bond on site {i}")
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise TopologyError(f"bond ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise TopologyError(f"duplicate bond {key}")
            seen.add(key)
            if label in KITAEV:
                for s in (i, j):
                    color_count[(s, label)] = color_count.get((s, label), 0) + 1
                    if color_count[(s, label)] > 1:
                        raise TopologyError(
                            f"site {s} touches two {label} bonds; "
                            "honeycomb coloring requires at most one per color"
                        )
            norm.append((min(i, j), max(i, j), label))
        object.__setattr__(self, "bonds", tuple(norm))

    @property
    def is_kitaev(self) -> bool:
        return all(label in KITAEV for _, _, label in self.bonds)

    def to_json(self) -> str:
        return json.dumps(
            {"n_sites": self.n_sites, "bonds": [[i, j, l] for i, j, l in self.bonds]}
        )

    @classmethod
    def from_json(cls, text: str) -> "BondTopology":
        d = json.loads(text)
        return cls(d["n_sites"], tuple((b[0], b[1], b[2]) for b in d["bonds"]))

    @classmethod
    def from_file(cls, path: str | Path) -> "BondTopology":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ModelParams:
    """Coupling constants; unused entries stay at zero."""

    J: float = 0.0
    J_prime: float = 0.0
    K: tuple[float, float, float] = (0.0, 0.0, 0.0)
    Gamma: float = 0.0
    Gamma_prime: float = 0.0

    def __post_init__(self):
        vals = (self.J, self.J_prime, *self.K, self.Gamma, self.Gamma_prime)
        if not all(abs(v) < float("inf") for v in vals):
            raise ValueError("couplings must be finite")
        if all(v == 0 for v in vals):
            raise ValueError("at least one coupling must be nonzero")


def _exchange(n: int, i: int, j: int, coeff: float) -> list[PauliTerm]:
    """J S_i.S_j = (J/4)(XX + YY + ZZ) on the bond."""
    out = []
    for a in _AXES:
        letters = ["I"] * n
        letters[i] = a
        letters[j] = a
        out.append(PauliTerm(coeff / 4.0, "".join(letters)))
    return out


def _cross(n: int, i: int, j: int, a: str, b: str, coeff: float) -> list[PauliTerm]:
    """coeff * (S_i^a S_j^b + S_i^b S_j^a)."""
    out = []
    for la, lb in ((a, b), (b, a)):
        letters = ["I"] * n
        letters[i] = la
        letters[j] = lb
        out.append(PauliTerm(coeff / 4.0, "".join(letters)))
    return out


def _bond_terms(n: int, i: int, j: int, gamma: str, p: ModelParams) -> list[PauliTerm]:
    """All Pauli terms of one colored Kitaev-Heisenberg bond."""
    terms = []
    if p.J:
        terms += _exchange(n, i, j, p.J)
    k = p.K[_AXES.index(gamma)]
    if k:
        letters = ["I"] * n
        letters[i] = gamma
        letters[j] = gamma
        terms.append(PauliTerm(k / 4.0, "".join(letters)))
    # (alpha, beta): the two axes != gamma, in cyclic order X->Y->Z
    others = [a for a in _AXES if a != gamma]
    if p.Gamma:
        terms += _cross(n, i, j, others[0], others[1], p.Gamma)
    if p.Gamma_prime:
        for a in others:
            terms += _cross(n, i, j, gamma, a, p.Gamma_prime)
    return terms


def build_heisenberg(topo: BondTopology, J: float, J_prime: float = 0.0) -> PauliSum:
    """Isotropic exchange model: sum over bonds of J_b S_i.S_j."""
    terms = []
    for i, j, label in topo.bonds:
        if label in KITAEV:
            raise TopologyError("Kitaev-labeled bond in a Heisenberg build")
        coeff = J_prime if label == J_PRIME else J
        if coeff:
            terms += _exchange(topo.n_sites, i, j, coeff)
    return PauliSum(terms, n_qubits=topo.n_sites, hermitian=True)


def build_kitaev_heisenberg(topo: BondTopology, params: ModelParams) -> PauliSum:
    """Kitaev-Heisenberg model with optional Gamma/Gamma' couplings.

    Per bond of color gamma:
        J S_i.S_j + K_gamma S_i^gamma S_j^gamma
        + Gamma (S_i^alpha S_j^beta + S_i^beta S_j^alpha)
        + Gamma' sum_{alpha != gamma} (S_i^gamma S_j^alpha + S_i^alpha S_j^gamma)
    """
    terms = []
    for i, j, label in topo.bonds:
        if label not in KITAEV:
            raise TopologyError(f"bond ({i},{j}) has no Kitaev color")
        terms += _bond_terms(topo.n_sites, i, j, KITAEV[label], params)
    return PauliSum(terms, n_qubits=topo.n_sites, hermitian=True)


def build_hamiltonian(topo: BondTopology, params: ModelParams) -> PauliSum:
    """Dispatch on the topology's bond labels."""
    if topo.is_kitaev:
        return build_kitaev_heisenberg(topo, params)
    return build_heisenberg(topo, params.J, params.J_prime)


# ---------------------------------------------------------------------------
# presets

# Hexagon with bonds colored X,Y,Z twice around the ring.
_KH6_BONDS = (
    (0, 1, "kitaev-x"), (1, 2, "kitaev-y"), (2, 3, "kitaev-z"),
    (3, 4, "kitaev-x"), (4, 5, "kitaev-y"), (5, 0, "kitaev-z"),
)

# Two edge-sharing hexagons (0..5 and 2,6,7,8,9,3) with honeycomb coloring.
_KH10_BONDS = (
    (0, 1, "kitaev-x"), (1, 2, "kitaev-y"), (2, 3, "kitaev-z"),
    (3, 4, "kitaev-x"), (4, 5, "kitaev-y"), (5, 0, "kitaev-z"),
    (2, 6, "kitaev-x"), (6, 7, "kitaev-y"), (7, 8, "kitaev-z"),
    (8, 9, "kitaev-x"), (3, 9, "kitaev-y"),
)

_RUCL3 = ModelParams(J=-1.53, K=(-24.4, -24.4, -24.4), Gamma=5.25, Gamma_prime=-0.95)
_ANISO = ModelParams(J=0.4, K=(-8.0, -8.0 / 6.0, -8.0 / 6.0))


def _fes4_topology() -> BondTopology:
    # J' couples (1-2) and (3-4); J couples the four cross pairs
    bonds = [(0, 1, J_PRIME), (2, 3, J_PRIME)]
    bonds += [(i, j, GENERIC) for i in (0, 1) for j in (2, 3)]
    return BondTopology(4, tuple(bonds))


def _fes8_topology() -> BondTopology:
    data = resources.files("spinbench.data").joinpath("fes8_topology.json")
    return BondTopology.from_json(data.read_text())


def preset(name: str) -> tuple[BondTopology, ModelParams]:
    """Named model presets used throughout the workbench.

    fes4     4-site cubane, J = 1 with J' = 1.17 on the two intra pairs
    fes8     8-site double cubane, uniform J = 1 (bundled edge list)
    kh6      hexagonal Kitaev-Heisenberg fragment, full coupling set
    kh10     10-site two-hexagon fragment, same couplings
    kh-aniso 10-site fragment with the strongly anisotropic parameter set
    kitaev6  hexagon with only the Kitaev term (exactly solvable point)
    """
    name = name.lower()
    if name == "fes4":
        return _fes4_topology(), ModelParams(J=1.0, J_prime=1.17)
    if name == "fes8":
        return _fes8_topology(), ModelParams(J=1.0)
    if name == "kh6":
        return BondTopology(6, _KH6_BONDS), _RUCL3
    if name == "kh10":
        return BondTopology(10, _KH10_BONDS), _RUCL3
    if name == "kh-aniso":
        return BondTopology(10, _KH10_BONDS), _ANISO
    if name == "kitaev6":
        return BondTopology(6, _KH6_BONDS), ModelParams(K=(-24.4, -24.4, -24.4))
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


# ---------------------------------------------------------------------------
# commuting reference and symmetries


def bond_matching(topo: BondTopology) -> list[tuple[int, int, str]]:
    """Greedy disjoint bond matching in sorted bond order.

    On the hexagon this selects exactly (0-1), (2-3), (4-5); on the cubane
    topologies it selects one bond per disjoint pair.
    """
    used: set[int] = set()
    matching = []
    for i, j, label in sorted(topo.bonds):
        if i not in used and j not in used:
            matching.append((i, j, label))
            used.update((i, j))
    if not matching:
        raise TopologyError("topology admits no bond matching")
    return matching


def commuting_reference(topo: BondTopology, params: ModelParams) -> PauliSum:
    """Restriction of the Hamiltonian to a disjoint bond matching.

    All retained terms act on pairwise-disjoint qubit pairs, so the exact
    propagator factorizes into two-site blocks and classical simulation is
    trivial at any size.
    """
    sub = BondTopology(topo.n_sites, tuple(bond_matching(topo)))
    return build_hamiltonian(sub, params)


def find_symmetry(H: PauliSum, candidates: list[PauliTerm]) -> list[PauliTerm]:
    """Subset of candidate Pauli strings that commute with H.

    Used to configure post-selection: only numerically verified symmetries
    are ever used to filter measurement outcomes.
    """
    out = []
    for cand in candidates:
        if abs(abs(cand.coefficient) - 1.0) > 1e-12:
            raise ValueError("symmetry candidates must have unit coefficient")
        if commutes(H, PauliSum([cand])):
            out.append(cand)
    return out


def parity_candidates(n: int) -> list[PauliTerm]:
    """Global Pauli products (all-Z, all-X, all-Y) on n sites."""
    return [PauliTerm(1.0, axis * n) for axis in _AXES[::-1]]
