import numpy as np
import pytest

from chiraldrain import lattice as lat
from chiraldrain import spectral as sp
from chiraldrain import steady, symmetry

from fixtures import (
    INVERSION_HOPPINGS,
    INVERSION_POTENTIALS,
    certification_fixtures,
    inversion_chain,
)

CERT = certification_fixtures()
CERT_IDS = [c[0] for c in CERT]


class TestSigmaBipartite:
    def test_four_site_chain(self):
        sigma = symmetry.sigma_bipartite([0, 1, 0, 1])
        assert np.array_equal(sigma.matrix, np.diag([1.0, -1.0, 1.0, -1.0]))

    def test_all_one_sublattice_is_identity(self):
        sigma = symmetry.sigma_bipartite([0, 0, 0])
        assert np.array_equal(sigma.matrix, np.eye(3))

    def test_involutory(self):
        sigma = symmetry.sigma_bipartite([0, 1, 1, 0, 1])
        assert np.abs(sigma.matrix @ sigma.matrix - np.eye(5)).max() == 0


class TestSigmaInversion:
    def test_centered_chain_antidiagonal(self):
        chain = inversion_chain()
        sigma = symmetry.sigma_inversion(chain.sites, center=(2,))
        assert np.array_equal(sigma.matrix.real, np.eye(5)[::-1])
        assert np.abs(sigma.matrix @ sigma.matrix - np.eye(5)).max() == 0

    def test_signed_variant(self):
        chain = lat.build_chain(5)
        sigma = symmetry.sigma_inversion(chain.sites, signed=True, center=(2,))
        expect = np.zeros((5, 5))
        for n in range(5):
            expect[4 - n, n] = (-1.0) ** (n % 2)
        assert np.array_equal(sigma.matrix.real, expect)
        assert sigma.symmetry_defect() == 0

    def test_not_closed_raises(self):
        chain = lat.build_chain(4)  # even chain has no central site
        with pytest.raises(ValueError):
            symmetry.sigma_inversion(chain.sites, center=(1,))

    def test_missing_center_raises(self):
        chain = lat.build_chain(3)
        with pytest.raises(ValueError):
            symmetry.sigma_inversion(chain.sites, center=(7,))

    def test_coordinates_required(self):
        abstract = lat.build_bipartite_random([0, 1, 0, 1], seed=1)
        with pytest.raises(ValueError):
            symmetry.sigma_inversion(abstract.sites)


class TestSigmaHofstadter:
    @pytest.mark.parametrize("variant", ["z0", "0z", "zz"])
    def test_unitary_symmetric(self, variant):
        sigma = symmetry.sigma_hofstadter(variant, 4, np.pi / 2)
        assert sigma.unitarity_defect() < 1e-12
        assert sigma.symmetry_defect() < 1e-12

    def test_zz_entries(self):
        flux = np.pi / 2
        hof = lat.build_hofstadter(4, 1.0, flux)
        sigma = symmetry.sigma_hofstadter("zz", 4, flux)
        for x, y in [(1, 2), (-3, 0), (2, 2), (4, -4)]:
            row = hof.site_index((y, x))
            col = hof.site_index((x, y))
            expect = (-1.0) ** (x + y) * np.exp(1j * flux * x * y)
            assert np.isclose(sigma.matrix[row, col], expect)
        # exactly one entry per column
        assert ((np.abs(sigma.matrix) > 1e-12).sum(axis=0) == 1).all()

    def test_z0_real_signed_permutation(self):
        sigma = symmetry.sigma_hofstadter("z0", 2, 1.2)
        m = sigma.matrix
        assert np.abs(m.imag).max() == 0
        assert set(np.unique(np.abs(m))) == {0.0, 1.0}

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            symmetry.sigma_hofstadter("xy", 2, 0.0)


class TestCheckSymmetry:
    def test_hofstadter_bipartite_passes_chiral_form(self):
        hof = lat.build_hofstadter(4, 1.0, np.pi / 2)
        sigma = symmetry.sigma_bipartite(hof.sublattice_labels)
        report = symmetry.check_symmetry(sigma, hof)
        assert report.passed
        assert report.relation == "chiral"
        # with flux the particle-hole form genuinely fails for this sigma
        assert report.particle_hole_residual > 1.0

    @pytest.mark.parametrize(
        "variant,drain", [("z0", (2, 0)), ("0z", (0, 2)), ("zz", (2, 2))]
    )
    def test_hofstadter_named_sigmas_particle_hole(self, variant, drain):
        flux = np.pi / 2
        hof = lat.build_hofstadter(4, 1.0, flux)
        sigma = symmetry.sigma_hofstadter(variant, 4, flux)
        report = symmetry.check_symmetry(sigma, hof, drain=hof.site_index(drain))
        assert report.passed
        assert report.relation == "particle_hole"
        assert report.drain_residual < 1e-12

    def test_uniform_potential_fails_with_residual(self):
        v = 0.37
        chain = lat.build_chain(4, 1.0, [v] * 4)
        sigma = symmetry.sigma_bipartite([0, 1, 0, 1])
        report = symmetry.check_symmetry(sigma, chain)
        assert not report.passed
        assert report.relation is None
        assert np.isclose(report.particle_hole_residual, 2 * v)
        assert np.isclose(report.chiral_residual, 2 * v)

    def test_dimension_mismatch(self):
        sigma = symmetry.sigma_bipartite([0, 1])
        with pytest.raises(ValueError):
            symmetry.check_symmetry(sigma, lat.build_chain(3))

    @pytest.mark.parametrize("case", CERT, ids=CERT_IDS)
    def test_extracted_sigma_certifies_corpus(self, case):
        name, lattice, drain = case
        cpl = sp.drain_couplings(sp.diagonalize(lattice), drain, 1.0)
        pairing = sp.chiral_pairing(cpl)
        sigma = steady.extract_sigma(cpl, pairing)
        report = symmetry.check_symmetry(sigma, lattice, drain=drain)
        assert report.passed, report.to_dict()
        assert report.relation == "particle_hole"

    def test_report_serializable(self):
        import json

        chain = lat.build_chain(4)
        report = symmetry.check_symmetry(
            symmetry.sigma_bipartite([0, 1, 0, 1]), chain, drain=0
        )
        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["passed"] is True


class TestNamedVersusExtracted:
    """The named constructors agree with the eigenmode construction up to a
    global phase, which the drain-site entry fixes."""

    def align(self, named, extracted, drain):
        phase = named.matrix[drain, drain]
        assert abs(abs(phase) - 1.0) < 1e-12
        return named.matrix / phase, extracted.matrix

    def check(self, lattice, drain, named):
        cpl = sp.drain_couplings(sp.diagonalize(lattice), drain, 1.0)
        pairing = sp.chiral_pairing(cpl)
        extracted = steady.extract_sigma(cpl, pairing)
        a, b = self.align(named, extracted, drain)
        assert np.abs(a - b).max() < 1e-8

    def test_bipartite_chain_even_and_odd_drains(self):
        chain = lat.build_chain(6)
        named = symmetry.sigma_bipartite([s.sublattice for s in chain.sites])
        self.check(chain, 0, named)
        self.check(chain, 3, named)  # odd drain flips the global sign

    def test_inversion_chain(self):
        chain = inversion_chain()
        named = symmetry.sigma_inversion(chain.sites, center=(2,))
        self.check(chain, 2, named)

    @pytest.mark.parametrize(
        "variant,coord", [("z0", (2, 0)), ("0z", (0, 2)), ("zz", (2, 2))]
    )
    def test_hofstadter_variants(self, variant, coord):
        flux = np.pi / 2
        hof = lat.build_hofstadter(4, 1.0, flux)
        named = symmetry.sigma_hofstadter(variant, 4, flux)
        self.check(hof, hof.site_index(coord), named)


class TestLinearityClosure:
    def test_inversion_odd_potential_preserves_pass(self):
        chain = inversion_chain()
        sigma = symmetry.sigma_inversion(chain.sites, center=(2,))
        assert symmetry.check_symmetry(sigma, chain).passed
        # any potential odd under the inversion satisfies the same relation
        extra = np.array([0.9, -0.2, 0.0, 0.2, -0.9])
        perturbed = lat.Lattice(
            chain.hamiltonian + np.diag(extra.astype(complex)),
            chain.sites,
            dict(chain.model),
        )
        assert symmetry.check_symmetry(sigma, perturbed).passed
        # while an even one breaks it
        broken = lat.Lattice(
            chain.hamiltonian + np.diag(np.full(5, 0.3 + 0j)),
            chain.sites,
            dict(chain.model),
        )
        assert not symmetry.check_symmetry(sigma, broken).passed


class TestPhiZeroEigenmodes:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_orthonormal_and_reconstructs(self, m):
        eig = symmetry.phi_zero_eigenmodes(m)
        n = (2 * m + 1) ** 2
        assert np.abs(eig.modes.conj().T @ eig.modes - np.eye(n)).max() < 1e-12
        assert eig.residual < 1e-12 * 4.0

    def test_energy_multiset(self):
        m, j = 2, 1.0
        eig = symmetry.phi_zero_eigenmodes(m, j)
        ks = np.pi / (2 * (m + 1)) * np.arange(1, 2 * m + 2)
        expected = sorted(-2 * j * (np.cos(k) + np.cos(q)) for k in ks for q in ks)
        assert np.allclose(eig.energies, expected, atol=1e-12)

    def test_momentum_reflection_negates_energy(self):
        m = 3
        ks = np.pi / (2 * (m + 1)) * np.arange(1, 2 * m + 2)
        for k in ks:
            for q in ks:
                e = -2 * (np.cos(k) + np.cos(q))
                e_ref = -2 * (np.cos(np.pi - k) + np.cos(np.pi - q))
                assert abs(e + e_ref) < 1e-12

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_projectors_match_numerics(self, m):
        analytic = symmetry.phi_zero_eigenmodes(m)
        numeric = sp.diagonalize(lat.build_hofstadter(m, 1.0, 0.0))
        scale = np.abs(analytic.energies).max()
        groups = sp.degenerate_groups(analytic.energies, 1e-9 * scale)
        for group in groups:
            idx = list(group)
            assert np.allclose(
                analytic.energies[idx], numeric.energies[idx], atol=1e-10 * scale
            )
            pa = analytic.modes[:, idx] @ analytic.modes[:, idx].conj().T
            pn = numeric.modes[:, idx] @ numeric.modes[:, idx].conj().T
            assert np.abs(pa - pn).max() < 1e-9
