import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiraldrain import lattice as lat
from chiraldrain import spectral as sp

from fixtures import certification_fixtures, chiral_fixtures


def coupled(lattice, drain, gamma=1.0):
    return sp.drain_couplings(sp.diagonalize(lattice), drain, gamma)


class TestDiagonalize:
    def test_three_site_chain(self):
        eig = sp.diagonalize(lat.build_chain(3))
        assert np.allclose(eig.energies, [-math.sqrt(2), 0, math.sqrt(2)], atol=1e-12)
        zero_mode = eig.modes[:, 1]
        assert np.allclose(np.abs(zero_mode), [1 / math.sqrt(2), 0, 1 / math.sqrt(2)], atol=1e-12)

    def test_single_site_potential(self):
        eig = sp.diagonalize(lat.build_chain(1, potentials=[5.0]))
        assert np.allclose(eig.energies, [5.0])
        assert np.allclose(np.abs(eig.modes), [[1.0]])

    def test_zero_flux_degeneracies_flagged(self):
        eig = sp.diagonalize(lat.build_hofstadter(1, 1.0, 0.0))
        # the (k,q)/(q,k) shells of the 3x3 zero-flux lattice are degenerate
        assert eig.degenerate
        grouped = {i for g in eig.degenerate for i in g}
        assert len(grouped) >= 6

    @pytest.mark.parametrize("case", chiral_fixtures(), ids=[c[0] for c in chiral_fixtures()])
    def test_invariants_on_corpus(self, case):
        name, lattice, drain = case
        eig = sp.diagonalize(lattice)
        n = lattice.n_sites
        assert np.all(np.diff(eig.energies) >= 0)
        ortho = np.abs(eig.modes.conj().T @ eig.modes - np.eye(n)).max()
        assert ortho < 1e-10
        scale = max(np.abs(eig.energies).max(), 1.0)
        assert eig.residual < 1e-10 * scale


class TestDrainCouplings:
    def test_end_drain_rates(self):
        gamma = 1.8
        cpl = coupled(lat.build_chain(3), 0, gamma)
        assert np.allclose(cpl.rates, [gamma / 4, gamma / 2, gamma / 4], atol=1e-12)
        assert cpl.dark == ()

    def test_center_drain_dark_zero_mode(self):
        cpl = coupled(lat.build_chain(3), 1)
        assert cpl.dark == (1,)
        assert cpl.rates[1] == 0.0

    def test_completeness(self):
        for name, lattice, drain in chiral_fixtures():
            cpl = coupled(lattice, drain, 2.5)
            assert abs(cpl.rates.sum() - 2.5) < 1e-10 * 2.5, name

    def test_phase_convention(self):
        cpl = coupled(lat.build_hofstadter(2, 1.0, 1.1), 3, 1.0)
        amps = cpl.eig.modes[3, :]
        assert np.abs(amps.imag).max() < 1e-12
        assert (amps.real > 0).all()
        assert np.all(cpl.phases > -np.pi) and np.all(cpl.phases <= np.pi)

    def test_degenerate_rotation_single_bright(self):
        # zero-flux lattice has degenerate shells at every drain
        lattice = lat.build_hofstadter(2, 1.0, 0.0)
        eig = sp.diagonalize(lattice)
        assert eig.degenerate
        cpl = sp.drain_couplings(eig, lattice.site_index((1, 2)), 1.0)
        for group in cpl.eig.degenerate:
            bright_in_group = [i for i in group if i not in cpl.dark]
            assert len(bright_in_group) <= 1
        assert abs(cpl.rates.sum() - 1.0) < 1e-10
        # the rotated basis still reconstructs the matrix
        scale = max(np.abs(eig.energies).max(), 1.0)
        recon = np.abs(
            lattice.hamiltonian
            - (cpl.eig.modes * cpl.eig.energies) @ cpl.eig.modes.conj().T
        ).max()
        assert recon < 1e-10 * scale

    def test_drain_out_of_range(self):
        with pytest.raises(IndexError):
            coupled(lat.build_chain(3), 7)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            coupled(lat.build_chain(3), 0, -1.0)


class TestChiralPairing:
    def test_bipartite_random_pairs_cleanly(self):
        lattice = lat.build_bipartite_random([0, 1] * 4, seed=21)
        for drain in range(8):
            cpl = coupled(lattice, drain)
            pairing = sp.chiral_pairing(cpl)
            assert pairing.energy_defect < 1e-10
            assert pairing.amplitude_defect < 1e-10

    def test_two_mode_detuned(self):
        v, j = 0.8, 1.0
        lattice = lat.build_chain(2, j, [v / 2, -v / 2])
        cpl = coupled(lattice, 0)
        pairing = sp.chiral_pairing(cpl)
        expected = math.sqrt(j**2 + v**2 / 4)
        assert np.allclose(np.abs(cpl.eig.energies), expected)
        assert pairing.energy_defect < 1e-12
        # the detuned doublet is mixed, so the drain amplitudes differ
        assert pairing.amplitude_defect > 0.05

    def test_single_site_self_paired(self):
        cpl = coupled(lat.build_chain(1), 0)
        pairing = sp.chiral_pairing(cpl)
        assert pairing.partner[0] == 0
        assert pairing.energy_defect == 0.0
        assert pairing.amplitude_defect == 0.0

    def test_odd_leftover_reported_not_raised(self):
        lattice = lat.build_chain(3, 1.0, [1.0, 2.0, 3.0])  # asymmetric spectrum
        pairing = sp.chiral_pairing(coupled(lattice, 0))
        assert pairing.energy_defect > 0.1
        assert np.array_equal(pairing.partner[pairing.partner], np.arange(3))

    def test_degenerate_doublets_pair_dark_with_dark(self):
        hof = lat.build_hofstadter(4, 1.0, 2 * np.pi / 5)
        cpl = coupled(hof, hof.site_index((2, 2)), 3.0)
        assert len(cpl.dark) == 8
        pairing = sp.chiral_pairing(cpl)
        dark = set(cpl.dark)
        for i in range(hof.n_sites):
            assert (i in dark) == (pairing.partner[i] in dark)
        assert pairing.amplitude_defect < 1e-10

    @pytest.mark.parametrize("case", chiral_fixtures(), ids=[c[0] for c in chiral_fixtures()])
    def test_corpus_defects_small(self, case):
        name, lattice, drain = case
        pairing = sp.chiral_pairing(coupled(lattice, drain))
        scale = max(np.abs(sp.diagonalize(lattice).energies).max(), 1.0)
        assert pairing.energy_defect < 1e-10 * scale
        assert pairing.amplitude_defect < 1e-10


class TestDynamicalMatrix:
    def test_single_site(self):
        gamma = 0.7
        cpl = coupled(lat.build_chain(1, potentials=[2.0]), 0, gamma)
        a = sp.dynamical_matrix(cpl)
        assert np.allclose(a, [[2.0 - 0.5j * gamma]])

    def test_gamma_zero_diagonal(self):
        cpl = coupled(lat.build_chain(3), 0, 0.0)
        a = sp.dynamical_matrix(cpl)
        assert np.allclose(a, np.diag(cpl.eig.energies))

    def test_antihermitian_part_rank_one(self):
        cpl = coupled(lat.build_chain(3), 0, 1.0)
        a = sp.dynamical_matrix(cpl)
        sv = np.linalg.svd(a - a.conj().T, compute_uv=False)
        assert sv[0] > 1e-3
        assert sv[1] < 1e-14 * sv[0]

    def test_dark_rows_decoupled(self):
        cpl = coupled(lat.build_chain(3), 1, 1.0)
        a = sp.dynamical_matrix(cpl)
        assert np.abs(a[1, [0, 2]]).max() == 0.0
        assert np.abs(a[[0, 2], 1]).max() == 0.0
        assert a[1, 1] == cpl.eig.energies[1]


class TestDynamicalSpectrum:
    def test_single_site_exact(self):
        gamma = 0.9
        cpl = coupled(lat.build_chain(1, potentials=[1.5]), 0, gamma)
        spec = sp.dynamical_spectrum(sp.dynamical_matrix(cpl), cpl)
        assert np.allclose(spec.eigenvalues, [1.5 - 0.5j * gamma])
        assert spec.residuals[0] < 1e-14

    @pytest.mark.parametrize("case", chiral_fixtures(), ids=[c[0] for c in chiral_fixtures()])
    def test_bright_decay_and_consistency(self, case):
        name, lattice, drain = case
        cpl = coupled(lattice, drain, 1.7)
        spec = sp.dynamical_spectrum(sp.dynamical_matrix(cpl), cpl)
        bright = ~spec.is_dark
        assert (spec.eigenvalues[bright].imag < -1e-12 * 1.7).all()
        assert np.nanmax(spec.residuals) < 1e-8
        assert spec.min_bright_decay > 0

    def test_center_drain_dark_eigenvalue_exact_zero(self):
        cpl = coupled(lat.build_chain(3), 1, 1.0)
        spec = sp.dynamical_spectrum(sp.dynamical_matrix(cpl), cpl)
        dark_values = spec.eigenvalues[spec.is_dark]
        assert dark_values.size == 1
        # the dark eigenvalue is the bare zero-mode energy, bit-exactly
        assert dark_values[0] == cpl.eig.energies[1]
        assert abs(dark_values[0]) < 1e-14
        assert np.isnan(spec.residuals[spec.is_dark]).all()

    def test_eigenvalue_trace_preserved(self):
        cpl = coupled(lat.build_chain(5), 0, 2.0)
        a = sp.dynamical_matrix(cpl)
        spec = sp.dynamical_spectrum(a, cpl)
        assert np.isclose(spec.eigenvalues.sum(), np.trace(a))

    def test_report_serializable(self):
        import json

        cpl = coupled(lat.build_chain(3), 1, 1.0)
        spec = sp.dynamical_spectrum(sp.dynamical_matrix(cpl), cpl)
        text = json.dumps(sp.spectrum_report(cpl, spec))
        assert "dark_modes" in text


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=9),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_pairing_involution_property(n, seed):
    rng = np.random.default_rng(seed)
    lattice = lat.build_chain(n, rng.uniform(0.2, 2.0, n - 1), rng.uniform(-1, 1, n))
    pairing = sp.chiral_pairing(coupled(lattice, 0))
    assert np.array_equal(pairing.partner[pairing.partner], np.arange(n))


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=9),
    drain=st.integers(min_value=0, max_value=8),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_completeness_property(n, drain, seed):
    rng = np.random.default_rng(seed)
    lattice = lat.build_chain(n, rng.uniform(0.2, 2.0, n - 1), rng.uniform(-1, 1, n))
    cpl = coupled(lattice, drain % n, 1.0)
    assert abs(cpl.rates.sum() - 1.0) < 1e-10
