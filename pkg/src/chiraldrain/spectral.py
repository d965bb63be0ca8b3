"""Eigenmode analysis of a drained lattice.

Diagonalizes the lattice matrix, characterizes how each eigenmode couples to
the drain site (including the dark modes that decouple entirely), pairs
modes of opposite energy, and builds the non-Hermitian matrix that generates
the first-moment dynamics.  The complex eigenvalues ``lambda = nu - i*gamma/2``
of that matrix are checked against the scalar consistency condition

    sum_j (Gbar_j / 2) / (gamma/2 + i*(nu - eps_j)) = 1,

which every bright eigenvalue must satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice

__all__ = [
    "EigenSystem",
    "DrainCoupling",
    "ChiralPairing",
    "DynamicalSpectrum",
    "SolverError",
    "diagonalize",
    "drain_couplings",
    "chiral_pairing",
    "dynamical_matrix",
    "dynamical_spectrum",
    "degenerate_groups",
    "spectrum_report",
]

# Modes closer in energy than this (relative to the spectral radius) are
# treated as one degenerate subspace.
DEGENERACY_RTOL = 1e-9
# A mode is dark when its drain rate falls below dark_tol * Gamma / N.
DARK_TOL = 1e-10


class SolverError(RuntimeError):
    """A dense linear-algebra routine failed or lost too much accuracy."""


@dataclass(frozen=True)
class EigenSystem:
    """Orthonormal eigenbasis of a lattice matrix, sorted by energy.

    ``modes[:, i]`` is the wavefunction of energy ``energies[i]``;
    ``residual`` is the max-norm reconstruction defect and
    ``degenerate`` lists the index groups of flagged degenerate subspaces.
    """

    energies: np.ndarray
    modes: np.ndarray
    residual: float
    degenerate: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        self.energies.setflags(write=False)
        self.modes.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class DrainCoupling:
    """Per-mode coupling to the drain site.

    ``eig`` is the working eigenbasis: within every degenerate subspace the
    basis has been rotated so one mode carries the whole drain weight and
    the rest are exactly dark, and every bright mode's global phase is fixed
    to make its drain amplitude real positive.  ``rates`` holds
    ``Gbar_i = |psi_i[n0]|^2 * Gamma`` with dark entries zeroed; ``phases``
    holds the drain-amplitude arguments in (-pi, pi] (zero for dark modes,
    where the phase is not defined).
    """

    eig: EigenSystem
    drain: int
    gamma: float
    rates: np.ndarray
    phases: np.ndarray
    dark: tuple[int, ...]

    def __post_init__(self):
        self.rates.setflags(write=False)
        self.phases.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.eig.n_modes

    @property
    def bright(self) -> np.ndarray:
        mask = np.ones(self.n_modes, dtype=bool)
        mask[list(self.dark)] = False
        return mask


@dataclass(frozen=True)
class ChiralPairing:
    """Involutive pairing of modes with opposite energies.

    ``partner[i]`` is the mode paired with ``i`` (itself for zero modes);
    the defects measure how badly the spectrum violates the pairing:
    ``energy_defect = max |eps_i + eps_partner|`` and ``amplitude_defect``
    the worst mismatch of drain-amplitude magnitudes within a pair.
    """

    partner: np.ndarray
    energy_defect: float
    amplitude_defect: float

    def __post_init__(self):
        self.partner.setflags(write=False)
        p = self.partner
        if not np.array_equal(p[p], np.arange(p.size)):
            raise ValueError("pairing is not an involution")


def degenerate_groups(energies: np.ndarray, threshold: float) -> list[list[int]]:
    """Cluster sorted energies into groups separated by less than threshold."""
    groups: list[list[int]] = []
    start = 0
    n = energies.size
    for i in range(1, n + 1):
        if i == n or energies[i] - energies[i - 1] > threshold:
            groups.append(list(range(start, i)))
            start = i
    return groups


def diagonalize(lattice: Lattice) -> EigenSystem:
    """Full eigendecomposition of the lattice matrix, energies ascending."""
    h = lattice.hamiltonian
    try:
        energies, modes = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(h) if h.size else np.inf
        raise SolverError(f"eigendecomposition failed (cond ~ {cond:.3e}): {exc}") from exc
    residual = float(np.abs(h - (modes * energies) @ modes.conj().T).max())
    scale = max(float(np.abs(energies).max()), 1e-300)
    groups = degenerate_groups(energies, DEGENERACY_RTOL * scale)
    flagged = tuple(tuple(g) for g in groups if len(g) > 1)
    return EigenSystem(energies=energies, modes=modes, residual=residual, degenerate=flagged)


def _rotate_degenerate(modes: np.ndarray, drain: int, groups) -> np.ndarray:
    """Within each degenerate group, concentrate the drain weight on one mode."""
    out = modes.copy()
    for group in groups:
        if len(group) < 2:
            continue
        amps = out[drain, group]
        weight = np.linalg.norm(amps)
        if weight == 0.0:
            continue
        m = len(group)
        u = amps.conj() / weight
        q, _ = np.linalg.qr(np.column_stack([u, np.eye(m, dtype=complex)]))
        # qr fixes the first column only up to phase; align it with u exactly
        align = np.vdot(q[:, 0], u)
        q[:, 0] = q[:, 0] * (align / abs(align))
        out[:, group] = out[:, group] @ q
    return out


def drain_couplings(
    eig: EigenSystem,
    drain: int,
    gamma: float,
    dark_tol: float = DARK_TOL,
) -> DrainCoupling:
    """Couple an eigenbasis to the drain and classify dark modes.

    Mode ``i`` is flagged dark when ``Gbar_i < dark_tol * gamma / N``.
    Degenerate subspaces are first rotated so that at most one mode per
    subspace is bright; the completeness sum ``sum_i Gbar_i = gamma`` is
    preserved by that rotation.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if dark_tol < 0:
        raise ValueError("dark_tol must be >= 0")
    n = eig.n_modes
    if not 0 <= drain < n:
        raise IndexError(f"drain index {drain} out of range 0..{n - 1}")

    modes = _rotate_degenerate(eig.modes, drain, eig.degenerate)
    amps = modes[drain, :].copy()
    raw = np.abs(amps) ** 2 * gamma
    dark_mask = raw < dark_tol * gamma / max(n, 1)

    # fix global phases: bright modes real positive at the drain, dark modes
    # real positive at their first significant component
    for i in range(n):
        if dark_mask[i]:
            col = modes[:, i]
            j = int(np.argmax(np.abs(col)))
            ref = col[j]
        else:
            ref = amps[i]
        if abs(ref) > 0:
            modes[:, i] = modes[:, i] * (ref.conj() / abs(ref))
    amps = modes[drain, :]

    rates = np.where(dark_mask, 0.0, np.abs(amps) ** 2 * gamma)
    phases = np.where(dark_mask, 0.0, np.angle(amps))
    h_eff = (modes * eig.energies) @ modes.conj().T
    drift = float(np.abs((eig.modes * eig.energies) @ eig.modes.conj().T - h_eff).max())
    rotated = EigenSystem(
        energies=eig.energies.copy(),
        modes=modes,
        residual=eig.residual + drift,
        degenerate=eig.degenerate,
    )
    return DrainCoupling(
        eig=rotated,
        drain=drain,
        gamma=gamma,
        rates=rates,
        phases=phases,
        dark=tuple(int(i) for i in np.nonzero(dark_mask)[0]),
    )


def chiral_pairing(coupling: DrainCoupling, tol: float | None = None) -> ChiralPairing:
    """Greedily pair modes of opposite energy and report the defects.

    Modes with ``|eps| < tol`` are self-paired; the rest are matched from
    the spectrum edges inward, breaking energy ties so that equally-coupled
    partners line up.  An unpairable leftover is self-paired and shows up as
    an energy defect of ``2|eps|`` rather than an exception.
    """
    energies = coupling.eig.energies
    n = energies.size
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.abs(energies).max()))
    # Order degenerate clusters so the inward sweep pairs bright with bright
    # and dark with dark: bright first on the negative side, bright last on
    # the positive side.
    scale = max(float(np.abs(energies).max()), 1e-300)
    clusters = degenerate_groups(energies, DEGENERACY_RTOL * scale)
    order_list: list[int] = []
    for cluster in clusters:
        if energies[cluster].mean() < 0:
            order_list.extend(sorted(cluster, key=lambda i: -coupling.rates[i]))
        else:
            order_list.extend(sorted(cluster, key=lambda i: coupling.rates[i]))
    order = np.asarray(order_list, dtype=int)
    partner = np.full(n, -1, dtype=int)
    energy_defect = 0.0
    i, j = 0, n - 1
    while i <= j:
        a, b = order[i], order[j]
        if abs(energies[a]) < tol:
            partner[a] = a
            energy_defect = max(energy_defect, 2 * abs(energies[a]))
            i += 1
            continue
        if abs(energies[b]) < tol:
            partner[b] = b
            energy_defect = max(energy_defect, 2 * abs(energies[b]))
            j -= 1
            continue
        if i == j:
            partner[a] = a
            energy_defect = max(energy_defect, 2 * abs(energies[a]))
            break
        partner[a] = b
        partner[b] = a
        energy_defect = max(energy_defect, abs(energies[a] + energies[b]))
        i += 1
        j -= 1
    mags = np.sqrt(coupling.rates / coupling.gamma) if coupling.gamma > 0 else np.abs(
        coupling.eig.modes[coupling.drain, :]
    )
    amplitude_defect = float(np.abs(mags - mags[partner]).max()) if n else 0.0
    return ChiralPairing(
        partner=partner,
        energy_defect=float(energy_defect),
        amplitude_defect=amplitude_defect,
    )


def dynamical_matrix(coupling: DrainCoupling) -> np.ndarray:
    """Generator of the first-moment dynamics in the eigenmode basis.

    ``A[i, j] = delta_ij eps_i - (i/2) exp(i(phi_j - phi_i)) sqrt(Gbar_i Gbar_j)``;
    dark modes have zero rate, so their rows and columns decouple with
    ``A[i, i] = eps_i``.
    """
    s = np.exp(-1j * coupling.phases) * np.sqrt(coupling.rates)
    return np.diag(coupling.eig.energies.astype(complex)) - 0.5j * np.outer(s, s.conj())


@dataclass(frozen=True)
class DynamicalSpectrum:
    """Eigenvalues ``lambda = nu - i*gamma/2`` of the dynamical matrix.

    Dark eigenvalues are the bare energies, exactly; every bright
    eigenvalue carries its consistency-condition residual (``nan`` for dark
    entries, where the condition does not apply).  ``modes[:, k]`` is the
    right eigenvector and ``noise_weights[k]`` its coupling to the drain
    noise, ``g = sum_j u_j exp(-i phi_j) sqrt(Gbar_j)``.
    """

    eigenvalues: np.ndarray
    is_dark: np.ndarray
    residuals: np.ndarray
    modes: np.ndarray
    noise_weights: np.ndarray

    def __post_init__(self):
        for arr in (self.eigenvalues, self.is_dark, self.residuals, self.modes, self.noise_weights):
            arr.setflags(write=False)

    @property
    def decay_rates(self) -> np.ndarray:
        """gamma_k = -2 Im(lambda_k) for every eigenvalue."""
        return -2.0 * self.eigenvalues.imag

    @property
    def min_bright_decay(self) -> float:
        """Smallest relaxation rate among bright modes: the slow bottleneck."""
        bright = ~self.is_dark
        if not bright.any():
            return np.inf
        return float(self.decay_rates[bright].min())


def _polish_eigenvalue(lam: complex, half_rates: np.ndarray, energies: np.ndarray,
                       steps: int = 3) -> complex:
    """Newton-polish one bright eigenvalue on the secular equation.

    The consistency condition is exactly the characteristic equation of the
    bright block written through its resolvent, so its roots are the true
    eigenvalues; dense diagonalization only locates nearly-dark roots to
    absolute accuracy ~eps*|A|, which polishing removes.
    """
    scale = max(float(np.abs(energies).max()), 1.0)
    for _ in range(steps):
        diff = lam - energies
        if np.abs(diff).min() == 0.0:
            break
        f = -1j * np.sum(half_rates / diff) - 1.0
        fp = 1j * np.sum(half_rates / diff**2)
        if fp == 0.0:
            break
        step = f / fp
        if not np.isfinite(step) or abs(step) > 1e-3 * scale:
            break
        new = lam - step
        diff_new = new - energies
        if np.abs(diff_new).min() == 0.0:
            break
        f_new = -1j * np.sum(half_rates / diff_new) - 1.0
        if abs(f_new) >= abs(f):
            break
        lam = new
    return lam


def dynamical_spectrum(a_matrix: np.ndarray, coupling: DrainCoupling) -> DynamicalSpectrum:
    """Diagonalize the dynamical matrix, keeping dark eigenvalues exact.

    The dark block is diagonal by construction, so it is deflated and its
    eigenvalues reported as the bare mode energies; the bright block is
    diagonalized densely, each eigenvalue is Newton-polished on the
    consistency condition (its exact secular equation), and the remaining
    residual is reported per eigenvalue.
    """
    n = coupling.n_modes
    bright = coupling.bright
    energies = coupling.eig.energies
    eigenvalues = np.zeros(n, dtype=complex)
    residuals = np.full(n, np.nan)
    modes = np.zeros((n, n), dtype=complex)
    is_dark = np.zeros(n, dtype=bool)

    dark_idx = np.nonzero(~bright)[0]
    for pos, i in enumerate(dark_idx):
        eigenvalues[n - dark_idx.size + pos] = energies[i]
        modes[i, n - dark_idx.size + pos] = 1.0
        is_dark[n - dark_idx.size + pos] = True

    nb = int(bright.sum())
    if nb:
        sub = a_matrix[np.ix_(bright, bright)]
        try:
            vals, vecs = np.linalg.eig(sub)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"dynamical matrix diagonalization failed: {exc}") from exc
        order = np.argsort(vals.real, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        half_rates = 0.5 * coupling.rates[bright]
        bright_energies = energies[bright]
        for k in range(nb):
            vals[k] = _polish_eigenvalue(vals[k], half_rates, bright_energies)
            nu, g_half = vals[k].real, -vals[k].imag
            terms = half_rates / (g_half + 1j * (nu - bright_energies))
            residuals[k] = abs(terms.sum() - 1.0)
        eigenvalues[:nb] = vals
        modes[np.ix_(bright, range(nb))] = vecs

    s = np.exp(-1j * coupling.phases) * np.sqrt(coupling.rates)
    noise_weights = modes.T @ s
    return DynamicalSpectrum(
        eigenvalues=eigenvalues,
        is_dark=is_dark,
        residuals=residuals,
        modes=modes,
        noise_weights=noise_weights,
    )


def spectrum_report(coupling: DrainCoupling, spectrum: DynamicalSpectrum) -> dict:
    """JSON-ready summary of the mode structure at a drain."""
    return {
        "drain": coupling.drain,
        "gamma": coupling.gamma,
        "energies": coupling.eig.energies.tolist(),
        "drain_rates": coupling.rates.tolist(),
        "dark_modes": list(coupling.dark),
        "dynamical_eigenvalues": [
            {"nu": float(v.real), "gamma": float(-2 * v.imag)} for v in spectrum.eigenvalues
        ],
        "consistency_residuals": [
            None if np.isnan(r) else float(r) for r in spectrum.residuals
        ],
        "min_bright_decay": None
        if np.isinf(spectrum.min_bright_decay)
        else spectrum.min_bright_decay,
    }
