"""Exact Gaussian steady states of the drained lattice.

The Langevin dynamics of the site operators is linear,

    da/dt = D a + noise,    D = -iH - (Gamma/2) P_drain - (loss/2) I,

so the stationary second moments solve a pair of Sylvester equations.  Both
are solved here by eigendecomposing the drift once and dividing by eigenvalue
sums in the transformed frame, with iterative refinement to recover the
accuracy lost on nearly-dark modes, and a Bartels-Stewart fallback when the
drift eigenbasis is badly conditioned.

The state is stored as the normal matrix ``<adag_m a_n>`` and the anomalous
matrix ``<a_m a_n>``.  The quadrature convention throughout the package is
``x = (a + adag)/sqrt(2)``, ``p = (a - adag)/(i sqrt(2))`` with vacuum
variance 1/2, which fixes the purity and negativity formulas used downstream.

When the lattice pairs its eigenmodes chirally at the drain, the steady
state is also available in closed form: uniform occupation ``sinh^2 r`` on
every site and anomalous correlations ``M * sigma`` with ``sigma`` the
unitary symmetric pairing matrix built from the eigenmodes.  Comparing the
two routes, and transforming into the Bogoliubov basis whose joint vacuum
the chiral steady state is, are the main consistency checks this module
offers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import Lattice
from .spectral import (
    ChiralPairing,
    DrainCoupling,
    SolverError,
    diagonalize,
    drain_couplings,
)
from .symmetry import SymmetryMatrix

__all__ = [
    "SqueezedNoise",
    "DrainSpec",
    "CovarianceState",
    "Trajectory",
    "DarkModeError",
    "PairingError",
    "steady_state",
    "analytic_chiral_state",
    "extract_sigma",
    "purity",
    "beta_occupations",
    "BetaModeReport",
    "evolve",
    "quadrature_covariance",
    "symplectic_form",
    "state_to_dict",
    "state_from_dict",
]

VACUUM_VARIANCE = 0.5


class DarkModeError(ValueError):
    """The requested operation needs a dark-mode-free drain."""

    def __init__(self, dark: tuple[int, ...], message: str):
        super().__init__(message)
        self.dark = dark


class PairingError(ValueError):
    """The chiral pairing defects exceed the caller's tolerance."""


@dataclass(frozen=True)
class SqueezedNoise:
    """Squeezed-vacuum reservoir parameters.

    The white-noise correlators carry occupation ``nbar = sinh^2 r`` and
    anomalous strength ``anomalous = exp(i*phi) cosh r sinh r``, which
    satisfy ``|anomalous|^2 = nbar (nbar + 1)`` identically.
    """

    r: float
    phi: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("squeezing parameter r must be >= 0")

    @property
    def nbar(self) -> float:
        return float(np.sinh(self.r) ** 2)

    @property
    def anomalous(self) -> complex:
        return complex(np.exp(1j * self.phi) * np.cosh(self.r) * np.sinh(self.r))


@dataclass(frozen=True)
class DrainSpec:
    """Drain site, coupling rate, reservoir squeezing, optional uniform loss."""

    drain: int
    gamma: float
    noise: SqueezedNoise
    site_loss: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.site_loss < 0:
            raise ValueError("site_loss must be >= 0")


@dataclass(frozen=True)
class CovarianceState:
    """Second moments of a zero-mean Gaussian state of N sites.

    ``normal[m, n] = <adag_m a_n>`` (Hermitian, positive) and
    ``anomalous[m, n] = <a_m a_n>`` (symmetric).  ``residual`` records the
    max-norm defect of the stationarity equations for solver outputs.
    """

    normal: np.ndarray
    anomalous: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        self.normal.setflags(write=False)
        self.anomalous.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.normal.shape[0]

    def physicality_margin(self) -> float:
        """Smallest eigenvalue of C + (i/2) Omega; >= 0 for physical states."""
        c = quadrature_covariance(self)
        omega = symplectic_form(self.n_modes)
        return float(np.linalg.eigvalsh(c + 0.5j * omega).min())


def symplectic_form(n_modes: int) -> np.ndarray:
    """Symplectic form in (x_1..x_N, p_1..p_N) ordering."""
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


def quadrature_covariance(state: CovarianceState) -> np.ndarray:
    """Real 2N x 2N symmetrized covariance in (x..., p...) ordering."""
    re_n, im_n = state.normal.real, state.normal.imag
    re_m, im_m = state.anomalous.real, state.anomalous.imag
    half = VACUUM_VARIANCE * np.eye(state.n_modes)
    return np.block(
        [
            [half + re_n + re_m, im_m + im_n],
            [im_m - im_n, half + re_n - re_m],
        ]
    )


def _drift_matrix(lattice: Lattice, spec: DrainSpec) -> np.ndarray:
    n = lattice.n_sites
    d = -1j * lattice.hamiltonian.astype(complex)
    d = d - 0.5 * spec.site_loss * np.eye(n)
    d[spec.drain, spec.drain] -= 0.5 * spec.gamma
    return d


def _diffusion(lattice: Lattice, spec: DrainSpec) -> tuple[np.ndarray, np.ndarray]:
    n = lattice.n_sites
    qn = np.zeros((n, n), dtype=complex)
    qm = np.zeros((n, n), dtype=complex)
    qn[spec.drain, spec.drain] = spec.gamma * spec.noise.nbar
    qm[spec.drain, spec.drain] = spec.gamma * spec.noise.anomalous
    return qn, qm


# Above this drift-eigenbasis condition number the spectral solver is
# abandoned for a Schur-based (Bartels-Stewart) solve.
_EIG_COND_LIMIT = 1e8
_REFINE_STEPS = 2


class _MomentSolver:
    """Solves D' X + X D^T = -Q for the two stationarity equations."""

    def __init__(self, drift: np.ndarray):
        self.drift = drift
        lam, vecs = np.linalg.eig(drift)
        self.eigenvalues = lam
        cond = np.linalg.cond(vecs)
        self.spectral_ok = bool(np.isfinite(cond) and cond < _EIG_COND_LIMIT)
        if self.spectral_ok:
            self._v = vecs
            self._vi = np.linalg.inv(vecs)
            self._den_m = lam[:, None] + lam[None, :]
            self._den_n = lam.conj()[:, None] + lam[None, :]
            scale = max(np.abs(lam).max(), 1e-300)
            if (
                np.abs(self._den_m).min() < 1e-15 * scale
                or np.abs(self._den_n).min() < 1e-15 * scale
            ):
                raise SolverError(
                    "drift is singular for the moment equations; the steady "
                    "state is not unique (undamped mode pair)"
                )

    def solve_anomalous(self, q: np.ndarray) -> np.ndarray:
        if self.spectral_ok:
            y = -(self._vi @ q @ self._vi.T) / self._den_m
            return self._v @ y @ self._v.T
        return scipy.linalg.solve_sylvester(self.drift, self.drift.T, -q)

    def solve_normal(self, q: np.ndarray) -> np.ndarray:
        if self.spectral_ok:
            z = -(self._vi.conj() @ q @ self._vi.T) / self._den_n
            return self._v.conj() @ z @ self._v.T
        return scipy.linalg.solve_sylvester(self.drift.conj(), self.drift.T, -q)

    def refined(self, q: np.ndarray, kind: str, steps: int = _REFINE_STEPS) -> np.ndarray:
        solve = self.solve_anomalous if kind == "anomalous" else self.solve_normal
        left = self.drift if kind == "anomalous" else self.drift.conj()
        x = solve(q)
        for _ in range(steps):
            res = left @ x + x @ self.drift.T + q
            x = x + solve(res)
        return x


def steady_state(
    lattice: Lattice,
    spec: DrainSpec,
    dark_tol: float = 1e-10,
) -> CovarianceState:
    """Stationary second moments of the drained lattice.

    Solves ``D M + M D^T + Gamma*anom*P = 0`` for the anomalous matrix and
    ``conj(D) N + N D^T + Gamma*nbar*P = 0`` for the normal matrix, where
    ``P`` projects on the drain site.  Internal loss enters the drift only:
    its vacuum noise carries no normally-ordered diffusion.

    Without internal loss the drift is singular whenever a mode decouples
    from the drain, so dark modes are detected first and reported by index.
    """
    if spec.gamma <= 0:
        raise ValueError("steady_state needs gamma > 0")
    if spec.site_loss == 0.0:
        coupling = drain_couplings(diagonalize(lattice), spec.drain, spec.gamma, dark_tol)
        if coupling.dark:
            raise DarkModeError(
                coupling.dark,
                f"modes {list(coupling.dark)} are dark at drain {spec.drain}; "
                "the steady state is not unique (add site_loss or move the drain)",
            )
    qn, qm = _diffusion(lattice, spec)
    solver = _MomentSolver(_drift_matrix(lattice, spec))
    if spec.site_loss == 0.0:
        # near-degenerate doublets can hybridize into modes whose relaxation
        # rate falls far below any individual drain rate; below this floor
        # the stationary moments are not resolvable in double precision
        slowest = -2.0 * float(solver.eigenvalues.real.max())
        if slowest < 1e-10 * spec.gamma:
            raise SolverError(
                f"slowest relaxation rate {slowest:.3e} is below 1e-10 * gamma: "
                "an effectively dark mode makes the steady state numerically "
                "unreachable (add site_loss or move the drain)"
            )
    m = solver.refined(qm, "anomalous")
    n = solver.refined(qn, "normal")
    m = 0.5 * (m + m.T)
    n = 0.5 * (n + n.conj().T)
    d = solver.drift
    res_m = float(np.abs(d @ m + m @ d.T + qm).max())
    res_n = float(np.abs(d.conj() @ n + n @ d.T + qn).max())
    residual = max(res_m, res_n)
    if residual > 1e-9 * spec.gamma:
        raise SolverError(
            f"stationarity residual {residual:.3e} exceeds 1e-9 * gamma"
        )
    return CovarianceState(normal=n, anomalous=m, residual=residual)


def _require_valid_pairing(pairing: ChiralPairing, coupling: DrainCoupling, tol: float):
    scale = max(1.0, float(np.abs(coupling.eig.energies).max()))
    if pairing.energy_defect > tol * scale or pairing.amplitude_defect > tol:
        raise PairingError(
            "chiral pairing defects too large: "
            f"energy {pairing.energy_defect:.3e} (tol {tol * scale:.3e}), "
            f"amplitude {pairing.amplitude_defect:.3e} (tol {tol:.3e})"
        )


def extract_sigma(
    coupling: DrainCoupling,
    pairing: ChiralPairing,
    defect_tol: float = 1e-8,
) -> SymmetryMatrix:
    """Pairing matrix of the chiral steady state, built from the eigenmodes.

    ``sigma[m, n] = sum_j exp(-i(phi_j + phi_partner(j))) psi_j[n] psi_partner(j)[m]``.
    For a valid chiral system this matrix is unitary, symmetric, and has the
    drain column of the identity.  Refuses pairings whose defects exceed
    ``defect_tol``.  Dark modes are allowed as long as the pairing maps them
    onto each other (their phase convention drops out of every certified
    property), but the matrix is then basis-dependent within the degenerate
    subspaces.
    """
    _require_valid_pairing(pairing, coupling, defect_tol)
    p = pairing.partner
    chi = coupling.phases + coupling.phases[p]
    modes = coupling.eig.modes
    sigma = (modes[:, p] * np.exp(-1j * chi)[None, :]) @ modes.T
    return SymmetryMatrix(matrix=sigma, provenance="from_eigenmodes", drain=coupling.drain)


def analytic_chiral_state(
    coupling: DrainCoupling,
    pairing: ChiralPairing,
    noise: SqueezedNoise,
    defect_tol: float = 1e-8,
) -> CovarianceState:
    """Closed-form steady state of a chiral, dark-mode-free lattice.

    Every site holds ``nbar`` photons and the anomalous correlations are
    ``anomalous * sigma`` with ``sigma`` from :func:`extract_sigma`.  Refuses
    (with the defect report) when the pairing defects exceed ``defect_tol``,
    or when dark modes make the steady state non-unique.
    """
    if coupling.dark:
        raise DarkModeError(
            coupling.dark,
            f"modes {list(coupling.dark)} are dark: the chiral closed form "
            "only describes the unique dark-mode-free steady state",
        )
    sigma = extract_sigma(coupling, pairing, defect_tol)
    n_sites = coupling.n_modes
    return CovarianceState(
        normal=noise.nbar * np.eye(n_sites, dtype=complex),
        anomalous=noise.anomalous * sigma.matrix,
        residual=0.0,
    )


def purity(state: CovarianceState) -> float:
    """Gaussian purity ``2^-N / sqrt(det C)``; 1 exactly for pure states."""
    c = quadrature_covariance(state)
    sign, logdet = np.linalg.slogdet(c)
    if sign <= 0:
        raise ValueError("covariance has non-positive determinant; state is unphysical")
    mu = float(np.exp(-state.n_modes * np.log(2.0) - 0.5 * logdet))
    if mu > 1.0 + 1e-8:
        raise ValueError(f"purity {mu} > 1; covariance is unphysical")
    return min(mu, 1.0)


@dataclass(frozen=True)
class BetaModeReport:
    """Occupations of the Bogoliubov modes that should annihilate the state.

    For a chiral dark-mode-free steady state both maxima vanish: the state
    is the joint vacuum of the ``beta`` modes.
    """

    normal: np.ndarray
    anomalous: np.ndarray

    def __post_init__(self):
        self.normal.setflags(write=False)
        self.anomalous.setflags(write=False)

    @property
    def max_normal(self) -> float:
        return float(np.abs(self.normal).max())

    @property
    def max_anomalous(self) -> float:
        return float(np.abs(self.anomalous).max())


def beta_occupations(
    state: CovarianceState,
    coupling: DrainCoupling,
    pairing: ChiralPairing,
    noise: SqueezedNoise,
) -> BetaModeReport:
    """Transform a state into the Bogoliubov basis of the chiral pairing.

    ``beta_i = cosh r b_i - exp(i(phi - phi_i - phi_partner(i))) sinh r bdag_partner(i)``;
    the report carries the full ``<betadag beta>`` and ``<beta beta>``
    matrices, whose maxima measure the distance from the joint beta vacuum.
    """
    modes = coupling.eig.modes
    # eigenmode-basis moments: b = Psi^dag a
    nb = modes.T @ state.normal @ modes.conj()
    mb = modes.conj().T @ state.anomalous @ modes.conj()
    p = pairing.partner
    chi = np.exp(1j * (noise.phi - coupling.phases - coupling.phases[p]))
    ch, sh = np.cosh(noise.r), np.sinh(noise.r)
    eye = np.eye(coupling.n_modes)

    nb_pp = nb[np.ix_(p, p)]
    mb_p_rows = mb[p, :]
    mbc = mb.conj()

    beta_normal = (
        ch**2 * nb
        - ch * sh * chi[None, :] * mbc[p, :].T
        - ch * sh * chi.conj()[:, None] * mb_p_rows
        + sh**2 * (chi[None, :] * chi.conj()[:, None]) * (eye + nb_pp.T)
    )
    # delta_{i, partner(j)}, symmetric because the pairing is an involution
    delta_ip = (p[:, None] == np.arange(coupling.n_modes)[None, :]).astype(float)
    beta_anomalous = (
        ch**2 * mb
        - ch * sh * chi[None, :] * (delta_ip + nb[p, :].T)
        - ch * sh * chi[:, None] * nb[p, :]
        + sh**2 * (chi[:, None] * chi[None, :]) * mbc[np.ix_(p, p)].T
    )
    return BetaModeReport(normal=beta_normal, anomalous=beta_anomalous)


@dataclass(frozen=True)
class Trajectory:
    """Sampled covariance evolution: ``states[k]`` holds at ``times[k]``."""

    times: np.ndarray
    states: tuple[CovarianceState, ...]

    def __post_init__(self):
        self.times.setflags(write=False)


def evolve(
    lattice: Lattice,
    spec: DrainSpec,
    initial: CovarianceState,
    t_final: float,
    dt: float,
    n_samples: int = 200,
) -> Trajectory:
    """Integrate the covariance equations with a fixed-step RK4 scheme.

    ``dt`` must resolve the drift: ``dt * ||D||_2 < 0.1``.  With no dark
    modes the trajectory converges to :func:`steady_state`; with ``gamma=0``
    and no loss the total photon number is conserved.
    """
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    d = _drift_matrix(lattice, spec)
    dnorm = float(np.linalg.norm(d, 2))
    if dt * dnorm >= 0.1:
        raise ValueError(
            f"dt too coarse: dt * ||D|| = {dt * dnorm:.3f} must stay below 0.1"
        )
    qn, qm = _diffusion(lattice, spec)
    dc = d.conj()
    dt_arr = d.T

    def rhs(n, m):
        return dc @ n + n @ dt_arr + qn, d @ m + m @ dt_arr + qm

    if t_final == 0:
        return Trajectory(
            times=np.zeros(1),
            states=(CovarianceState(normal=initial.normal.copy(),
                                    anomalous=initial.anomalous.copy()),),
        )
    n_steps = max(1, int(np.ceil(t_final / dt)))
    dt = t_final / n_steps
    sample_every = max(1, n_steps // max(1, n_samples - 1))
    bound = 1e3 * max(
        1.0,
        spec.noise.nbar,
        abs(spec.noise.anomalous),
        float(np.abs(initial.normal).max()),
        float(np.abs(initial.anomalous).max()),
    )

    n = initial.normal.astype(complex).copy()
    m = initial.anomalous.astype(complex).copy()
    times = [0.0]
    states = [CovarianceState(normal=n.copy(), anomalous=m.copy())]
    for step in range(1, n_steps + 1):
        k1n, k1m = rhs(n, m)
        k2n, k2m = rhs(n + 0.5 * dt * k1n, m + 0.5 * dt * k1m)
        k3n, k3m = rhs(n + 0.5 * dt * k2n, m + 0.5 * dt * k2m)
        k4n, k4m = rhs(n + dt * k3n, m + dt * k3m)
        n = n + (dt / 6.0) * (k1n + 2 * k2n + 2 * k3n + k4n)
        m = m + (dt / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
        if max(np.abs(n).max(), np.abs(m).max()) > bound:
            raise SolverError(
                f"covariance integration unstable at step {step}; reduce dt"
            )
        if step % sample_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(
                CovarianceState(
                    normal=0.5 * (n + n.conj().T), anomalous=0.5 * (m + m.T)
                )
            )
    return Trajectory(times=np.asarray(times), states=tuple(states))


def state_to_dict(state: CovarianceState) -> dict:
    """JSON-ready form with complex entries encoded as [re, im] pairs."""

    def encode(mat):
        return [[[v.real, v.imag] for v in row] for row in mat]

    return {
        "n_modes": state.n_modes,
        "normal": encode(state.normal),
        "anomalous": encode(state.anomalous),
        "residual": state.residual,
    }


def state_from_dict(data: dict) -> CovarianceState:
    def decode(rows):
        return np.array([[complex(re, im) for re, im in row] for row in rows])

    return CovarianceState(
        normal=decode(data["normal"]),
        anomalous=decode(data["anomalous"]),
        residual=float(data.get("residual", 0.0)),
    )
