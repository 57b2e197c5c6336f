"""Numerical certificates for the singularly perturbed closed loop.

The boundary layer of every level is a linear companion-form system, so its
stability reduces to a Lyapunov equation ``A^T P + P A = -Q``.  Composite
Lyapunov functions weighting the slow and fast certificates give
block-structured matrices whose positive definiteness certifies the coupled
system; the admissible range of each scale parameter follows from a Schur
complement, since the parameter enters only the fast diagonal block as
``Q_fast / eps``.

For a two-block matrix ``[[A, B^T], [B, C/eps]]`` with ``A > 0`` the matrix
is positive definite iff ``C/eps - B A^-1 B^T > 0``; the largest admissible
``eps`` is therefore ``1 / lambda_max(C^-1 B A^-1 B^T)``.  The same step
applied twice gives the bound on the second scale parameter.

The generic two-time-scale growth analysis is provided in its
linear-quadratic specialization: given interconnection constants
(alpha1, alpha2, beta1, beta2, gamma), the weighted Lyapunov sum is negative
definite for ``eps`` below

    eps_d = alpha1*alpha2 / (alpha1*gamma + ((1-d)beta1 + d beta2)^2 / (4 d (1-d)))

whose maximum over the weight d is ``eps* = alpha1*alpha2/(alpha1*gamma +
beta1*beta2)`` attained at ``d* = beta1/(beta1 + beta2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cbt import GroupLayout
from .control import ControllerConfig, boundary_layer_matrices, coupling
from .errors import CertificateError, ConfigError

__all__ = [
    "LyapunovCertificate",
    "HurwitzVerdict",
    "EpsilonBoundReport",
    "GrowthConstants",
    "GrowthEvaluation",
    "ScenarioStabilityReport",
    "hurwitz_check",
    "solve_lyapunov",
    "coupling_block",
    "assemble_q_eps1",
    "assemble_q_eps2",
    "epsilon1_bound",
    "epsilon2_bound",
    "epsilon_for_weight",
    "two_timescale_eps_star",
    "quadratic_form_negativity_check",
    "growth_grid_maximum",
    "analyze_stability",
]

LYAPUNOV_RESIDUAL_TOL = 1e-10
_COUPLING_EIG_TOL = 1e-12


@dataclass(frozen=True)
class HurwitzVerdict:
    is_hurwitz: bool
    spectral_abscissa: float
    eigenvalues: np.ndarray

    def __bool__(self):
        return self.is_hurwitz


def hurwitz_check(a_matrix) -> HurwitzVerdict:
    """True iff every eigenvalue of A has negative real part."""
    a = np.asarray(a_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {a.shape}")
    eig = np.linalg.eigvals(a)
    abscissa = float(np.max(eig.real))
    return HurwitzVerdict(abscissa < 0.0, abscissa, eig)


@dataclass(frozen=True)
class LyapunovCertificate:
    """Solution P of A^T P + P A = -Q with its substitution residual."""

    a_matrix: np.ndarray
    q_matrix: np.ndarray
    p_matrix: np.ndarray
    residual: float


def _check_spd(mat, name, tol=0.0):
    sym_err = float(np.abs(mat - mat.T).max())
    if sym_err > 1e-10 * max(1.0, float(np.abs(mat).max())):
        raise ConfigError(f"{name} must be symmetric (asymmetry {sym_err:.3e})")
    min_eig = float(np.linalg.eigvalsh(0.5 * (mat + mat.T)).min())
    if min_eig <= tol:
        raise ConfigError(f"{name} must be positive definite (min eig {min_eig:.3e})")
    return min_eig


def solve_lyapunov(a_matrix, q_matrix) -> LyapunovCertificate:
    """Solve the continuous Lyapunov equation by a dense vectorized solve.

    Requires A Hurwitz and Q symmetric positive definite; returns a
    certificate whose residual is checked against 1e-10 and whose P is
    verified positive definite.
    """
    a = np.asarray(a_matrix, dtype=float)
    q = np.asarray(q_matrix, dtype=float)
    verdict = hurwitz_check(a)
    if not verdict:
        offenders = [z for z in verdict.eigenvalues if z.real >= 0]
        raise CertificateError(
            f"system matrix is not Hurwitz; eigenvalues with Re >= 0: {offenders}"
        )
    _check_spd(q, "Q")
    n = a.shape[0]
    if q.shape != (n, n):
        raise ConfigError(f"Q must match A's shape {(n, n)}, got {q.shape}")
    # Row-major vectorization: A^T P + P A = -Q becomes
    # (kron(A^T, I) + kron(I, A^T)) vec(P) = -vec(Q).
    eye = np.eye(n)
    system = np.kron(a.T, eye) + np.kron(eye, a.T)
    p = np.linalg.solve(system, -q.reshape(-1)).reshape(n, n)
    p = 0.5 * (p + p.T)
    residual = float(np.abs(a.T @ p + p @ a + q).max())
    if residual > LYAPUNOV_RESIDUAL_TOL:
        raise CertificateError(
            f"Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:.0e}"
        )
    min_eig = float(np.linalg.eigvalsh(p).min())
    if min_eig <= 0:
        raise CertificateError(
            f"Lyapunov solution is not positive definite (min eig {min_eig:.3e})"
        )
    return LyapunovCertificate(a_matrix=a, q_matrix=q, p_matrix=p, residual=residual)


def coupling_block(kbar) -> np.ndarray:
    """Embed a rate-coupling gain into error-state coordinates.

    For error states E = [scaled position; rate], a coupling K̄ feeding
    level y's rate into level x's acceleration becomes the block matrix
    [[0, 0], [0, -K̄]] mapping E_y into dE_x/dt.
    """
    kbar = np.atleast_2d(np.asarray(kbar, dtype=float))
    a, b = kbar.shape
    out = np.zeros((2 * a, 2 * b))
    out[a:, b:] = -kbar
    return out


# ---------------------------------------------------------------------------
# composite matrices and scale-parameter bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonBoundReport:
    """Admissible upper bound for one scale parameter.

    ``grid`` holds (eps, min eigenvalue, is positive definite) triples from
    the eigenvalue verification sweep around the bound.  ``capped`` is set
    when the coupling vanishes and any parameter up to ``eps_cap`` works.
    """

    d_weight: float
    bound: float
    capped: bool
    verification_eps: float
    min_eigenvalue: float
    q_eps: np.ndarray
    grid: tuple
    determinant_diagnostic: float


def assemble_q_eps1(eps1, q_c, p_r, q_r, a_rc, d1) -> np.ndarray:
    """Composite matrix coupling the centroid and inter-level certificates."""
    a = (1.0 - d1) * np.asarray(q_c, dtype=float)
    b21 = -d1 * np.asarray(p_r, dtype=float) @ np.asarray(a_rc, dtype=float)
    c = (d1 / eps1) * np.asarray(q_r, dtype=float)
    q = np.block([[a, b21.T], [b21, c]])
    return 0.5 * (q + q.T)


def assemble_q_eps2(eps1, eps2, q_eps1, p_s, q_s, a_sr, a_sc, d2) -> np.ndarray:
    """Composite matrix adding the stacked intra level to the eps1 pair."""
    a = (1.0 - d2) * np.asarray(q_eps1, dtype=float)
    p_s = np.asarray(p_s, dtype=float)
    b31 = np.hstack([-d2 * p_s @ np.asarray(a_sc), -d2 * p_s @ np.asarray(a_sr)])
    c = (d2 / (eps1 * eps2)) * np.asarray(q_s, dtype=float)
    q = np.block([[a, b31.T], [b31, c]])
    return 0.5 * (q + q.T)


def _schur_bound(a_block, b_lower, c_base, name):
    """Largest s with c_base/s - B A^-1 B^T > 0, via a generalized eigenproblem."""
    _check_spd(a_block, f"{name}: slow block")
    _check_spd(c_base, f"{name}: fast block")
    m = b_lower @ np.linalg.solve(a_block, b_lower.T)
    m = 0.5 * (m + m.T)
    lam = float(scipy.linalg.eigh(m, c_base, eigvals_only=True)[-1])
    if lam <= _COUPLING_EIG_TOL:
        return np.inf, lam
    return 1.0 / lam, lam


def _pd_grid(assemble, bound, factors=(0.1, 0.5, 2.0, 10.0)):
    grid = []
    for f in factors:
        eps = f * bound
        min_eig = float(np.linalg.eigvalsh(assemble(eps)).min())
        grid.append((eps, min_eig, min_eig > 0.0))
    return tuple(grid)


def epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5, eps_cap=1.0) -> EpsilonBoundReport:
    """Admissible bound on the first scale parameter.

    Assembles the two-block composite matrix with slow block (1-d1) Q_c,
    off-diagonal -d1 P_r A_rc and fast block (d1/eps1) Q_r, and returns the
    largest eps1 keeping it positive definite.  With zero coupling any value
    works and the configured cap is reported.  The product
    det(slow) * det(d1 Q_r - B^T A^-1 B) is carried as a diagnostic.
    """
    if not 0.0 < d1 < 1.0:
        raise ConfigError(f"d1 must lie in (0, 1), got {d1}")
    q_c = np.asarray(q_c, dtype=float)
    p_r = np.asarray(p_r, dtype=float)
    q_r = np.asarray(q_r, dtype=float)
    a_rc = np.asarray(a_rc, dtype=float)
    a_block = (1.0 - d1) * q_c
    b21 = -d1 * p_r @ a_rc
    raw_bound, _ = _schur_bound(a_block, b21, d1 * q_r, "eps1")
    capped = not np.isfinite(raw_bound)
    bound = eps_cap if capped else float(raw_bound)

    def assemble(eps):
        return assemble_q_eps1(eps, q_c, p_r, q_r, a_rc, d1)

    verification_eps = 0.99 * bound
    q_eps = assemble(verification_eps)
    min_eig = float(np.linalg.eigvalsh(q_eps).min())
    if min_eig <= 0:
        raise CertificateError(
            f"composite matrix not positive definite at 0.99 * bound "
            f"({verification_eps:.6g}); min eig {min_eig:.3e}"
        )
    schur_diag = d1 * q_r - b21 @ np.linalg.solve(a_block, b21.T)
    det_diag = float(np.linalg.det(a_block) * np.linalg.det(schur_diag))
    return EpsilonBoundReport(
        d_weight=d1,
        bound=bound,
        capped=capped,
        verification_eps=verification_eps,
        min_eigenvalue=min_eig,
        q_eps=q_eps,
        grid=_pd_grid(assemble, bound),
        determinant_diagnostic=det_diag,
    )


def epsilon2_bound(
    q_eps1, eps1, p_s, q_s, a_sr, a_sc, d2=0.5, eps_cap=1.0
) -> EpsilonBoundReport:
    """Admissible bound on the second scale parameter, given eps1.

    ``q_eps1`` must be the composite matrix assembled at the supplied eps1
    and must be positive definite (i.e. eps1 must respect its own bound).
    """
    if not 0.0 < d2 < 1.0:
        raise ConfigError(f"d2 must lie in (0, 1), got {d2}")
    q_eps1 = np.asarray(q_eps1, dtype=float)
    p_s = np.asarray(p_s, dtype=float)
    q_s = np.asarray(q_s, dtype=float)
    a_block = (1.0 - d2) * q_eps1
    b31 = np.hstack(
        [-d2 * p_s @ np.asarray(a_sc, dtype=float), -d2 * p_s @ np.asarray(a_sr, dtype=float)]
    )
    raw_bound, _ = _schur_bound(a_block, b31, (d2 / eps1) * q_s, "eps2")
    capped = not np.isfinite(raw_bound)
    bound = eps_cap if capped else float(raw_bound)

    def assemble(eps2):
        return assemble_q_eps2(eps1, eps2, q_eps1, p_s, q_s, a_sr, a_sc, d2)

    verification_eps = 0.99 * bound
    q_eps = assemble(verification_eps)
    min_eig = float(np.linalg.eigvalsh(q_eps).min())
    if min_eig <= 0:
        raise CertificateError(
            f"composite matrix not positive definite at 0.99 * bound "
            f"({verification_eps:.6g}); min eig {min_eig:.3e}"
        )
    schur_diag = (d2 / eps1) * q_s - b31 @ np.linalg.solve(a_block, b31.T)
    det_diag = float(np.linalg.det(a_block) * np.linalg.det(schur_diag))
    return EpsilonBoundReport(
        d_weight=d2,
        bound=bound,
        capped=capped,
        verification_eps=verification_eps,
        min_eigenvalue=min_eig,
        q_eps=q_eps,
        grid=_pd_grid(assemble, bound),
        determinant_diagnostic=det_diag,
    )


# ---------------------------------------------------------------------------
# generic two-time-scale growth constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthConstants:
    """Interconnection constants of the two-time-scale growth conditions."""

    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ConfigError("alpha1 and alpha2 must be positive")
        if self.beta1 < 0 or self.beta2 < 0 or self.gamma < 0:
            raise ConfigError("beta1, beta2 and gamma must be nonnegative")
        if self.beta1 + self.beta2 <= 0:
            raise ConfigError("beta1 + beta2 must be positive")


def epsilon_for_weight(constants: GrowthConstants, d: float) -> float:
    """Admissible scale bound eps_d for one composite weight d in (0, 1)."""
    if not 0.0 < d < 1.0:
        raise ConfigError(f"d must lie in (0, 1), got {d}")
    cross = ((1.0 - d) * constants.beta1 + d * constants.beta2) ** 2 / (
        4.0 * d * (1.0 - d)
    )
    return constants.alpha1 * constants.alpha2 / (constants.alpha1 * constants.gamma + cross)


def two_timescale_eps_star(constants: GrowthConstants):
    """Maximum of eps_d over the weight: (eps*, d*).

    eps* = alpha1 alpha2 / (alpha1 gamma + beta1 beta2) attained at
    d* = beta1 / (beta1 + beta2).
    """
    denom = constants.alpha1 * constants.gamma + constants.beta1 * constants.beta2
    if denom <= 0:
        raise ConfigError(
            "degenerate growth constants: alpha1*gamma + beta1*beta2 must be positive"
        )
    eps_star = constants.alpha1 * constants.alpha2 / denom
    d_star = constants.beta1 / (constants.beta1 + constants.beta2)
    if 0.0 < d_star < 1.0:
        at_star = epsilon_for_weight(constants, d_star)
        if abs(at_star - eps_star) > 1e-9 * eps_star:
            raise CertificateError(
                f"eps_d at d* ({at_star:.12g}) does not reproduce eps* "
                f"({eps_star:.12g})"
            )
    return eps_star, d_star


def quadratic_form_negativity_check(
    constants: GrowthConstants, eps: float, d: float
) -> bool:
    """True iff the weighted Lyapunov derivative's quadratic form is negative
    definite: d(1-d) alpha1 (alpha2/eps - gamma) > [(1-d)beta1 + d beta2]^2 / 4.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    lhs = d * (1.0 - d) * constants.alpha1 * (constants.alpha2 / eps - constants.gamma)
    rhs = 0.25 * ((1.0 - d) * constants.beta1 + d * constants.beta2) ** 2
    return bool(lhs > rhs)


def growth_grid_maximum(constants: GrowthConstants, n_points: int = 10_000):
    """Brute-force maximum of eps_d over a uniform interior d-grid."""
    ds = np.linspace(0.0, 1.0, n_points + 2)[1:-1]
    values = np.array([epsilon_for_weight(constants, d) for d in ds])
    idx = int(np.argmax(values))
    return float(values[idx]), float(ds[idx])


# ---------------------------------------------------------------------------
# scenario-level report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthEvaluation:
    constants: GrowthConstants
    eps_star: float
    d_star: float
    grid_eps: float
    grid_d: float


@dataclass
class ScenarioStabilityReport:
    """Certificates and scale-parameter bounds for one controller setup."""

    hurwitz: dict
    certificates: dict
    eps1: EpsilonBoundReport | None
    eps2: EpsilonBoundReport | None
    eps2_evaluated_at_eps1: float | None
    configured_epsilons: tuple
    eps1_within_bound: bool | None
    eps2_within_bound: bool | None
    growth: GrowthEvaluation | None = None


def analyze_stability(
    config: ControllerConfig,
    layout: GroupLayout,
    d1: float = 0.5,
    d2: float = 0.5,
    eps_cap: float = 1.0,
    growth_constants: GrowthConstants | None = None,
) -> ScenarioStabilityReport:
    """Full certificate chain for a controller configuration.

    Boundary-layer companion matrices are checked Hurwitz and certified with
    identity Q; the composite bounds couple centroid/inter (first parameter)
    and then the stacked intra level (second parameter).  For a single
    subgroup there is no inter level and the two-block bound couples the
    centroid with the stacked intra level directly, constraining the product
    of the two scale parameters; it is reported as ``eps1``.

    Raises ``CertificateError`` if any boundary layer fails its Hurwitz or
    Lyapunov check.
    """
    mats = boundary_layer_matrices(config, layout)
    hurwitz = {name: hurwitz_check(m) for name, m in mats.items()}
    for name, verdict in hurwitz.items():
        if not verdict:
            raise CertificateError(
                f"boundary layer {name!r} is not Hurwitz (spectral abscissa "
                f"{verdict.spectral_abscissa:.4g}); increase its base gains"
            )
    certificates = {
        name: solve_lyapunov(m, np.eye(m.shape[0]))
        for name, m in mats.items()
        if name in ("intra_stacked", "inter", "centroid")
    }
    p_c = certificates["centroid"].p_matrix
    q_c = np.eye(p_c.shape[0])
    p_s = certificates["intra_stacked"].p_matrix
    q_s = np.eye(p_s.shape[0])
    n_s = layout.n_intra

    eps1_rep = None
    eps2_rep = None
    eps2_at = None
    e1, e2 = config.epsilons[0], config.epsilons[1]
    if layout.m > 1:
        p_r = certificates["inter"].p_matrix
        q_r = np.eye(p_r.shape[0])
        a_rc = coupling_block(coupling(config, "inter_centroid", (2 * layout.n_inter, 2)))
        a_sr = coupling_block(
            coupling(config, "intra_inter", (2 * n_s, 2 * layout.n_inter))
        )
        a_sc = coupling_block(coupling(config, "intra_centroid", (2 * n_s, 2)))
        eps1_rep = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=d1, eps_cap=eps_cap)
        eps2_at = min(e1, 0.99 * eps1_rep.bound)
        q_eps1 = assemble_q_eps1(eps2_at, q_c, p_r, q_r, a_rc, d1)
        eps2_rep = epsilon2_bound(
            q_eps1, eps2_at, p_s, q_s, a_sr, a_sc, d2=d2, eps_cap=eps_cap
        )
        eps1_ok = e1 < eps1_rep.bound
        eps2_ok = bool(eps1_ok and e2 < eps2_rep.bound)
    else:
        a_sc = coupling_block(coupling(config, "intra_centroid", (2 * n_s, 2)))
        eps1_rep = epsilon1_bound(q_c, p_s, q_s, a_sc, d1=d1, eps_cap=eps_cap)
        eps1_ok = e1 * e2 < eps1_rep.bound
        eps2_ok = None

    growth = None
    if growth_constants is not None:
        eps_star, d_star = two_timescale_eps_star(growth_constants)
        grid_eps, grid_d = growth_grid_maximum(growth_constants)
        growth = GrowthEvaluation(
            constants=growth_constants,
            eps_star=eps_star,
            d_star=d_star,
            grid_eps=grid_eps,
            grid_d=grid_d,
        )
    return ScenarioStabilityReport(
        hurwitz=hurwitz,
        certificates=certificates,
        eps1=eps1_rep,
        eps2=eps2_rep,
        eps2_evaluated_at_eps1=eps2_at,
        configured_epsilons=config.epsilons,
        eps1_within_bound=eps1_ok,
        eps2_within_bound=eps2_ok,
        growth=growth,
    )
