import numpy as np
import pytest

from formscale.cbt import GroupLayout
from formscale.control import ControllerConfig, companion_matrix, coupling
from formscale.errors import CertificateError, ConfigError
from formscale.stability import (
    GrowthConstants,
    analyze_stability,
    assemble_q_eps1,
    coupling_block,
    epsilon1_bound,
    epsilon2_bound,
    epsilon_for_weight,
    growth_grid_maximum,
    hurwitz_check,
    quadratic_form_negativity_check,
    solve_lyapunov,
    two_timescale_eps_star,
)

PAPER_LAYOUT = GroupLayout([3, 3, 3])
PAPER_CONFIG = ControllerConfig(epsilons=(0.1, 0.1))


# ---------------------------------------------------------------------------
# Lyapunov solutions and Hurwitz checks
# ---------------------------------------------------------------------------


def test_lyapunov_identity_case():
    cert = solve_lyapunov(-np.eye(2), 2.0 * np.eye(2))
    np.testing.assert_allclose(cert.p_matrix, np.eye(2), atol=1e-12)
    assert cert.residual <= 1e-10


def test_lyapunov_companion_case():
    a = np.array([[0.0, 1.0], [-1.0, -1.0]])
    cert = solve_lyapunov(a, np.eye(2))
    assert cert.residual <= 1e-10
    assert np.linalg.eigvalsh(cert.p_matrix).min() > 0
    # independent substitution check
    np.testing.assert_allclose(a.T @ cert.p_matrix + cert.p_matrix @ a, -np.eye(2),
                               atol=1e-12)


def test_lyapunov_rejects_non_hurwitz():
    a = np.diag([0.1, -1.0])
    with pytest.raises(CertificateError, match="not Hurwitz"):
        solve_lyapunov(a, np.eye(2))


def test_lyapunov_rejects_bad_q():
    with pytest.raises(ConfigError):
        solve_lyapunov(-np.eye(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ConfigError):
        solve_lyapunov(-np.eye(2), -np.eye(2))


def test_lyapunov_larger_random_hurwitz_systems():
    rng = np.random.default_rng(6)
    for n in (4, 8, 24):
        a = rng.normal(size=(n, n))
        a = a - (abs(np.linalg.eigvals(a).real).max() + 1.0) * np.eye(n)
        cert = solve_lyapunov(a, np.eye(n))
        assert cert.residual <= 1e-10


def test_hurwitz_companion_unit_gains():
    verdict = hurwitz_check(companion_matrix(1.0, 1.0, 2))
    assert verdict.is_hurwitz
    assert verdict.spectral_abscissa == pytest.approx(-0.5, abs=1e-12)
    # eigenvalues of s^2 + s + 1 are -1/2 +/- i sqrt(3)/2
    imag = np.sort(np.abs(verdict.eigenvalues.imag))
    np.testing.assert_allclose(imag[-1], np.sqrt(3) / 2, atol=1e-12)


def test_hurwitz_zero_matrix_false():
    verdict = hurwitz_check(np.zeros((3, 3)))
    assert not verdict.is_hurwitz
    assert verdict.spectral_abscissa == 0.0


def test_centroid_boundary_layer_hurwitz():
    a_c = companion_matrix(1.0, 1.0, 2)
    assert hurwitz_check(a_c).is_hurwitz


# ---------------------------------------------------------------------------
# composite bounds
# ---------------------------------------------------------------------------


def paper_bound_inputs():
    config = PAPER_CONFIG
    layout = PAPER_LAYOUT
    p_r = solve_lyapunov(companion_matrix(1.0, 1.0, 2 * layout.n_inter),
                         np.eye(4 * layout.n_inter)).p_matrix
    p_s = solve_lyapunov(companion_matrix(1.0, 1.0, 2 * layout.n_intra),
                         np.eye(4 * layout.n_intra)).p_matrix
    q_c = np.eye(4)
    q_r = np.eye(4 * layout.n_inter)
    q_s = np.eye(4 * layout.n_intra)
    a_rc = coupling_block(coupling(config, "inter_centroid", (2 * layout.n_inter, 2)))
    a_sr = coupling_block(
        coupling(config, "intra_inter", (2 * layout.n_intra, 2 * layout.n_inter))
    )
    a_sc = coupling_block(coupling(config, "intra_centroid", (2 * layout.n_intra, 2)))
    return q_c, q_r, q_s, p_r, p_s, a_rc, a_sr, a_sc


def test_eps1_zero_coupling_reports_cap():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    rep = epsilon1_bound(q_c, p_r, q_r, np.zeros_like(a_rc), d1=0.5, eps_cap=0.7)
    assert rep.capped
    assert rep.bound == 0.7
    assert rep.min_eigenvalue > 0


def test_eps1_paper_configuration_grid():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    rep = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5)
    assert rep.bound > 0
    assert not rep.capped
    # eigenvalue grid: positive definite strictly below the bound, indefinite
    # within a factor of ten above it
    verdicts = {round(eps / rep.bound, 2): ok for eps, _, ok in rep.grid}
    assert verdicts[0.1] and verdicts[0.5]
    assert not verdicts[2.0] and not verdicts[10.0]


def test_eps1_bound_admits_no_failing_eps():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    rep = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5)
    for frac in np.linspace(0.05, 0.999, 25):
        q = assemble_q_eps1(frac * rep.bound, q_c, p_r, q_r, a_rc, 0.5)
        assert np.linalg.eigvalsh(q).min() > 0


def test_eps1_monotone_in_slow_block():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    rep1 = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5)
    rep2 = epsilon1_bound(2.0 * q_c, p_r, q_r, a_rc, d1=0.5)
    assert rep2.bound >= rep1.bound


def test_eps1_rejects_bad_weights():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    with pytest.raises(ConfigError):
        epsilon1_bound(q_c, p_r, q_r, a_rc, d1=1.0)
    with pytest.raises(ConfigError):
        epsilon1_bound(-q_c, p_r, q_r, a_rc, d1=0.5)


def test_eps2_zero_couplings_reports_cap():
    q_c, q_r, q_s, p_r, p_s, a_rc, a_sr, a_sc = paper_bound_inputs()
    eps1 = 0.05
    q_eps1 = assemble_q_eps1(eps1, q_c, p_r, q_r, a_rc, 0.5)
    rep = epsilon2_bound(
        q_eps1, eps1, p_s, q_s, np.zeros_like(a_sr), np.zeros_like(a_sc),
        d2=0.5, eps_cap=0.9,
    )
    assert rep.capped and rep.bound == 0.9


def test_eps2_paper_configuration():
    q_c, q_r, q_s, p_r, p_s, a_rc, a_sr, a_sc = paper_bound_inputs()
    rep1 = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5)
    eps1 = min(0.1, 0.99 * rep1.bound)
    q_eps1 = assemble_q_eps1(eps1, q_c, p_r, q_r, a_rc, 0.5)
    rep2 = epsilon2_bound(q_eps1, eps1, p_s, q_s, a_sr, a_sc, d2=0.5)
    assert rep2.bound > 0
    assert rep2.min_eigenvalue > 0
    verdicts = {round(eps / rep2.bound, 2): ok for eps, _, ok in rep2.grid}
    assert verdicts[0.1] and verdicts[0.5]
    assert not verdicts[2.0] and not verdicts[10.0]


def test_eps2_not_increased_by_stronger_couplings():
    q_c, q_r, q_s, p_r, p_s, a_rc, a_sr, a_sc = paper_bound_inputs()
    eps1 = 0.05
    q_eps1 = assemble_q_eps1(eps1, q_c, p_r, q_r, a_rc, 0.5)
    rep = epsilon2_bound(q_eps1, eps1, p_s, q_s, a_sr, a_sc, d2=0.5)
    rep_double = epsilon2_bound(q_eps1, eps1, p_s, q_s, 2 * a_sr, 2 * a_sc, d2=0.5)
    assert rep_double.bound <= rep.bound


def test_eps1_not_increased_by_stronger_coupling():
    q_c, q_r, _, p_r, _, a_rc, _, _ = paper_bound_inputs()
    rep = epsilon1_bound(q_c, p_r, q_r, a_rc, d1=0.5)
    rep_double = epsilon1_bound(q_c, p_r, q_r, 2 * a_rc, d1=0.5)
    assert rep_double.bound <= rep.bound


# ---------------------------------------------------------------------------
# growth-constant formulas
# ---------------------------------------------------------------------------


def test_eps_star_unit_constants():
    eps_star, d_star = two_timescale_eps_star(GrowthConstants(1, 1, 1, 1, 0))
    assert eps_star == pytest.approx(1.0, rel=1e-14)
    assert d_star == pytest.approx(0.5, rel=1e-14)


def test_eps_star_vanishes_for_large_gamma():
    small = two_timescale_eps_star(GrowthConstants(1, 1, 1, 1, 1e8))[0]
    assert small < 1e-7


def test_eps_star_matches_grid_search():
    rng = np.random.default_rng(23)
    for _ in range(20):
        gc = GrowthConstants(*rng.uniform(0.1, 5.0, size=5))
        eps_star, d_star = two_timescale_eps_star(gc)
        grid_eps, grid_d = growth_grid_maximum(gc, n_points=10_000)
        assert abs(grid_eps - eps_star) / eps_star <= 1e-3
        assert abs(grid_d - d_star) <= 1e-3


def test_negativity_check_matches_eps_d():
    gc = GrowthConstants(2.0, 1.5, 0.7, 1.3, 0.4)
    for d in (0.2, 0.5, 0.8):
        eps_d = epsilon_for_weight(gc, d)
        assert quadratic_form_negativity_check(gc, 0.999 * eps_d, d)
        assert not quadratic_form_negativity_check(gc, 2.0 * eps_d, d)


def test_negativity_check_false_on_weight_boundary():
    gc = GrowthConstants(1.0, 1.0, 1.0, 1.0, 0.0)
    for eps in (1e-6, 0.1, 10.0):
        assert not quadratic_form_negativity_check(gc, eps, 0.0)
        assert not quadratic_form_negativity_check(gc, eps, 1.0)


def test_growth_constants_validation():
    with pytest.raises(ConfigError):
        GrowthConstants(0.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        GrowthConstants(1.0, 1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        GrowthConstants(1.0, 1.0, -0.5, 1.0, 0.0)


def test_eps_star_degenerate_denominator():
    with pytest.raises(ConfigError):
        two_timescale_eps_star(GrowthConstants(1.0, 1.0, 1.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# scenario-level orchestration
# ---------------------------------------------------------------------------


def test_analyze_stability_paper_setup():
    report = analyze_stability(PAPER_CONFIG, PAPER_LAYOUT)
    assert all(v.is_hurwitz for v in report.hurwitz.values())
    for cert in report.certificates.values():
        assert cert.residual <= 1e-10
    assert report.eps1.bound > 0
    assert report.eps1.min_eigenvalue > 0
    assert report.eps2.bound > 0
    assert report.eps2.min_eigenvalue > 0
    # the verdict for the configured parameters is reported, whatever it is
    assert report.eps1_within_bound in (True, False)
    assert report.eps2_within_bound in (True, False)


def test_analyze_stability_single_group():
    report = analyze_stability(ControllerConfig(epsilons=(0.3, 0.3)), GroupLayout([3]))
    assert report.eps1 is not None
    assert report.eps2 is None
    assert report.eps1_within_bound in (True, False)


def test_analyze_stability_rejects_negative_gains():
    config = ControllerConfig(intra_gains=(-1.0, 1.0))
    with pytest.raises(CertificateError, match="not Hurwitz"):
        analyze_stability(config, GroupLayout([3, 3]))


def test_analyze_stability_with_growth_constants():
    report = analyze_stability(
        PAPER_CONFIG, PAPER_LAYOUT,
        growth_constants=GrowthConstants(1.0, 1.0, 1.0, 1.0, 0.0),
    )
    assert report.growth.eps_star == pytest.approx(1.0)
    assert report.growth.d_star == pytest.approx(0.5)
    assert abs(report.growth.grid_eps - 1.0) <= 1e-3
