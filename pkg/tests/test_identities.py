import json
import math

import numpy as np
import pytest

from levelgeom import errors
from levelgeom import fields
from levelgeom import identities
from levelgeom import meshing
from levelgeom import quadrature
from levelgeom import reports


def suite(field, interval, box, qcfg, grid=None, **kwargs):
    return identities.SuiteConfig(
        field=field,
        interval=fields.Interval(*interval),
        box=box,
        quadrature=qcfg,
        grid=grid,
        **kwargs,
    )


def agrees(report, slack=1.5):
    return report.abs_diff <= slack * report.tolerance


def test_report_within_relative_floor():
    report = reports.make_report(
        "THM_A", reports.IntegralEstimate.exact(1.0), reports.IntegralEstimate.exact(1.0005), rtol=1e-3
    )
    assert report.passed
    assert report.abs_diff == pytest.approx(5e-4)
    assert report.tolerance == pytest.approx(1.0005e-3)


def test_report_tolerance_follows_standard_errors():
    lhs = reports.IntegralEstimate(10.0, 0.3)
    rhs = reports.IntegralEstimate.exact(11.0)
    assert reports.make_report("COAREA", lhs, rhs, 1e-3, 3.0).verdict == "fail"
    assert reports.make_report("COAREA", lhs, rhs, 1e-3, 4.0).verdict == "pass"


def test_report_scale_sets_the_floor_for_vanishing_sides():
    lhs = reports.IntegralEstimate.exact(0.01)
    zero = reports.IntegralEstimate.exact(0.0)
    assert reports.make_report("PROP_A", lhs, zero, 1e-3).verdict == "fail"
    assert reports.make_report("PROP_A", lhs, zero, 1e-3, scale=20.0).verdict == "pass"


def test_report_notes_are_deduplicated():
    lhs = reports.IntegralEstimate(1.0, notes=("a",))
    report = reports.make_report("THM_B", lhs, reports.IntegralEstimate.exact(1.0), notes=("a", "b"))
    assert report.notes == ("a", "b")


def test_report_rejects_unknown_identity():
    zero = reports.IntegralEstimate.exact(0.0)
    with pytest.raises(AssertionError):
        reports.make_report("UNKNOWN", zero, zero)


def test_skipped_report():
    report = reports.skipped_report("PROP_B", "precondition: n odd")
    assert report.skipped and not report.passed
    entry = report.to_json()
    assert entry["verdict"] == "skipped"
    assert entry["lhs"] is None and entry["diff"] is None
    assert entry["notes"] == ["precondition: n odd"]


def test_estimate_arithmetic():
    a = reports.IntegralEstimate(3.0, 0.3)
    b = reports.IntegralEstimate(1.0, 0.4)
    assert a.minus(b).value == 2.0
    assert a.minus(b).std_error == pytest.approx(0.5)
    assert a.scaled(-2.0).std_error == pytest.approx(0.6)


def test_verdicts_and_summary():
    one = reports.IntegralEstimate.exact(1.0)
    two = reports.IntegralEstimate.exact(2.0)
    results = [
        reports.make_report("THM_A", one, one),
        reports.make_report("PROP_A", one, one, label="i=1"),
        reports.make_report("PROP_A", one, two, label="i=2"),
        reports.skipped_report("PROP_B", "precondition: d = 4"),
    ]
    assert identities.identity_verdicts(results) == {"THM_A": "pass", "PROP_A": "fail", "PROP_B": "skipped"}
    assert identities.summary_line(results) == "1/3 identities passed, 1 skipped, 1 failed"
    assert identities.failures(results) == 1
    payload = identities.suite_to_json(results, {"command": "verify"})
    assert json.loads(json.dumps(payload))["summary"] == identities.summary_line(results)
    assert [r["label"] for r in payload["reports"][1:3]] == ["i=1", "i=2"]
    assert identities.summary_table(results).row_count == 4


@pytest.mark.parametrize("n, volume", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2)])
def test_sphere_volume(n, volume):
    assert identities.sphere_volume(n) == pytest.approx(volume)


def test_weights():
    ts = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(identities.WeightSpec("constant", (2.0,))(ts), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(identities.WeightSpec("indicator", (1.0,), 1.0)(ts), [1.0, 1.0, 0.0])
    np.testing.assert_allclose(identities.WeightSpec("polynomial", (1.0, 0.0, 3.0))(ts), [1.0, 4.0, 13.0])
    assert "t <= 1" in identities.WeightSpec("indicator", (1.0,), 1.0).describe()
    with pytest.raises(errors.ConfigError):
        identities.WeightSpec("gaussian")
    with pytest.raises(errors.ConfigError):
        identities.WeightSpec("indicator")


def test_suite_config_validation(sphere, box, qcfg):
    with pytest.raises(errors.ConfigError):
        suite(sphere, (1.0, 4.0), box, qcfg, identities=("THM_C",))
    with pytest.raises(errors.ConfigError):
        suite(sphere, (1.0, 4.0), box, qcfg, coarea_integrand="cube")
    with pytest.raises(errors.ConfigError):
        suite(sphere, (1.0, 4.0), box, qcfg, bins=0)
    with pytest.raises(errors.ConfigError):
        suite(sphere, (1.0, 4.0), fields.BoundingBox.uniform(-2.5, 2.5, 2), qcfg)


def test_midpoint_and_stencil(sphere, box, qcfg):
    cfg = suite(sphere, (1.0, 4.0), box, qcfg)
    assert cfg.midpoint == 2.5 and cfg.stencil == pytest.approx(0.3)
    cfg = suite(sphere, (1.0, 4.0), box, qcfg, t0=2.0, step=0.05)
    assert cfg.midpoint == 2.0 and cfg.stencil == 0.05
    assert suite(sphere, (2.0, 2.0), box, qcfg).stencil == pytest.approx(0.2)


def profile_of(values, edges):
    values = np.asarray(values, np.float64)
    return quadrature.LevelProfile(np.asarray(edges, np.float64), values, np.full(len(values), 0.01))


def test_linear_profile_has_no_kinks():
    edges = np.linspace(1.0, 4.0, 31)
    profile = profile_of(4 * math.pi * 0.5 * (edges[1:] + edges[:-1]), edges)
    assert identities.scan_kinks(profile, ()) == []


def test_kink_is_reported_unless_explained():
    edges = np.linspace(0.0, 5.0, 11)
    centers = 0.5 * (edges[1:] + edges[:-1])
    profile = profile_of(10 * np.maximum(0.0, centers - 2.5), edges)
    notes = identities.scan_kinks(profile, ())
    assert len(notes) == 2
    assert all("without a known critical value" in note for note in notes)
    assert identities.scan_kinks(profile, (2.5,)) == []
    assert len(identities.scan_kinks(profile, (4.2,))) == 2


def test_degenerate_interval_identities_are_exact(sphere, box, qcfg):
    cfg = suite(sphere, (2.0, 2.0), box, qcfg, grid=meshing.GridSpec(box, 32))
    report = identities.verify_theorem_a(cfg)
    assert report.passed and report.lhs.value == 0.0 and report.rhs.value == 0.0
    assert identities.verify_theorem_b(cfg).passed
    assert all(r.passed for r in identities.verify_prop_a(cfg))


def test_suite_runs_in_fixed_order(sphere, box, qcfg):
    cfg = suite(sphere, (2.0, 2.0), box, qcfg, grid=meshing.GridSpec(box, 32), identities=("PROP_B", "THM_A"))
    results = identities.run_suite(cfg)
    assert [r.identity for r in results] == ["THM_A", "PROP_B"]
    assert all(r.passed for r in results)


def test_critical_endpoint_is_rejected(sphere, box, qcfg):
    cfg = suite(sphere, (0.0, 1.0), box, qcfg)
    with pytest.raises(errors.CriticalValueError):
        identities.verify_theorem_a(cfg)
    with pytest.raises(errors.CriticalValueError):
        identities.run_suite(cfg)


def test_difference_stencil_must_avoid_critical_values(sphere, box, qcfg):
    cfg = suite(sphere, (0.0, 1.0), box, qcfg, t0=0.05, step=0.1)
    with pytest.raises(errors.CriticalValueError):
        identities.verify_corollary_vprime(cfg)


def test_default_level_avoids_critical_values(double_well, sphere, box, qcfg):
    dw_box = fields.BoundingBox.uniform(-2.0, 2.0, 3)
    analysis = identities.Analysis(suite(double_well, (0.5, 1.5), dw_box, qcfg))
    assert analysis.default_level() == pytest.approx(0.75)
    assert analysis.difference_step(0.75) == pytest.approx(0.05)
    analysis = identities.Analysis(suite(sphere, (1.0, 4.0), box, qcfg))
    assert analysis.default_level() == 2.5
    assert analysis.difference_step(2.5) == pytest.approx(0.3)
    analysis = identities.Analysis(suite(sphere, (1.0, 4.0), box, qcfg, t0=3.0, step=0.05))
    assert analysis.default_level() == 3.0
    assert analysis.difference_step(3.0) == 0.05


def test_corollary_without_a_regular_level_is_skipped(sphere, box, qcfg):
    cfg = suite(sphere, (0.0, 0.0), box, qcfg, identities=("COR_VPRIME",))
    with pytest.raises(errors.PreconditionError):
        identities.Analysis(cfg).default_level()
    (report,) = identities.run_suite(cfg)
    assert report.skipped
    assert "No regular level" in report.notes[0]


def test_explicit_critical_level_is_rejected(sphere, box, qcfg):
    cfg = suite(sphere, (0.0, 1.0), box, qcfg, t0=0.0)
    with pytest.raises(errors.CriticalValueError):
        identities.verify_corollary_vprime(cfg)


def test_gauss_bonnet_needs_even_n_and_a_mesh(sphere, box, qcfg):
    box4 = fields.BoundingBox.uniform(-2.5, 2.5, 4)
    cfg = suite(fields.Sphere(4), (1.0, 4.0), box4, qcfg, identities=("PROP_B", "GB_LEVEL"))
    results = identities.run_suite(cfg)
    assert [r.verdict for r in results] == ["skipped", "skipped"]
    assert "n even" in results[0].notes[0]
    (report,) = identities.run_suite(suite(sphere, (1.0, 4.0), box, qcfg, identities=("PROP_B",)))
    assert report.skipped
    assert report.notes[0].startswith("precondition:") and "mesh" in report.notes[0]


def test_prop_b_is_skipped_across_a_critical_value(double_well, qcfg):
    box = fields.BoundingBox.uniform(-2.0, 2.0, 3)
    cfg = suite(
        double_well, (0.5, 1.5), box, qcfg, grid=meshing.GridSpec(box, 64), identities=("PROP_B",)
    )
    analysis = identities.Analysis(cfg)
    assert analysis.critical_values == pytest.approx((1.0,))
    assert "critical values {1}" in analysis.decomposition.describe()
    (report,) = identities.run_suite(cfg, analysis=analysis)
    assert report.skipped
    assert "critical values" in report.notes[0]


def test_theorem_b_with_polynomial_weight(sphere, box, qcfg):
    cfg = suite(sphere, (1.0, 4.0), box, qcfg)
    report = identities.verify_theorem_b(cfg, identities.WeightSpec("polynomial", (0.0, 1.0)))
    assert agrees(report)
    assert report.lhs.value == pytest.approx(84 * math.pi, rel=1e-2)
    assert report.rhs.value == pytest.approx(84 * math.pi, rel=1e-2)
    assert report.label == "h = 0 t^0 + 1 t^1"


def test_theorem_b_with_indicator_weight(sphere, box, qcfg):
    cfg = suite(sphere, (1.0, 4.0), box, qcfg)
    report = identities.verify_theorem_b(cfg, identities.WeightSpec("indicator", (1.0,), 2.5))
    assert agrees(report)
    assert report.lhs.value == pytest.approx(10.5 * math.pi, rel=2e-2)
    assert report.rhs.value == pytest.approx(10.5 * math.pi, rel=2e-2)


def test_gauss_bonnet_on_a_sphere_level(sphere, box, qcfg):
    cfg = suite(sphere, (1.0, 4.0), box, qcfg, grid=meshing.GridSpec(box, 128))
    report = identities.verify_gauss_bonnet_level(cfg)
    assert report.passed
    assert report.rhs.value == pytest.approx(4 * math.pi)
    assert report.label == "t=2.5"
    assert "chi = 2" in report.notes


@pytest.mark.slow
def test_sphere_suite(sphere, box, qcfg):
    cfg = suite(
        sphere,
        (1.0, 4.0),
        box,
        qcfg,
        grid=meshing.GridSpec(box, 128),
        identities=reports.IDENTITIES + reports.EXTRA_IDENTITIES,
    )
    results = identities.run_suite(cfg)
    assert [r.identity for r in results] == [
        "COAREA", "THM_A", "COR_VPRIME", "THM_B", "PROP_A", "PROP_A", "PROP_A", "PROP_B", "GB_LEVEL",
    ]
    for report in results:
        assert agrees(report), (report.identity, report.label, report.abs_diff, report.tolerance)
    by_name = {r.identity: r for r in results}
    assert by_name["THM_A"].lhs.value == pytest.approx(12 * math.pi, rel=1e-2)
    assert by_name["COR_VPRIME"].rhs.value == pytest.approx(4 * math.pi, rel=1e-2)
    assert by_name["PROP_B"].rhs.value == pytest.approx(12 * math.pi)


@pytest.mark.slow
def test_torus_prop_b_vanishes(torus, qcfg):
    box = fields.BoundingBox([-3.25, -3.25, -1.25], [3.25, 3.25, 1.25])
    cfg = suite(torus, (0.1, 0.5), box, qcfg, grid=meshing.GridSpec(box, 192), identities=("PROP_B",))
    (report,) = identities.run_suite(cfg)
    assert report.rhs.value == 0.0
    assert "chi(f^-1(0.1)) = 0" in report.notes
    assert any("degenerate" in note for note in report.notes)
    assert agrees(report)


@pytest.mark.slow
def test_theorem_a_in_four_dimensions():
    sphere = fields.Sphere(4)
    box = fields.BoundingBox.uniform(-2.5, 2.5, 4)
    qcfg = quadrature.QuadratureConfig(samples=1_000_000, seed=3, shell_epsilon=0.05)
    report = identities.verify_theorem_a(suite(sphere, (1.0, 4.0), box, qcfg))
    assert report.rhs.value == pytest.approx(14 * math.pi**2, rel=2e-2)
    assert agrees(report)


@pytest.mark.parametrize("t0", [2.0, 3.0])
def test_corollary_at_fixed_levels(sphere, box, qcfg, t0):
    cfg = suite(sphere, (1.0, 4.0), box, qcfg, grid=meshing.GridSpec(box, 128), t0=t0)
    report = identities.verify_corollary_vprime(cfg)
    assert report.label == f"t0={t0:g}"
    assert report.lhs.value == pytest.approx(4 * math.pi, rel=1e-2)
    assert report.rhs.value == pytest.approx(4 * math.pi, rel=1e-2)
    assert agrees(report)


def test_theorem_a_telescopes(sphere, box, qcfg):
    def rhs(a, b):
        cfg = suite(sphere, (a, b), box, qcfg, grid=meshing.GridSpec(box, 64))
        return identities.verify_theorem_a(cfg).rhs

    whole, lower, upper = rhs(1.0, 4.0), rhs(1.0, 2.5), rhs(2.5, 4.0)
    sigma = math.sqrt(whole.std_error**2 + lower.std_error**2 + upper.std_error**2)
    assert abs(whole.value - (lower.value + upper.value)) <= 3 * sigma + 1e-9 * abs(whole.value)


def test_prop_a_on_an_ellipsoid(box, qcfg):
    cfg = suite(fields.Quadric([1.0, 2.0, 3.0]), (1.0, 4.0), box, qcfg)
    results = identities.verify_prop_a(cfg)
    assert [r.label for r in results] == ["i=1", "i=2", "i=3"]
    for report in results:
        assert report.rhs.value == 0.0
        assert agrees(report), (report.label, report.abs_diff, report.tolerance)


@pytest.fixture
def double_well_suite(double_well):
    box = fields.BoundingBox.uniform(-2.0, 2.0, 3)
    qcfg = quadrature.QuadratureConfig(samples=2_000_000, seed=7, shell_epsilon=0.015)
    return suite(
        double_well,
        (0.5, 1.5),
        box,
        qcfg,
        grid=meshing.GridSpec(box, 160),
        identities=reports.IDENTITIES + reports.EXTRA_IDENTITIES,
    )


@pytest.mark.slow
@pytest.mark.parametrize(
    "verify", [identities.verify_theorem_a, identities.verify_theorem_b, identities.verify_prop_a]
)
def test_double_well_identities_across_the_saddle(double_well_suite, verify):
    outcome = verify(double_well_suite)
    for report in outcome if isinstance(outcome, list) else [outcome]:
        assert not report.skipped
        assert agrees(report), (report.identity, report.label, report.abs_diff, report.tolerance)


@pytest.mark.slow
def test_double_well_suite(double_well_suite):
    results = identities.run_suite(double_well_suite)
    assert [r.identity for r in results] == [
        "COAREA", "THM_A", "COR_VPRIME", "THM_B", "PROP_A", "PROP_A", "PROP_A", "PROP_B", "GB_LEVEL",
    ]
    by_name = {r.identity: r for r in results}
    assert by_name["PROP_B"].skipped
    assert "critical values {1}" in by_name["THM_A"].notes[0]
    assert by_name["COR_VPRIME"].label == "t0=0.75"
    assert "difference step 0.05" in by_name["COR_VPRIME"].notes
    assert by_name["GB_LEVEL"].label == "t=0.75"
    assert "chi = 4" in by_name["GB_LEVEL"].notes
    assert by_name["GB_LEVEL"].rhs.value == pytest.approx(8 * math.pi)
    for report in results:
        if report.identity != "PROP_B":
            assert agrees(report), (report.identity, report.label, report.abs_diff, report.tolerance)
    assert identities.identity_verdicts(results)["PROP_B"] == "skipped"
