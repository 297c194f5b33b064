"""Executable integral identities of level hypersurfaces.

Each `verify_*` function computes both sides of one identity with estimators
that share no code path for the quantity itself (mesh against Monte Carlo,
or region sweep against an independently sampled level profile) and returns
`reports.IdentityReport`s. `run_suite` runs a configured selection in a fixed
order and shares the critical-point analysis between them.
"""

import dataclasses
import functools
import math

import numpy as np
import scipy.special

from . import errors
from . import fields
from . import meshing
from . import morse
from . import quadrature
from . import reports

COAREA_INTEGRANDS = {
    "one": quadrature.one,
    "value": quadrature.value,
    "grad_norm": quadrature.grad_norm,
    "mean_curvature": quadrature.mean_curvature,
}
KINK_SIGMA = 5.0


@dataclasses.dataclass(frozen=True)
class WeightSpec:
    """Weight h over level values: a constant, the indicator of
    [a, upper], or a polynomial with ascending coefficients."""

    kind: str = "constant"
    coeffs: tuple = (1.0,)
    upper: float = math.nan

    def __post_init__(self):
        if self.kind not in ("constant", "indicator", "polynomial"):
            raise errors.ConfigError(f"Unknown weight kind '{self.kind}'.")
        if self.kind == "indicator" and math.isnan(self.upper):
            raise errors.ConfigError("An indicator weight needs weight.upper.")
        if not self.coeffs:
            raise errors.ConfigError("A weight needs at least one coefficient.")

    def __call__(self, ts):
        ts = np.asarray(ts, np.float64)
        if self.kind == "constant":
            return np.full(ts.shape, float(self.coeffs[0]))
        if self.kind == "indicator":
            return (ts <= self.upper).astype(np.float64)
        return np.polynomial.polynomial.polyval(ts, self.coeffs)

    def describe(self):
        if self.kind == "constant":
            return f"h = {self.coeffs[0]:g}"
        if self.kind == "indicator":
            return f"h = indicator of t <= {self.upper:g}"
        terms = " + ".join(f"{c:g} t^{k}" for k, c in enumerate(self.coeffs))
        return f"h = {terms}"


@dataclasses.dataclass(frozen=True)
class SuiteConfig:
    field: fields.ScalarField
    interval: fields.Interval
    box: fields.BoundingBox
    quadrature: quadrature.QuadratureConfig
    grid: meshing.GridSpec = None
    identities: tuple = reports.IDENTITIES
    weight: WeightSpec = WeightSpec()
    coarea_integrand: str = "value"
    t0: float = math.nan
    step: float = 0.0
    bins: int = 30
    seed_grid: int = 8
    rtol: float = 1e-3
    mesh_rtol: float = 1e-2
    k_sigma: float = 3.0

    def __post_init__(self):
        if self.box.dim != self.field.dim:
            raise errors.ConfigError(f"Box dimension {self.box.dim} does not match d = {self.field.dim}.")
        if self.grid is not None and self.grid.box.dim != self.field.dim:
            raise errors.ConfigError(f"Grid box dimension {self.grid.box.dim} does not match d = {self.field.dim}.")
        unknown = set(self.identities) - set(reports.IDENTITIES + reports.EXTRA_IDENTITIES)
        if unknown:
            raise errors.ConfigError(f"Unknown identities {sorted(unknown)}.")
        if self.coarea_integrand not in COAREA_INTEGRANDS:
            raise errors.ConfigError(
                f"Unknown coarea integrand '{self.coarea_integrand}', choose from {sorted(COAREA_INTEGRANDS)}."
            )
        if self.bins < 1:
            raise errors.ConfigError(f"Need at least one bin, got {self.bins}.")

    @property
    def meshable(self):
        return self.field.dim == 3 and self.grid is not None

    @property
    def midpoint(self):
        if math.isnan(self.t0):
            return 0.5 * (self.interval.a + self.interval.b)
        return self.t0

    @property
    def stencil(self):
        if self.step > 0:
            return self.step
        width = self.interval.width
        return 0.1 * width if width > 0 else 0.1 * max(1.0, abs(self.midpoint))


class Analysis:
    """Field analysis shared by the identities of one suite: critical points,
    the regular decomposition, containment warnings and meshes by level."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._meshes = {}

    @functools.cached_property
    def critical_points(self):
        return morse.find_critical_points(
            self.cfg.field, self.cfg.box, self.cfg.seed_grid, self.cfg.interval
        )

    @property
    def critical_values(self):
        return tuple(self.decomposition.critical_values)

    @functools.cached_property
    def all_critical_values(self):
        return tuple(sorted({cp.value for cp in self.critical_points}))

    @functools.cached_property
    def decomposition(self):
        return morse.regular_decomposition(self.critical_points, self.cfg.interval)

    @functools.cached_property
    def containment(self):
        return tuple(quadrature.containment_check(self.cfg.field, self.cfg.interval, self.cfg.box, self.cfg.quadrature))

    @property
    def notes(self):
        return self.containment + self.critical_points.notes

    def mesh(self, t):
        t = float(t)
        if t not in self._meshes:
            self._meshes[t] = meshing.extract_level_set(self.cfg.field, t, self.cfg.grid)
        return self._meshes[t]

    def require_regular(self, *levels):
        for t in levels:
            for c in self.all_critical_values:
                if abs(c - t) <= 1e-9 * max(1.0, abs(c)):
                    raise errors.CriticalValueError(f"Level {t:.6g} is a critical value.", c)

    def require_free(self, lo, hi):
        for c in self.all_critical_values:
            if lo <= c <= hi:
                raise errors.CriticalValueError(
                    f"Critical value {c:.6g} lies inside the stencil [{lo:.6g}, {hi:.6g}].", c
                )

    def default_level(self):
        """The configured t0, else the midpoint of the widest regular
        subinterval of [a, b]."""
        cfg = self.cfg
        if not math.isnan(cfg.t0):
            return cfg.t0
        if not self.decomposition.intervals:
            try:
                self.require_regular(cfg.midpoint)
            except errors.CriticalValueError as e:
                raise errors.PreconditionError(f"No regular level to check: {e}") from e
            return cfg.midpoint
        lo, hi = max(self.decomposition.intervals, key=lambda iv: round(iv[1] - iv[0], 9))
        return 0.5 * (lo + hi)

    def difference_step(self, t0):
        """The configured step, else the default stencil capped at a fifth of
        the distance from t0 to the nearest critical value."""
        cfg = self.cfg
        if cfg.step > 0:
            return cfg.step
        gap = min((abs(c - t0) for c in self.all_critical_values), default=math.inf)
        if gap == 0:
            raise errors.PreconditionError(f"No critical-value-free stencil around t0 = {t0:g}.")
        return min(cfg.stencil, 0.2 * gap)


def sphere_volume(n):
    """Volume of the unit n-sphere in R^(n+1)."""
    assert n >= 1, n
    return float(2 * math.pi ** ((n + 1) / 2) / scipy.special.gamma((n + 1) / 2))


def _nu(analysis, t):
    """nu(t) from the mesh in d = 3, otherwise from a shell estimate."""
    cfg = analysis.cfg
    if cfg.meshable:
        return reports.IntegralEstimate.exact(meshing.surface_area(analysis.mesh(t)))
    return quadrature.level_integral_shell(
        cfg.field, quadrature.one, t, cfg.box, cfg.quadrature, analysis.all_critical_values
    )


def verify_coarea(cfg, analysis=None):
    analysis = analysis or Analysis(cfg)
    report = quadrature.verify_coarea(
        cfg.field,
        COAREA_INTEGRANDS[cfg.coarea_integrand],
        cfg.interval,
        cfg.box,
        cfg.quadrature,
        cfg.bins,
        cfg.rtol,
        cfg.k_sigma,
        analysis.critical_values,
    )
    notes = (f"g = {cfg.coarea_integrand}",) + report.notes + analysis.notes
    return dataclasses.replace(report, notes=notes)


def verify_theorem_a(cfg, analysis=None):
    """nu(b) - nu(a) against n times the region integral of H."""
    analysis = analysis or Analysis(cfg)
    a, b = cfg.interval
    if a == b:
        zero = reports.IntegralEstimate.exact(0.0)
        return reports.make_report("THM_A", zero, zero, cfg.rtol, cfg.k_sigma)
    analysis.require_regular(a, b)
    lhs = _nu(analysis, b).minus(_nu(analysis, a))
    integral = quadrature.region_integral(cfg.field, quadrature.mean_curvature, cfg.interval, cfg.box, cfg.quadrature)
    rhs = integral.scaled(cfg.field.n)
    notes = (analysis.decomposition.describe(),) + analysis.notes
    return reports.make_report("THM_A", lhs, rhs, cfg.mesh_rtol, cfg.k_sigma, notes)


def verify_corollary_vprime(cfg, t0=None, analysis=None):
    """Central difference of nu at t0 against n times the level integral of
    H / |grad f|."""
    analysis = analysis or Analysis(cfg)
    t0 = analysis.default_level() if t0 is None else float(t0)
    analysis.require_regular(t0)
    step = analysis.difference_step(t0)
    analysis.require_free(t0 - step, t0 + step)
    n = cfg.field.n
    label = f"t0={t0:g}"
    notes = [f"difference step {step:g}"]

    def integrand(s):
        return s.curvature.H / np.where(s.regular, s.grad_norm, 1.0)

    lhs = _nu(analysis, t0 + step).minus(_nu(analysis, t0 - step)).scaled(1 / (2 * step))
    if cfg.meshable:
        surface = meshing.surface_integral(analysis.mesh(t0), cfg.field, integrand)
        if surface.skipped_fraction:
            notes.append(f"skipped {surface.skipped_fraction:.3g} of the mesh area near critical points")
        rhs = reports.IntegralEstimate.exact(n * surface.value)
    else:
        rhs = quadrature.level_integral_shell(
            cfg.field, integrand, t0, cfg.box, cfg.quadrature, analysis.all_critical_values
        ).scaled(n)
    notes = tuple(notes) + analysis.notes
    return reports.make_report("COR_VPRIME", lhs, rhs, cfg.mesh_rtol, cfg.k_sigma, notes, label)


def verify_theorem_b(cfg, weight=None, analysis=None):
    """Region integral of (h o f) |grad f| against the integral of h nu over
    [a, b], with nu from an independently sampled profile."""
    analysis = analysis or Analysis(cfg)
    weight = weight or cfg.weight
    a, b = cfg.interval
    label = weight.describe()
    if a == b:
        zero = reports.IntegralEstimate.exact(0.0)
        return reports.make_report("THM_B", zero, zero, cfg.rtol, cfg.k_sigma, label=label)
    analysis.require_regular(a, b)
    lhs = quadrature.region_integral(cfg.field, quadrature.weighted(weight), cfg.interval, cfg.box, cfg.quadrature)
    profile = quadrature.nu_profile(
        cfg.field, cfg.interval, cfg.bins, cfg.box, cfg.quadrature, stream=quadrature.PROFILE_STREAM
    )
    if weight.kind == "indicator":
        hi = min(max(weight.upper, a), b)
        rhs = profile.integrate(lo=a, hi=hi) if hi > a else reports.IntegralEstimate.exact(0.0)
    else:
        rhs = profile.integrate(weight)
    notes = quadrature.critical_bin_notes(profile, analysis.critical_values)
    notes += scan_kinks(profile, analysis.critical_values)
    return reports.make_report("THM_B", lhs, rhs, cfg.rtol, cfg.k_sigma, tuple(notes) + analysis.notes, label)


def verify_prop_a(cfg, analysis=None):
    """The integral of K d_i f vanishes for every coordinate i; one report
    per coordinate, with the tolerance scaled by the integral of |K||grad f|."""
    analysis = analysis or Analysis(cfg)
    d = cfg.field.dim
    zero = reports.IntegralEstimate.exact(0.0)
    if cfg.interval.a == cfg.interval.b:
        return [reports.make_report("PROP_A", zero, zero, cfg.rtol, cfg.k_sigma, label=f"i={i + 1}") for i in range(d)]
    integrands = [quadrature.gauss_grad(i) for i in range(d)] + [quadrature.abs_gauss_grad_norm]
    *components, mass = quadrature.region_integrals(cfg.field, integrands, cfg.interval, cfg.box, cfg.quadrature)
    notes = (f"scale {mass.value:.6g}",) + analysis.notes
    return [
        reports.make_report(
            "PROP_A", estimate, zero, cfg.rtol, cfg.k_sigma, notes, label=f"i={i + 1}", scale=mass.value
        )
        for i, estimate in enumerate(components)
    ]


def _check_gauss_bonnet(cfg):
    n = cfg.field.n
    if n % 2:
        raise errors.PreconditionError(f"The Gauss-Bonnet identities need n even, got n = {n}.")
    if not cfg.meshable:
        raise errors.PreconditionError(
            f"The Euler characteristic needs a mesh; only d = 3 is supported, got d = {cfg.field.dim}."
        )


def verify_prop_b(cfg, analysis=None):
    """Region integral of K |grad f| against (b - a) chi(f^-1(a)) nu(S^n) / 2
    on a critical-value-free interval."""
    analysis = analysis or Analysis(cfg)
    _check_gauss_bonnet(cfg)
    if not analysis.decomposition.regular:
        values = ", ".join(f"{c:.6g}" for c in analysis.critical_values)
        raise errors.PreconditionError(f"Interval contains critical values {{{values}}}.")
    a, b = cfg.interval
    zero = reports.IntegralEstimate.exact(0.0)
    if a == b:
        return reports.make_report("PROP_B", zero, zero, cfg.rtol, cfg.k_sigma)
    chi = meshing.euler_characteristic(analysis.mesh(a))
    chi_b = meshing.euler_characteristic(analysis.mesh(b))
    lhs, mass = quadrature.region_integrals(
        cfg.field, [quadrature.gauss_grad_norm, quadrature.abs_gauss_grad_norm], cfg.interval, cfg.box, cfg.quadrature
    )
    rhs = reports.IntegralEstimate.exact(0.5 * (b - a) * chi * sphere_volume(cfg.field.n))
    notes = (f"chi(f^-1({a:g})) = {chi}",) + analysis.notes
    report = reports.make_report("PROP_B", lhs, rhs, cfg.rtol, cfg.k_sigma, notes, scale=mass.value)
    if chi_b != chi:
        mismatch = f"chi(f^-1({b:g})) = {chi_b} differs from chi at a"
        report = dataclasses.replace(report, verdict="fail", notes=report.notes + (mismatch,))
    return report


def verify_gauss_bonnet_level(cfg, t=None, analysis=None):
    """Mesh integral of K over one level set against chi nu(S^n) / 2."""
    analysis = analysis or Analysis(cfg)
    _check_gauss_bonnet(cfg)
    t = analysis.default_level() if t is None else float(t)
    analysis.require_regular(t)
    mesh = analysis.mesh(t)
    chi = meshing.euler_characteristic(mesh)
    total = meshing.surface_integral(mesh, cfg.field, lambda s: s.curvature.K)
    mass = meshing.surface_integral(mesh, cfg.field, lambda s: np.abs(s.curvature.K))
    lhs = reports.IntegralEstimate.exact(total.value)
    rhs = reports.IntegralEstimate.exact(0.5 * chi * sphere_volume(cfg.field.n))
    notes = (f"chi = {chi}",) + analysis.notes
    return reports.make_report(
        "GB_LEVEL", lhs, rhs, cfg.mesh_rtol, cfg.k_sigma, notes, label=f"t={t:g}", scale=mass.value
    )


def scan_kinks(profile, critical_values, threshold=KINK_SIGMA):
    """Flags profile bins where the slope jumps by more than `threshold`
    standard errors (and more than `threshold` times the typical second
    difference) without a known critical value nearby; such a kink hints at
    a critical value the seeded search missed."""
    v, e, edges = profile.values, profile.std_errors, profile.bin_edges
    if len(v) < 3:
        return []
    second = v[:-2] - 2 * v[1:-1] + v[2:]
    sigma = np.sqrt(e[:-2] ** 2 + 4 * e[1:-1] ** 2 + e[2:] ** 2)
    typical = np.median(np.abs(second))
    notes = []
    for k in np.flatnonzero((np.abs(second) > threshold * sigma) & (np.abs(second) > threshold * typical)):
        lo, hi = edges[k], edges[k + 3]
        if any(lo <= c <= hi for c in critical_values):
            continue
        notes.append(f"profile kink in [{lo:.6g}, {hi:.6g}] without a known critical value")
    return notes


VERIFIERS = {
    "COAREA": verify_coarea,
    "THM_A": verify_theorem_a,
    "COR_VPRIME": lambda cfg, analysis: verify_corollary_vprime(cfg, analysis=analysis),
    "THM_B": lambda cfg, analysis: verify_theorem_b(cfg, analysis=analysis),
    "PROP_A": verify_prop_a,
    "PROP_B": verify_prop_b,
    "GB_LEVEL": lambda cfg, analysis: verify_gauss_bonnet_level(cfg, analysis=analysis),
}


def run_suite(cfg, logger=None, analysis=None):
    """Runs the configured identities in the fixed order. Precondition
    failures become skipped reports; other errors propagate."""
    analysis = analysis or Analysis(cfg)
    results = []
    for identity in reports.IDENTITIES + reports.EXTRA_IDENTITIES:
        if identity not in cfg.identities:
            continue
        try:
            if logger:
                with logger.scope(identity.lower()):
                    outcome = VERIFIERS[identity](cfg, analysis)
            else:
                outcome = VERIFIERS[identity](cfg, analysis)
        except errors.PreconditionError as e:
            outcome = reports.skipped_report(identity, f"precondition: {e}")
        results += outcome if isinstance(outcome, list) else [outcome]
    return results


def identity_verdicts(results):
    """Per-identity verdict: pass when all its reports pass, skipped when all
    are skipped, fail otherwise."""
    grouped = {}
    for report in results:
        grouped.setdefault(report.identity, []).append(report)
    verdicts = {}
    for identity, group in grouped.items():
        if all(r.skipped for r in group):
            verdicts[identity] = "skipped"
        elif all(r.passed for r in group):
            verdicts[identity] = "pass"
        else:
            verdicts[identity] = "fail"
    return verdicts


def summary_line(results):
    verdicts = list(identity_verdicts(results).values())
    passed, skipped, failed = (verdicts.count(v) for v in ("pass", "skipped", "fail"))
    total = len(verdicts)
    return f"{passed}/{total} identities passed, {skipped} skipped, {failed} failed"


def failures(results):
    return sum(v == "fail" for v in identity_verdicts(results).values())


def report_to_json(report):
    return report.to_json()


def suite_to_json(results, metadata=None):
    return {
        "metadata": dict(metadata or {}),
        "reports": [report_to_json(r) for r in results],
        "summary": summary_line(results),
    }


def summary_table(results):
    import rich.table

    table = rich.table.Table(title=summary_line(results))
    for column in ("identity", "label", "lhs", "rhs", "diff", "tolerance", "verdict"):
        table.add_column(column)
    colors = {"pass": "green", "fail": "red", "skipped": "yellow"}
    for r in results:
        table.add_row(
            r.identity,
            r.label,
            _estimate(r.lhs),
            _estimate(r.rhs),
            "" if math.isnan(r.abs_diff) else f"{r.abs_diff:.4g}",
            "" if math.isnan(r.tolerance) else f"{r.tolerance:.4g}",
            f"[{colors[r.verdict]}]{r.verdict}[/{colors[r.verdict]}]",
        )
    return table


def _estimate(estimate):
    if estimate is None:
        return ""
    if estimate.std_error:
        return f"{estimate.value:.4g} ± {estimate.std_error:.2g}"
    return f"{estimate.value:.4g}"
