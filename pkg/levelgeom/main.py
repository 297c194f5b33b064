import json
import math
import pathlib
import sys

import numpy as np

from . import core
from . import errors
from . import fields
from . import identities
from . import meshing
from . import morse
from . import quadrature
from . import reports

COMMANDS = ("verify", "profile", "critical", "mesh")
USAGE_ERRORS = (
    errors.ConfigError,
    errors.FieldSyntaxError,
    errors.UnsupportedDimensionError,
    errors.DomainError,
)
FAILURES = (
    errors.NotMorseError,
    errors.TopologyError,
    errors.CriticalValueError,
    errors.NearCriticalError,
    errors.PreconditionError,
)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        import rich.traceback

        rich.traceback.install()
    except ImportError:
        pass
    try:
        command, config = load_config(argv)
        if command is None:
            return 0
        return COMMAND_FNS[command](config, command)
    except FAILURES as e:
        core.print(f"error: {e}", color="red")
        return 1
    except errors.FieldSyntaxError as e:
        core.print(f"error: {e}", color="red")
        core.print(f"  {e.text}\n  {' ' * e.offset}^")
        return 2
    except USAGE_ERRORS as e:
        core.print(f"error: {e}", color="red")
        return 2
    except (KeyError, TypeError, ValueError) as e:
        # Raised by the flag and config layers for unknown keys or bad values.
        core.print(f"error: {e}", color="red")
        return 2


def load_config(argv):
    """Defaults, then `--configs` presets, then a `--config` file, then
    flags. Returns the subcommand (None after --help) and the config."""
    import ruamel.yaml as yaml

    presets = yaml.YAML(typ="safe").load((pathlib.Path(__file__).parent / "configs.yaml").read_text())
    parsed, positionals, other = core.Flags(configs=["defaults"], config="").parse_known(argv)
    config = core.Config(presets["defaults"])
    if "--help" in argv or "-h" in argv:
        core.print(f"usage: levelgeom {{{','.join(COMMANDS)}}} [--configs preset ...] [--key value ...]")
        core.print(core.Flags(config).help())
        return None, config
    for name in parsed.configs:
        if name not in presets:
            raise errors.ConfigError(f"Unknown preset '{name}', choose from {sorted(presets)}.")
        config = config.update(presets[name])
    if parsed.config:
        config = config.update(core.Config.load(parsed.config).flat)
    config, rest = core.Flags(config).parse(other)
    if len(positionals) != 1 or positionals[0] not in COMMANDS:
        raise errors.ConfigError(f"Expected one subcommand from {COMMANDS}, got {positionals + rest}.")
    return positionals[0], config.update(config=parsed.config)


class Run:
    """Validated objects of one invocation. Building it checks the whole
    config before any sampling starts."""

    def __init__(self, config, command):
        from . import jaxutils

        jaxutils.setup(config.jax)
        self.config = config
        self.command = command
        self.box = make_box(config.box, config.dim)
        self.interval = fields.Interval.make(*_pair(config.interval, "interval"))
        self.field = make_field(config, self.box)
        self.quadrature = quadrature.QuadratureConfig.for_interval(
            self.interval,
            config.shell_epsilon,
            samples=config.samples,
            seed=config.seed,
            strata=config.strata,
            chunk=config.chunk,
            strategy=config.workers.strategy,
            workers=config.workers.amount,
        )
        if config.bins < 1:
            raise errors.ConfigError(f"Need at least one bin, got {config.bins}.")
        self.grid = meshing.GridSpec(self.box, config.resolution) if config.dim == 3 else None
        self.out = None
        if config.out:
            self.out = pathlib.Path(config.out)
            try:
                self.out.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise errors.ConfigError(f"Output directory {self.out} is not writable: {e}")
        outputs = [core.TerminalOutput(name=command)]
        if self.out:
            outputs.append(core.JSONLOutput(self.out))
        self.logger = core.Logger(outputs)
        if config.verbose:
            core.print(config)

    def suite(self):
        config = self.config
        names = config.identities
        if tuple(n.lower() for n in names) == ("all",):
            names = reports.IDENTITIES
        names = tuple(n.upper() for n in names)
        weight = identities.WeightSpec(config.weight.kind, config.weight.coeffs, config.weight.upper)
        return identities.SuiteConfig(
            field=self.field,
            interval=self.interval,
            box=self.box,
            quadrature=self.quadrature,
            grid=self.grid,
            identities=names,
            weight=weight,
            coarea_integrand=config.coarea.integrand,
            t0=config.corollary.t0,
            step=config.corollary.step,
            bins=config.bins,
            seed_grid=config.seed_grid,
            rtol=config.tolerance.rtol,
            mesh_rtol=config.tolerance.mesh_rtol,
            k_sigma=config.tolerance.k_sigma,
        )

    def metadata(self):
        entries = {"command": self.command}
        for key, value in self.config.flat.items():
            entries[key] = list(value) if isinstance(value, tuple) else value
        return {k: _finite_or_text(v) for k, v in entries.items()}

    def finish(self):
        self.logger.write()
        for output in self.logger.outputs:
            hasattr(output, "flush") and output.flush()


def make_box(values, dim):
    values = [float(x) for x in values]
    if len(values) == 2:
        return fields.BoundingBox.uniform(values[0], values[1], dim)
    if len(values) == 2 * dim:
        return fields.BoundingBox(values[0::2], values[1::2])
    raise errors.ConfigError(f"--box takes 2 or {2 * dim} values, got {len(values)}.")


def make_field(config, box):
    if config.field in fields.BUILTINS:
        core_radius = None if math.isnan(config.torus.core) else config.torus.core
        return fields.builtin_field(
            config.field,
            dim=config.dim,
            box=box,
            major=config.torus.major,
            core=core_radius,
            coeffs=config.quadric.coeffs,
        )
    from . import parser

    return parser.parse_field(config.field, config.dim, box)


def _pair(values, name):
    if len(values) != 2:
        raise errors.ConfigError(f"--{name} takes 2 values, got {len(values)}.")
    return values


def _finite_or_text(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, list):
        return [_finite_or_text(x) for x in value]
    return value


def cmd_verify(config, command):
    run = Run(config, command)
    suite = run.suite()
    analysis = identities.Analysis(suite)
    with run.logger.scope("critical"):
        analysis.critical_points
    results = identities.run_suite(suite, run.logger, analysis)
    if config.verbose:
        for note in dict.fromkeys(n for r in results for n in r.notes):
            core.print(f"note: {note}")
    for warning in analysis.notes:
        core.warn(warning)
    core.basics.console and core.basics.console.print(identities.summary_table(results))
    verdicts = list(identities.identity_verdicts(results).values())
    run.logger.add(
        {v: verdicts.count(v) for v in ("pass", "fail", "skipped")},
        prefix="verify",
    )
    if run.out:
        payload = identities.suite_to_json(results, run.metadata())
        (run.out / "reports.json").write_text(json.dumps(payload, indent=2) + "\n")
    if config.json:
        print(json.dumps(identities.suite_to_json(results, run.metadata()), indent=2))
    core.print(identities.summary_line(results))
    run.finish()
    return 1 if identities.failures(results) else 0


def cmd_profile(config, command):
    run = Run(config, command)
    with run.logger.scope("profile"):
        profile = quadrature.nu_profile(run.field, run.interval, config.bins, run.box, run.quadrature)
    lines = [f"# {key}={value}" for key, value in run.metadata().items()]
    lines.append("t,nu,stderr")
    for t, nu, err in zip(profile.centers, profile.values, profile.std_errors):
        lines.append(f"{core.full(t)},{core.full(nu)},{core.full(err)}")
    text = "\n".join(lines) + "\n"
    if run.out:
        (run.out / "profile.csv").write_text(text)
    if config.json:
        print(json.dumps({"t": profile.centers.tolist(), "nu": profile.values.tolist()}))
    slope = np.polyfit(profile.centers, profile.values, 1)[0] if config.bins > 1 else math.nan
    run.logger.add({"bins": config.bins, "slope": slope, "total": float(profile.integrate().value)}, prefix="profile")
    if not run.out and not config.json:
        print(text, end="")
    run.finish()
    return 0


def cmd_critical(config, command):
    run = Run(config, command)
    with run.logger.scope("critical"):
        cps = morse.find_critical_points(run.field, run.box, config.seed_grid, run.interval)
    decomposition = morse.regular_decomposition(cps, run.interval)
    for note in cps.notes:
        core.warn(note)
    import rich.table

    table = rich.table.Table(title=f"{len(cps)} critical points of {run.field.name}")
    for column in ("location", "value", "index"):
        table.add_column(column)
    for cp in cps:
        table.add_row(core.format(cp.location), core.format(cp.value), str(cp.morse_index))
    core.basics.console and core.basics.console.print(table)
    core.print(decomposition.describe())
    probes = []
    if config.probe:
        for cp in cps:
            try:
                probe = morse.singularity_probe(run.field, cp, config.radii, others=cps, seed=config.seed)
            except errors.LevelGeomError as e:
                core.warn(f"probe at {core.format(cp.location)} skipped: {e}")
                continue
            mean, gauss, grad = probe.growth()
            core.print(
                f"probe {core.format(cp.location)}: r|H| grows {mean:.3g}x, "
                f"r^(n-1)|K grad f| grows {gauss:.3g}x, |grad f|/r keeps {grad:.3g}"
            )
            probes.append(probe.to_json())
    payload = {
        "metadata": run.metadata(),
        "critical_points": [cp.to_json() for cp in cps],
        "critical_values": list(decomposition.critical_values),
        "intervals": [list(x) for x in decomposition.intervals],
        "probes": probes,
        "notes": list(cps.notes),
    }
    if run.out:
        (run.out / "critical.json").write_text(json.dumps(payload, indent=2) + "\n")
    if config.json:
        print(json.dumps(payload, indent=2))
    run.logger.add({"points": len(cps)}, prefix="critical")
    run.finish()
    return 0


def cmd_mesh(config, command):
    run = Run(config, command)
    if run.grid is None:
        raise errors.UnsupportedDimensionError(f"Level sets can only be meshed for d = 3, not d = {config.dim}.")
    with run.logger.scope("mesh"):
        mesh = meshing.extract_level_set(run.field, config.level, run.grid)
    if not len(mesh):
        core.warn(f"the level set f = {config.level:g} does not meet the box; the mesh is empty")
        run.finish()
        return 0
    area = meshing.surface_area(mesh)
    components = meshing.connected_components(mesh)
    chi = meshing.euler_characteristic(mesh)
    if run.out:
        header = dict(run.metadata(), area=core.full(area), components=components, euler=chi)
        meshing.write_off(mesh, run.out / "mesh.off", header)
    core.print(f"area {area:.4g}, {components} components, euler characteristic {chi}")
    if config.json:
        print(json.dumps({"area": area, "components": components, "euler": chi, "triangles": len(mesh)}))
    run.logger.add({"area": area, "components": components, "euler": chi, "triangles": len(mesh)}, prefix="mesh")
    run.finish()
    return 0


COMMAND_FNS = {
    "verify": cmd_verify,
    "profile": cmd_profile,
    "critical": cmd_critical,
    "mesh": cmd_mesh,
}
