"""Command line scenario runner writing deterministic CSV tables.

Usage: ``tripod-gauge SCENARIO [--config PATH] [--out PATH] [flags]``.
"""

import argparse
import configparser
import hashlib
import io
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import constants

from . import __version__, scenarios, thermal
from .dynamics import StepSizeError
from .holonomy import InvalidLoopError
from .reconstruct import IllConditionedError, InconsistentPopulationsError
from .tripod import TripodConfig

SCENARIOS = ("fig2", "fig3", "fig4", "thermometry", "adiabaticity", "loop")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4

# scenarios that default to the stronger coupling of the loop experiments
_LOOP_RABI_KHZ = 450.0
_STATIC_RABI_KHZ = 250.0

CONFIG_HELP = """\
configuration file (INI style, every key optional; flags override the file):

  [tripod]       rabi_khz        equal Rabi frequency / 2pi in kHz
                                 (default 250 for fig2 and thermometry, 450 otherwise)
                 wavelength_um   laser wavelength (0.689)
                 mass_u          atomic mass in u (86.9088775)
  [thermal]      temperature_uk  gas temperature in uK (0.5)
                 order           Gauss-Hermite order (64)
                 monte_carlo     true/false (false)
                 samples         Monte-Carlo sample count (100000)
  [loop]         phi0            loop size in units of pi (1.0)
                 segment_us      duration of each segment in us (4.0)
                 vertices        'x,y; x,y; ...' in units of pi (loop scenario)
  [grid]         t_max_us        last output time of fig2/thermometry (100)
                 t_points        output times (101 for fig2, 51 for thermometry)
                 phi0_max        upper end of the fig3 grid in units of pi (1.2)
                 phi0_points     fig3 grid points (25)
                 ratio_min       adiabaticity scan start (1)
                 ratio_max       adiabaticity scan end (20)
                 ratio_points    adiabaticity scan points (12)
                 steps           sub-steps per segment for the loop scenario (1)
  [thermometry]  noise           population noise per shot (0.02)
                 shots           shots averaged per time (100)
  [run]          seed            RNG seed (0)

--steps overrides the point count of the scenario's scan axis.
"""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    rabi_khz: float = math.nan  # nan: scenario default
    wavelength_um: float = 0.689
    mass_u: float = 86.9088775
    temperature_uK: float = 0.5
    order: int = 64
    monte_carlo: bool = False
    samples: int = 100_000
    phi0: float = 1.0  # units of pi
    segment_us: float = 4.0
    vertices: str = "0,0; 1,0; 1,1"
    t_max_us: float = 100.0
    t_points: int = 0  # 0: scenario default
    phi0_max: float = 1.2
    phi0_points: int = 25
    ratio_min: float = 1.0
    ratio_max: float = 20.0
    ratio_points: int = 12
    steps: int = 1
    noise: float = 0.02
    shots: int = 100
    seed: int = 0
    out: str = field(default="-", compare=False)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        positive = ["wavelength_um", "mass_u", "segment_us", "t_max_us", "phi0_max",
                    "ratio_min", "ratio_max", "order", "samples", "phi0_points",
                    "ratio_points", "steps", "shots"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not math.isnan(self.rabi_khz) and not self.rabi_khz > 0:
            raise ConfigError("rabi_khz must be positive")
        for name in ("temperature_uK", "noise", "t_points", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.ratio_max < self.ratio_min:
            raise ConfigError("ratio_max must not be below ratio_min")
        if self.order < 8:
            raise ConfigError("order must be at least 8")

    @property
    def rabi(self):
        if not math.isnan(self.rabi_khz):
            return self.rabi_khz
        return _STATIC_RABI_KHZ if self.scenario in ("fig2", "thermometry") else _LOOP_RABI_KHZ

    @property
    def mass_kg(self):
        return self.mass_u * constants.atomic_mass

    def tripod(self):
        return TripodConfig.strontium(self.rabi, self.temperature_uK,
                                      wavelength_um=self.wavelength_um,
                                      mass_kg=self.mass_kg)

    def thermal_spec(self):
        cfg = self.tripod()
        return thermal.ThermalSpec(cfg.thermal_velocity, order=self.order,
                                   monte_carlo=self.monte_carlo, samples=self.samples,
                                   seed=self.seed)

    def parsed_vertices(self):
        try:
            pts = [tuple(float(x) * math.pi for x in p.split(","))
                   for p in self.vertices.split(";") if p.strip()]
        except ValueError as exc:
            raise ConfigError(f"cannot parse vertices {self.vertices!r}") from exc
        if len(pts) < 2 or any(len(p) != 2 for p in pts):
            raise ConfigError("vertices need at least two 'x,y' pairs")
        return pts

    def digest(self):
        """sha256 of the resolved configuration (output path excluded)."""
        d = asdict(self)
        d.pop("out")
        d["rabi_khz"] = self.rabi
        text = "\n".join(f"{k}={d[k]!r}" for k in sorted(d))
        return hashlib.sha256(text.encode()).hexdigest()


# config file key -> RunConfig field
_FILE_KEYS = {
    ("tripod", "rabi_khz"): "rabi_khz",
    ("tripod", "wavelength_um"): "wavelength_um",
    ("tripod", "mass_u"): "mass_u",
    ("thermal", "temperature_uk"): "temperature_uK",
    ("thermal", "order"): "order",
    ("thermal", "monte_carlo"): "monte_carlo",
    ("thermal", "samples"): "samples",
    ("loop", "phi0"): "phi0",
    ("loop", "segment_us"): "segment_us",
    ("loop", "vertices"): "vertices",
    ("grid", "t_max_us"): "t_max_us",
    ("grid", "t_points"): "t_points",
    ("grid", "phi0_max"): "phi0_max",
    ("grid", "phi0_points"): "phi0_points",
    ("grid", "ratio_min"): "ratio_min",
    ("grid", "ratio_max"): "ratio_max",
    ("grid", "ratio_points"): "ratio_points",
    ("grid", "steps"): "steps",
    ("thermometry", "noise"): "noise",
    ("thermometry", "shots"): "shots",
    ("run", "seed"): "seed",
}

_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, raw):
    kind = _TYPES[name]
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def read_config_file(path):
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = _FILE_KEYS.get((section.lower(), key.lower()))
            if name is None:
                raise ConfigError(f"unknown key [{section}] {key}")
            values[name] = _coerce(name, raw)
    return values


def build_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    flag_map = {"seed": "seed", "phi0": "phi0", "temperature_uK": "temperature_uK",
                "rabi_kHz": "rabi_khz"}
    for flag, name in flag_map.items():
        v = getattr(args, flag)
        if v is not None:
            values[name] = v
    cfg = RunConfig(args.scenario, out=args.out, **values)
    if args.steps is not None:
        axis = {"fig2": "t_points", "thermometry": "t_points", "fig3": "phi0_points",
                "adiabaticity": "ratio_points", "loop": "steps", "fig4": "steps"}
        cfg = replace(cfg, **{axis[cfg.scenario]: args.steps})
    return cfg


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return "%.9g" % float(x)


def format_csv(cfg, columns, units, rows=None):
    """CSV text: one header comment, column names, then ``%.9g`` rows.

    ``columns`` maps name -> 1-D array (or pass explicit ``rows`` with the
    column names as keys of ``units``).
    """
    names = list(units)
    buf = io.StringIO()
    unit_text = " ".join(f"{n}[{units[n]}]" for n in names)
    buf.write(f"# tripod-gauge {__version__} scenario={cfg.scenario} "
              f"config_sha256={cfg.digest()} units: {unit_text}\n")
    buf.write(",".join(names) + "\n")
    if rows is None:
        rows = zip(*(columns[n] for n in names))
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _report_path(out):
    if out == "-":
        return "-"
    p = Path(out)
    return str(p.with_name(p.stem + "_report.txt"))


def _report(cfg, lines):
    head = f"# tripod-gauge {__version__} scenario={cfg.scenario} config_sha256={cfg.digest()}\n"
    return head + "".join(line + "\n" for line in lines)


def run_fig2(cfg):
    tc = cfg.tripod()
    n = cfg.t_points or 101
    t = np.linspace(0.0, cfg.t_max_us, n)
    cols, ens = scenarios.fig2_table(tc, t, cfg.thermal_spec())
    units = {"t_us": "us", "P1": "1", "P2": "1", "P3": "1", "P3_minus_P1": "1",
             "envelope": "1", "P1_ens": "1", "P2_ens": "1", "P3_ens": "1",
             "max_abs_dev": "1"}
    return [(cfg.out, format_csv(cfg, cols, units))]


def run_fig3(cfg):
    tc = cfg.tripod()
    grid = np.linspace(0.0, cfg.phi0_max * math.pi, cfg.phi0_points)
    cols = scenarios.fig3_table(tc, grid, cfg.thermal_spec(), cfg.segment_us)
    units = {n: "1" for n in cols}
    units["phi0_over_pi"] = "pi"
    units["phi_azim"] = units["phi_azim_pin"] = "rad"
    return [(cfg.out, format_csv(cfg, cols, units))]


def _su2_row(u):
    return [u[0, 0].real, u[0, 0].imag, u[0, 1].real, u[0, 1].imag]


def run_fig4(cfg):
    tc = cfg.tripod()
    pairs = scenarios.fig4_operators(tc, cfg.thermal_spec(), cfg.phi0 * math.pi,
                                     cfg.segment_us)
    units = {"case": "label", "D": "1", "D_aligned": "1", "abs_trace_gap": "1",
             "fit_residual": "1",
             "U_alpha_re": "1", "U_alpha_im": "1", "U_beta_re": "1", "U_beta_im": "1",
             "Us_alpha_re": "1", "Us_alpha_im": "1", "Us_beta_re": "1", "Us_beta_im": "1"}
    rows = [[p.label, p.D, p.D_aligned, p.conjugacy_error, p.residual,
             *_su2_row(p.U), *_su2_row(p.U_shifted)] for p in pairs]
    by = {p.label: p for p in pairs}
    gs = scenarios.gauge_summary(tc)
    lines = [
        f"loop: canonical triangle, phi0 = {cfg.phi0:.6g} pi, {cfg.segment_us:.6g} us per segment",
        "shifted loop starts at the last vertex (c -> a -> b); U' = V U V^dag",
        f"D = sqrt(2 - |Tr U^dag U'|): pinned {by['pinned'].D:.6f}, "
        f"thermal {by['thermal'].D:.6f}, sanity {by['sanity'].D:.1g}",
        f"D~ = sqrt(4 - 2|Tr U^dag U'|): pinned {by['pinned'].D_aligned:.6f}, "
        f"thermal {by['thermal'].D_aligned:.6f}",
        "flag: for SU(2) operators sqrt(2 - |Tr|) never exceeds sqrt(2); a maximum "
        "of 2 only holds for the sqrt(4 - 2|Tr|) form, so a claim of maximum D = 2 "
        "for the first form is inconsistent",
        f"pinned conjugacy: ||Tr U| - |Tr U'|| = {by['pinned'].conjugacy_error:.3g}",
        f"thermal effective operators are not unitarily related: ||Tr U| - |Tr U'|| = "
        f"{by['thermal'].conjugacy_error:.6f}, tomography residual "
        f"{by['thermal'].residual:.6f}",
        f"pinned tomography round trip: D = {by['pinned_tomography'].D:.9f}",
        f"scalar gap {gs['gap']:.9g} rad/us vs 4/3 omega_R {gs['expected']:.9g} rad/us "
        f"(W sign {'+' if gs['W_trace_sign'] > 0 else '-'})",
        "context only, not a target: measured D = 1.27(25)",
    ]
    return [(cfg.out, format_csv(cfg, None, units, rows)),
            (_report_path(cfg.out), _report(cfg, lines))]


def run_thermometry(cfg):
    tc = cfg.tripod()
    n = cfg.t_points or 51
    t = np.linspace(0.0, cfg.t_max_us, n)
    rng = np.random.default_rng(cfg.seed)
    recs = thermal.synthetic_records(tc, t, tc.thermal_velocity, cfg.noise, cfg.shots, rng)
    fit = thermal.fit_temperature(recs, tc, nuisance=False, mass_kg=cfg.mass_kg)
    model = 0.5 * thermal.envelope(tc, t, fit.v_bar) * np.cos(4.0 / 3.0 * tc.recoil * t)
    no_decay = bool(thermal.envelope(tc, t[-1], fit.v_bar) > 0.99)
    rel = (abs(fit.temperature_uK - cfg.temperature_uK) / cfg.temperature_uK
           if cfg.temperature_uK > 0 else math.nan)
    cols = {
        "t_us": t,
        "P1": [r.p1 for r in recs],
        "P2": [r.p2 for r in recs],
        "P3": [r.p3 for r in recs],
        "P3_minus_P1": [r.p3 - r.p1 for r in recs],
        "fit": model,
    }
    units = {"t_us": "us", "P1": "1", "P2": "1", "P3": "1", "P3_minus_P1": "1", "fit": "1"}
    lines = [
        f"truth: T = {cfg.temperature_uK:.6g} uK, v_bar = {tc.thermal_velocity:.6g} um/us",
        f"noise = {cfg.noise:.6g} per shot, shots = {cfg.shots}, seed = {cfg.seed}",
        f"fit: T = {fit.temperature_uK:.6g} uK, v_bar = {fit.v_bar:.6g} um/us, "
        f"tau = {fit.tau:.6g} us, rms residual = {fit.residual:.3g}",
        f"relative temperature error = {rel:.6g}",
        f"no_decay = {str(no_decay).lower()}",
        "context only, not a target: measured T = 0.5(1) uK",
    ]
    return [(cfg.out, format_csv(cfg, cols, units)),
            (_report_path(cfg.out), _report(cfg, lines))]


def run_adiabaticity(cfg):
    tc = cfg.tripod()
    ratios = np.linspace(cfg.ratio_min, cfg.ratio_max, cfg.ratio_points)
    rows = []
    for r in ratios:
        seg, disc, leak, gap = scenarios.adiabaticity_point(tc, r, cfg.phi0 * math.pi)
        rows.append([r, seg, disc, leak, gap])
    units = {"ratio": "1", "segment_us": "us", "discrepancy": "1", "max_leakage": "1",
             "holonomy_gap": "1"}
    return [(cfg.out, format_csv(cfg, None, units, rows))]


def run_loop(cfg):
    loop, u, w = scenarios.loop_report(cfg.parsed_vertices(), cfg.segment_us, cfg.steps)
    units = {"quantity": "label", "re": "1", "im": "1"}
    rows = [["U11", u[0, 0].real, u[0, 0].imag], ["U12", u[0, 1].real, u[0, 1].imag],
            ["U21", u[1, 0].real, u[1, 0].imag], ["U22", u[1, 1].real, u[1, 1].imag],
            ["trace", np.trace(u).real, np.trace(u).imag]]
    if w is not None:
        rows += [["D_shift", w.D, 0.0], ["D_aligned_shift", w.D_aligned, 0.0]]
    return [(cfg.out, format_csv(cfg, None, units, rows))]


RUNNERS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "thermometry": run_thermometry,
    "adiabaticity": run_adiabaticity,
    "loop": run_loop,
}


def build_parser():
    ap = argparse.ArgumentParser(
        prog="tripod-gauge",
        description="Dark-state holonomy scenarios for a tripod atom; writes CSV tables.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", help="INI configuration file (keys listed below)")
    ap.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    ap.add_argument("--seed", type=int, help="RNG seed (Monte-Carlo and noise)")
    ap.add_argument("--phi0", type=float, help="loop size in units of pi")
    ap.add_argument("--temperature-uK", dest="temperature_uK", type=float,
                    help="gas temperature in uK")
    ap.add_argument("--rabi-kHz", dest="rabi_kHz", type=float,
                    help="equal Rabi frequency / 2pi in kHz")
    ap.add_argument("--steps", type=int, help="points on the scenario's scan axis")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        outputs = RUNNERS[cfg.scenario](cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidLoopError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InconsistentPopulationsError, IllConditionedError, thermal.FitError,
            StepSizeError, ArithmeticError) as exc:
        print(f"physics inconsistency: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for path, text in outputs:
            _write(path, text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
