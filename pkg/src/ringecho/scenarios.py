"""Configuration-driven scenario runs, sweeps and the builtin figure/table set.

A scenario file is INI text (``key = value`` lines grouped in sections)::

    [scenario]
    name = demo
    engine = spectral          ; spectral | ode | both

    [array]
    count = 61
    spacing = 0.1              ; comb spacing / signal width
    coupling = 0.05            ; or coupling_ratio = 0.5 (coupling / spacing)
    finesse = 50               ; or linewidth = 0.001
    convention = linewidth     ; linewidth | equation, see core.convert_rates
    ordering = natural         ; natural | reversed | shuffle:<seed>
    centered = true
    propagation_delay = 0

    [input]
    shape = gaussian           ; gaussian | three_pulse
    width = 1
    pulse_spacing = 8
    amplitudes = 1, 1, 1

    [grid]
    bandwidth_factor = 4
    duration =                 ; explicit window, required when spacing = 0

    [metrics]
    echoes = 3

    [schedule]                 ; optional, ode engine only
    t_on = 20
    t_off = 82.8
    ramp = 0

    [sweep]                    ; only for the sweep verb
    coupling_ratio = 0.1, 0.25, 0.5
    finesse = 10, 50, 500

All physics inputs are dimensionless ratios to the signal width.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ringecho import __version__
from ringecho.core import (
    ArraySpec,
    SampledSignal,
    TimeGrid,
    ValidationError,
    build_comb_array,
    convert_rates,
    make_time_grid,
)
from ringecho.dynamics import build_freeze_schedule, integrate
from ringecho.metrics import (
    EchoReport,
    centroid,
    detect_echoes,
    dominant_window,
    efficiency,
)
from ringecho.propagation import gaussian_pulse, propagate, three_pulse_input, wraparound_fraction
from ringecho.transfer import group_delay
from ringecho import units

CSV_SCHEMA_VERSION = 1
FIDELITY_THRESHOLD = 0.98
MAX_SWEEP_RUNS = 10_000
WORKERS_ENV = "RINGECHO_WORKERS"


class ScenarioError(ValidationError):
    """Invalid scenario; ``key`` names the offending configuration entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    engine: str = "spectral"
    count: int = 61
    spacing: float = 0.1
    coupling: float | None = 0.05
    coupling_ratio: float | None = None
    finesse: float | None = 50.0
    linewidth: float | None = None
    convention: str = "linewidth"
    ordering: str = "natural"
    centered: bool = True
    propagation_delay: float = 0.0
    shape: str = "gaussian"
    width: float = 1.0
    pulse_spacing: float = 8.0
    amplitudes: tuple[float, float, float] = (1.0, 1.0, 1.0)
    bandwidth_factor: float = 4.0
    duration: float | None = None
    echoes: int = 3
    t_on: float | None = None
    t_off: float | None = None
    ramp: float = 0.0

    @property
    def has_schedule(self) -> bool:
        return self.t_on is not None

    def quoted_coupling(self) -> float:
        if self.coupling_ratio is not None:
            return self.coupling_ratio * self.spacing
        if self.coupling is None:
            raise ScenarioError("array.coupling", "coupling or coupling_ratio is required")
        return self.coupling

    def quoted_linewidth(self) -> float:
        if self.linewidth is not None:
            return self.linewidth
        if self.finesse is None:
            raise ScenarioError("array.finesse", "finesse or linewidth is required")
        if self.spacing <= 0:
            raise ScenarioError("array.finesse", "finesse needs spacing > 0; give linewidth")
        if self.finesse <= 0:
            raise ScenarioError("array.finesse", "finesse must be positive")
        return self.spacing / (2.0 * self.finesse)

    def support(self) -> tuple[float, float]:
        half = 10.0 / self.width
        if self.shape == "three_pulse":
            half += self.pulse_spacing
        return (-half, half)


@dataclass
class Resolved:
    scenario: Scenario
    spec: ArraySpec
    grid: TimeGrid
    signal: SampledSignal
    trace_stop: float
    schedule: Any = None


def _ordered(spec: ArraySpec, ordering: str) -> ArraySpec:
    if ordering == "natural":
        return spec
    if ordering == "reversed":
        return spec.reordered(list(range(spec.count))[::-1])
    if ordering.startswith("shuffle:"):
        try:
            seed = int(ordering.split(":", 1)[1])
        except ValueError as exc:
            raise ScenarioError("array.ordering", f"bad shuffle seed in {ordering!r}") from exc
        order = np.random.default_rng(seed).permutation(spec.count)
        return spec.reordered([int(i) for i in order])
    raise ScenarioError("array.ordering", f"unknown ordering {ordering!r}")


def resolve(sc: Scenario) -> Resolved:
    """Turn a scenario into an array, grid and input signal (validating on the way)."""
    if sc.engine not in ("spectral", "ode", "both"):
        raise ScenarioError("scenario.engine", f"unknown engine {sc.engine!r}")
    if sc.shape not in ("gaussian", "three_pulse"):
        raise ScenarioError("input.shape", f"unknown shape {sc.shape!r}")
    if sc.echoes < 0:
        raise ScenarioError("metrics.echoes", "must be >= 0")
    try:
        kappa, gamma = convert_rates(sc.quoted_coupling(), sc.quoted_linewidth(), sc.convention)
    except ScenarioError:
        raise
    except ValidationError as exc:
        raise ScenarioError("array.convention", str(exc)) from exc
    try:
        spec = build_comb_array(sc.count, sc.spacing, gamma, kappa, centered=sc.centered,
                                propagation_delay=sc.propagation_delay)
    except ValidationError as exc:
        raise ScenarioError("array", str(exc)) from exc
    spec = _ordered(spec, sc.ordering)

    support = sc.support()
    if sc.spacing > 0:
        period = 2.0 * math.pi / sc.spacing
        trace_stop = support[1] + (sc.echoes + 0.5) * period if sc.echoes else support[1] + 0.5 * period
        echoes_to_cover = sc.echoes + 1
    else:
        delay = float(group_delay(spec, np.array([0.0]))[0])
        trace_stop = sc.duration if sc.duration is not None else 2.0 * delay + support[1] + 20.0
        echoes_to_cover = 0
    if sc.has_schedule:
        if sc.t_off is None:
            raise ScenarioError("schedule.t_off", "required with t_on")
        trace_stop += sc.t_off - sc.t_on + sc.ramp
    try:
        grid = make_time_grid(sc.bandwidth_factor, echoes_to_cover, sc.spacing, spec=spec,
                              bandwidth=sc.width, support=support,
                              duration=max(trace_stop - support[0], sc.duration or 0.0))
    except ValidationError as exc:
        raise ScenarioError("grid", str(exc)) from exc
    try:
        if sc.shape == "gaussian":
            signal = gaussian_pulse(grid, 0.0, sc.width)
        else:
            signal = three_pulse_input(grid, sc.pulse_spacing, sc.amplitudes, 0.0, sc.width)
    except ValidationError as exc:
        raise ScenarioError("input", str(exc)) from exc

    schedule = None
    if sc.has_schedule:
        if sc.engine == "spectral":
            raise ScenarioError("scenario.engine", "frequency schedules need the ode engine")
        try:
            schedule = build_freeze_schedule(spec, sc.t_on, sc.t_off, sc.ramp,
                                             span=(grid.start, trace_stop))
        except ValidationError as exc:
            raise ScenarioError("schedule", str(exc)) from exc
    return Resolved(sc, spec, grid, signal, min(trace_stop, grid.stop), schedule)


# ---------------------------------------------------------------- config I/O

_SECTIONS = {
    "scenario": ("name", "engine"),
    "array": ("count", "spacing", "coupling", "coupling_ratio", "finesse", "linewidth",
              "convention", "ordering", "centered", "propagation_delay"),
    "input": ("shape", "width", "pulse_spacing", "amplitudes"),
    "grid": ("bandwidth_factor", "duration"),
    "metrics": ("echoes",),
    "schedule": ("t_on", "t_off", "ramp"),
}
_FIELD_TYPES = {f.name: f.type for f in fields(Scenario)}


def _convert(key: str, raw: str) -> Any:
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if "None" in kind and text == "":
        return None
    try:
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("bool"):
            lowered = text.lower()
            if lowered not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return lowered in ("true", "yes", "1")
        if kind.startswith("tuple"):
            return tuple(float(v) for v in text.split(","))
        if kind.startswith("float"):
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
    except ValueError as exc:
        raise ScenarioError(key, f"cannot parse {raw!r}") from exc
    return text


def _parser(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError("config", str(exc).splitlines()[0]) from exc
    return parser


def parse_config(text: str) -> tuple[Scenario, dict[str, list[Any]]]:
    """Parse scenario text into a Scenario and an optional sweep grid."""
    parser = _parser(text)
    values: dict[str, Any] = {}
    sweep: dict[str, list[Any]] = {}
    for section in parser.sections():
        if section == "sweep":
            for key, raw in parser.items(section):
                if key not in _FIELD_TYPES or key == "name":
                    raise ScenarioError(f"sweep.{key}", "not a sweepable parameter")
                sweep[key] = [_convert(key, part) for part in raw.split(",")]
            continue
        if section not in _SECTIONS:
            raise ScenarioError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ScenarioError(f"{section}.{key}", "unknown key")
            values[key] = _convert(key, raw)
    if "coupling_ratio" in values and "coupling" not in values:
        values["coupling"] = None
    if "linewidth" in values and "finesse" not in values:
        values["finesse"] = None
    return Scenario(**values), sweep


def load_config(path: str | os.PathLike) -> tuple[Scenario, dict[str, list[Any]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError("config", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- execution

@dataclass
class RunResult:
    scenario: Scenario
    report: EchoReport | None
    delay: float
    dominant_efficiency: float
    dominant: tuple[float, float]
    wraparound: float
    equivalence: float | None
    files: dict[str, str] = field(default_factory=dict)

    def summary_row(self) -> list[Any]:
        row: list[Any] = [self.scenario.name, self.scenario.engine, self.delay,
                          self.dominant_efficiency, self.dominant[0], self.dominant[1],
                          self.wraparound, "" if self.equivalence is None else self.equivalence]
        if self.report is not None:
            row += self.report.csv_row()
        return row

    def summary_header(self) -> list[str]:
        head = ["name", "engine", "delay", "dominant_efficiency", "dominant_lo", "dominant_hi",
                "wraparound_fraction", "ode_spectral_rel_l2"]
        if self.report is not None:
            head += EchoReport.csv_header(len(self.report.echoes))
        return head


def _truncate(signal: SampledSignal, count: int) -> SampledSignal:
    grid = TimeGrid(signal.grid.start, signal.grid.step, count)
    return SampledSignal(grid, signal.samples[:count])


def simulate(sc: Scenario) -> tuple[Resolved, SampledSignal, SampledSignal, float | None]:
    """Run the scenario's engine(s); returns (resolved, input, output, ode-vs-spectral L2).

    The ode engine only covers the trace span, so its input/output are
    truncated to that span; the spectral output covers the full window.
    """
    res = resolve(sc)
    equivalence = None
    if sc.engine == "spectral":
        return res, res.signal, propagate(res.spec, res.signal, check_wrap=False), None
    ode = integrate(res.spec, res.signal, res.schedule, t_stop=res.trace_stop)
    out = ode.output
    inp = _truncate(res.signal, out.grid.count)
    if sc.engine == "both":
        ref = propagate(res.spec, res.signal, check_wrap=False).samples[: out.grid.count]
        equivalence = float(np.linalg.norm(out.samples - ref) / np.linalg.norm(ref))
    return res, inp, out, equivalence


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def evaluate(sc: Scenario) -> tuple[RunResult, Resolved, SampledSignal, SampledSignal]:
    """Simulate and score one scenario without writing anything."""
    res, inp, out, equivalence = simulate(sc)
    report = None
    if sc.spacing > 0 and sc.echoes > 0 and not sc.has_schedule:
        report = detect_echoes(out, sc.spacing, sc.echoes, reference=inp)
    window = dominant_window(out)
    delay = centroid(out, window) - centroid(inp)
    wrap = wraparound_fraction(out, inp.energy()) if sc.engine == "spectral" else 0.0
    result = RunResult(sc, report, delay, efficiency(inp, out, window), window, wrap, equivalence)
    return result, res, inp, out


def manifest(sc: Scenario, res: Resolved, result: RunResult) -> dict[str, Any]:
    return {
        "software": {"package": "ringecho", "version": __version__},
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "scenario": asdict(sc),
        "resolved": {
            "coupling": res.spec.couplings[0] if res.spec.count else None,
            "linewidth": res.spec.linewidths[0] if res.spec.count else None,
            "detuning_min": float(res.spec.detunings.min()),
            "detuning_max": float(res.spec.detunings.max()),
            "grid": {"start": res.grid.start, "step": res.grid.step, "count": res.grid.count},
            "trace_stop": res.trace_stop,
        },
        "wraparound_fraction": result.wraparound,
        "valid": result.wraparound < 1e-6,
        "ode_spectral_rel_l2": result.equivalence,
        "fidelity_threshold": FIDELITY_THRESHOLD,
        "occupation_engine": "ode",
    }


def run(sc: Scenario, outdir: str | os.PathLike, occupations: bool = True) -> RunResult:
    """Run one scenario and write its trace, occupation, echo and manifest files."""
    result, res, inp, out = evaluate(sc)
    outdir = Path(outdir)
    stop = min(out.grid.count, res.grid.index_of(res.trace_stop) + 1)
    t = inp.times[:stop]
    a, b = inp.samples[:stop], out.samples[:stop]
    trace_rows = zip(t, a.real, a.imag, np.abs(a) ** 2, b.real, b.imag, np.abs(b) ** 2)
    files = {}
    path = outdir / f"{sc.name}_trace.csv"
    _write_atomic(path, _csv_text(
        ["t", "in_re", "in_im", "in_intensity", "out_re", "out_im", "out_intensity"],
        ([float(x) for x in r] for r in trace_rows)))
    files["trace"] = str(path)

    if occupations:
        # time-domain occupations: one pass gives every cavity, whereas the
        # spectral route needs two full-window FFTs per cavity
        occ = integrate(res.spec, res.signal, res.schedule, t_stop=res.trace_stop).occupations[:, :stop]
        path = outdir / f"{sc.name}_occupations.csv"
        header = ["t"] + [f"P{n}" for n in range(res.spec.count)] + ["P_total"]
        rows = (
            [float(t[k])] + [float(v) for v in occ[:, k]] + [float(occ[:, k].sum())]
            for k in range(stop)
        )
        _write_atomic(path, _csv_text(header, rows))
        files["occupations"] = str(path)

    path = outdir / f"{sc.name}_echoes.csv"
    _write_atomic(path, _csv_text(result.summary_header(), [result.summary_row()]))
    files["echoes"] = str(path)
    path = outdir / f"{sc.name}_manifest.json"
    _write_atomic(path, json.dumps(manifest(sc, res, result), indent=2, sort_keys=True) + "\n")
    files["manifest"] = str(path)
    result.files = files
    return result


def _sweep_cell(sc: Scenario) -> RunResult:
    return evaluate(sc)[0]


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ScenarioError(WORKERS_ENV, f"not an integer: {raw!r}") from exc
    return max(1, value)


def sweep_cells(base: Scenario, grid: Mapping[str, Sequence[Any]],
                allow_large: bool = False) -> list[Scenario]:
    keys = list(grid)
    total = math.prod(len(grid[k]) for k in keys) if keys else 1
    if total > MAX_SWEEP_RUNS and not allow_large:
        raise ScenarioError("sweep", f"{total} runs exceed {MAX_SWEEP_RUNS}; pass --allow-large")
    cells = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        if "coupling_ratio" in params:
            params.setdefault("coupling", None)
        if "linewidth" in params:
            params.setdefault("finesse", None)
        label = "_".join(f"{k}{_fmt(v)}" for k, v in zip(keys, combo))
        cells.append(replace(base, name=f"{base.name}_{label}" if label else base.name, **params))
    return cells


def sweep(base: Scenario, grid: Mapping[str, Sequence[Any]], workers: int | None = None,
          allow_large: bool = False) -> tuple[list[str], list[list[Any]]]:
    """Cartesian sweep; one summary row per cell in product order."""
    cells = sweep_cells(base, grid, allow_large)
    for cell in cells:
        resolve(cell)
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    keys = list(grid)
    width = max(len(r.summary_header()) for r in results)
    header = keys + next(r.summary_header() for r in results if len(r.summary_header()) == width)
    rows = [[getattr(c, k) for k in keys] + r.summary_row() for c, r in zip(cells, results)]
    return header, rows


def write_sweep(base: Scenario, grid: Mapping[str, Sequence[Any]], outdir: str | os.PathLike,
                workers: int | None = None, allow_large: bool = False) -> Path:
    header, rows = sweep(base, grid, workers, allow_large)
    path = Path(outdir) / f"{base.name}_sweep.csv"
    _write_atomic(path, _csv_text(header, rows))
    return path


# ---------------------------------------------------------------- builtins

FIG2 = Scenario(name="fig2", shape="three_pulse", finesse=50.0, coupling=0.05, echoes=3)
FIG2_COUPLINGS = (0.01, 0.025, 0.05)
FIG3 = Scenario(name="fig3", finesse=50.0, coupling=None, coupling_ratio=0.5, echoes=1)
FIG3_GRID = {"coupling_ratio": [0.10, 0.25, 0.50],
             "finesse": [3.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0]}
FIG4 = Scenario(name="fig4", spacing=0.0, finesse=None, linewidth=1e-4, coupling=7.5, echoes=0)
FIG4_COUPLINGS = (5.0, 7.5, 10.0, 15.0)
FIG5 = Scenario(name="fig5", finesse=500.0, coupling=None, coupling_ratio=0.5, echoes=3)
FIG5_RATIOS = (0.35, 0.5, 1.0, 3.0)


def builtin_scenarios(name: str) -> list[Scenario]:
    """Static single-run scenarios behind a builtin name (sweeps expanded)."""
    if name == "fig2":
        return [replace(FIG2, name=f"fig2_coupling{k}", coupling=k) for k in FIG2_COUPLINGS]
    if name == "fig3":
        return sweep_cells(FIG3, FIG3_GRID)
    if name == "fig4":
        return [replace(FIG4, name=f"fig4_coupling{k}", coupling=k) for k in FIG4_COUPLINGS]
    if name == "fig5":
        return [replace(FIG5, name=f"fig5_ratio{r}", coupling_ratio=r) for r in FIG5_RATIOS]
    raise ScenarioError("builtin", f"no scenarios behind {name!r}")


BUILTINS = ("fig2", "fig3", "fig4", "fig5", "table1", "table2")


def run_builtin(name: str, outdir: str | os.PathLike, workers: int | None = None) -> list[Path]:
    outdir = Path(outdir)
    if name == "fig3":
        return [write_sweep(FIG3, FIG3_GRID, outdir, workers)]
    if name in ("table1", "table2"):
        rows = units.TABLE1_ROWS if name == "table1" else units.TABLE2_ROWS
        schemes = ("SCISSOR", "CRC") if name == "table1" else ("CRC",)
        entries = [e for s in schemes for e in units.table_delays(rows, s)]
        path = outdir / f"{name}.csv"
        _write_atomic(path, _csv_text(units.TableEntry.CSV_HEADER, [e.csv_row() for e in entries]))
        return [path]
    if name in ("fig2", "fig4", "fig5"):
        paths = []
        for sc in builtin_scenarios(name):
            paths += [Path(p) for p in run(sc, outdir).files.values()]
        return paths
    raise ScenarioError("builtin", f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
