"""
Run configuration files, run directories and CSV persistence.

A configuration file is plain ``key = value`` text; ``#`` starts a comment.

    grid.n = 32
    dt = 1e-3
    t_end = 0.5
    initial_condition = taylor_green_2d3
    ic.amplitude = 1.0

Floats are written with 17 significant digits so every CSV value reads back
to the identical double.
"""

from __future__ import annotations

import csv
import difflib
import hashlib
import json
import math
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .errors import ConfigError, LPNSEError
from .harness import IC_TAGS, InitialCondition, PlanEntry
from .littlewood_paley import PROFILES
from .solver import DEALIAS_RULES, SolverConfig
from .spectral import Grid

TOOL_VERSION = __version__
MANIFEST_NAME = "manifest.json"
DIAGNOSTICS_NAME = "diagnostics.csv"

_PI_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


def _float(text: str) -> float:
    m = _PI_RE.match(text)
    if m:
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    return value


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {text!r}")
        return text
    return parse


def _positive(x):
    return x > 0


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""
    hashed: bool = True


KEYS: dict[str, _Key] = {
    "grid.n": _Key(_int, required=True, check=lambda n: n >= 8 and n % 2 == 0, rule="an even integer >= 8"),
    "box_length": _Key(_float, 2 * math.pi, check=_positive, rule="positive"),
    "dt": _Key(_float, required=True, check=_positive, rule="positive"),
    "t_end": _Key(_float, required=True, check=_positive, rule="positive"),
    "viscosity": _Key(_float, 1.0, check=_positive, rule="positive"),
    "dealias": _Key(_choice(DEALIAS_RULES), "two-thirds"),
    "diag_every": _Key(_int, 10, check=_positive, rule="a positive integer"),
    "initial_condition": _Key(_choice(IC_TAGS), required=True),
    "ic.amplitude": _Key(_float, 1.0, check=lambda a: a >= 0, rule="nonnegative"),
    "ic.slope": _Key(_float, 4.0, check=lambda s: s >= 0, rule="nonnegative"),
    "ic.peak": _Key(_float, None, check=_positive, rule="positive"),
    "ic.seed": _Key(_int, 0, check=lambda s: s >= 0, rule="nonnegative"),
    "profile": _Key(_choice(PROFILES), "smooth"),
    "c_hat": _Key(_float, None, check=_positive, rule="positive"),
    "constant_file": _Key(str, None),
    "corpus.size": _Key(_int, 64, check=_positive, rule="a positive integer"),
    "corpus.seed": _Key(_int, 0, check=lambda s: s >= 0, rule="nonnegative"),
    "output.dir": _Key(str, None, hashed=False),
    "output.snapshots": _Key(_bool, True, hashed=False),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of one configuration file."""

    solver: SolverConfig
    ic: InitialCondition
    values: dict = field(compare=False)
    source: Optional[Path] = field(default=None, compare=False)

    @property
    def profile(self) -> str:
        return self.values["profile"]

    @property
    def c_hat(self) -> Optional[float]:
        return self.values["c_hat"]

    @property
    def output_dir(self) -> Optional[Path]:
        d = self.values["output.dir"]
        if d is None:
            return None
        d = Path(d)
        if not d.is_absolute() and self.source is not None:
            d = self.source.parent / d
        return d

    @property
    def constant_file(self) -> Optional[Path]:
        f = self.values["constant_file"]
        if f is None:
            return None
        f = Path(f)
        if not f.is_absolute() and self.source is not None:
            f = self.source.parent / f
        return f

    def canonical(self) -> str:
        """Key-sorted canonical text over the hashed keys, defaults included."""
        lines = []
        for key in sorted(KEYS):
            if not KEYS[key].hashed:
                continue
            v = self.values[key]
            if isinstance(v, float):
                v = format(v, ".17g")
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key}={'' if v is None else v}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_overrides(self, overrides: dict[str, str]) -> RunConfig:
        raw = {k: _unparse(v) for k, v in self.values.items() if v is not None}
        raw.update(overrides)
        return _build({k: (v, None) for k, v in raw.items()}, self.source)


def _unparse(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            close = difflib.get_close_matches(key, KEYS, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown key {key!r}{hint}", line=lineno, key=key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} (first set on line {raw[key][1]})", line=lineno, key=key)
        raw[key] = (value, lineno)
    return raw


def _build(raw: dict[str, tuple[str, Optional[int]]], source: Optional[Path]) -> RunConfig:
    values = {}
    for key, spec in KEYS.items():
        if key not in raw:
            if spec.required:
                raise ConfigError(f"missing required key {key!r}", key=key)
            values[key] = spec.default
            continue
        text, lineno = raw[key]
        try:
            value = spec.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {text!r} ({exc})", line=lineno, key=key) from None
        if spec.check is not None and not spec.check(value):
            raise ConfigError(f"{key} must be {spec.rule}, got {text}", line=lineno, key=key)
        values[key] = value
    try:
        grid = Grid(values["grid.n"], values["box_length"])
        solver = SolverConfig(
            grid, values["dt"], values["t_end"], values["viscosity"], values["dealias"], values["diag_every"]
        )
        ic = InitialCondition(
            values["initial_condition"], values["ic.amplitude"], values["ic.slope"], values["ic.peak"], values["ic.seed"]
        )
    except LPNSEError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(solver, ic, values, source)


def parse_config_text(text: str, source: Optional[Path] = None,
                      overrides: Optional[dict[str, str]] = None) -> RunConfig:
    raw = _parse_lines(text)
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown override key {key!r}", key=key)
        raw[key] = (value, None)
    return _build(raw, source)


def parse_config(path, overrides: Optional[dict[str, str]] = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, path, overrides)


def parse_plan(path) -> list[tuple[PlanEntry, RunConfig]]:
    """Plan file: one ``<config path> [key=value ...]`` entry per line."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        config_path, *pairs = line.split()
        overrides = {}
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value", line=lineno)
            k, v = pair.split("=", 1)
            overrides[k] = v
        cfg_path = Path(config_path)
        if not cfg_path.is_absolute():
            cfg_path = path.parent / cfg_path
        cfg = parse_config(cfg_path, overrides)
        entries.append((PlanEntry(cfg.ic, cfg.solver, line), cfg))
    if not entries:
        raise ConfigError(f"{path}: plan is empty")
    return entries


# ---------------------------------------------------------------------------
# persistence


def format_float(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def write_csv(path, columns: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list]]:
    """Read a CSV written by this package; numeric cells come back as floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader, [])
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(None if cell == "" else cell)
            rows.append(parsed)
    return columns, rows


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = TOOL_VERSION
    started: str = ""
    finished: str = ""
    seeds: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "tool_version": self.tool_version,
                "started": self.started,
                "finished": self.finished,
                "seeds": list(self.seeds),
                "files": list(self.files),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        d = json.loads(text)
        return cls(d["config_hash"], d["tool_version"], d["started"], d["finished"], d["seeds"], d["files"])


def write_run_dir(
    path,
    manifest: RunManifest,
    columns: Sequence[str],
    rows: Sequence[Sequence[float]],
    extra_files: Optional[dict[str, Callable[[Path], None]]] = None,
    force: bool = False,
) -> Path:
    """Create a run directory with diagnostics CSV, extra files and the manifest.

    ``extra_files`` maps a file name to a writer taking the target path.  An
    existing non-empty directory is replaced only when ``force`` is set.
    """
    path = Path(path)
    if path.exists():
        if not path.is_dir():
            raise LPNSEError(f"{path} exists and is not a directory")
        if any(path.iterdir()):
            if not force:
                raise LPNSEError(f"{path} already holds a run; pass force to overwrite")
            shutil.rmtree(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise LPNSEError(f"cannot create {path}: {exc}") from None
    write_csv(path / DIAGNOSTICS_NAME, columns, rows)
    for name, writer in (extra_files or {}).items():
        writer(path / name)
    manifest.files = sorted({p.name for p in path.iterdir()} | {MANIFEST_NAME})
    (path / MANIFEST_NAME).write_text(manifest.to_json())
    return path
