"""Experiment configuration: an INI file with the sections

``[experiment]``  name, tasks
``[space]``       variant = omega | kothe | entire, plus p / matrix / k_max / j_max / circle_samples
``[operator]``    variant = backward_shift | diagonal | birkhoff | maclane | diffop, plus weights / lambdas / a / phi
``[vector]``      source = inline | file | construction, plus the source's parameters
``[grids]``       horizon, k0, eps, J, K, N_min, growth
``[transfer]``    witness, scale, depth
``[output]``      dir, formats, figures

``configs/example.ini`` documents every key. Errors name the section, the
field and (when known) the line.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .densities import DEFAULT_N_MIN
from .errors import ConfigError
from .recurrence import DEFAULT_EPS_GRID, DEFAULT_HORIZON, DEFAULT_J, DEFAULT_K, DEFAULT_K0_GRID

TASKS = ("classify", "lbo", "densities", "construct", "measure", "transfer")
SPACES = ("omega", "kothe", "entire")
OPERATORS = ("backward_shift", "diagonal", "birkhoff", "maclane", "diffop")
SOURCES = ("inline", "file", "construction")
CONSTRUCTIONS = ("word_embedding", "star_recurrent")
MAX_HORIZON = 2 ** 24


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    tasks: tuple = ("classify",)
    space: dict = field(default_factory=lambda: {"variant": "omega"})
    operator: dict = field(default_factory=lambda: {"variant": "backward_shift"})
    vector: dict = field(default_factory=lambda: {"source": "inline", "values": "1,2", "repeat": "0"})
    horizon: int = DEFAULT_HORIZON
    k0_grid: tuple = DEFAULT_K0_GRID
    eps_grid: tuple = DEFAULT_EPS_GRID
    J: int = DEFAULT_J
    K: int = DEFAULT_K
    N_min: int = DEFAULT_N_MIN
    growth: str = "none"
    transfer: dict = field(default_factory=dict)
    out_dir: str = "out"
    formats: tuple = ("json", "csv")
    figures: bool = True
    seed: int = 0
    base_dir: str = "."
    source_text: str = ""

    def canonical(self) -> dict:
        """Everything that influences results (paths and the raw text excluded)."""
        return {
            "name": self.name, "tasks": list(self.tasks), "space": dict(sorted(self.space.items())),
            "operator": dict(sorted(self.operator.items())), "vector": dict(sorted(self.vector.items())),
            "grids": {"horizon": self.horizon, "k0": list(self.k0_grid), "eps": list(self.eps_grid),
                      "J": self.J, "K": self.K, "N_min": self.N_min, "growth": self.growth},
            "transfer": dict(sorted(self.transfer.items())), "seed": self.seed,
        }

    def sha256(self) -> str:
        import json

        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def grid(self) -> list[tuple[int, float]]:
        return [(k, e) for k in self.k0_grid for e in self.eps_grid]


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            m = re.match(r"([^=:]+)[=:]", line)
            if m and m.group(1).strip().lower() == key.lower():
                return no
    return None


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, text: str):
        self.p = parser
        self.text = text

    def fail(self, section, key, msg):
        raise ConfigError(msg, section=section, field=key, line=_line_of(self.text, section, key))

    def get(self, section, key, default=None):
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        return default

    def integer(self, section, key, default, lo=None, hi=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            value = int(eval_int(raw))
        except ValueError:
            self.fail(section, key, f"expected an integer, got {raw!r}")
        if lo is not None and value < lo:
            self.fail(section, key, f"must be >= {lo}, got {value}")
        if hi is not None and value > hi:
            self.fail(section, key, f"must be <= {hi}, got {value}")
        return value

    def int_list(self, section, key, default, lo=1):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            values = tuple(int(eval_int(v)) for v in split_list(raw))
        except ValueError:
            self.fail(section, key, f"expected a comma-separated integer list, got {raw!r}")
        if not values:
            self.fail(section, key, "list must be nonempty")
        if any(v < lo for v in values):
            self.fail(section, key, f"entries must be >= {lo}")
        return values

    def positive_list(self, section, key, default):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            values = tuple(parse_real(v) for v in split_list(raw))
        except ValueError:
            self.fail(section, key, f"expected a comma-separated list of reals, got {raw!r}")
        if not values:
            self.fail(section, key, "list must be nonempty")
        if any(not v > 0 for v in values):
            self.fail(section, key, "entries must be > 0")
        return values


def split_list(raw: str) -> list[str]:
    return [v.strip() for v in raw.replace("\n", ",").split(",") if v.strip()]


def eval_int(raw: str) -> int:
    """Integer literal, optionally written as a power ``2^k`` or ``2**k``."""
    raw = raw.strip()
    m = re.fullmatch(r"(\d+)\s*(?:\^|\*\*)\s*(\d+)", raw)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    return int(raw)


def parse_real(raw: str) -> float:
    """Real literal, also ``2^-k`` / ``2**-k`` and ``inf``."""
    raw = raw.strip()
    m = re.fullmatch(r"(\d+(?:\.\d*)?)\s*(?:\^|\*\*)\s*(-?\d+)", raw)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    return float(raw)


def parse_scalar(raw: str) -> complex | float:
    value = complex(raw.strip().replace("i", "j").replace(" ", ""))
    return value.real if value.imag == 0 else value


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text, base_dir=str(path.parent), overrides=overrides)


def parse_config(text: str, base_dir: str = ".", overrides: dict | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for (section, key), value in (overrides or {}).items():
        if value is None:
            continue
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))
    r = _Reader(parser, text)
    cfg = ExperimentConfig(base_dir=base_dir, source_text=text)

    cfg.name = r.get("experiment", "name", cfg.name)
    raw_tasks = r.get("experiment", "tasks")
    if raw_tasks is not None:
        tasks = tuple(split_list(raw_tasks))
        for t in tasks:
            if t not in TASKS:
                r.fail("experiment", "tasks", f"unknown task {t!r}; choose from {', '.join(TASKS)}")
        if not tasks:
            r.fail("experiment", "tasks", "at least one task is required")
        cfg.tasks = tasks

    space = {k: v.strip() for k, v in parser.items("space")} if parser.has_section("space") else {}
    space.setdefault("variant", "omega")
    if space["variant"] not in SPACES:
        r.fail("space", "variant", f"unknown space {space['variant']!r}; choose from {', '.join(SPACES)}")
    if space["variant"] == "kothe":
        space.setdefault("p", "inf")
        space.setdefault("matrix", "polynomial")
        try:
            p = parse_real(space["p"])
        except ValueError:
            r.fail("space", "p", f"expected a real or inf, got {space['p']!r}")
        if not p >= 1:
            r.fail("space", "p", "must lie in [1, inf]")
    if space["variant"] == "entire" and "circle_samples" in space:
        r.integer("space", "circle_samples", 1024, lo=8)
    cfg.space = space

    op = {k: v.strip() for k, v in parser.items("operator")} if parser.has_section("operator") else {}
    op.setdefault("variant", "backward_shift")
    if op["variant"] not in OPERATORS:
        r.fail("operator", "variant", f"unknown operator {op['variant']!r}; choose from {', '.join(OPERATORS)}")
    need = {"diagonal": "lambdas", "birkhoff": "a", "diffop": "phi"}.get(op["variant"])
    if need and need not in op:
        r.fail("operator", need, f"operator {op['variant']} needs {need!r}")
    for key in ("lambdas", "phi", "weights", "a"):
        if key in op:
            try:
                vals = [parse_scalar(v) for v in split_list(op[key])]
            except ValueError:
                r.fail("operator", key, f"cannot parse scalars in {op[key]!r}")
            if key == "a" and (len(vals) != 1 or vals[0] == 0):
                r.fail("operator", "a", "translation a must be a single nonzero scalar")
            if key == "weights" and any(complex(v).imag != 0 or complex(v).real <= 0 for v in vals):
                r.fail("operator", "weights", "shift weights must be positive reals")
    cfg.operator = op

    vec = {k: v.strip() for k, v in parser.items("vector")} if parser.has_section("vector") else {}
    vec.setdefault("source", "inline")
    if vec["source"] not in SOURCES:
        r.fail("vector", "source", f"unknown source {vec['source']!r}; choose from {', '.join(SOURCES)}")
    if vec["source"] == "inline":
        if "values" not in vec:
            r.fail("vector", "values", "inline vectors need 'values'")
        try:
            [parse_scalar(v) for v in split_list(vec["values"])]
        except ValueError:
            r.fail("vector", "values", f"cannot parse scalars in {vec['values']!r}")
        if vec.get("repeat", "0") != "auto":
            r.integer("vector", "repeat", 0, lo=0, hi=MAX_HORIZON)
    elif vec["source"] == "file":
        if "path" not in vec:
            r.fail("vector", "path", "file vectors need 'path'")
        if not (Path(base_dir) / vec["path"]).exists():
            r.fail("vector", "path", f"file {vec['path']!r} does not exist")
    else:
        kind = vec.get("construction")
        if kind not in CONSTRUCTIONS:
            r.fail("vector", "construction", f"choose a construction from {', '.join(CONSTRUCTIONS)}")
        if kind == "word_embedding":
            r.positive_list("vector", "seed", (1.0,))
            r.integer("vector", "rounds", 1, lo=1, hi=3)
            if vec.get("use", "y") not in ("y", "z"):
                r.fail("vector", "use", "use must be y or z")
        else:
            r.integer("vector", "k_max", 9, lo=1, hi=64)
            r.integer("vector", "block_spacing", 2, lo=2)
    cfg.vector = vec

    cfg.horizon = r.integer("grids", "horizon", cfg.horizon, lo=1, hi=MAX_HORIZON)
    cfg.k0_grid = r.int_list("grids", "k0", cfg.k0_grid)
    cfg.eps_grid = r.positive_list("grids", "eps", cfg.eps_grid)
    cfg.J = r.integer("grids", "J", cfg.J, lo=1)
    cfg.K = r.integer("grids", "K", cfg.K, lo=1)
    cfg.N_min = r.integer("grids", "N_min", cfg.N_min, lo=1)
    growth = r.get("grids", "growth", cfg.growth)
    if not (growth in ("none", "j") or re.fullmatch(r"const:\s*[0-9.eE+-]+", growth)
            or re.fullmatch(r"poly:\s*[0-9.eE+-]+", growth)):
        r.fail("grids", "growth", "growth must be none, j, const:<c> or poly:<d>")
    cfg.growth = growth
    if cfg.N_min > cfg.horizon:
        r.fail("grids", "N_min", f"N_min={cfg.N_min} exceeds horizon {cfg.horizon}")

    cfg.transfer = {k: v.strip() for k, v in parser.items("transfer")} if parser.has_section("transfer") else {}
    if cfg.transfer:
        r.integer("transfer", "depth", 64, lo=1)
        r.integer("transfer", "scale", 1, lo=1)

    cfg.out_dir = r.get("output", "dir", cfg.out_dir)
    formats = tuple(split_list(r.get("output", "formats", ",".join(cfg.formats))))
    for f in formats:
        if f not in ("json", "csv"):
            r.fail("output", "formats", f"unknown format {f!r}; choose json and/or csv")
    cfg.formats = formats
    fig = r.get("output", "figures", "yes").lower()
    if fig not in ("yes", "no", "true", "false", "1", "0", "on", "off"):
        r.fail("output", "figures", "figures must be yes or no")
    cfg.figures = fig in ("yes", "true", "1", "on")
    cfg.seed = r.integer("experiment", "seed", cfg.seed, lo=0)
    return cfg


def growth_function(spec: str):
    """``none`` -> None, ``j`` -> j, ``const:c`` -> c, ``poly:d`` -> j**d."""
    if spec == "none":
        return None
    if spec == "j":
        return lambda j: float(j)
    kind, value = spec.split(":", 1)
    c = float(value)
    if kind == "const":
        return lambda j: c
    return lambda j: float(j) ** c


def finite_or_str(x: float):
    """JSON-safe float: infinities and NaN become strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x
