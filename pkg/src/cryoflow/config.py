"""Line-oriented ``key = value`` configuration with ``[section]`` headers.

A key's full path is ``section.key``; keys may themselves be dotted
(``pet_multiplier.north``). ``[layer]`` may repeat, each occurrence opening
a new soil layer. ``[ensemble]`` holds ``sweep.<path> = [v1, v2, ...]``
entries expanded to the cross product of all axes. Unknown keys are errors.
"""

from __future__ import annotations

import copy
import itertools
import re
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .et import ROOT_SHAPES, VegetationParams
from .flow import FlowSettings
from .forcing import ASPECTS, ClimateForcing, load_forcing
from .heat import HeatSettings
from .mesh import LAYER_PARAMETERS, SoilLayer, SoilProfile
from .scenario import (
    Boundaries,
    InitialCondition,
    MeshSpec,
    ScenarioConfig,
    SpinUp,
    TimeControl,
)

# path -> (type, default); None default = required
SCHEMA: dict[str, tuple[type | tuple, object]] = {
    "run.forcing": (Path, None),
    "run.snapshot_interval_s": (float, 30.0 * 86400.0),
    "run.plots": (bool, False),
    "run.workers": (int, 1),
    "scenario.name": (str, None),
    "scenario.aspect": (ASPECTS, "north"),
    "scenario.stand_density": (float, 1.0),
    "scenario.pet_multiplier.north": (float, 1.0),
    "scenario.pet_multiplier.south": (float, 1.0),
    "mesh.depth": (float, MeshSpec.depth),
    "mesh.n_cells": (int, MeshSpec.n_cells),
    "mesh.grading": (float, MeshSpec.grading),
    "initial.T": (float, InitialCondition.T),
    "initial.h": (float, InitialCondition.h),
    "initial.table": (Path, ""),
    "boundaries.h_pond_max": (float, Boundaries.h_pond_max),
    "boundaries.flow_bottom": (("free_drainage", "head", "no_flux"), Boundaries.flow_bottom),
    "boundaries.flow_bottom_head": (float, Boundaries.flow_bottom_value),
    "boundaries.heat_bottom": (("flux", "temperature"), Boundaries.heat_bottom),
    "boundaries.heat_bottom_value": (float, Boundaries.heat_bottom_value),
    "spinup.max_years": (int, SpinUp.max_years),
    "spinup.tol_K": (float, SpinUp.tol_K),
}
for _f in fields(TimeControl):
    SCHEMA[f"time.{_f.name}"] = (float, _f.default)
for _f in fields(VegetationParams):
    SCHEMA[f"vegetation.{_f.name}"] = ((ROOT_SHAPES, _f.default) if _f.name == "root_shape" else (float, _f.default))
for _f in fields(FlowSettings):
    SCHEMA[f"flow.{_f.name}"] = (type(_f.default), _f.default)
for _f in fields(HeatSettings):
    SCHEMA[f"heat.{_f.name}"] = (type(_f.default), _f.default)

LAYER_SCHEMA: dict[str, tuple[type, object]] = {"z_top": (float, None), "z_bottom": (float, None)}
LAYER_SCHEMA.update({f.name: (float, f.default) for f in fields(SoilLayer) if f.name in LAYER_PARAMETERS})

SECTIONS = sorted({p.split(".")[0] for p in SCHEMA} | {"layer", "ensemble"})

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


@dataclass(frozen=True)
class OutputOptions:
    snapshot_interval: float = 30.0 * 86400.0
    plots: bool = False
    workers: int = 1


@dataclass
class ConfigBundle:
    scenarios: list[ScenarioConfig]
    forcing: ClimateForcing
    options: OutputOptions
    forcing_path: Path
    entries: dict
    layers: list
    sweeps: list


def _parse_scalar(text: str, path, line):
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ConfigError(f"unterminated string {text}", path, line)
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    if _NUMBER.match(text):
        return float(text) if any(c in text for c in ".eE") else int(text)
    if text.lower() in ("inf", "+inf", "-inf", "nan"):
        raise ConfigError(f"non-finite value {text}", path, line)
    if not text or not (_IDENT.match(text) or "/" in text):
        raise ConfigError(f"cannot parse value {text!r}", path, line)
    return text


def _parse_value(text: str, path, line):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", path, line)
        inner = text[1:-1].strip()
        if not inner:
            raise ConfigError("empty list", path, line)
        return [_parse_scalar(item.strip(), path, line) for item in inner.split(",")]
    return _parse_scalar(text, path, line)


def _strip_comment(raw: str) -> str:
    out, quoted = [], False
    for ch in raw:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def read_entries(text: str, path="<config>"):
    """Parse text into ``({key_path: (value, line)}, [layer dicts], [(sweep_path, values, line)])``."""
    entries: dict[str, tuple[object, int]] = {}
    layers: list[dict] = []
    sweeps: list[tuple[str, list, int]] = []
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", path, lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", path, lineno)
            if section == "layer":
                layers.append({"__line__": lineno})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", path, lineno)
        key, _, value_text = line.partition("=")
        key = key.strip()
        if not key or not _IDENT.match(key):
            raise ConfigError(f"invalid key {key!r}", path, lineno)
        value = _parse_value(value_text, path, lineno)
        if section == "layer":
            if key not in LAYER_SCHEMA:
                raise ConfigError(f"unknown key {key!r} in [layer]", path, lineno)
            if key in layers[-1]:
                raise ConfigError(f"duplicate key {key!r}", path, lineno)
            layers[-1][key] = (value, lineno)
            continue
        full = f"{section}.{key}" if section else key
        if full.startswith("ensemble."):
            sub = full[len("ensemble."):]
            if not sub.startswith("sweep."):
                raise ConfigError(f"unknown key {key!r} in [ensemble]", path, lineno)
            target = sub[len("sweep."):]
            if not _sweepable(target):
                raise ConfigError(f"cannot sweep unknown key {target!r}", path, lineno)
            if not isinstance(value, list):
                raise ConfigError("sweep values must be a list [v1, v2, ...]", path, lineno)
            if any(s[0] == target for s in sweeps):
                raise ConfigError(f"duplicate sweep axis {target!r}", path, lineno)
            sweeps.append((target, value, lineno))
            continue
        if full not in SCHEMA:
            raise ConfigError(f"unknown key {full!r}", path, lineno)
        if full in entries:
            raise ConfigError(f"duplicate key {full!r}", path, lineno)
        if isinstance(value, list):
            raise ConfigError(f"{full} takes a single value (lists only under [ensemble])", path, lineno)
        entries[full] = (value, lineno)
    return entries, layers, sweeps


def _sweepable(target: str) -> bool:
    if target in SCHEMA and not target.startswith("run."):
        return target != "scenario.name"
    m = re.match(r"^layer\.(\d+)\.(\w+)$", target)
    return bool(m) and m.group(2) in LAYER_SCHEMA


def _coerce(key: str, value, kind, path, line):
    if isinstance(kind, tuple):
        if value not in kind:
            raise ConfigError(f"{key} must be one of {', '.join(kind)} (got {value!r})", path, line)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number (got {value!r})", path, line)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer (got {value!r})", path, line)
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false (got {value!r})", path, line)
        return value
    if kind in (str, Path):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string (got {value!r})", path, line)
        return value
    raise AssertionError(kind)


def _resolve(entries, path, header_line=1):
    """Typed values for every schema key, defaults filled; returns (values, lines).

    Only explicitly given keys are members of ``lines``; lookups of defaulted
    keys fall back to ``header_line``.
    """
    values, lines = {}, defaultdict(lambda: header_line)
    for key, (kind, default) in SCHEMA.items():
        if key in entries:
            raw, line = entries[key]
            values[key] = _coerce(key, raw, kind, path, line)
            lines[key] = line
        elif default is None:
            raise ConfigError(f"missing required key {key!r}", path)
        else:
            values[key] = default
    return values, lines


def _check(problems, candidates, lines, path, fallback_line):
    if not problems:
        return
    msg = problems[0]
    line = fallback_line
    for key in sorted(candidates, key=len, reverse=True):
        leaf = key.rsplit(".", 1)[-1]
        if re.search(rf"\b{re.escape(leaf)}\b", msg) and key in lines:
            line = lines[key]
            break
    raise ConfigError(msg, path, line)


def _build_layers(layers, path):
    out = []
    for index, layer in enumerate(layers, start=1):
        header = layer["__line__"]
        params, lines = {}, {}
        for key, (kind, default) in LAYER_SCHEMA.items():
            if key in layer:
                raw, line = layer[key]
                params[key] = _coerce(f"layer {index} {key}", raw, kind, path, line)
                lines[key] = line
            elif default is None:
                raise ConfigError(f"layer {index} is missing required key {key!r}", path, header)
            else:
                params[key] = default
        probe = object.__new__(SoilLayer)
        for k, v in params.items():
            object.__setattr__(probe, k, v)
        _check(SoilLayer.violations(probe), lines, lines, path, header)
        out.append(SoilLayer(**params))
    if not out:
        raise ConfigError("at least one [layer] section is required", path)
    try:
        return SoilProfile(tuple(out))
    except ConfigError as exc:
        raise ConfigError(exc.message, path, layers[-1]["__line__"]) from exc


def _scenario_from(values, lines, layers, path, base_dir) -> ScenarioConfig:
    def pick(prefix, cls):
        kw = {f.name: values[f"{prefix}.{f.name}"] for f in fields(cls)}
        probe = object.__new__(cls)
        for k, v in kw.items():
            object.__setattr__(probe, k, v)
        if hasattr(cls, "violations"):
            _check(probe.violations(), [f"{prefix}.{k}" for k in kw], lines, path, 1)
        return cls(**kw)

    veg = pick("vegetation", VegetationParams)
    time = pick("time", TimeControl)
    profile = _build_layers(layers, path)

    mesh = MeshSpec(values["mesh.depth"], values["mesh.n_cells"], values["mesh.grading"])
    if not mesh.depth > 0.0:
        raise ConfigError("mesh requires depth > 0", path, lines["mesh.depth"])
    if mesh.n_cells < 2:
        raise ConfigError("mesh requires n_cells >= 2", path, lines["mesh.n_cells"])
    if not mesh.grading > 0.0:
        raise ConfigError("mesh requires grading > 0", path, lines["mesh.grading"])
    if profile.depth < mesh.depth:
        raise ConfigError(
            f"soil layers end at {profile.depth} m; depth range [{profile.depth}, {mesh.depth}] m is not covered",
            path,
            lines["mesh.depth"],
        )
    if veg.root_depth > mesh.depth:
        raise ConfigError("vegetation requires root_depth <= mesh depth", path, lines["vegetation.root_depth"])

    table = values["initial.table"]
    if table:
        initial = _read_initial_table(base_dir / table, values)
    else:
        initial = InitialCondition(T=values["initial.T"], h=values["initial.h"])

    for key in ("scenario.stand_density", "scenario.pet_multiplier.north", "scenario.pet_multiplier.south"):
        if not values[key] >= 0.0:
            raise ConfigError(f"{key} must be >= 0", path, lines[key])
    if not values["boundaries.h_pond_max"] >= 0.0:
        raise ConfigError("h_pond_max must be >= 0", path, lines["boundaries.h_pond_max"])
    for key in ("spinup.max_years",):
        if values[key] < 0:
            raise ConfigError(f"{key} must be >= 0", path, lines[key])
    for key in ("flow.max_picard", "heat.max_picard"):
        if values[key] < 1:
            raise ConfigError(f"{key} must be >= 1", path, lines[key])

    return ScenarioConfig(
        name=values["scenario.name"],
        profile=profile,
        aspect=values["scenario.aspect"],
        stand_density=values["scenario.stand_density"],
        pet_multiplier_north=values["scenario.pet_multiplier.north"],
        pet_multiplier_south=values["scenario.pet_multiplier.south"],
        veg=veg,
        mesh=mesh,
        time=time,
        initial=initial,
        boundaries=Boundaries(
            h_pond_max=values["boundaries.h_pond_max"],
            flow_bottom=values["boundaries.flow_bottom"],
            flow_bottom_value=values["boundaries.flow_bottom_head"],
            heat_bottom=values["boundaries.heat_bottom"],
            heat_bottom_value=values["boundaries.heat_bottom_value"],
        ),
        flow=FlowSettings(**{f.name: values[f"flow.{f.name}"] for f in fields(FlowSettings)}),
        heat=HeatSettings(**{f.name: values[f"heat.{f.name}"] for f in fields(HeatSettings)}),
        spinup=SpinUp(values["spinup.max_years"], values["spinup.tol_K"]),
        snapshot_interval=values["run.snapshot_interval_s"],
    )


def _read_initial_table(table_path: Path, values) -> InitialCondition:
    import csv

    try:
        with table_path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read initial table: {exc.strerror}", table_path) from exc
    if not rows or [c.strip() for c in rows[0]] != ["z_m", "h_m", "t_c"]:
        raise ConfigError("initial table header must be z_m,h_m,t_c", table_path, 1)
    z, h, T = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            a, b, c = (float(v) for v in row)
        except ValueError as exc:
            raise ConfigError(f"bad row: {exc}", table_path, lineno) from exc
        if z and a <= z[-1]:
            raise ConfigError("z_m must be strictly increasing", table_path, lineno)
        z.append(a), h.append(b), T.append(c)
    if not z:
        raise ConfigError("initial table has no rows", table_path)
    return InitialCondition(table_z=tuple(z), table_h=tuple(h), table_T=tuple(T))


def _format_suffix(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def expand(entries, layers, sweeps, path, base_dir) -> list[ScenarioConfig]:
    """All scenarios of the cross product of sweep axes, in declaration order."""
    values, lines = _resolve(entries, path)
    if not sweeps:
        return [_scenario_from(values, lines, layers, path, base_dir)]
    out = []
    base_name = values["scenario.name"]
    for combo in itertools.product(*(s[1] for s in sweeps)):
        vals, lns = dict(values), copy.copy(lines)
        lyrs = [dict(layer) for layer in layers]
        suffix = []
        for (target, _, line), value in zip(sweeps, combo):
            m = re.match(r"^layer\.(\d+)\.(\w+)$", target)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= len(lyrs):
                    raise ConfigError(f"sweep refers to layer {index}, only {len(lyrs)} defined", path, line)
                lyrs[index - 1][m.group(2)] = (value, line)
            else:
                kind = SCHEMA[target][0]
                vals[target] = _coerce(target, value, kind, path, line)
                lns[target] = line
            suffix.append(f"{target.rsplit('.', 1)[-1]}-{_format_suffix(value)}")
        vals["scenario.name"] = "__".join([base_name] + suffix)
        out.append(_scenario_from(vals, lns, lyrs, path, base_dir))
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ConfigError("sweep produces duplicate scenario names", path)
    return out


def parse_config_text(text: str, path="<config>", base_dir: Path | None = None, load_forcing_file: bool = True):
    base_dir = Path(base_dir) if base_dir is not None else (Path(path).parent if path != "<config>" else Path("."))
    entries, layers, sweeps = read_entries(text, path)
    scenarios = expand(entries, layers, sweeps, path, base_dir)
    values, lines = _resolve(entries, path)
    options = OutputOptions(
        snapshot_interval=values["run.snapshot_interval_s"],
        plots=values["run.plots"],
        workers=values["run.workers"],
    )
    if not options.snapshot_interval >= 0.0:
        raise ConfigError("run.snapshot_interval_s must be >= 0", path, lines["run.snapshot_interval_s"])
    if options.workers < 1:
        raise ConfigError("run.workers must be >= 1", path, lines["run.workers"])
    forcing_path = (base_dir / values["run.forcing"]).resolve()
    forcing = load_forcing(forcing_path) if load_forcing_file else None
    return ConfigBundle(scenarios, forcing, options, forcing_path, entries, layers, sweeps)


def parse_config(path) -> ConfigBundle:
    """Read, validate and expand a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", path) from exc
    return parse_config_text(text, path, path.parent)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Path):
        return f'"{value}"'
    if isinstance(value, str):
        return value if _IDENT.match(value) else f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def dump_config(bundle: ConfigBundle) -> str:
    """Normalized text of a parsed configuration: every key explicit, paths absolute."""
    values, _ = _resolve(bundle.entries, "<dump>")
    values["run.forcing"] = bundle.forcing_path
    table = values["initial.table"]
    if table and not Path(table).is_absolute():
        values["initial.table"] = str((bundle.forcing_path.parent / table).resolve())
    out = []
    for section in [s for s in SECTIONS if s not in ("layer", "ensemble")]:
        out.append(f"[{section}]")
        for key, value in values.items():
            if key.split(".")[0] == section:
                if key == "initial.table" and not value:
                    continue
                out.append(f"{key[len(section) + 1:]} = {_fmt(value)}")
        out.append("")
    for layer in bundle.layers:
        out.append("[layer]")
        for key, (kind, default) in LAYER_SCHEMA.items():
            value = layer[key][0] if key in layer else default
            out.append(f"{key} = {_fmt(float(value))}")
        out.append("")
    if bundle.sweeps:
        out.append("[ensemble]")
        for target, vals, _ in bundle.sweeps:
            out.append(f"sweep.{target} = {_fmt(list(vals))}")
        out.append("")
    return "\n".join(out)
