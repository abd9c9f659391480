"""Experiment configuration: YAML (or JSON) files validated against ``config_schema.json``.

A user file may set any subset of keys; the rest come from
``presets/defaults.yaml``.  Named presets live next to it and are layered
the same way.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigInvalid, UnderResolved

PRESETS = ("defaults", "quick", "matched-twins", "traceless-twin", "conformal-twin")


def _read_text(name):
    return resources.files("minsurf").joinpath(name).read_text()


def schema():
    return json.loads(_read_text("config_schema.json"))


def _parse(text, origin):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigInvalid(f"{origin}: not valid YAML/JSON: {err}") from err
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigInvalid(f"{origin}: top level must be a mapping")
    return doc


def _validate(doc, origin):
    v = jsonschema.Draft202012Validator(schema())
    errs = sorted(v.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        e = errs[0]
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ConfigInvalid(f"{origin}: {where}: {e.message}")


def merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset(name):
    if name not in PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return _parse(_read_text(f"presets/{name}.yaml"), f"preset {name}")


def load(source=None, seed=None):
    """Resolved configuration from a preset name, a file path, or ``None`` (defaults)."""
    base = preset("defaults")
    if source is None or source == "defaults":
        doc, origin = {}, "defaults"
    elif source in PRESETS:
        doc, origin = preset(source), f"preset {source}"
    else:
        p = Path(source)
        if not p.is_file():
            raise ConfigInvalid(f"config file {source!r} not found (and not a preset: {', '.join(PRESETS)})")
        doc, origin = _parse(p.read_text(), str(p)), str(p)
    _validate(doc, origin)
    cfg = merge(base, doc)
    if seed is not None:
        cfg["seed"] = seed
    _validate(cfg, origin)
    check(cfg)
    return cfg


def check(cfg):
    """Semantic checks beyond the schema, all cheap; run before any output is written."""
    sc = cfg["forward"]["scherk"]
    if sc["kappa"] * sc["half_width"] >= 1.4:
        raise ConfigInvalid("forward.scherk: kappa * half_width must stay below 1.4 (cos(kappa x) > 0)")
    for key, res in (("forward.scherk.resolutions", sc["resolutions"]),
                     ("identities.resolutions", cfg["identities"]["resolutions"])):
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ConfigInvalid(f"{key} must increase")
    r = cfg["recover"]
    half = r["half_width"]
    margin = 0.2 * 2 * half * 2 ** 0.5
    for p in r["probes"]:
        dist = half - max(abs(p[0]), abs(p[1]))
        if dist < margin:
            raise ConfigInvalid(f"recover.probes: {p} is {dist:.3g} from the boundary (< 0.2 diam = {margin:.3g})")
    twins = [t if isinstance(t, str) else t["kind"] for t in r["twins"]]
    if len(set(twins)) != len(twins):
        raise ConfigInvalid("recover.twins: each twin kind at most once")
    # oscillation / dynamic-range guard for the smallest h of every sweep
    from .criteria import check_recover_resolution

    try:
        check_recover_resolution(cfg)
    except UnderResolved as err:
        raise ConfigInvalid(f"recover: grid n = {r['n']} does not resolve the h-sweep: {err}") from err


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return "sha256:" + hashlib.sha256(canonical(cfg).encode()).hexdigest()
