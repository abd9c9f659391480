"""Command-line runner: ``minsurf <stage> [preset] [--config FILE] [--out DIR] ...``.

Stages write CSV tables and JSON documents under ``--out`` plus a
``manifest.json`` that records the config hash, the grids, every criterion
verdict and the error record, if any.  Exit status: 0 all evaluated criteria
pass, 1 a criterion failed, 2 usage or configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, config_hash, load
from .errors import ConfigInvalid, MinsurfError

STAGES = ("forward", "linearize", "identities", "cgo", "recover", "all")
STAGE_CRITERIA = {"forward": (1, 2, 3), "linearize": (4,), "identities": (5,), "cgo": (6, 7, 8),
                  "recover": (9, 10, 11)}
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("minsurf")


# --------------------------------------------------------------------------
# Deterministic writers
# --------------------------------------------------------------------------


def _plain(x):
    """JSON/CSV-safe scalar: numpy types to Python, complex to [re, im]."""
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and x != x:
        return None
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return _plain(obj)


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _cell(v):
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(_cell(u) for u in v)
    return str(v)


def to_csv(rows):
    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


class Artifacts:
    """Collects files and writes them under the output directory."""

    def __init__(self, out: Path):
        self.out = out
        self.written = {}

    def put(self, rel, text):
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.written[rel] = "sha256:" + hashlib.sha256(text.encode()).hexdigest()

    def table(self, stem, rows):
        self.put(f"{stem}.csv", to_csv(rows))

    def document(self, stem, text):
        self.put(f"{stem}.json", text if text.endswith("\n") else text + "\n")


# --------------------------------------------------------------------------
# Stage execution
# --------------------------------------------------------------------------


def _error_record(err, stage):
    code = getattr(err, "code", "InternalError")
    return {"stage": stage, "type": type(err).__name__, "code": code, "message": str(err)}


def _grids(cfg, stages):
    g = {}
    if "forward" in stages:
        f = cfg["forward"]
        g["forward"] = {"scherk": f["scherk"]["resolutions"], "duality": [f["duality"]["n"], f["duality"]["dn_n"]],
                        "samples": f["samples"]["n"], "extent": [-1.0, 1.0]}
    if "linearize" in stages:
        g["linearize"] = {"n": cfg["linearize"]["n"], "extent": [-1.0, 1.0]}
    if "identities" in stages:
        g["identities"] = {"resolutions": cfg["identities"]["resolutions"], "extent": [-1.0, 1.0]}
    if "cgo" in stages:
        c = cfg["cgo"]
        g["cgo"] = {"h_exponents": sorted(set(c["sweep_exponents"] + c["suite_exponents"] + c["second_exponents"]
                                              + c["third_exponents"])),
                    "oversample": c["oversample"], "patch_half_width": 0.4}
    if "recover" in stages:
        r = cfg["recover"]
        g["recover"] = {"n": r["n"], "extent": [-r["half_width"], r["half_width"]],
                        "inv_hs_second": r["inv_hs_second"], "inv_hs_third": r["inv_hs_third"]}
    return g


def _guarded(fn, *args):
    """Runs ``fn`` collecting Python warnings as sorted unique strings."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fn(*args)
    msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    if msgs:
        res.warnings = list(res.warnings) + msgs
    return res


def run_stage(stage, cfg, art: Artifacts, strict=False):
    """Runs one stage; returns (criterion summaries, error records)."""
    from . import criteria as C

    seed = cfg["seed"]
    summaries, errors = [], []

    def record(res):
        for stem, rows in res.tables.items():
            art.table(stem, rows)
        for stem, text in res.documents.items():
            art.document(stem, text)
        s = res.summary()
        if strict and res.warnings and s["status"] == "PASS":
            s["status"] = "FAIL"
            s["detail"] = {**s["detail"], "strict": "warnings promoted to failure"}
        summaries.append(s)
        log.info("criterion %d %s: %s", res.id, res.name, s["status"])

    def attempt(cid, fn, *args):
        try:
            record(_guarded(fn, *args))
        except ConfigInvalid:
            raise
        except Exception as err:  # noqa: BLE001 - every failure becomes a structured record
            rec = _error_record(err, stage)
            rec["criterion"] = cid
            errors.append(rec)
            summaries.append({"id": cid, "name": C.CRITERIA_NAMES[cid], "status": "ERROR", "value": None,
                              "threshold": None, "detail": {"error": rec}, "warnings": []})
            log.error("criterion %d: %s", cid, rec["message"])
            if not isinstance(err, MinsurfError):
                traceback.print_exc(file=sys.stderr)

    if stage == "forward":
        attempt(1, C.criterion_1, cfg)
        attempt(2, C.criterion_2, cfg)
        attempt(3, C.criterion_3, cfg, seed)
        try:
            for stem, rows in C.forward_samples(cfg).items():
                art.table(stem, rows)
        except Exception as err:  # noqa: BLE001
            errors.append(_error_record(err, stage))
    elif stage == "linearize":
        attempt(4, C.criterion_4, cfg)
    elif stage == "identities":
        attempt(5, C.criterion_5, cfg)
    elif stage == "cgo":
        attempt(6, C.criterion_6, cfg)
        attempt(7, C.criterion_7, cfg)
        attempt(8, C.criterion_8, cfg)
    elif stage == "recover":
        kinds = [t if isinstance(t, str) else t["kind"] for t in cfg["recover"]["twins"]]
        reports = None
        try:
            reports = C.run_recovery(cfg)
        except ConfigInvalid:
            raise
        except Exception as err:  # noqa: BLE001
            rec = _error_record(err, stage)
            errors.append(rec)
            for cid in (9, 10):
                if (cid == 9 and "matched" in kinds) or (cid == 10 and {"traceless", "conformal"} & set(kinds)):
                    summaries.append({"id": cid, "name": C.CRITERIA_NAMES[cid], "status": "ERROR", "value": None,
                                      "threshold": None, "detail": {"error": rec}, "warnings": []})
            if not isinstance(err, MinsurfError):
                traceback.print_exc(file=sys.stderr)
        if reports is not None:
            tables, docs = C._recovery_tables(reports)
            for stem, rows in tables.items():
                art.table(stem, rows)
            for stem, text in docs.items():
                art.document(stem, text)
            if "matched" in reports:
                attempt(9, C.criterion_9, reports)
            if {"traceless", "conformal"} & set(reports):
                attempt(10, C.criterion_10, reports)
        attempt(11, C.criterion_11, cfg, seed)
    return summaries, errors


def execute(stage, cfg, out: Path, threads=1, strict=False, preset=None, source=None):
    """Runs a stage (or all) and writes artifacts plus the manifest; returns the exit status."""
    from .criteria import CRITERIA_NAMES

    art = Artifacts(out)
    stages = [s for s in STAGES if s != "all"] if stage == "all" else [stage]
    summaries, errors = [], []
    for s in stages:
        log.info("stage %s", s)
        sm, er = run_stage(s, cfg, art, strict)
        summaries += sm
        errors += er
    if stage == "all":
        summaries.append({"id": 12, "name": CRITERIA_NAMES[12], "status": "NOT_EVALUATED", "value": None,
                          "threshold": "byte-identical artifacts across repeated runs",
                          "detail": {"how": "compare the artifact sha256 table of two manifests"},
                          "warnings": []})
    summaries.sort(key=lambda s: s["id"])
    art.table("criteria", [{k: v for k, v in s.items() if k not in ("detail", "warnings")} for s in summaries])
    statuses = [s["status"] for s in summaries]
    if errors:
        code, status = EXIT_NUMERICAL, "numerical-error"
    elif any(s == "FAIL" for s in statuses):
        code, status = EXIT_FAIL, "criteria-failure"
    else:
        code, status = EXIT_PASS, "pass"
    manifest = {
        "tool": "minsurf", "version": __version__, "subcommand": stage, "preset": preset, "config_source": source,
        "config_hash": config_hash(cfg), "config": cfg, "seed": cfg["seed"], "threads": threads, "strict": strict,
        "grid": _grids(cfg, stages), "criteria": summaries, "artifacts": dict(sorted(art.written.items())),
        "status": status, "exit_code": code, "errors": errors,
    }
    (out / "manifest.json").write_text(dumps(manifest))
    for s in summaries:
        print(f"criterion {s['id']:>2} {s['status']:<13} {s['name']}")
    print(f"{status} (exit {code}); manifest: {out / 'manifest.json'}")
    return code


def _config_failure(out: Path, stage, err, preset, source):
    rec = _error_record(err, "config")
    print(f"configuration error: {err}", file=sys.stderr)
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest = {"tool": "minsurf", "version": __version__, "subcommand": stage, "preset": preset,
                    "config_source": source, "config_hash": None, "criteria": [], "artifacts": {},
                    "status": "config-error", "exit_code": EXIT_USAGE, "errors": [rec]}
        (out / "manifest.json").write_text(dumps(manifest))
    except OSError as exc:
        print(f"could not write manifest: {exc}", file=sys.stderr)
    return EXIT_USAGE


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from err
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_common(common):
    common.add_argument("preset", nargs="?", choices=PRESETS, help="named configuration (default: defaults)")
    common.add_argument("--config", help="YAML/JSON config file or preset name")
    common.add_argument("--out", default="minsurf-out", help="output directory (default: %(default)s)")
    common.add_argument("--threads", type=_positive, default=1, help="BLAS/FFT threads (default: 1)")
    common.add_argument("--seed", type=_u64, help="override the config seed (u64)")
    common.add_argument("--strict", action="store_true", help="promote warnings to criterion failures")
    common.add_argument("-v", "--verbose", action="store_true", help="progress log on stderr")


def build_parser():
    p = argparse.ArgumentParser(prog="minsurf", description="Minimal-surface inverse problem laboratory.")
    p.add_argument("--version", action="version", version=f"minsurf {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for s in STAGES:
        _add_common(sub.add_parser(s, help=f"run the {s} stage" if s != "all" else "run every stage"))
    run = sub.add_parser("run", help="alias: run <stage> [preset]")
    run.add_argument("stage", choices=STAGES)
    _add_common(run)
    return p


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    stage = args.stage if args.command == "run" else args.command
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    _set_threads(args.threads)
    out = Path(args.out)
    if args.preset and args.config:
        return _config_failure(out, stage, ConfigInvalid("give either a preset or --config, not both"),
                               args.preset, args.config)
    source = args.config or args.preset or "defaults"
    preset = source if source in PRESETS else None
    try:
        cfg = load(source, seed=args.seed)
    except ConfigInvalid as err:
        return _config_failure(out, stage, err, preset, source)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return execute(stage, cfg, out, args.threads, args.strict, preset, source)
    except ConfigInvalid as err:
        return _config_failure(out, stage, err, preset, source)


if __name__ == "__main__":
    sys.exit(main())
