"""Acceptance criteria 1-12 at their stated tolerances, on the default configuration.

Slow: the full suite takes on the order of fifteen minutes on one core.
"""
import filecmp
import subprocess
import sys

import pytest

from minsurf import config
from minsurf import criteria as C

pytestmark = pytest.mark.slow

CFG = config.load("defaults")
SEED = CFG["seed"]


def check(record_property, res):
    record_property("criterion", res.id)
    record_property("detail", f"{res.name}: value={res.value!r} threshold={res.threshold}")
    assert res.passed, f"{res.name}: {res.value!r} vs {res.threshold}; {res.detail}"


@pytest.fixture(scope="module")
def reports():
    return C.run_recovery(CFG)


def test_criterion_01_scherk_convergence(record_property):
    check(record_property, C.criterion_1(CFG))


def test_criterion_02_zero_and_affine(record_property):
    check(record_property, C.criterion_2(CFG))


def test_criterion_03_area_dn_duality(record_property):
    check(record_property, C.criterion_3(CFG, SEED))


def test_criterion_04_pde_vs_fd_linearization(record_property):
    check(record_property, C.criterion_4(CFG))


def test_criterion_05_identity_residuals(record_property):
    check(record_property, C.criterion_5(CFG))


def test_criterion_06_cgo_construction(record_property):
    check(record_property, C.criterion_6(CFG))


def test_criterion_07_calculus_suite(record_property):
    check(record_property, C.criterion_7(CFG))


def test_criterion_08_stationary_phase(record_property):
    check(record_property, C.criterion_8(CFG))


def test_criterion_09_matched_twins(record_property, reports):
    check(record_property, C.criterion_9(reports))


def test_criterion_10_traceless_and_conformal(record_property, reports):
    check(record_property, C.criterion_10(reports))


def test_criterion_11_trace_algebra(record_property):
    check(record_property, C.criterion_11(CFG, SEED))


def test_criterion_12_repeat_runs_byte_identical(record_property, tmp_path):
    record_property("criterion", 12)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        res = subprocess.run([sys.executable, "-m", "minsurf", "all", "quick", "--out", str(out)],
                             capture_output=True, text=True)
        assert res.returncode in (0, 1), res.stderr
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    other = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    assert files == other and len(files) > 10
    _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], [str(f) for f in files], shallow=False)
    record_property("detail", f"{len(files)} artifacts compared, {len(mismatch)} differ")
    assert not mismatch and not errors, mismatch
