"""The verification battery and the chain-length scaling study."""

import numpy as np
import pytest

from tmep.checks import (
    CheckReport,
    DEFAULT_SEED,
    MIN_CESARO_RATE,
    atomwise_residual,
    battery,
    check_dephasing_invariance,
    check_kms,
    check_mean_entropy,
    check_modular_identities,
    check_product_state_theorem,
    check_route_equivalence,
    check_strip_symmetry,
    check_transpose_relation,
    scaling_study,
    threshold_for,
)
from tmep.linalg import DensityMatrix
from tmep.measures import AtomicMeasure
from tmep.models import SystemModel, canonical_open_system, canonical_two_level

CLOSED_CHECKS = [
    "mean_entropy",
    "strip_symmetry",
    "transpose_relation",
    "dephasing_invariance",
    "modular_identities",
    "route_equivalence",
    "kms",
]
OPEN_CHECKS = CLOSED_CHECKS + ["product_state", "entropy_decomposition"]


def test_threshold_steps_at_512():
    assert threshold_for(2) == 1e-9
    assert threshold_for(512) == 1e-9
    assert threshold_for(513) == 1e-7
    assert threshold_for(2048) == 1e-7


def test_atomwise_residual_hand_cases():
    p = AtomicMeasure.from_atoms([0.0, 1.0], [0.5, 0.5])
    q = AtomicMeasure.from_atoms([0.0, 1.0], [0.5 + 1e-6, 0.5 - 1e-6])
    assert atomwise_residual(p, q) == pytest.approx(1e-6, rel=1e-6)
    # an unmatched atom counts at its own weight
    r = AtomicMeasure.from_atoms([0.0, 5.0], [0.9, 0.1])
    assert atomwise_residual(p, r) == pytest.approx(0.5, abs=1e-12)
    # unless it sits below the stray-atom floor
    s = AtomicMeasure.from_atoms([0.0, 1.0, 9.0], [0.5, 0.5 - 1e-30, 1e-30])
    assert atomwise_residual(p, s, weight_floor=1e-12) < 1e-12


def test_battery_two_level_all_pass():
    model = canonical_two_level()
    reports = battery(model, times=(np.pi / 2,))
    assert [r.check for r in reports] == CLOSED_CHECKS
    for r in reports:
        assert r.passed, (r.check, r.residual_max)
        assert r.fingerprint == model.fingerprint
        assert r.threshold == 1e-9
        assert r.seconds >= 0.0


def test_battery_open_system_all_pass():
    model = canonical_open_system(1)
    reports = battery(model, times=(1.0,))
    assert [r.check for r in reports] == OPEN_CHECKS
    for r in reports:
        assert r.passed, (r.check, r.residual_max)


def test_battery_parallel_matches_serial():
    model = canonical_two_level()
    serial = battery(model, times=(np.pi / 2,))
    parallel = battery(model, times=(np.pi / 2,), jobs=4)
    assert [r.check for r in serial] == [r.check for r in parallel]
    for a, b in zip(serial, parallel):
        assert a.residual_max == b.residual_max
        assert a.params.keys() == b.params.keys()


def test_battery_converts_numeric_error_to_failing_report():
    # a rank-deficient reference breaks every check that needs log(omega);
    # the battery must keep going and report the failure
    bad = SystemModel(
        hamiltonian=canonical_two_level().hamiltonian,
        reference=DensityMatrix(np.diag([1.0, 0.0])),
        fingerprint="deadbeefdeadbeef",
        params={"kind": "broken"},
    )
    reports = battery(bad, times=(0.5,))
    assert [r.check for r in reports] == CLOSED_CHECKS
    failed = [r for r in reports if not r.passed]
    assert failed
    assert any("error" in r.params for r in failed)
    assert all(np.isinf(r.residual_max) for r in failed if "error" in r.params)


def test_report_dict_schema():
    model = canonical_two_level()
    report = check_mean_entropy(model, (np.pi / 2,))
    d = report.to_dict()
    assert list(d) == [
        "check",
        "fingerprint",
        "params",
        "residual_max",
        "threshold",
        "verdict",
        "seconds",
    ]
    assert d["verdict"] == "pass"
    assert isinstance(report, CheckReport)


def test_mean_entropy_hand_value():
    model = canonical_two_level()
    report = check_mean_entropy(model, (np.pi / 2,))
    assert report.passed
    # the underlying first moment is (1/2) log 3; store it in the params
    assert report.params["means"][0] == pytest.approx(0.5 * np.log(3.0), abs=1e-12)


def test_strip_and_transpose_checks():
    model = canonical_two_level()
    assert check_strip_symmetry(model, (np.pi / 2,)).residual_max < 1e-10
    assert check_transpose_relation(model, (np.pi / 2,)).residual_max < 1e-10


def test_dephasing_invariance_reports_rate():
    model = canonical_two_level()
    report = check_dephasing_invariance(model, (np.pi / 2,), seed=DEFAULT_SEED)
    assert report.passed
    assert report.params["cesaro"]["rate"] >= MIN_CESARO_RATE
    assert report.params["samples"] == 10


def test_route_equivalence_fixture():
    report = check_route_equivalence(canonical_two_level(), (np.pi / 2,))
    assert report.residual_max < 1e-10


def test_kms_check_reproducible():
    model = canonical_open_system(1)
    a = check_kms(model, seed=123)
    b = check_kms(model, seed=123)
    assert a.residual_max == b.residual_max
    assert a.passed


def test_product_state_ratio_bounds():
    model = canonical_open_system(1)
    report = check_product_state_theorem(model, (1.0,))
    assert report.passed
    lo, hi = report.params["ratio_range"]
    assert 0.2 - 1e-9 <= lo <= hi <= 2.0 + 1e-9


def test_modular_identities_canonical():
    for model in (canonical_two_level(), canonical_open_system(1)):
        report = check_modular_identities(model, (1.0,))
        assert report.passed, report.residual_max


def test_scaling_study_single_length():
    study = scaling_study(chain_lengths=(1,))
    assert study.passed
    assert study.table() == [(1, study.rows[0].w1)]
    row = study.rows[0]
    assert row.dim == 8
    assert row.w1 > 0.0
    assert [r.check for r in row.reports] == ["scaling_dephasing", "scaling_routes"]
    assert study.params["beta_prime"] == 0.5


def test_scaling_study_identity_perturbation_is_null():
    # beta' equal to the reservoir temperature reproduces the product state
    study = scaling_study(chain_lengths=(1,), beta_prime=1.0)
    assert study.rows[0].w1 == pytest.approx(0.0, abs=1e-12)
