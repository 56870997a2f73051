import math

import pytest

from cmcflow import verify as vfy


def test_registry_names_are_grouped():
    groups = {name.split(".")[0] for name in vfy.REGISTRY}
    assert groups == {"phase", "integrator", "surface", "field"}
    assert all(c.threshold > 0 for c in vfy.REGISTRY.values())


def test_select():
    assert vfy.select() == list(vfy.REGISTRY.values())
    heli = vfy.select("helicoidal")
    assert heli and all("helicoidal" in c.name for c in heli)
    assert vfy.select("no-such-check") == []


def test_duplicate_name_rejected():
    with pytest.raises(ValueError):
        vfy.check("phase.equilibria", 1.0, "again")(lambda rng: 0.0)


def test_passed_property():
    assert vfy.CheckResult("a", 0.5, 1.0, 0.0).passed
    assert not vfy.CheckResult("a", 1.0, 1.0, 0.0).passed
    assert not vfy.CheckResult("a", math.nan, 1.0, 0.0).passed
    assert not vfy.CheckResult("a", 0.0, 0.0, 0.0).passed


def test_zero_tol_fails_everything():
    results = vfy.run_checks("phase.", tol=0.0)
    assert results and not any(r.passed for r in results)


def test_filtered_values_match_full_seeding():
    a = vfy.run_checks("phase.energy_flux", seed=5)[0].value
    b = vfy.run_checks("phase.energy_flux", seed=5)[0].value
    assert a == b


def test_table():
    results = vfy.run_checks("phase.equilibri")
    text = vfy.format_table(results)
    lines = text.splitlines()
    assert lines[0].startswith("check")
    assert lines[-1] == f"{len(results)}/{len(results)} checks passed"
    assert all(line.rstrip().endswith("PASS") for line in lines[1:-1])


def test_full_suite_passes():
    failed = [r for r in vfy.run_checks() if not r.passed]
    assert not failed, vfy.format_table(failed)
