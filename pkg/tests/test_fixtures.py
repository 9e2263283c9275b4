import pytest

from drmdp.fixtures import FIXTURES, fixture_names, fixture_text, load_fixture, run_golden
from drmdp.instance_file import dumps


def test_seven_bundled_examples():
    assert fixture_names() == ["ex_2_1", "ex_2_2", "ex_2_3", "fig_2_sr", "avar_demo", "soc_demo", "cost_interval"]


@pytest.mark.parametrize("name", fixture_names())
def test_bundled_json_matches_builder(name):
    built = FIXTURES[name].build()
    assert load_fixture(name) == built
    assert fixture_text(name) == dumps(built)


@pytest.mark.parametrize("name", fixture_names())
def test_golden_checks(name):
    checks = run_golden(name)
    assert checks
    failed = [(label, detail) for label, ok, detail in checks if not ok]
    assert not failed


def test_unknown_fixture():
    with pytest.raises(KeyError):
        fixture_text("nope")
