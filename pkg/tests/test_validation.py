import pytest

from qcycle.cli import main
from qcycle.validation import MODULES, REGISTRY


def test_registry_covers_every_module():
    for module in MODULES:
        assert sum(p.module == module for p in REGISTRY) >= 1
    names = [p.name for p in REGISTRY]
    assert len(names) == len(set(names))


@pytest.mark.slow
def test_validate_quick_exits_zero(capsys):
    assert main(["validate", "--quick"]) == 0
    report = capsys.readouterr().out
    assert "FAIL" not in report
    assert report.count("PASS") == len(REGISTRY)
    for module in MODULES:
        assert f"[{module}]" in report
