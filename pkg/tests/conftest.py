import pytest

from syndec.code import load_code_config

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Remember one acceptance verdict; printed at the end of the session."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def ex1():
    return load_code_config("example1").trellis()


@pytest.fixture(scope="session")
def ex1_cfg():
    return load_code_config("example1")


@pytest.fixture(scope="session")
def cc2():
    return load_code_config("cc2").trellis()
