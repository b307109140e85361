import pytest

from headturn.renderer import RenderConfig

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Print and remember one pass/fail line for the acceptance summary."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return RenderConfig()


@pytest.fixture(scope="session")
def small_cfg():
    return RenderConfig(resolution=32)
