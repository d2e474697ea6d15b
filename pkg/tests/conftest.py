"""Collects one verdict line per acceptance criterion and prints them at the end of the run."""

import pytest

_VERDICTS: dict[str, tuple[bool, str]] = {}


class Verdicts:
    def record(self, key: str, passed: bool, detail: str) -> bool:
        _VERDICTS[key] = (bool(passed), detail)
        print(f"{key}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)


@pytest.fixture(scope="session")
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=lambda k: int(k.split()[1])):
        passed, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")
