import pytest

_ACCEPTANCE: dict[int, str] = {}


class _Reporter:
    def __call__(self, number: int, ok: bool, detail: str) -> None:
        line = f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)


@pytest.fixture(scope="session")
def report():
    return _Reporter()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
