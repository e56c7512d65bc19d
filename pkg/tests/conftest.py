import pytest

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def verdicts(request):
    """Collects one summary line per acceptance criterion."""
    return request.config.stash.setdefault(_VERDICTS, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
