import re
from collections import defaultdict

import pytest

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record a named acceptance check, print its PASS/FAIL line and assert it."""
    store = request.config.stash[_VERDICTS]

    def record(label: str, ok: bool, detail: str = ""):
        ok = bool(ok)
        store[label] = (ok, detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}")
        assert ok, f"criterion {label}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_VERDICTS, {})
    if not store:
        return
    grouped = defaultdict(list)
    for label, (ok, detail) in store.items():
        grouped[int(re.match(r"\d+", label).group())].append((label, ok, detail))
    terminalreporter.section("acceptance criteria")
    for number in sorted(grouped):
        parts = sorted(grouped[number])
        failed = [label for label, ok, _ in parts if not ok]
        status = "PASS" if not failed else "FAIL"
        note = f" (failing parts: {', '.join(failed)}; see decisions ledger)" if failed else ""
        terminalreporter.write_line(f"{status} criterion {number}{note}")
        for label, ok, detail in parts:
            terminalreporter.write_line(f"    {'pass' if ok else 'fail'} {label}: {detail}")
