from collections import OrderedDict

import pytest

# criterion label -> list of (passed, detail); filled by the acceptance suite
_ACCEPTANCE = OrderedDict()


class Recorder:
    def __init__(self, store):
        self.store = store

    def __call__(self, label: str, passed: bool, detail: str):
        self.store.setdefault(label, []).append((bool(passed), detail))
        return passed


@pytest.fixture(scope="session")
def acceptance():
    return Recorder(_ACCEPTANCE)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, entries in _ACCEPTANCE.items():
        ok = all(p for p, _ in entries)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}")
        for p, detail in entries:
            tr.write_line(f"       {'ok ' if p else 'BAD'} {detail}")
