from __future__ import annotations

import pytest

_ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def record():
    """Record one acceptance outcome: ``record("3", ok, "detail")``."""

    def _record(criterion: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
        print(f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} | {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        parts = _ACCEPTANCE[key]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"CRITERION {key}: {'PASS' if ok else 'FAIL'} | {detail}")
