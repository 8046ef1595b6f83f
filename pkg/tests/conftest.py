import pytest

_ACCEPTANCE: dict[str, dict] = {}


class AcceptanceLog:
    """Collects sub-results per acceptance criterion for the terminal summary."""

    def record(self, criterion: str, title: str, part: str, ok: bool, detail: str = "") -> bool:
        entry = _ACCEPTANCE.setdefault(criterion, {"title": title, "parts": []})
        entry["parts"].append((part, bool(ok), detail))
        return bool(ok)


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def _sort_key(name: str):
    digits = "".join(ch for ch in name if ch.isdigit())
    return (int(digits) if digits else 0, name)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=_sort_key):
        entry = _ACCEPTANCE[name]
        status = "PASS" if all(ok for _, ok, _ in entry["parts"]) else "FAIL"
        tr.write_line(f"[{status}] {name}: {entry['title']}")
        for part, ok, detail in entry["parts"]:
            mark = "ok  " if ok else "FAIL"
            tr.write_line(f"       {mark} {part}" + (f" ({detail})" if detail else ""))
