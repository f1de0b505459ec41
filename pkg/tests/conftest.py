import re

import pytest

_DETAILS: dict[str, list[str]] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)")


@pytest.fixture
def record(request):
    """Attach a human-readable measurement to the current acceptance criterion."""
    lines = _DETAILS.setdefault(request.node.nodeid, [])
    return lines.append


def pytest_terminal_summary(terminalreporter):
    per_criterion: dict[int, list] = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            m = _CRITERION.search(rep.nodeid)
            if m:
                per_criterion.setdefault(int(m.group(1)), []).append((rep.nodeid, outcome))
    if not per_criterion:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(per_criterion):
        results = per_criterion[k]
        ok = all(o == "passed" for _, o in results)
        details = "; ".join(d for nodeid, _ in results for d in _DETAILS.get(nodeid, []))
        terminalreporter.write_line(
            f"criterion {k}: {'PASS' if ok else 'FAIL'} ({len(results)} checks)"
            + (f"  {details}" if details else ""))
