import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per tagged acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or getattr(rep, "when", "call") != "call":
                continue
            number, title = props["criterion"]
            verdict = "PASS" if outcome == "passed" else "FAIL"
            detail = f" [{props['detail']}]" if "detail" in props else ""
            lines.append((number, f"{verdict} criterion {number}: {title}{detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
