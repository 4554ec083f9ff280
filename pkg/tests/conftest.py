import contextlib

RESULTS: dict[int, tuple[str, str, str]] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS or FAIL for an acceptance criterion; failures still raise."""
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        RESULTS[number] = ("FAIL", title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    RESULTS[number] = ("PASS", title, "; ".join(notes))


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        verdict, title, detail = RESULTS[n]
        line = f"criterion {n:2d} {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
