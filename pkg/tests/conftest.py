ACCEPTANCE = {}


def record(number, title, ok, detail=""):
    """Register one acceptance line; printed at the end of the session."""
    ACCEPTANCE[number] = (title, bool(ok), detail)
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}" + (f": {detail}" if detail else "")
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}" + (f": {detail}" if detail else "")
        terminalreporter.write_line(line)
