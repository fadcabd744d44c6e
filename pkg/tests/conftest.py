CRITERIA = range(1, 11)


def pytest_configure(config):
    config.acceptance = {}


def pytest_terminal_summary(terminalreporter, config):
    results = config.acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in CRITERIA:
        ok, detail = results.get(n, (False, "not evaluated"))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} C{n}: {detail}")
