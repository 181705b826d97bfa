def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        v = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if v.ok else 'FAIL'}  {v.detail}")
