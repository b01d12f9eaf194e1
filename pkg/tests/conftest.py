from hypothesis import settings

# Fixed example generation keeps the suite reproducible run to run.
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

# Filled by test_acceptance.py: (criterion number, title, passed, detail).
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num}. {title}: {detail}")
