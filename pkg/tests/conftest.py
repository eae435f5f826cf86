VERDICTS = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        VERDICTS.extend(l for l in report.capstdout.splitlines() if l.startswith("criterion "))


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
