import time

import pytest

ACCEPTANCE = []


class Recorder:
    def __init__(self):
        self.lines = []
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def __call__(self, number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        self.lines.append(f"criterion {number:>2} {status}  {title}  [{detail}] "
                          f"({self.elapsed:.1f}s)")
        return passed


@pytest.fixture
def criterion(request):
    rec = Recorder()
    yield rec
    if not rec.lines:
        rec.lines.append(f"criterion ?? FAIL  {request.node.name}  [raised before reporting]")
    ACCEPTANCE.extend(rec.lines)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
