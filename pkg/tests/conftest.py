import time

import pytest

from nilmchaos import pipeline

ACCEPTANCE_LINES = []


def record(number, title, ok, detail=""):
    """Log one acceptance criterion outcome, then fail the test if it did not hold."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """One full simulate -> train -> eval run with the default configuration."""
    out = tmp_path_factory.mktemp("default_run")
    cfg = pipeline.default_config()
    cfg = type(cfg)(cfg.network, cfg.dataset, cfg.regression, cfg.paths.resolved(out))
    start = time.perf_counter()
    report = pipeline.run_all(cfg, quiet=True)
    elapsed = time.perf_counter() - start
    return {"cfg": cfg, "report": report, "elapsed": elapsed, "dir": out,
            "series": pipeline.read_dataset(cfg.paths.dataset_csv)}
