import pytest

from malcall.call_log import CallLog
from malcall.synthgen import GeneratorConfig, generate_log

SMALL = dict(n_malicious=1, n_touchpal_users=100, n_benign_others=500)


def small_log(seed=0, n_records=None, **overrides):
    log, labels = generate_log(GeneratorConfig(seed=seed, **{**SMALL, **overrides}))
    if n_records is not None:
        log = CallLog(log.records[:n_records], log.meta)
    return log, labels


@pytest.fixture(scope="session")
def log_and_labels():
    return small_log(seed=0)


@pytest.fixture(scope="session")
def mini_log_and_labels():
    """A few thousand records: cheap enough for per-record rescans."""
    return small_log(seed=3, n_records=3000)


@pytest.fixture(scope="session")
def default_benchmark():
    """The default 30-day synthetic log, streamed once per test session."""
    from malcall.experiments import ExperimentSpec, load_benchmark

    return load_benchmark(ExperimentSpec())


ACCEPTANCE: dict[str, str] = {}


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[name] = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(ACCEPTANCE[name])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE.values():
            terminalreporter.write_line(line)
