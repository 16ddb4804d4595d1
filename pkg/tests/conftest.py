import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lorenz_models():
    """Small encoder/decoder pair on a standardized Lorenz-63 trajectory."""
    from lisa import spectral
    from lisa.dynsys import TrajectoryConfig, integrate, make_system
    from lisa.gplm import build_pairs, default_latent_kernel, fit_decoder
    from lisa.hankel import delay_windows

    ts = integrate(make_system("Lorenz63"), TrajectoryConfig(0.01, 6000, burn_in=500, seed=3))
    x = ts.values
    x = (x - x.mean(0)) / x.std(0)
    train, test = x[:4000], x[4000:]
    L = 20
    idx = np.arange(0, train.shape[0] - L, 8)
    enc = spectral.fit(delay_windows(train, L)[idx], spectral.KernelParams(), r=6)
    Z, Y = build_pairs(train, enc, idx)
    dec = fit_decoder(Z, Y, default_latent_kernel(Z, scale=0.1), 1e-4)
    return enc, dec, train, test


# --- acceptance reporting ----------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and not report.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if report.failed and call.excinfo is not None:
        first = str(call.excinfo.value).splitlines()
        detail = "; ".join(filter(None, [detail, first[0] if first else call.excinfo.typename]))
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"[{status}] {n}. {title}" + (f" | {detail}" if detail else ""))
