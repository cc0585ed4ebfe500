import pytest


def criterion(label):
    """Tag an acceptance test so the report hook prints its pass/fail line."""

    def mark(fn):
        fn._criterion = label
        return fn

    return mark


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    label = getattr(getattr(item, "function", None), "_criterion", None)
    if label:
        status = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {label}: {status}")
