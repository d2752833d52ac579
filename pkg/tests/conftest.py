import sys


def pytest_runtest_logreport(report):
    # one PASS/FAIL line per shipping criterion, visible even under -q
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name}", file=sys.stderr, flush=True)
