"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary.

Acceptance tests carry ``@pytest.mark.criterion(k)`` and may attach a short
measurement string via ``record_property("detail", ...)``.  A criterion
passes when every test marked with it passed.
"""
from collections import defaultdict

_OUTCOMES = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        details = [v for k, v in report.user_properties if k == "detail"]
        _OUTCOMES[props["criterion"]].append((name, report.outcome, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        results = _OUTCOMES[k]
        ok = all(outcome == "passed" for _, outcome, _ in results)
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'}")
        for name, outcome, detail in results:
            suffix = f"  [{detail}]" if detail else ""
            terminalreporter.write_line(f"    {outcome:7s} {name}{suffix}")
