"""Shared pytest wiring.

After the run, print one verdict line per acceptance criterion so the
suite's headline result is readable without scrolling the full log.
"""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, ()):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            m = _CRITERION.search(nodeid)
            if m:
                verdicts[int(m.group(1))] = (label, m.group(2))
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        label, name = verdicts[num]
        terminalreporter.write_line(f"criterion {num:2d} {label:4s} {name}")
