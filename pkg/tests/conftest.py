import pytest

PAIR = [{"type": "pair", "center": [1, 0]}]
SMALL_MACHINE = {"d": 2, "p": 2, "E": PAIR, "N": 2, "variant": "toy", "factor": 5, "k_max": 6}

# one quick config per command
SMALL_CONFIGS = {
    "verify-carousel": {"carousel": {"p": [1, 2, "inf"], "m_range": [1, 3], "T_factor_range": [4, 5],
                                     "eps": "1/2", "amplitudes": [1, "-3/2"]}},
    "build-net": {"net": {"d": 3, "E": [{"type": "cap", "center": [0, 0, 1], "radius": 0.3}],
                          "N": 2, "covering_samples": 300}},
    "build-schedule": {"machine": SMALL_MACHINE},
    "run-orbit": {"machine": SMALL_MACHINE,
                  "orbit": {"u": [1, 0], "x": [{"copy": 1, "slot": 2, "value": "1/3"}],
                            "times": "proof", "samples": 2}},
    "near-return": {"machine": {**SMALL_MACHINE, "N": 3, "k_max": None},
                    "near_return": {"u": [0, 1], "stages": [2, 3]}},
    "classify": {"jordan": {"matrix": [[2, 0, 0], [0, 1, 1], [0, 0, 1]],
                            "vectors": [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 0.5]]}},
    "verify-symbasis": {"symbasis": {"unit_max_n": 8, "case1_max_n": 4, "case1_m": 2,
                                     "case3_max_n": 4, "orthogonality_max_n": 5, "trials": 4}},
}
SMALL_CONFIGS["near-return"]["machine"].pop("k_max")


@pytest.fixture
def small_configs():
    return {k: dict(v) for k, v in SMALL_CONFIGS.items()}


@pytest.fixture
def verdict(record_property):
    """Print and record one PASS/FAIL line; returns the boolean for asserting."""
    def emit(n: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        record_property("acceptance", line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    lines = set()
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", []):
                if name == "acceptance":
                    lines.add(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
