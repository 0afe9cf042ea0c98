import pytest

from obdaplan.bench import SuiteConfig, run_suite
from obdaplan.ir import Join, QAttr, Scan
from obdaplan.mappings import parse_mappings, parse_tbox
from obdaplan.oracle import DataInstance
from obdaplan.stats import StatsCatalog, attr_key, pair_key


def golden_catalog() -> StatsCatalog:
    """Statistics of the three-table estimator walkthrough (T1, T2, T3)."""
    return StatsCatalog(
        view_card={"T1": 5, "T2": 10, "T3": 10},
        dist_proj={attr_key("T1", ["a"]): 5, attr_key("T2", ["c"]): 10, attr_key("T2", ["d"]): 5,
                   attr_key("T3", ["e"]): 10, attr_key("T3", ["f"]): 10},
        facing={pair_key("T1[a]", "T2[c]"): 3, pair_key("T2[d]", "T3[e]"): 5,
                pair_key("T1[a]", "T3[f]"): 1},
        table_card={"T1": 5, "T2": 10, "T3": 10},
    )


T1a, T2c, T2d, T3e, T3f = (QAttr("T1", ("a",)), QAttr("T2", ("c",)), QAttr("T2", ("d",)),
                           QAttr("T3", ("e",)), QAttr("T3#2", ("f",)))
E1 = Join(Scan("T1", "T1"), Scan("T2", "T2"), ((T1a, T2c),))
E2 = Join(E1, Scan("T3", "T3"), ((T2d, T3e),))
E = Join(E2, Scan("T3", "T3#2"), ((T1a, T3f),))


@pytest.fixture
def golden():
    return golden_catalog()


# The mapping set of the T-mapping walkthrough: seven assertions over T1..T6.
SATURATION_MAPPINGS = """
S1(a) := T1(a)
S2(b) := T2(b)
S3(c,d) := T3(c,d)
S4(e,f) := T4(e,f)
S5(g,h) := T5(g,h)
S6(i,j) := T6(i,j)
A(l(a)) <- S1(a)
C(l(b)) <- S2(b)
P1(l(c),m(d)) <- S3(c,d)
R1(l(e),m(f)) <- S4(e,f)
P2(l(g),m(h)) <- S5(g,h)
P2(l(g),n(h)) <- S5(g,h)
R2(l(i),m(j)) <- S6(i,j)
"""
SATURATION_TBOX = "A subClassOf C\nP1 subPropertyOf R1\nP2 subPropertyOf R2\n"

# The running JUCQ example: P1, C and P2 over V1..V6.
RUNNING_MAPPINGS = """
V1(a,b) := T1(a,b)
V2(a,b) := T2(a,b)
V3(a,b) := T3(a,b)
V4(a) := T4(a)
V5(a,b) := T5(a,b)
V6(a,b) := T6(a,b)
P1(f(a),g(b)) <- V1(a,b)
P1(f(a),g(b)) <- V2(a,b)
P1(h(a),i(b)) <- V3(a,b)
C(f(a)) <- V4(a)
P2(f(a),k(b)) <- V5(a,b)
P2(f(a),h(b)) <- V6(a,b)
"""


@pytest.fixture
def saturation_example():
    return parse_mappings(SATURATION_MAPPINGS), parse_tbox(SATURATION_TBOX)


@pytest.fixture
def running_example():
    return parse_mappings(RUNNING_MAPPINGS)


@pytest.fixture
def running_data():
    schema = {"T1": ("a", "b"), "T2": ("a", "b"), "T3": ("a", "b"), "T4": ("a",),
              "T5": ("a", "b"), "T6": ("a", "b")}
    tables = {
        "T1": [(1, 10), (2, 20), (3, 30)],
        "T2": [(1, 10), (4, 40)],
        "T3": [(1, 10)],
        "T4": [(1,), (2,), (4,)],
        "T5": [(1, 7), (2, 8), (9, 9)],
        "T6": [(1, 5), (4, 6)],
    }
    return DataInstance(schema, tables)


@pytest.fixture(scope="session")
def wisconsin_rows():
    """Full 84-query grid at 10k rows; shared by the slow checks."""
    return run_suite(SuiteConfig())


# --- acceptance report ------------------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record():
    """Store one PASS/FAIL line per acceptance criterion and print it right away."""
    def _record(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
