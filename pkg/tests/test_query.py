import io
import operator
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from cloudmr.data import generate_movies
from cloudmr.query import Session, analyze, parse, repl
from cloudmr.query.diagnostics import INVALID_FIELD, NO_OPERATOR, SYNTAX_ERROR, TYPE_MISMATCH, UNDEFINED_ALIAS, Severity
from cloudmr.query.syntax import And, Compare, FieldRef, Filter, Literal, Load, Not, Or, Schema, strip_url
from cloudmr.store import BlockStore

from oracles import scan_movies

SAMPLE_LOAD = (
    "A = LOAD 'hdfs://localhost:8020/user/edureka/movies.txt' using PigStorage(',') as "
    "(movieid: int, moviename: chararray, releaseyear: int, ratings: float, duration: int);"
)
MOVIE_SCHEMA = Schema.of(
    ("movieid", "int"), ("moviename", "chararray"), ("releaseyear", "int"), ("ratings", "float"), ("duration", "int")
)


def movie_session(rows=1000, seed=1):
    store = BlockStore(3)
    text = generate_movies(rows, seed)
    store.put_file("/user/edureka/movies.txt", text.encode(), block_size=4096, align=b"\n")
    return Session(store, num_workers=3), text


# -- parsing ----------------------------------------------------------------


def test_parse_empty():
    assert parse("") == []
    assert parse("  -- just a comment\n") == []


def test_parse_sample_load_line():
    (stmt,) = parse(SAMPLE_LOAD)
    assert isinstance(stmt, Load)
    assert stmt.alias == "A" and stmt.delimiter == ","
    assert stmt.schema == MOVIE_SCHEMA
    assert strip_url(stmt.path) == "/user/edureka/movies.txt"


def test_parse_conjunction_filter():
    text = "moviebyyr = FILTER A by releaseyear>1950 and releaseyear<1960;"
    (stmt,) = parse(text)
    assert isinstance(stmt, Filter) and stmt.source == "A"
    first = text.index("releaseyear") + 1
    second = text.rindex("releaseyear") + 1
    assert stmt.predicate == And(
        Compare(">", FieldRef("releaseyear", 1, first), Literal(1950, "int")),
        Compare("<", FieldRef("releaseyear", 1, second), Literal(1960, "int")),
    )


def test_parse_precedence_and_not():
    text = "B = filter A BY not x == 1 or y < 2.5 and (s != 'a;b');"
    (stmt,) = parse(text)
    p = stmt.predicate
    assert isinstance(p, Or) and isinstance(p.left, Not) and isinstance(p.right, And)
    assert p.right.right == Compare("!=", FieldRef("s", 1, text.index("(s") + 2), Literal("a;b", "chararray"))


def test_syntax_error_location_and_recovery():
    stmts = parse("A = LOAD 'x' as (a: int);\nB = FILTER A by a >;\nDUMP A;")
    assert isinstance(stmts[0], Load)
    bad = stmts[1]
    assert bad.alias == "B"
    assert bad.diagnostic.code == SYNTAX_ERROR and bad.diagnostic.location == (2, 20)
    assert stmts[2].alias == "A"


def test_unsupported_type_and_operator():
    for text in ("A = LOAD 'x' as (a: bytearray);", "A = ORDER B BY x;", "A = LOAD 'x' using Other(',') as (a:int);"):
        (stmt,) = parse(text)
        assert stmt.diagnostic.code == SYNTAX_ERROR


# -- analysis -----------------------------------------------------------------


def test_unknown_field_1025_spells_out_schema():
    _, diags = analyze(parse(SAMPLE_LOAD + "\nmoviebyratings = FILTER A by rating> 4.0;"))
    (d,) = diags
    assert d.code == INVALID_FIELD and d.location == (2, 30)
    assert d.message.endswith("does not exist in schema: movieid:int,moviename:chararray,releaseyear:int,ratings:float,duration:int.")


def test_undefined_alias_1200():
    _, diags = analyze(parse("B = GROUP nothing ALL;"))
    assert [(d.code, d.message) for d in diags] == [(UNDEFINED_ALIAS, "Undefined alias: nothing")]


def test_implicit_cast_warning_once():
    plan, diags = analyze(parse(SAMPLE_LOAD + "\nr = FILTER A by ratings> 4.0;"))
    assert len(plan) == 2
    (w,) = diags
    assert w.severity is Severity.WARNING and w.code == 0 and w.message == "IMPLICIT_CAST_TO_DOUBLE" and w.count == 1
    assert w.format() == "WARN Encountered Warning IMPLICIT_CAST_TO_DOUBLE 1 time(s)."
    _, diags = analyze(parse(SAMPLE_LOAD + "\nr = FILTER A by ratings > 4.0 and ratings < 4.5;"))
    assert [d.count for d in diags] == [2]
    _, diags = analyze(parse(SAMPLE_LOAD + "\nr = FILTER A by releaseyear > 1950;"))
    assert diags == []


def test_describe_after_failed_definition_1003():
    _, diags = analyze(parse(SAMPLE_LOAD + "\nm = FILTER A by nope > 1;\ndescribe m;"))
    assert [d.code for d in diags] == [INVALID_FIELD, NO_OPERATOR]
    assert diags[1].format() == "ERROR 1003: Unable to find an operator for alias m"


def test_type_mismatch():
    _, diags = analyze(parse(SAMPLE_LOAD + "\nm = FILTER A by moviename > 3;"))
    assert [d.code for d in diags] == [TYPE_MISMATCH]


def test_diagnostics_deterministic():
    script = SAMPLE_LOAD + "\nm = FILTER A by x > 1.5;\ndescribe m;\nB = GROUP m ALL;\nm = FILTER A by ratings < 2.0;"
    runs = [[(d.code, d.message, d.location) for d in analyze(parse(script))[1]] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


# -- execution ------------------------------------------------------------------


def test_describe_output():
    session, _ = movie_session(50)
    session.run_text(SAMPLE_LOAD + "\nmoviebyratings = FILTER A by ratings> 4.0;\ndescribe moviebyratings;")
    assert session.transcript[-1] == (
        "moviebyratings: {movieid: int,moviename: chararray,releaseyear: int,ratings: float,duration: int}"
    )


def test_decade_count_matches_brute_force_on_1000_movies():
    session, text = movie_session(1000, seed=77)
    session.run_text(
        SAMPLE_LOAD
        + "\nmoviebyyr = FILTER A by releaseyear>1950 and releaseyear<1960;"
        + "\nG = GROUP moviebyyr ALL;\nN = FOREACH G GENERATE COUNT(moviebyyr);\nDUMP N;"
    )
    expected = scan_movies(text, lambda r: 1950 < r["releaseyear"] < 1960)
    assert session.transcript == [f"({expected})"]
    assert session.relations["N"].tuples == [(expected,)]


def test_always_false_filter_counts_zero():
    session, _ = movie_session(100)
    session.run_text(SAMPLE_LOAD + "\nE = FILTER A by movieid < 0;\nG = GROUP E ALL;\nc = FOREACH G GENERATE COUNT(E);\nDUMP c;")
    assert len(session.relations["E"]) == 0
    assert session.transcript == ["(0)"]


def test_dump_format():
    store = BlockStore(2)
    store.put_file("/t", b"1,x,2.5\n2,y,3.0\n", align=b"\n")
    s = Session(store)
    s.run_text("T = LOAD '/t' USING PigStorage(',') AS (a: int, b: chararray, c: float);\nDUMP T;")
    assert s.transcript == ["(1,x,2.5)", "(2,y,3.0)"]


def test_coercion_error_reports_row():
    store = BlockStore(2)
    store.put_file("/bad", b"1,2\n3,4\nfive,6\n", block_size=4, align=b"\n")
    s = Session(store)
    s.run_text("X = LOAD '/bad' USING PigStorage(',') AS (a: int, b: int);\nDUMP X;")
    assert s.diagnostics[0].code == 4002
    assert "row 3" in s.diagnostics[0].message
    assert s.diagnostics[1].code == NO_OPERATOR
    assert s.error_count == 2


def test_arity_mismatch_is_coercion_error():
    store = BlockStore(2)
    store.put_file("/bad", b"1,2\n3\n", align=b"\n")
    s = Session(store)
    s.run_text("X = LOAD '/bad' USING PigStorage(',') AS (a: int, b: int);")
    assert s.diagnostics[0].code == 4002 and "row 2" in s.diagnostics[0].message


def test_unknown_input_file():
    s = Session(BlockStore(2))
    s.run_text("X = LOAD 'hdfs://h:1/missing' AS (a: int);")
    assert s.diagnostics[0].code == 4003 and "/missing" in s.diagnostics[0].message


def test_repl_reads_statements_across_lines():
    session, _ = movie_session(30)
    stdin = io.StringIO(SAMPLE_LOAD + "\nB = GROUP A\n  ALL;\ndescribe B;\nquit\n")
    stdout = io.StringIO()
    repl(session.store, stdin, stdout)
    out = stdout.getvalue()
    assert out.startswith("grunt> ")
    assert ">> " in out
    assert "B: {group: chararray,A: {(movieid: int," in out


# -- oracle equivalence ---------------------------------------------------------

_PY_OPS = {"<": operator.lt, ">": operator.gt, "<=": operator.le, ">=": operator.ge, "==": operator.eq, "!=": operator.ne}


def _eval(pred, row):
    """Direct tree-walking evaluation of a predicate over a field dict."""
    if isinstance(pred, And):
        return _eval(pred.left, row) and _eval(pred.right, row)
    if isinstance(pred, Or):
        return _eval(pred.left, row) or _eval(pred.right, row)
    if isinstance(pred, Not):
        return not _eval(pred.operand, row)
    val = lambda x: row[x.name] if isinstance(x, FieldRef) else x.value  # noqa: E731
    return _PY_OPS[pred.op](val(pred.left), val(pred.right))


def _direct_rows(text):
    rows = []
    for line in text.splitlines():
        a, name, year, rating, dur = line.split(",")
        rows.append({"movieid": int(a), "moviename": name, "releaseyear": int(year), "ratings": float(rating), "duration": int(dur)})
    return rows


comparisons = st.one_of(
    st.builds(lambda op, v: f"releaseyear {op} {v}", st.sampled_from(list(_PY_OPS)), st.integers(1915, 2020)),
    st.builds(lambda op, v: f"ratings {op} {v:.1f}", st.sampled_from(list(_PY_OPS)), st.floats(0, 5.5)),
    st.builds(lambda op, v: f"duration {op} {v}", st.sampled_from(["<", ">="]), st.integers(50, 220)),
    st.builds(lambda op, v: f"moviename {op} '{v}'", st.sampled_from(["<", "==", "!="]), st.sampled_from(["The Lost River", "The M", "The Wild Storm"])),
)
predicates = st.recursive(
    comparisons,
    lambda inner: st.one_of(
        st.builds(lambda a, b: f"({a}) and ({b})", inner, inner),
        st.builds(lambda a, b: f"({a}) or ({b})", inner, inner),
        st.builds(lambda a: f"not ({a})", inner),
    ),
    max_leaves=5,
)


@settings(max_examples=40, deadline=None)
@given(pred=predicates, other=predicates)
def test_engine_matches_direct_interpreter_and_filter_laws(pred, other):
    session, text = _SHARED
    session.run_text(f"P = FILTER A by {pred};\nQ = FILTER A by ({pred}) and ({other});\nPQ = FILTER P by {other};")
    assert session.error_count == 0
    rows = _direct_rows(text)
    (p_stmt,) = parse(f"P = FILTER A by {pred};")
    (q_stmt,) = parse(f"Q = FILTER A by {other};")
    expected = [tuple(r.values()) for r in rows if _eval(p_stmt.predicate, r)]
    rel = session.relations
    assert rel["P"].tuples == expected
    assert len(rel["P"]) <= len(rel["A"])
    assert sorted(rel["Q"].tuples) == sorted(rel["PQ"].tuples)
    assert rel["Q"].tuples == [t for t in expected if _eval(q_stmt.predicate, dict(zip(MOVIE_SCHEMA.names, t)))]


def _shared_session():
    session, text = movie_session(600, seed=4)
    session.run_text(SAMPLE_LOAD)
    return session, text


_SHARED = _shared_session()


def test_count_law():
    session, _ = movie_session(400, seed=random.Random(2).randint(0, 99))
    session.run_text(
        SAMPLE_LOAD + "\nF = FILTER A by duration > 120;\nG = GROUP F ALL;\nC = FOREACH G GENERATE COUNT(F);"
    )
    assert session.relations["C"].tuples == [(len(session.relations["F"]),)]
