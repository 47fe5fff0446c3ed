import copy

import pytest
from hypothesis import given, settings, strategies as st

from accb.accvalidate import (
    DATA_CLAUSES, SubarrayBounds, check, enclosing, parse_directive, scan_directives, validate,
)
from accb.cfront import normalize, parse_ast, tokenize
from accb.errors import AccError

from _util import GOLDEN_MM


def front(text):
    src = normalize(tokenize(text))
    return src, parse_ast(src)


def in_main(body, decls="int n = 10, s = 0, i, j, k;\nfloat a[64], b[64], c[64];\n"):
    return f"{decls}int main(void) {{\n{body}\nreturn 0;\n}}\n"


def diag_codes(text):
    src, ast = front(text)
    try:
        directives = scan_directives(src)
    except AccError as e:
        return e.codes
    return [d.code for d in validate(directives, ast)]


def test_kernels_before_block():
    src, _ = front(in_main("#pragma acc kernels\n{ s = 1; }"))
    (d,) = scan_directives(src)
    assert d.kind == "kernels" and d.clauses == ()


def test_golden_data_clause_bounds():
    kind, clauses = parse_directive("#pragma acc data copy(a[0:LEN*LEN],b[0:LEN*LEN],c[0:LEN*LEN])")
    assert kind == "data"
    (c,) = clauses
    assert c.kind == "copy"
    assert [v.name for v in c.variables] == ["a", "b", "c"]
    assert all(v.bounds == SubarrayBounds("0", "LEN*LEN") for v in c.variables)


def test_misspelled_clause_location():
    text = in_main("#pragma acc kernels\n{\n  #pragma acc loop independant\n  for (i = 0; i < n; i++) s++;\n}")
    src, _ = front(text)
    with pytest.raises(AccError) as e:
        scan_directives(src)
    (d,) = e.value.diagnostics
    assert d.code == "E_CLAUSE"
    assert d.location == (6, 20)


def test_golden_validates_cleanly():
    src, ast = front(GOLDEN_MM.read_text())
    directives, warnings = check(src, ast)
    assert [d.kind for d in directives] == ["data", "kernels", "loop", "loop"]
    assert warnings == []


def test_nested_kernels():
    text = in_main("#pragma acc kernels\n{\n#pragma acc kernels\n{ s = 1; }\n}")
    src, ast = front(text)
    diags = validate(scan_directives(src), ast)
    assert [(d.code, d.location) for d in diags] == [("E_NEST", (6, 1))]


def test_array_reduction_target():
    text = in_main("#pragma acc kernels\n{\n#pragma acc loop independent reduction(+:a)\n"
                   "for (i = 0; i < 10; i++) a[0] += 1;\n}")
    assert diag_codes(text) == ["E_REDTYPE"]


@pytest.mark.parametrize("line, code", [
    ("#pragma acc parallel", "E_UNSUPPORTED"),
    ("#pragma acc update host(a)", "E_UNSUPPORTED"),
    ("#pragma acc frobnicate", "E_DIRECTIVE"),
    ("#pragma acc", "E_DIRECTIVE"),
    ("#pragma acc kernels copy(", "E_CLAUSE"),
    ("#pragma acc loop reduction(-:s)", "E_REDOP"),
    ("#pragma acc loop reduction(s)", "E_CLAUSE"),
    ("#pragma acc data copy(a[0:])", "E_CLAUSE"),
    ("#pragma acc loop vector(32) vector(64)", "E_CLAUSE"),
])
def test_directive_syntax_errors(line, code):
    with pytest.raises(AccError) as e:
        parse_directive(line)
    assert e.value.codes == [code]


def test_clause_not_legal_on_directive():
    text = in_main("#pragma acc data independent\n{ s = 1; }")
    assert diag_codes(text) == ["E_CLAUSE"]


def test_loop_outside_kernels():
    text = in_main("#pragma acc loop independent\nfor (i = 0; i < n; i++) s++;")
    assert diag_codes(text) == ["E_NEST"]


def test_loop_must_precede_for():
    text = in_main("#pragma acc kernels\n{\n#pragma acc loop independent\nwhile (s) s--;\n}")
    assert diag_codes(text) == ["E_ATTACH"]


def test_undeclared_clause_variable():
    text = in_main("#pragma acc kernels copy(q[0:4])\n{ s = 1; }")
    assert diag_codes(text) == ["E_UNBOUND"]


def test_scalar_in_data_clause():
    assert diag_codes(in_main("#pragma acc kernels copy(n)\n{ s = 1; }")) == ["E_CLAUSE"]


def test_deep_independent_nest_warns():
    body = ("#pragma acc kernels\n{\n#pragma acc loop independent\nfor (i = 0; i < 4; i++) {\n"
            "#pragma acc loop independent\nfor (j = 0; j < 4; j++) {\n#pragma acc loop independent\n"
            "for (k = 0; k < 4; k++) a[i] += 1;\n}\n}\n}")
    src, ast = front(in_main(body))
    directives, warnings = check(src, ast)
    assert [w.code for w in warnings] == ["W_DEEPNEST"]
    assert [w.severity for w in warnings] == ["warning"]


def test_enclosing_is_outermost_first():
    src, _ = front(GOLDEN_MM.read_text())
    ds = scan_directives(src)
    assert [d.kind for d in enclosing(ds[3], ds)] == ["data", "kernels", "loop"]


def test_every_error_has_a_location():
    text = in_main("#pragma acc kernels copy(q) bogus\n{ s = 1; }\n#pragma acc kernels\n{\n"
                   "#pragma acc kernels\n{ s = 2; }\n}")
    src, ast = front(text)
    with pytest.raises(AccError) as e:
        scan_directives(src)
    assert all(d.line >= 1 and d.col >= 1 for d in e.value.diagnostics)


GOOD = ["#pragma acc kernels", "#pragma acc data copy(a[0:n])", "#pragma acc kernels copyin(b) create(c)",
        "#pragma acc data present(a)", "#pragma acc kernels copyout(c[2:8])"]
BAD = ["#pragma acc kernals", "#pragma acc parallel", "#pragma acc kernels copy(", "#pragma acc data what(a)",
       "#pragma acc loop reduction(^:s)"]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 4)), min_size=1, max_size=6))
def test_every_acc_pragma_yields_directive_or_one_error(choices):
    lines = [(GOOD if ok else BAD)[k] for ok, k in choices]
    body = "\n".join(f"{line}\n{{ s = {n}; }}" for n, line in enumerate(lines))
    src, _ = front(in_main(body))
    n_bad = sum(1 for ok, _ in choices if not ok)
    try:
        directives = scan_directives(src)
        errors = []
    except AccError as e:
        directives, errors = None, e.diagnostics
    if n_bad == 0:
        assert len(directives) == len(lines)
    else:
        assert len(errors) == n_bad


def test_non_acc_pragmas_pass_through():
    src, _ = front(in_main("#pragma omp parallel for\nfor (i = 0; i < n; i++) s++;\n#pragma once"))
    assert scan_directives(src) == []


@pytest.mark.parametrize("body", [
    "#pragma acc kernels copy(a[0:n]) copyin(b)\n{\n#pragma acc loop independent private(k) reduction(max:s)\n"
    "for (i = 0; i < n; i++) { k = i; if (k > s) s = k; }\n}",
    "#pragma acc kernels\n{\n#pragma acc kernels\n{ s = 2; }\n}\n#pragma acc data copy(n)\n{ s = 1; }",
])
def test_validation_is_deterministic_and_pure(body):
    src, ast = front(in_main(body))
    directives = scan_directives(src)
    before = copy.deepcopy(directives)
    text_before = src.text
    first = validate(directives, ast)
    second = validate(directives, ast)
    assert first == second
    assert directives == before
    assert src.text == text_before


def test_data_clause_table():
    assert set(DATA_CLAUSES) == {"copy", "copyin", "copyout", "create", "present"}
