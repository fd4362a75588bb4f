from __future__ import annotations

from mera_analyzer import canonical_dumps


def dump_of(source: str, qualname: str | None = None) -> str:
    units = canonical_dumps(source)["units"]
    if qualname is None:
        assert len(units) == 1
        return units[0]["dump"]
    return next(u["dump"] for u in units if u["qualname"] == qualname)


ALPHA_A = "def f(a):\n    b = a\n    return b\n"
ALPHA_B = "def f(x):\n    y = x\n    return y\n"


def test_alpha_equivalent_functions_dump_identically():
    assert dump_of(ALPHA_A) == dump_of(ALPHA_B)


def test_docstring_removed():
    documented = 'def f(a):\n    """Explain things."""\n    b = a\n    return b\n'
    assert dump_of(documented) == dump_of(ALPHA_A)


def test_added_statement_changes_dump():
    edited = "def f(a):\n    b = a\n    b = b + 1\n    return b\n"
    assert dump_of(edited) != dump_of(ALPHA_A)


def test_parameters_renamed_in_first_use_order():
    assert dump_of("def f(a, b):\n    return a - b\n") == (
        "def f(_v0, _v1):\n    return _v0 - _v1"
    )


def test_call_targets_and_globals_preserved():
    source = "def f(x):\n    return helper(x) + CONSTANT\n"
    dump = dump_of(source)
    assert "helper" in dump
    assert "CONSTANT" in dump
    assert "_v0" in dump


def test_attribute_names_preserved():
    source = "def f(conn):\n    return conn.cursor().fetchall()\n"
    dump = dump_of(source)
    assert "cursor" in dump
    assert "fetchall" in dump


def test_methods_rename_self_like_any_parameter():
    source = (
        "class C:\n"
        "    def get(self, key):\n"
        "        return self.table[key]\n"
    )
    dump = dump_of(source, "C.get")
    assert "self" not in dump
    assert ".table" in dump


def test_docstring_only_body_gets_pass():
    source = 'def noop():\n    """Nothing to do."""\n'
    assert dump_of(source) == "def noop():\n    pass"


def test_nested_function_renamed_consistently():
    first = (
        "def outer(items):\n"
        "    def score(entry):\n"
        "        return entry + 1\n"
        "    return [score(i) for i in items]\n"
    )
    second = (
        "def outer(values):\n"
        "    def rank(thing):\n"
        "        return thing + 1\n"
        "    return [rank(v) for v in values]\n"
    )
    assert dump_of(first) == dump_of(second)


def test_global_declared_names_not_renamed():
    source = (
        "def bump():\n"
        "    global counter\n"
        "    counter = counter + 1\n"
        "    return counter\n"
    )
    dump = dump_of(source)
    assert "counter" in dump
    assert "_v0" not in dump


def test_unit_name_is_preserved():
    assert dump_of(ALPHA_A).startswith("def f(")


def test_keyword_argument_names_preserved():
    source = "def f(x):\n    return sorted(x, key=len, reverse=True)\n"
    dump = dump_of(source)
    assert "key=len" in dump
    assert "reverse=True" in dump


def test_determinism():
    for source in (ALPHA_A, ALPHA_B):
        assert canonical_dumps(source) == canonical_dumps(source)
