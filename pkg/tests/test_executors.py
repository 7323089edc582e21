import json
import threading
import time

from beestar.executors import (
    MODE_DEBUG,
    BuiltinExecutor,
    ExecutorRouter,
    SubprocessExecutor,
)
from beestar.values import Value


def code(text: str, language: str = "builtin") -> Value:
    return Value.code(language, "main", text)


# -- builtins ------------------------------------------------------------------

def test_builtin_identity():
    res = BuiltinExecutor().run(code("identity"), Value.number(7))
    assert res.ok and res.value == Value.number(7)


def test_builtin_uppercase():
    res = BuiltinExecutor().run(code("uppercase"), Value.string("bulldozer"))
    assert res.ok and res.value == Value.string("BULLDOZER")
    bad = BuiltinExecutor().run(code("uppercase"), Value.number(1))
    assert not bad.ok and "string" in bad.failure


def test_builtin_sum():
    arr = Value.array([Value.number(1), Value.number(2), Value.number(3.5)])
    res = BuiltinExecutor().run(code("sum"), arr)
    assert res.ok and res.value == Value.number(6.5)
    assert not BuiltinExecutor().run(code("sum"), Value.string("x")).ok


def test_builtin_const():
    res = BuiltinExecutor().run(code('const:{"a": 1}'), Value.null())
    assert res.ok and res.value == Value.record({"a": Value.number(1)})
    assert not BuiltinExecutor().run(code("const:{oops"), Value.null()).ok


def test_builtin_sleep_returns_input():
    res = BuiltinExecutor().run(code("sleep:0.05"), Value.string("z"))
    assert res.ok and res.value == Value.string("z")
    assert res.duration >= 0.04


def test_builtin_unknown_name_fails():
    res = BuiltinExecutor().run(code("launch_missiles"), Value.null())
    assert not res.ok and "unknown builtin" in res.failure


def test_builtin_debug_markers():
    res = BuiltinExecutor().run(code("identity"), Value.null(), MODE_DEBUG)
    assert res.log_lines[0] == "DEBUG enter identity"
    assert res.log_lines[-1] == "DEBUG exit identity"
    normal = BuiltinExecutor().run(code("identity"), Value.null())
    assert normal.log_lines == []


def test_builtin_debug_preserves_trace_on_failure():
    res = BuiltinExecutor().run(code("uppercase"), Value.number(1), MODE_DEBUG)
    assert not res.ok
    assert res.log_lines[0] == "DEBUG enter uppercase"


def test_builtin_cancellation():
    cancel = threading.Event()
    out = {}

    def runner():
        out["res"] = BuiltinExecutor().run(code("sleep:30"), Value.null(),
                                           cancel=cancel)

    t = threading.Thread(target=runner)
    t.start()
    time.sleep(0.05)
    cancel.set()
    t.join(2.0)
    assert not t.is_alive()
    assert out["res"].cancelled and not out["res"].ok


def test_builtin_deterministic():
    a = BuiltinExecutor().run(code("uppercase"), Value.string("abc"))
    b = BuiltinExecutor().run(code("uppercase"), Value.string("abc"))
    assert a.value == b.value and a.log_lines == b.log_lines


# -- subprocesses -----------------------------------------------------------------

ECHO_PY = "import sys; sys.stdout.write(sys.stdin.read())"


def test_subprocess_echo_round_trip():
    record = Value.record({"x": Value.number(1)})
    res = SubprocessExecutor().run(code(ECHO_PY, "python"), record)
    assert res.ok, res.failure
    assert res.value == record
    assert res.exit_status == 0


def test_subprocess_shell_uppercase():
    res = SubprocessExecutor().run(code("tr '[:lower:]' '[:upper:]'", "sh"),
                                   Value.string("bulldozer 9"))
    assert res.ok, res.failure
    assert res.value == Value.string("BULLDOZER 9")


def test_subprocess_debug_env_flag():
    probe = ("import os, json, sys; "
             "json.dump({'debug': os.environ.get('BEESTAR_DEBUG', '')}, sys.stdout)")
    debug = SubprocessExecutor().run(code(probe, "python"), Value.null(), MODE_DEBUG)
    assert debug.value == Value.record({"debug": Value.string("1")})
    normal = SubprocessExecutor().run(code(probe, "python"), Value.null())
    assert normal.value == Value.record({"debug": Value.string("")})


def test_subprocess_stderr_becomes_log_lines():
    noisy = ("import sys; print('working', file=sys.stderr); "
             "print('done', file=sys.stderr); sys.stdout.write('null')")
    res = SubprocessExecutor().run(code(noisy, "python"), Value.null())
    assert res.ok
    assert res.log_lines == ["working", "done"]


def test_subprocess_nonzero_exit_is_failure():
    res = SubprocessExecutor().run(code("import sys; sys.exit(3)", "python"),
                                   Value.null())
    assert not res.ok and res.exit_status == 3 and "exit status 3" in res.failure


def test_subprocess_garbage_output_is_failure():
    res = SubprocessExecutor().run(code("print('not json here {')", "python"),
                                   Value.null())
    assert not res.ok and "unparseable" in res.failure


def test_subprocess_unknown_language():
    res = SubprocessExecutor().run(code("x", "cobol"), Value.null())
    assert not res.ok and "cobol" in res.failure


def test_subprocess_cancellation_kills_child():
    cancel = threading.Event()
    out = {}

    def runner():
        out["res"] = SubprocessExecutor().run(
            code("import time; time.sleep(30)", "python"), Value.null(),
            cancel=cancel)

    t = threading.Thread(target=runner)
    t.start()
    time.sleep(0.3)
    cancel.set()
    t.join(5.0)
    assert not t.is_alive()
    assert out["res"].cancelled


def test_subprocess_input_arrives_as_canonical_document():
    checker = ("import sys, json; doc = json.load(sys.stdin); "
               "json.dump(sorted(doc.keys()), sys.stdout)")
    value = Value.record({"b": Value.number(1), "a": Value.null()})
    res = SubprocessExecutor().run(code(checker, "python"), value)
    assert res.ok
    assert res.value == Value.array([Value.string("a"), Value.string("b")])


def test_file_template_substitution():
    executor = SubprocessExecutor(templates={"pyfile": ["python3", "{file}"]})
    res = executor.run(code(ECHO_PY, "pyfile"), Value.string("via file"))
    assert res.ok and res.value == Value.string("via file")


def test_router_picks_by_language():
    router = ExecutorRouter()
    assert router.run(code("identity"), Value.number(1)).value == Value.number(1)
    assert router.run(code(ECHO_PY, "python"), Value.number(1)).value == Value.number(1)


def test_builtin_vs_subprocess_uppercase_agree():
    router = ExecutorRouter()
    for word in ("bulldozer", "abc xyz 09", "a"):
        b = router.run(code("uppercase"), Value.string(word))
        s = router.run(code("tr '[:lower:]' '[:upper:]'", "sh"), Value.string(word))
        assert b.value == s.value
        assert json.loads(b.value.canonical()) == json.loads(s.value.canonical())
