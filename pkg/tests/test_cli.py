from fractions import Fraction as F

import pytest

from crscheme.cli import EXIT_BUDGET, EXIT_FORMAT, EXIT_INVALID, EXIT_OK, main
from crscheme.formats import load_strategy

CLASSIC = ["--m", "2", "--eps", "1", "--s-override", "2", "--cap-override", "3"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _value(out, label):
    line = next(line for line in out.splitlines() if line.startswith(label + " ="))
    return F(line.split("=", 1)[1].split("(")[0].strip())


@pytest.fixture
def solved(tmp_path, capsys):
    out = tmp_path / "classic.strategy"
    code, text, _ = run(capsys, "solve", *CLASSIC, "--out", out)
    assert code == EXIT_OK
    return out, tmp_path / "classic.strategy.witness", text


def test_solve_trivial(capsys):
    code, out, _ = run(capsys, "solve", "--m", 1, "--eps", "1/2", "--s-override", 1, "--cap-override", 1)
    assert code == EXIT_OK and _value(out, "rho'") == 1
    assert "1 (~1.000000)" in out


def test_solve_classic(solved):
    _, witness, out = solved
    assert _value(out, "rho'") >= F(3, 2)
    assert "classes: 1301" in out and "wall time" in out
    assert witness.exists()


def test_solve_budget_exceeded(capsys):
    code, out, _ = run(capsys, "solve", "--m", 2, "--eps", "1/100")
    assert code == EXIT_BUDGET
    assert _value(out, "rho' lower bound") >= 1


def test_solve_invalid(capsys):
    assert run(capsys, "solve", "--m", 2, "--eps", "3/2")[0] == EXIT_INVALID
    assert run(capsys, "solve", "--eps", "1")[0] == EXIT_INVALID
    assert run(capsys, "solve", "--m", "x")[0] == EXIT_INVALID
    assert run(capsys, "bogus")[0] == EXIT_INVALID


def test_threads_do_not_change_files(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "solve", *CLASSIC, "--out", a, "--threads", 1)
    run(capsys, "solve", *CLASSIC, "--out", b, "--threads", 4)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.witness").read_bytes() == (tmp_path / "b.witness").read_bytes()


def test_evaluate(solved, capsys, tmp_path):
    strategy, _, out = solved
    rho = _value(out, "rho'")
    code, out, _ = run(capsys, "evaluate", "--strategy", strategy)
    assert code == EXIT_OK and _value(out, "rho-bar") == rho == load_strategy(strategy.read_text()).value
    w = tmp_path / "fixed.witness"
    code, out, _ = run(capsys, "evaluate", "--baseline", "fixed:1", *CLASSIC, "--witness-out", w)
    assert code == EXIT_OK and _value(out, "rho-bar") > rho and w.exists()
    code, _, err = run(capsys, "evaluate", "--strategy", strategy, "--m", 3, "--eps", 1, "--s-override", 2, "--cap-override", 3)
    assert code == EXIT_FORMAT and "'m'" in err
    assert run(capsys, "evaluate", "--baseline", "graham")[0] == EXIT_INVALID


def test_replay(solved, capsys, tmp_path):
    strategy, witness, out = solved
    rho = _value(out, "rho'")
    code, out, _ = run(capsys, "replay", "--witness", witness, "--strategy", strategy)
    assert code == EXIT_OK and _value(out, "realized") == rho
    code, out, _ = run(capsys, "replay", "--witness", witness, "--baseline", "graham")
    assert code == EXIT_OK and _value(out, "realized") >= F(3, 2)
    code, out, _ = run(capsys, "replay", "--witness", witness, "--baseline", "graham-list")
    assert code == EXIT_OK and "reported only" in out
    other = tmp_path / "m3"
    run(capsys, "solve", "--m", 3, "--eps", 1, "--s-override", 1, "--cap-override", 1, "--out", other)
    code, _, err = run(capsys, "replay", "--witness", witness, "--strategy", other)
    assert code == EXIT_FORMAT and "'m'" in err
    broken = tmp_path / "broken.witness"
    broken.write_text(witness.read_text().replace("STOP", "HALT", 1))
    assert run(capsys, "replay", "--witness", broken, "--baseline", "graham")[0] == EXIT_FORMAT


def test_simulate(tmp_path, capsys, solved):
    inst = tmp_path / "i.txt"
    inst.write_text("1\n1\n2\n")
    code, out, _ = run(capsys, "simulate", "--instance", inst, "--baseline", "graham", "--m", 2)
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "max exact-OPT prefix ratio: 3/2 (~1.500000)"
    assert len(out.splitlines()) == 5
    report = tmp_path / "r.txt"
    code, out, _ = run(capsys, "simulate", "--instance", inst, "--strategy", solved[0], "--report", report)
    assert code == EXIT_OK and report.read_text().splitlines()[0].startswith("iter\tsize")
    empty = tmp_path / "e.txt"
    empty.write_text("")
    code, out, _ = run(capsys, "simulate", "--instance", empty, "--baseline", "graham", "--m", 2)
    assert code == EXIT_OK and len(out.splitlines()) == 2
    zero = tmp_path / "z.txt"
    zero.write_text("1\n0\n")
    code, _, err = run(capsys, "simulate", "--instance", zero, "--baseline", "graham", "--m", 2)
    assert code == EXIT_INVALID and "line 2" in err
    headed = tmp_path / "h.txt"
    headed.write_text("m=2\n1\n1\n2\n")
    code, out, _ = run(capsys, "simulate", "--instance", headed, "--baseline", "graham")
    assert code == EXIT_OK and "3/2" in out.splitlines()[-1]
    assert run(capsys, "simulate", "--instance", tmp_path / "missing", "--baseline", "graham", "--m", 2)[0] == EXIT_INVALID


@pytest.mark.parametrize(
    "argv,exact,bound",
    [
        (["--jobs", "1,1,2", "--m", "2"], F(2), F(2)),
        (["--jobs", "3,3,2,2,2", "--m", "2"], F(6), F(6)),
        (["--jobs", "5", "--speeds", "1,2"], F(5, 2), F(5, 2)),
    ],
)
def test_oracle(capsys, argv, exact, bound):
    code, out, _ = run(capsys, "oracle", *argv)
    assert code == EXIT_OK
    assert _value(out, "exact") == exact and _value(out, "lower bound") == bound


def test_oracle_errors(capsys):
    code, out, _ = run(capsys, "oracle", "--jobs", ",".join(["1"] * 30), "--m", 2)
    assert code == EXIT_BUDGET and "unavailable" in out and _value(out, "lower bound") == 15
    assert run(capsys, "oracle", "--jobs", "1,-1", "--m", 2)[0] == EXIT_INVALID
    assert run(capsys, "oracle", "--jobs", "1", "--m", 2, "--speeds", "1")[0] == EXIT_INVALID
