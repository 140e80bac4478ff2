import json

import pytest

from moment2d import formats
from moment2d.cli import main
from moment2d.core import AtomicMeasure, BoxSpec, moments_of_measure, real_moments_of_measure


@pytest.fixture
def gen12(tmp_path):
    assert main(["gen", "--atoms", "(1,2,3)", "--out-dir", str(tmp_path)]) == 0
    return tmp_path


def test_gen_writes_mass(gen12):
    s = formats.read(gen12 / "moments2d.json")
    assert s[(0, 0)] == 3


def test_gen_random_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["gen", "--random", "4", "--seed", "7", "--out-dir", str(d)]) == 0
    for name in ("measure.json", "moments2d.json", "extended.json", "complex.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_check_exit_codes(gen12, tmp_path, capsys):
    for name in ("moments2d.json", "extended.json", "complex.json"):
        assert main(["check", str(gen12 / name)]) == 0
    s = real_moments_of_measure(AtomicMeasure(((0.0, 0.0, 1.0), (1.0, 1.0, 1.0))), 4)
    formats.write(tmp_path / "bad.json", s.with_entry((0, 0), -1.0))
    capsys.readouterr()
    assert main(["check", str(tmp_path / "bad.json")]) == 1
    assert "psd" in capsys.readouterr().out
    text = (gen12 / "extended.json").read_text()
    (tmp_path / "trunc.json").write_text(text[: len(text) // 2])
    assert main(["check", str(tmp_path / "trunc.json")]) == 2
    assert "line" in capsys.readouterr().err
    assert main(["check", str(gen12 / "measure.json")]) == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2
    assert main(["check", "--box", "1,2", str(gen12 / "extended.json")]) == 2


def test_check_broken_extended(tmp_path, capsys):
    u = moments_of_measure(AtomicMeasure(((0.0, 0.0, 1.0),)), BoxSpec(2, 2, 2))
    formats.write(tmp_path / "u.json", u.with_entry((1, 0, 0, 0, 0, 0), 0.1))
    assert main(["check", "--json", str(tmp_path / "u.json")]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert "recurrence" in rep["failed_gates"]


def test_solve_extended_cli(gen12, tmp_path):
    out = tmp_path / "mu.json"
    assert main(["solve-extended", str(gen12 / "extended.json"), "--out", str(out)]) == 0
    mu = formats.read(out)
    assert len(mu) == 1
    (x1, x2, w), = mu.atoms
    assert (x1, x2, w) == pytest.approx((1, 2, 3), abs=1e-8)


def test_solve_2d_depth_zero(tmp_path, capsys):
    assert main(["gen", "--random", "6", "--seed", "5", "--out-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["solve-2d", "--depth", "0", str(tmp_path / "moments2d.json")]) == 1
    assert "no candidate found" in capsys.readouterr().out


def test_solve_complex_at_i(tmp_path):
    assert main(["gen", "--atoms", "(0,1,1)", "--out-dir", str(tmp_path)]) == 0
    out = tmp_path / "z.json"
    assert main(["solve-complex", str(tmp_path / "complex.json"), "--out", str(out)]) == 0
    (mu,) = formats.read(out)
    assert [(round(a, 6), round(b, 6), round(w, 6)) for a, b, w in mu.atoms] == [(0, 1, 1)]


def test_reports_byte_identical(gen12, tmp_path):
    for cmd in ("solve-extended", "solve-2d", "solve-complex"):
        name = {"solve-extended": "extended.json", "solve-2d": "moments2d.json",
                "solve-complex": "complex.json"}[cmd]
        r1, r2 = tmp_path / f"{cmd}1.json", tmp_path / f"{cmd}2.json"
        main([cmd, str(gen12 / name), "--report", str(r1)])
        main([cmd, str(gen12 / name), "--report", str(r2)])
        assert r1.read_bytes() == r2.read_bytes()


@pytest.mark.parametrize("obj", [
    AtomicMeasure(((0.5, -1.25, 2.0), (3.0, 0.0, 0.125))),
    real_moments_of_measure(AtomicMeasure(((0.1, 0.2, 0.3),)), 3),
    moments_of_measure(AtomicMeasure(((0.1, 0.2, 0.3),)), BoxSpec(1, 1, 1)),
])
def test_format_roundtrip(obj):
    text = formats.dumps(obj)
    back = formats.loads(text)
    assert formats.dumps(back) == text


def test_format_errors():
    with pytest.raises(formats.FormatError):
        formats.loads('{"kind": "moments2d", "degree": 1, "entries": []}')
    with pytest.raises(formats.FormatError):
        formats.loads('{"kind": "measure", "atoms": [{"x1": 0, "x2": 0}]}')
    with pytest.raises(formats.FormatError):
        formats.loads("[1, 2")
