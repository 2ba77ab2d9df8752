import csv
import io

import pytest

from fourier_accountant import cli
from fourier_accountant.config import loads, parse_config
from fourier_accountant.errors import ConfigError

BASIC = """
mechanisms:
  - spec: binomial(N=100, p=0.5, delta=1)
    count: 5
  - spec: {kind: gaussian, sigma: 3.0}
    count: 2
grid: {L: 8.0, n: 4096}
queries:
  - delta_at: [0.5, 1.0]
  - epsilon_at: [1e-3]
"""


def _run(tmp_path, capsys, text, *args):
    path = tmp_path / "plan.yaml"
    path.write_text(text)
    code = cli.main([args[0], str(path), *args[1:]])
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_compose_rows(tmp_path, capsys):
    code, out, _ = _run(tmp_path, capsys, BASIC, "compose")
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == cli.COLUMNS
    assert [r["query"] for r in rows] == ["delta", "delta", "epsilon"]
    for r in rows:
        assert float(r["delta_lower"]) <= float(r["delta_estimate"]) <= float(r["delta_upper"])
        assert r["n"] == "4096"
    assert float(rows[2]["delta_upper"]) <= 1e-3 and rows[2]["target_delta"] == "0.001"


def test_output_deterministic_apart_from_timing(tmp_path, capsys):
    _, a, _ = _run(tmp_path, capsys, BASIC, "compose")
    _, b, _ = _run(tmp_path, capsys, BASIC, "compose")
    strip = lambda t: [{k: v for k, v in r.items() if k != "wall_ms"} for r in _rows(t)]
    assert strip(a) == strip(b)


def test_out_file_and_threads(tmp_path, capsys):
    path = tmp_path / "plan.yaml"
    path.write_text(BASIC)
    target = tmp_path / "out.csv"
    assert cli.main(["compose", str(path), "--out", str(target), "--threads", "2"]) == 0
    assert capsys.readouterr().out == ""
    assert len(_rows(target.read_text())) == 3


def test_sweep(tmp_path, capsys):
    text = BASIC + "sweep:\n  k_list: [1, 2, 4]\n"
    code, out, _ = _run(tmp_path, capsys, text, "sweep")
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == cli.SWEEP_COLUMNS
    assert [r["k"] for r in rows] == ["1", "2", "4"] * 2
    ups = [float(r["delta_upper"]) for r in rows[:3]]
    assert ups == sorted(ups)
    code, _, err = _run(tmp_path, capsys, BASIC, "sweep")
    assert code == 1 and err.startswith("CONFIG_SWEEP:")


def test_compare(tmp_path, capsys):
    text = """
mechanisms:
  - spec: gaussian(sigma=5.0)
    count: 5
  - spec: randomized_response(p=0.52)
    count: 5
grid: {L: 20.0, n: 16384}
queries:
  - delta_at: [1.0, 2.0]
"""
    code, out, _ = _run(tmp_path, capsys, text, "compare")
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == cli.COMPARE_COLUMNS
    for r in rows:
        assert float(r["rdp_delta"]) >= float(r["delta_lower"])
        assert r["gdp_delta"] == ""  # randomized response has no GDP parameter
    code, out, _ = _run(tmp_path, capsys, text + "comparators: {gdp: true}\n", "compare")
    assert all(r["rdp_delta"] == "" for r in _rows(out))


def test_auto_grid_header_and_budget(tmp_path, capsys):
    text = """
mechanisms:
  - spec: randomized_response(p=0.52)
    count: 100
grid:
  auto: {eta: 1e-6}
queries:
  - delta_at: [0.5, 1.0]
"""
    code, out, _ = _run(tmp_path, capsys, text, "compose")
    assert code == 0
    head = out.splitlines()[0]
    assert head.startswith("# grid L=") and " n=" in head
    for r in _rows(out):
        total = sum(float(r[c]) for c in ("periodisation", "truncation", "discretisation", "fft_clamp_slack"))
        assert total <= 2e-6


@pytest.mark.parametrize(
    "text,code",
    [
        ("mechanisms: []\ngrid: {L: 1.0, n: 8}\nqueries: [{delta_at: [1.0]}]\n", "CONFIG_EMPTY"),
        ("", "CONFIG_EMPTY"),
        ("mechanisms: [{spec: 'gaussian(sigma=1.0)'}]\ngrid: {L: 1.0, n: 8}\n", "CONFIG_NO_QUERY"),
        ("mechanisms: [{spec: 'gaussian(sigma=1.0)'}]\ngrid: {L: 1.0}\nqueries: [{delta_at: [1.0]}]\n", "CONFIG_SCHEMA"),
        ("mechanisms: [{spec: 'laplace(b=1.0)'}]\ngrid: {L: 1.0, n: 8}\nqueries: [{delta_at: [1.0]}]\n", "CONFIG_MECHANISM"),
        ("mechanisms: [\n", "CONFIG_PARSE"),
    ],
)
def test_config_errors_exit_1(tmp_path, capsys, text, code):
    rc, out, err = _run(tmp_path, capsys, text, "compose")
    assert rc == 1 and out == ""
    assert len(err.strip().splitlines()) == 1 and err.startswith(code + ":")


def test_missing_file_and_bad_threads(tmp_path, capsys):
    assert cli.main(["compose", str(tmp_path / "nope.yaml")]) == 1
    assert capsys.readouterr().err.startswith("CONFIG_IO:")
    path = tmp_path / "plan.yaml"
    path.write_text(BASIC)
    assert cli.main(["compose", str(path), "--threads", "0"]) == 1


def test_infeasible_exit_2(tmp_path, capsys):
    text = """
mechanisms:
  - spec: gaussian(sigma=1.0)
    count: 100
grid:
  auto: {eta: 1e-9}
queries:
  - delta_at: [1.0]
"""
    rc, _, err = _run(tmp_path, capsys, text, "compose")
    assert rc == 2 and err.startswith("INFEASIBLE")


def test_config_round_trip():
    text = BASIC + "sweep:\n  k_list: [1, 2]\ncomparators: {rdp: true, rdp_orders: [2, 4]}\nlambdas: [1.0, 2.0]\nsides: [right]\ntilt: 1.5\n"
    cfg = loads(text)
    again = loads(cfg.dumps())
    assert again.to_dict() == cfg.to_dict()
    assert parse_config(cfg.to_dict()).to_dict() == cfg.to_dict()
    assert cfg.queries[1] == ("epsilon_at", [1e-3])
    assert cfg.tilt == 1.5 and loads(BASIC).tilt == 0.0


def test_schema_rejects_unknown_keys():
    with pytest.raises(ConfigError) as exc:
        loads(BASIC + "colour: blue\n")
    assert exc.value.code == "CONFIG_SCHEMA"


def test_tilt_key(tmp_path, capsys):
    code, out, _ = _run(tmp_path, capsys, BASIC + "tilt: 2.0\n", "compose")
    assert code == 0
    _, plain, _ = _run(tmp_path, capsys, BASIC, "compose")
    for a, b in zip(_rows(out)[:2], _rows(plain)[:2]):
        assert float(a["delta_estimate"]) == pytest.approx(float(b["delta_estimate"]), rel=1e-8)
    code, _, err = _run(tmp_path, capsys, BASIC + "tilt: 200.0\n", "compose")
    assert code == 1 and err.startswith("BAD_PARAMETER:")
