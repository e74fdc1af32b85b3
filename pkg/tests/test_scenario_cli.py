import io
import random

import pytest

from adhocsec.cli import EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, emit_metrics_csv, main
from adhocsec.crypto import MacAddress
from adhocsec.scenario import (
    JoinAction,
    LeaveAction,
    RouteAction,
    Scenario,
    ScenarioError,
    SendAction,
    format_seconds,
    parse_scenario,
    parse_seconds,
    serialize_scenario,
)
from adhocsec.sim import Metrics, run
from helpers import SCENARIOS, add_random_sends, random_scenario, spec
from oracles import brute_force_mst_weight, random_connected_points

S = 1_000_000

MINIMAL = """\
# two nodes
node 0 0 0 aa:bb:cc:dd:ee:01
node 1 5 0 aa:bb:cc:dd:ee:02
at 1.5 send 0 1 cafe
"""


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(map(str, argv)), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="s.scn"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_minimal_defaults(self):
        sc = parse_scenario(MINIMAL)
        assert (sc.seed, sc.range, sc.hello_interval, sc.drop_prob) == (0, 250.0, S, 0.0)
        assert sc.latency_per_unit == 10.0
        assert [n.id for n in sc.nodes] == [0, 1]
        assert sc.nodes[1].mac == MacAddress.parse("aa:bb:cc:dd:ee:02")
        assert sc.script == [SendAction(1_500_000, 0, 1, b"\xca\xfe")]

    def test_all_directives(self):
        sc = parse_scenario(MINIMAL + "seed 4\nrange 9.5\nhello_interval 0.25\n"
                            "latency_per_unit 0.000002\ndrop_prob 0.3\n"
                            "at 2 join 2 10 0 aa:bb:cc:dd:ee:03\nat 3 route 0 2\nat 4 leave 2\n")
        assert (sc.seed, sc.range, sc.hello_interval, sc.drop_prob) == (4, 9.5, 250_000, 0.3)
        assert sc.latency_per_unit == pytest.approx(2.0)
        assert [type(a) for a in sc.script] == [SendAction, JoinAction, RouteAction, LeaveAction]

    def test_equal_times_keep_file_order(self):
        sc = parse_scenario(MINIMAL + "at 1 send 1 0 01\nat 1 send 0 1 02\n")
        assert [a.payload for a in sc.script] == [b"\x01", b"\x02", b"\xca\xfe"]

    def test_comments_and_blank_lines(self):
        assert parse_scenario("\n   # nothing\n\n").nodes == []

    def test_malformed_mac_position(self):
        with pytest.raises(ScenarioError) as exc:
            parse_scenario("seed 1\nnode 0 1 2 zz:00:00:00:00:00\n")
        assert (exc.value.line, exc.value.column) == (2, 12)
        assert str(exc.value).startswith("line 2, column 12:")

    @pytest.mark.parametrize("text, line", [
        ("bogus 1\n", 1),
        ("node 0 0 0 aa:bb:cc:dd:ee:01\nnode 0 1 1 aa:bb:cc:dd:ee:02\n", 2),
        ("node 0 0 0 aa:bb:cc:dd:ee:01\nnode 1 1 1 aa:bb:cc:dd:ee:01\n", 2),
        (MINIMAL + "at -1 send 0 1 00\n", 5),
        (MINIMAL + "at 1 send 0 7 00\n", 5),
        (MINIMAL + "at 1 send 0 0 00\n", 5),
        (MINIMAL + "at 1 send 0 1 xyz\n", 5),
        (MINIMAL + "at 1 teleport 0\n", 5),
        (MINIMAL + "at 0.0000001 route 0 1\n", 5),
        ("drop_prob 1.5\n", 1),
        ("range 0\n", 1),
        ("seed 1\nseed 2\n", 2),
        ("node 0 0 0\n", 1),
        ("node 0 nan 0 aa:bb:cc:dd:ee:01\n", 1),
        (MINIMAL + "at 2 leave 1\nat 3 send 0 1 00\n", 6),
    ])
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert exc.value.line == line

    def test_seconds(self):
        assert parse_seconds("1.000001") == 1_000_001
        assert parse_seconds("0") == 0
        assert format_seconds(1_500_000) == "1.5"
        assert format_seconds(3 * S) == "3"
        with pytest.raises(ValueError):
            parse_seconds("soon")

    def test_round_trip(self):
        rng = random.Random(8)
        sc = random_scenario(rng, 6, drop_prob=0.25, hello_interval=750_000, latency_per_unit=3.0)
        add_random_sends(sc, rng, 10, S, 123_457)
        sc.script.append(JoinAction(4 * S, spec(9, 1.25, 2.5)))
        sc.script.append(RouteAction(5 * S, 0, 9))
        sc.script.append(LeaveAction(6 * S, 9))
        text = serialize_scenario(sc)
        back = parse_scenario(text)
        assert back == sc
        assert serialize_scenario(back) == text

    def test_validate_direct(self):
        sc = Scenario(nodes=[spec(0, 0, 0)], script=[SendAction(S, 0, 1, b"")])
        with pytest.raises(ScenarioError):
            sc.validate()


class TestRunCommand:
    def test_chain_demo(self, tmp_path):
        trace, metrics = tmp_path / "t.txt", tmp_path / "m.csv"
        code, out, _ = cli("run", SCENARIOS / "chain3.scn", "--trace", trace, "--metrics", metrics)
        assert code == EXIT_OK
        assert "sends: 1" in out and "deliveries: 1" in out
        assert "\tdeliver\t2\t" in trace.read_text()
        rows = metrics.read_text().splitlines()
        assert rows[0] == "window_start,sent_pkts,recv_pkts,sent_bytes,recv_bytes"
        assert sum(int(r.split(",")[1]) for r in rows[1:]) == 1

    def test_outputs_byte_stable(self, tmp_path):
        blobs = []
        for k in range(2):
            t, m = tmp_path / f"t{k}", tmp_path / f"m{k}"
            assert cli("run", SCENARIOS / "ten_nodes.scn", "--trace", t, "--metrics", m)[0] == 0
            blobs.append((t.read_bytes(), m.read_bytes()))
        assert blobs[0] == blobs[1]
        assert b"\r\n" not in blobs[0][0]

    def _deliveries(self, path, *extra):
        code, out, _ = cli("run", path, *extra)
        assert code == 0
        return int(next(l for l in out.splitlines() if l.startswith("deliveries")).split()[1])

    def test_seed_override(self, tmp_path):
        rng = random.Random(3)
        sc = random_scenario(rng, 8, drop_prob=0.4)
        add_random_sends(sc, rng, 80, S, S // 50)
        lossy = write(tmp_path, serialize_scenario(sc))
        counts = {self._deliveries(lossy, "--seed", s) for s in range(6)}
        assert len(counts) > 1
        sc.drop_prob = 0.0
        clean = write(tmp_path, serialize_scenario(sc), "clean.scn")
        assert {self._deliveries(clean, "--seed", s) for s in range(3)} == {80}

    def test_missing_file_writes_nothing(self, tmp_path):
        trace = tmp_path / "t.txt"
        code, out, err = cli("run", tmp_path / "nope.scn", "--trace", trace)
        assert code == EXIT_INPUT and "nope.scn" in err
        assert not trace.exists()

    def test_invalid_file(self, tmp_path):
        code, _, err = cli("run", write(tmp_path, "node 0 0 0 bad\n"))
        assert code == EXIT_INPUT and "line 1, column 12" in err

    def test_partition_is_runtime_error(self, tmp_path):
        p = write(tmp_path, "range 1\nnode 0 0 0 aa:bb:cc:dd:ee:01\nnode 1 5 0 aa:bb:cc:dd:ee:02\n")
        trace = tmp_path / "t.txt"
        assert cli("run", p, "--trace", trace)[0] == EXIT_RUNTIME
        assert not trace.exists()

    def test_bad_window(self, tmp_path):
        assert cli("run", SCENARIOS / "chain3.scn", "--window", "0")[0] == EXIT_INPUT

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli("frobnicate")
        assert exc.value.code == 2


class TestTreeCommand:
    def test_triangle(self):
        code, out, _ = cli("tree", SCENARIOS / "triangle.scn")
        assert code == 0
        assert out.splitlines() == [
            "edge 0 1 1.000000", "edge 0 2 1.000000",
            "neighbors 0: 1 2", "neighbors 1: 0", "neighbors 2: 0",
            "total_weight 2.000000"]

    def test_single_node(self, tmp_path):
        code, out, _ = cli("tree", write(tmp_path, "node 3 1 1 aa:bb:cc:dd:ee:01\n"))
        assert code == 0
        assert out.splitlines() == ["neighbors 3:", "total_weight 0.000000"]

    @pytest.mark.parametrize("seed", range(3))
    def test_against_brute_force(self, tmp_path, seed):
        rng = random.Random(seed)
        pts = random_connected_points(rng, 8, 100, 50)
        sc = Scenario(range=50.0, nodes=[spec(i, x, y) for i, (x, y) in enumerate(pts)])
        code, out, _ = cli("tree", write(tmp_path, serialize_scenario(sc)))
        lines = out.splitlines()
        assert code == 0 and sum(l.startswith("edge") for l in lines) == 7
        total = float(lines[-1].split()[1])
        assert total == pytest.approx(brute_force_mst_weight(pts, 50), abs=1e-6)

    def test_partition(self, tmp_path):
        p = write(tmp_path, "range 1\nnode 0 0 0 aa:bb:cc:dd:ee:01\nnode 1 5 0 aa:bb:cc:dd:ee:02\n")
        code, _, err = cli("tree", p)
        assert code == EXIT_RUNTIME and "error" in err


class TestValidateCommand:
    def test_ok(self):
        code, out, _ = cli("validate", SCENARIOS / "churn.scn")
        assert code == 0 and out.strip() == "ok: 5 nodes, 6 actions"

    def test_bad(self, tmp_path):
        assert cli("validate", write(tmp_path, "seed x\n"))[0] == EXIT_INPUT


class TestMetricsCsv:
    def test_zero_traffic(self):
        text = emit_metrics_csv(Metrics(window=S, end_time=3 * S))
        rows = text.splitlines()[1:]
        assert rows and all(r.split(",")[1:] == ["0"] * 4 for r in rows)
        assert [r.split(",")[0] for r in rows][:2] == ["0", "1"]

    def test_sums_and_window_halving(self):
        rng = random.Random(6)
        sc = random_scenario(rng, 10, drop_prob=0.2)
        add_random_sends(sc, rng, 60, S, S // 15)
        res = run(sc)

        def table(window):
            return [list(map(float, r.split(","))) for r in
                    emit_metrics_csv(res.metrics, window).splitlines()[1:]]

        full, half = table(S), table(S // 2)
        sums = lambda t: [sum(r[k] for r in t) for k in range(1, 5)]
        assert sums(full) == sums(half)
        assert sums(full)[0] == 60 and sums(full)[1] == res.metrics.received_count
        assert abs(len(half) - 2 * len(full)) <= 1
