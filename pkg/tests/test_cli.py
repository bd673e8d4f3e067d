import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fisherrao import __version__
from fisherrao import bounds as B
from fisherrao import cli
from fisherrao import families as F
from fisherrao import spd as S
from fisherrao.errors import CapabilityError, DomainError, InvalidInput
from conftest import GOLDEN_P0, GOLDEN_P1, GOLDEN_RHO

SPD_REQUEST = {"family": "spd(2)", "task": "dist", "points": [GOLDEN_P0.tolist(), GOLDEN_P1.tolist()]}
EXP_REQUEST = {"family": "exponential", "task": "dist", "points": [1, math.e]}
MVN_POINTS = [{"mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]},
              {"mean": [1.0, 0.5], "cov": [[2.0, 0.3], [0.3, 1.0]]}]
MVN_REQUEST = {"family": "mvn(2)", "task": "bounds", "points": MVN_POINTS}


def invoke(request, *flags, tmp_path, capsys):
    path = tmp_path / "request.json"
    path.write_text(json.dumps(request))
    code = cli.main(["--input", str(path), *flags])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExampleRequests:
    def test_spd_golden(self):
        doc = cli.run(SPD_REQUEST)
        (res,) = doc["results"]
        assert res["kind"] == "exact" and abs(res["value"] - GOLDEN_RHO) <= 1e-10

    def test_exponential(self):
        (res,) = cli.run(EXP_REQUEST)["results"]
        assert res["kind"] == "exact" and abs(res["value"] - 1.0) <= 1e-12

    def test_mvn_bounds(self):
        lo, up = cli.run(MVN_REQUEST)["results"]
        a, b = (F.mvn(2).load(p) for p in MVN_POINTS)
        (m0, S0), (m1, S1) = F.split_mean_scale(a, 2), F.split_mean_scale(b, 2)
        assert lo["kind"] == "lower" and up["kind"] == "upper"
        assert abs(lo["value"] - B.calvo_oller_lb((m0, S0), (m1, S1))) <= 1e-12
        cands = [math.sqrt(F.mvn_jeffreys((m0, S0), (m1, S1))),
                 B.pullback_birkhoff_curve((m0, S0), (m1, S1), T=257)[1]]
        assert lo["value"] <= up["value"] <= min(cands) * (1 + 1e-12)

    def test_every_result_is_labelled(self):
        for req in (SPD_REQUEST, EXP_REQUEST, MVN_REQUEST):
            for res in cli.run(req)["results"]:
                assert {"value", "kind", "method", "contract", "work"} <= set(res)

    @pytest.mark.parametrize("req", [SPD_REQUEST, EXP_REQUEST, MVN_REQUEST])
    def test_exit_zero(self, req, tmp_path, capsys):
        code, out, _ = invoke(req, tmp_path=tmp_path, capsys=capsys)
        assert code == 0 and json.loads(out)["results"]


class TestDocument:
    def test_echo_and_versions(self):
        doc = cli.run(dict(SPD_REQUEST, options={"method": "exact"}))
        assert doc["request"]["family"] == "spd(2)" and doc["request"]["options"] == {"method": "exact"}
        assert doc["version"] == __version__ and doc["format_version"] == cli.FORMAT_VERSION
        assert "closed_distance" in doc["family"]["capabilities"]

    def test_round_trip_bit_exact(self, rng):
        vals = rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, size=50)
        doc = {"results": [{"value": float(v)} for v in vals]}
        back = json.loads(cli.dumps(doc))
        assert all(r["value"] == float(v) for r, v in zip(back["results"], vals))

    def test_non_finite_is_numerical_failure(self):
        from fisherrao.errors import NumericalFailure
        with pytest.raises(NumericalFailure):
            cli.dumps({"value": float("inf")})

    def test_determinism(self):
        req = {"family": "mvn(2)", "task": "matrix", "points": MVN_POINTS + [
            {"mean": [0.3, -1.0], "cov": [[0.5, 0.1], [0.1, 0.7]]}], "options": {"method": "auto"}}
        first = subprocess.run([sys.executable, "-m", "fisherrao", "--task", "bounds"],
                               input=json.dumps(MVN_REQUEST), capture_output=True, text=True)
        second = subprocess.run([sys.executable, "-m", "fisherrao", "--task", "bounds"],
                                input=json.dumps(MVN_REQUEST), capture_output=True, text=True)
        assert first.returncode == 0 and first.stdout == second.stdout
        assert cli.dumps(cli.run(dict(req, family="spd(2)", points=[
            GOLDEN_P0.tolist(), GOLDEN_P1.tolist(), np.eye(2).tolist()]))) == cli.dumps(cli.run(dict(
                req, family="spd(2)", points=[GOLDEN_P0.tolist(), GOLDEN_P1.tolist(), np.eye(2).tolist()])))

    def test_symmetrize_warning(self):
        P = GOLDEN_P0.tolist()
        P[1][0] += 1e-12
        doc = cli.run(dict(SPD_REQUEST, points=[P, GOLDEN_P1.tolist()]))
        assert any("symmetrized" in w for w in doc["warnings"])


class TestTasks:
    def test_dist_methods(self):
        for method, tol in (("exact", 1e-12), ("metric-scaling", 1e-3), ("fdiv", 0.2)):
            (res,) = cli.run(dict(SPD_REQUEST, options={"method": method}))["results"]
            assert abs(res["value"] - GOLDEN_RHO) <= tol

    def test_dist_oracle(self):
        (res,) = cli.run(dict(SPD_REQUEST, options={"method": "oracle", "T": 256}))["results"]
        assert res["method"] == "geodesic_bvp_oracle" and abs(res["value"] - GOLDEN_RHO) <= 1e-5

    def test_approx_mult(self):
        (res,) = cli.run(dict(SPD_REQUEST, task="approx", options={"epsilon": 1e-2}))["results"]
        assert res["contract"] == "mult" and GOLDEN_RHO <= res["value"] <= 1.01 * GOLDEN_RHO * (1 + 1e-9)

    def test_approx_add(self):
        (res,) = cli.run(dict(SPD_REQUEST, task="approx", options={"delta": 1e-4}))["results"]
        assert res["contract"] == "add" and abs(res["value"] - GOLDEN_RHO) <= 1e-4

    def test_matrix(self):
        pts = [GOLDEN_P0.tolist(), GOLDEN_P1.tolist(), np.eye(2).tolist(), (3 * np.eye(2)).tolist()]
        doc = cli.run({"family": "spd(2)", "task": "matrix", "points": pts})
        M = np.array(doc["matrix"])
        assert M.shape == (4, 4) and np.allclose(M, M.T) and np.all(np.diag(M) == 0)
        assert [(r["i"], r["j"]) for r in doc["results"]] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        assert abs(M[0, 1] - GOLDEN_RHO) <= 1e-12
        # the spd(d) family carries the centered-normal Fisher scaling |log|_F / sqrt(2)
        assert abs(M[2, 3] - math.log(3)) <= 1e-12

    def test_t_grid_two_points(self):
        doc = cli.run(dict(SPD_REQUEST, task="geodesic", options={"t": [0, 1]}))
        rows = doc["curves"][0]["rows"]
        assert len(rows) == 2
        assert rows[0][1:-1] == list(S.vech(GOLDEN_P0)) and rows[1][1:-1] == list(S.vech(GOLDEN_P1))

    def test_spd_geodesic_length(self):
        rows = cli.run(dict(SPD_REQUEST, task="geodesic", options={"T": 10}))["curves"][0]["rows"]
        assert len(rows) == 11 and abs(rows[-1][-1] - GOLDEN_RHO) <= 1e-6

    def test_pullback_endpoints(self):
        doc = cli.run({"family": "mvn(2)", "task": "geodesic", "points": MVN_POINTS,
                       "options": {"method": "pullback", "T": 8}})
        rows = doc["curves"][0]["rows"]
        a, b = (F.mvn(2).load(p) for p in MVN_POINTS)
        assert rows[0][1:-1] == list(a) and rows[-1][1:-1] == list(b)
        lo = B.calvo_oller_lb(F.split_mean_scale(a, 2), F.split_mean_scale(b, 2))
        assert rows[-1][-1] >= lo * (1 - 1e-9)

    def test_lerp_curve(self):
        doc = cli.run(dict(EXP_REQUEST, task="geodesic", options={"method": "lerp", "T": 4}))
        rows = doc["curves"][0]["rows"]
        assert [r[1] for r in rows] == [1.0, 1 + (math.e - 1) / 4, 1 + (math.e - 1) / 2,
                                        1 + 3 * (math.e - 1) / 4, math.e]

    def test_csv_output(self, tmp_path, capsys):
        code, out, _ = invoke(dict(SPD_REQUEST, task="geodesic"), "-T", "10",
                              tmp_path=tmp_path, capsys=capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and rows[0] == ["t", "theta0", "theta1", "theta2", "length"]
        assert len(rows) == 12
        assert [float(x) for x in rows[1][1:4]] == list(S.vech(GOLDEN_P0))
        assert [float(x) for x in rows[-1][1:4]] == list(S.vech(GOLDEN_P1))
        assert abs(float(rows[-1][-1]) - GOLDEN_RHO) <= 1e-6

    def test_flags_override(self, tmp_path, capsys):
        code, out, _ = invoke(dict(SPD_REQUEST, family="nope"), "--family", "exponential",
                              tmp_path=tmp_path, capsys=capsys)
        assert code == 2
        code, out, _ = invoke(EXP_REQUEST, "--task", "approx", "--epsilon", "0.01",
                              tmp_path=tmp_path, capsys=capsys)
        assert code == 0 and json.loads(out)["results"][0]["contract"] == "mult"

    def test_output_file(self, tmp_path, capsys):
        out = tmp_path / "out.json"
        code, _, _ = invoke(EXP_REQUEST, "--output", str(out), tmp_path=tmp_path, capsys=capsys)
        assert code == 0 and json.loads(out.read_text())["results"][0]["value"] == 1.0

    def test_timing_flag(self, tmp_path, capsys):
        _, out, _ = invoke(EXP_REQUEST, "--timing", tmp_path=tmp_path, capsys=capsys)
        assert json.loads(out)["timing"]["seconds"] >= 0
        _, out, _ = invoke(EXP_REQUEST, tmp_path=tmp_path, capsys=capsys)
        assert "timing" not in json.loads(out)

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["--version"])
        assert info.value.code == 0
        out = capsys.readouterr().out
        assert __version__ in out and f"format {cli.FORMAT_VERSION}" in out


class TestErrors:
    @pytest.mark.parametrize("request_, code", [
        (dict(SPD_REQUEST, family="foo(2)"), 2),
        (dict(SPD_REQUEST, family="spd(2"), 2),
        (dict(SPD_REQUEST, task="sing"), 2),
        (dict(SPD_REQUEST, points=[GOLDEN_P0.tolist()]), 2),
        (dict(EXP_REQUEST, points=[1, -2]), 3),
        (dict(SPD_REQUEST, points=[[[1, 2], [2, 1]], GOLDEN_P1.tolist()]), 3),
        ({"family": "mvn(2)", "task": "dist", "points": MVN_POINTS, "options": {"method": "exact"}}, 4),
        ({"family": "student(3)", "task": "dist", "points": [[0, 1], [1, 1]],
          "options": {"method": "fdiv"}}, 4),
    ])
    def test_exit_codes(self, request_, code, tmp_path, capsys):
        got, out, err = invoke(request_, tmp_path=tmp_path, capsys=capsys)
        assert got == code
        doc = json.loads(out)
        assert doc["error"]["code"] == code and doc["error"]["message"]
        assert err.startswith("fisherrao: error:")

    def test_numerical_failure_exit(self, monkeypatch, tmp_path, capsys):
        from fisherrao.errors import ApproximationFailure

        def fail(*args, **kwargs):
            raise ApproximationFailure("bracket did not close", 1.0, 2.0, 64)
        monkeypatch.setitem(cli.A.SCHEMES, "geodesic", fail)
        code, out, _ = invoke(dict(SPD_REQUEST, task="approx"), tmp_path=tmp_path, capsys=capsys)
        err = json.loads(out)["error"]
        assert code == 5 and (err["lower"], err["upper"], err["depth"]) == (1.0, 2.0, 64)

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli.main(["--input", str(path)]) == 2
        capsys.readouterr()

    def test_missing_file(self, tmp_path, capsys):
        assert cli.main(["--input", str(tmp_path / "missing.json")]) == 2
        capsys.readouterr()

    def test_csv_for_non_curve_task(self, tmp_path, capsys):
        code, _, _ = invoke(EXP_REQUEST, "--format", "csv", tmp_path=tmp_path, capsys=capsys)
        assert code == 2

    def test_bad_t_grid(self):
        with pytest.raises(InvalidInput):
            cli.run(dict(SPD_REQUEST, task="geodesic", options={"t": [0, 1.5]}))

    def test_pullback_needs_elliptical(self):
        with pytest.raises(CapabilityError):
            cli.run(dict(SPD_REQUEST, task="geodesic", options={"method": "pullback"}))

    def test_exit_code_table(self):
        assert cli.exit_code_for(InvalidInput("x")) == 2
        assert cli.exit_code_for(DomainError("x")) == 3
        assert cli.exit_code_for(RuntimeError("x")) == 5
