import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddle_vr.dataio import (
    FEATURE_MODELS,
    DataFormatError,
    TrajectoryBatch,
    Xoshiro256,
    generate_trajectories,
    load_trace,
    load_trajectories,
    run_summary,
    save_summary,
    save_trace,
    save_trajectories,
    trajectory_header,
)
from saddle_vr.problems import random_quadratic
from saddle_vr.solvers import TRACE_COLUMNS, SolverConfig, TraceRow, run

DATA = Path(__file__).parent / "data"

# first outputs of the xoshiro256** reference C code, seeded through splitmix64
REFERENCE = {
    0: [0x99EC5F36CB75F2B4, 0xBF6E1F784956452A, 0x1A5F849D4933E6E0, 0x6AA594F1262D2D2C,
        0xBBA5AD4A1F842E59],
    1: [0xB3F2AF6D0FC710C5, 0x853B559647364CEA, 0x92F89756082A4514, 0x642E1C7BC266A3A7,
        0xB27A48E29A233673],
    12345678901234567: [0x608009D9E142CBEE, 0x5A3F4C66459ABA64, 0x3168C368666337F6,
                        0xCC2BA4E8C36F2137, 0x58332BCC7371FF5B],
}


@pytest.mark.parametrize("seed", sorted(REFERENCE))
def test_xoshiro_reference_vectors(seed):
    rng = Xoshiro256(seed)
    assert [rng.next_u64() for _ in range(5)] == REFERENCE[seed]


def test_uniform_uses_top_53_bits():
    rng = Xoshiro256(0)
    expected = [(x >> 11) / 2.0**53 for x in REFERENCE[0][:3]]
    assert [rng.uniform() for _ in range(3)] == expected


def test_normals_are_box_muller_pairs():
    u = [(x >> 11) / 2.0**53 for x in REFERENCE[0][:4]]
    expected = []
    for a, b in ((u[0], u[1]), (u[2], u[3])):
        r = math.sqrt(-2.0 * math.log(1.0 - a))
        expected += [r * math.cos(2 * math.pi * b), r * math.sin(2 * math.pi * b)]
    rng = Xoshiro256(0)
    assert [rng.normal() for _ in range(4)] == expected
    assert Xoshiro256(0).normals(4).tolist() == expected


def test_seed_is_reduced_modulo_2_64():
    assert Xoshiro256(2**64 + 1).next_u64() == REFERENCE[1][0]


def test_normal_moments():
    x = Xoshiro256(42).normals(20000)
    assert abs(x.mean()) < 0.03
    assert abs(x.std() - 1.0) < 0.03


def test_generate_follows_documented_draw_order():
    n, d = 3, 2
    batch = generate_trajectories(7, n, d, eta=0.5, noise=0.1)
    rng = Xoshiro256(7)
    w = rng.normals(d)
    s = 1 / math.sqrt(d)
    for i in range(n):
        phi = s * rng.normals(d)
        phin = s * rng.normals(d)
        eps = rng.normal()
        assert batch.phi[i].tolist() == phi.tolist()
        assert batch.phi_next[i].tolist() == phin.tolist()
        assert batch.rewards[i] == pytest.approx(phi @ w + 0.1 * eps, rel=1e-15)
    assert batch.eta == 0.5


def test_generate_frozen_values():
    batch = generate_trajectories(7, 3, 2, eta=0.5)
    assert batch.rewards.tolist() == [-0.5916627866929047, 0.468830017803627, -2.155957947773412]
    assert batch.phi[0].tolist() == [1.3433392446760903, -0.1602980992605227]
    assert batch.phi_next[2].tolist() == [-0.7188681180579264, -0.28922336244863545]


def test_random_walk_and_weights():
    batch = generate_trajectories(3, 50, 4, feature_model="random_walk", step=0.01,
                                  noise=0.0, weights=2.0)
    assert np.abs(batch.phi_next - batch.phi).max() < 0.1
    np.testing.assert_allclose(batch.rewards, batch.phi @ np.full(4, 2.0), rtol=1e-14)
    assert FEATURE_MODELS == ("gaussian", "random_walk")


@pytest.mark.parametrize("kwargs", [dict(n=0), dict(d=0), dict(feature_model="ar1"),
                                    dict(noise=-1.0), dict(eta=1.0)])
def test_generate_rejects(kwargs):
    args = dict(seed=0, n=3, d=2)
    args.update(kwargs)
    with pytest.raises(ValueError):
        generate_trajectories(**args)


def test_generate_is_deterministic():
    assert generate_trajectories(5, 20, 3) == generate_trajectories(5, 20, 3)
    assert generate_trajectories(5, 20, 3) != generate_trajectories(6, 20, 3)


def test_batch_is_read_only_and_bitwise_equal():
    b = TrajectoryBatch(rewards=[0.0], phi=[[1.0]], phi_next=[[0.0]], eta=0.5)
    with pytest.raises(ValueError):
        b.phi[0, 0] = 2.0
    assert b != TrajectoryBatch(rewards=[-0.0], phi=[[1.0]], phi_next=[[0.0]], eta=0.5)
    with pytest.raises(ValueError):
        TrajectoryBatch(rewards=[0.0, 1.0], phi=[[1.0]], phi_next=[[0.0]], eta=0.5)


def test_trajectory_round_trip_lossless(tmp_path):
    batch = generate_trajectories(11, 40, 5, eta=0.95)
    path = tmp_path / "t.csv"
    save_trajectories(path, batch)
    assert load_trajectories(path) == batch
    save_trajectories(tmp_path / "u.csv", load_trajectories(path))
    assert (tmp_path / "u.csv").read_bytes() == path.read_bytes()


@settings(max_examples=50, deadline=None)
@given(vals=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3),
       eta=st.floats(0.0, 0.999999))
def test_trajectory_round_trip_any_float(tmp_path_factory, vals, eta):
    batch = TrajectoryBatch(rewards=[vals[0]], phi=[[vals[1]]], phi_next=[[vals[2]]], eta=eta)
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    save_trajectories(path, batch)
    assert load_trajectories(path) == batch


def test_hand_written_fixture():
    batch = load_trajectories(DATA / "tiny_trajectories.csv")
    assert (batch.n, batch.d, batch.eta) == (2, 1, 0.9)
    assert batch.rewards.tolist() == [0.5, -1.0]
    assert batch.phi.tolist() == [[1.0], [2.0]]
    assert batch.phi_next.tolist() == [[0.25], [0.5]]


def test_trajectory_golden_header(tmp_path):
    golden = (DATA / "trajectory_header_d3.golden").read_text().strip()
    assert ",".join(trajectory_header(3)) == golden
    save_trajectories(tmp_path / "t.csv", generate_trajectories(0, 2, 3))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("# n=2 d=3 eta=0.95")
    assert lines[1] == golden


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("n=2 d=1 eta=0.9\n", 1),
    ("# n=2 d=x eta=0.9\n", 1),
    ("# n=1 d=1 eta=0.9\nr,phi_0,phin_1\n1,2,3\n", 2),
    ("# n=2 d=1 eta=0.9\nr,phi_0,phin_0\n1,2,3\n1,2\n", 4),
    ("# n=2 d=1 eta=0.9\nr,phi_0,phin_0\n1,2,3\n1,abc,3\n", 4),
    ("# n=3 d=1 eta=0.9\nr,phi_0,phin_0\n1,2,3\n1,2,3\n", 1),
    ("# n=1 d=1 eta=1.5\nr,phi_0,phin_0\n1,2,3\n", 1),
])
def test_malformed_trajectories_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataFormatError, match=f"^line {line}:"):
        load_trajectories(path)


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_trajectories(tmp_path / "absent.csv")


def test_trace_golden_header_and_round_trip(tmp_path):
    golden = (DATA / "trace_header.golden").read_text().strip()
    assert ",".join(TRACE_COLUMNS) == golden
    prob = random_quadratic(5, 1, 1, 0.5, 5.0, rng=0)
    res = run(prob, SolverConfig(epochs=3, trace_every=1))
    path = tmp_path / "trace.csv"
    save_trace(path, res.rows)
    assert path.read_text().splitlines()[0] == golden
    back = load_trace(path)
    assert back == res.rows


def test_trace_without_timing_is_reproducible(tmp_path):
    prob = random_quadratic(5, 1, 1, 0.5, 5.0, rng=0)
    cfg = SolverConfig(method="saga", gamma=0.05, epochs=5, seed=3)
    save_trace(tmp_path / "a.csv", run(prob, cfg), include_timing=False)
    save_trace(tmp_path / "b.csv", run(prob, cfg), include_timing=False)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = (tmp_path / "a.csv").read_text().splitlines()[1:]
    assert all(r.endswith(",") for r in rows)
    # saga has no Lyapunov column and this problem has no primal loss
    assert rows[0].split(",")[3:5] == ["", ""]


def test_empty_trace_is_header_only(tmp_path):
    save_trace(tmp_path / "e.csv", [])
    assert (tmp_path / "e.csv").read_text() == ",".join(TRACE_COLUMNS) + "\n"
    assert load_trace(tmp_path / "e.csv") == []


@pytest.mark.parametrize("text", [
    "iter,grad_evals\n",
    "iter,grad_evals,dist_sq,lyapunov,primal_gap,wall_seconds\n1,2\n",
    "iter,grad_evals,dist_sq,lyapunov,primal_gap,wall_seconds\n1.5,2,1,,,\n",
    "iter,grad_evals,dist_sq,lyapunov,primal_gap,wall_seconds\n,2,1,,,\n",
])
def test_malformed_trace(tmp_path, text):
    (tmp_path / "t.csv").write_text(text)
    with pytest.raises(DataFormatError):
        load_trace(tmp_path / "t.csv")


def test_trace_nan_and_missing_cells(tmp_path):
    rows = [TraceRow(iter=0, grad_evals=0, dist_sq=math.nan, lyapunov=None, primal_gap=1.5)]
    save_trace(tmp_path / "t.csv", rows)
    assert (tmp_path / "t.csv").read_text().splitlines()[1].startswith("0,0,nan,,1.5,")
    back = load_trace(tmp_path / "t.csv")[0]
    assert math.isnan(back.dist_sq) and back.lyapunov is None and back.primal_gap == 1.5


def test_summary_golden_keys_and_nulls(tmp_path):
    prob = random_quadratic(5, 1, 1, 0.5, 5.0, rng=0)
    res = run(prob, SolverConfig(epochs=2), oracle=False)
    summary = run_summary(res, alpha_hat=None)
    save_summary(tmp_path / "s.json", summary)
    loaded = json.loads((tmp_path / "s.json").read_text())
    assert sorted(loaded) == (DATA / "summary_keys.golden").read_text().split()
    assert loaded["final_dist_sq"] is None
    assert loaded["method"] == "point_saga"
    assert loaded["grad_evals"] == 10
    assert loaded["config"]["gamma"] == "auto"
    assert SolverConfig.from_dict(loaded["config"]) == res.config
