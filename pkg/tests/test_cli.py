"""Tests for the command-line interface and its file formats."""

import json
import math

import numpy as np
import pytest

from qheat import cli, tls


def write_spec(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


def base_spec(**overrides):
    spec = {
        "system": {"kind": "tls", "energy": 1.0, "a_sq": 0.25, "excited_pop": 0.3},
        "model": {"kind": "fixed", "tau_bar": 1.0},
        "schedule": {"m_count": 5},
        "beta": 1.0,
        "seed": 99,
        "n_traj": 1500,
    }
    spec.update(overrides)
    return spec


def read_csv(path):
    metadata, columns, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            metadata[key] = value
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return metadata, columns, rows


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_spec(tmp_path, base_spec())
        outs = []
        for name in ("one.csv", "two.csv"):
            out = tmp_path / name
            assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_threads_do_not_change_data(self, tmp_path):
        cfg = write_spec(tmp_path, base_spec())
        rows = []
        for threads, name in ((1, "t1.csv"), (3, "t3.csv")):
            out = tmp_path / name
            assert (
                cli.main(
                    ["simulate", "--config", cfg, "--threads", str(threads), "--out", str(out)]
                )
                == 0
            )
            rows.append(read_csv(out)[2])
        assert rows[0] == rows[1]

    def test_output_structure(self, tmp_path):
        cfg = write_spec(tmp_path, base_spec())
        out = tmp_path / "out.csv"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        metadata, columns, rows = read_csv(out)
        assert columns == ["quantity", "arg", "value", "error"]
        assert metadata["seed"] == "99"
        assert "config" in metadata and "config_hash" in metadata
        atoms = [r for r in rows if r[0] == "p_atom"]
        assert sum(float(r[2]) for r in atoms) == pytest.approx(1.0, abs=1e-12)
        assert {float(r[1]) for r in atoms} <= {-2.0, 0.0, 2.0}
        exp_rows = [r for r in rows if r[0] == "exp_avg"]
        assert len(exp_rows) == 1
        moments = [r for r in rows if r[0] == "moment"]
        assert [r[1] for r in moments] == ["1", "2"]

    def test_seed_override_recorded(self, tmp_path):
        cfg = write_spec(tmp_path, base_spec())
        out = tmp_path / "out.csv"
        assert cli.main(["simulate", "--config", cfg, "--seed", "777", "--out", str(out)]) == 0
        metadata, _, _ = read_csv(out)
        assert metadata["seed"] == "777"

    def test_total_time_schedule(self, tmp_path):
        cfg = write_spec(tmp_path, base_spec(schedule={"total_time": 4.0}, n_traj=200))
        out = tmp_path / "out.csv"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0

    def test_energy_basis_measurements_leave_no_heat(self, tmp_path):
        spec = base_spec(system={"kind": "tls", "energy": 1.0, "a_sq": 0.0, "excited_pop": 0.3})
        out = tmp_path / "out.csv"
        assert cli.main(["simulate", "--config", write_spec(tmp_path, spec), "--out", str(out)]) == 0
        _, _, rows = read_csv(out)
        atoms = [r for r in rows if r[0] == "p_atom"]
        assert [(float(r[1]), float(r[2])) for r in atoms] == [(0.0, 1.0)]


class TestExact:
    def test_thermal_values(self, tmp_path):
        c_th = tls.thermal_excited_pop(1.0, 1.0)
        spec = base_spec(
            system={"kind": "tls", "energy": 1.0, "a_sq": 0.25, "excited_pop": c_th},
            u_grid=[0.0, 1.0],
            moments=[1, 2],
        )
        out = tmp_path / "out.csv"
        assert cli.main(["exact", "--config", write_spec(tmp_path, spec), "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns == ["quantity", "arg", "value", "aux"]
        atoms = [r for r in rows if r[0] == "p_atom"]
        assert sum(float(r[2]) for r in atoms) == pytest.approx(1.0, abs=1e-10)
        g0 = [r for r in rows if r[0] == "char_fn" and float(r[1]) == 0.0][0]
        assert float(g0[2]) == pytest.approx(1.0, abs=1e-12)
        assert float(g0[3]) == pytest.approx(0.0, abs=1e-12)
        exp_avg = [r for r in rows if r[0] == "exp_avg"][0]
        assert float(exp_avg[2]) == pytest.approx(1.0, abs=1e-10)

    def test_matrix_system_round_trip(self, tmp_path):
        # A qubit given explicitly as matrices: symmetric observable basis.
        s = 1 / math.sqrt(2)
        spec = base_spec(
            system={
                "kind": "matrix",
                "hamiltonian": [[[-1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
                "basis": [[[s, 0.0], [s, 0.0]], [[-s, 0.0], [s, 0.0]]],
                "rho0": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]],
            },
            u_grid=[0.0],
        )
        out = tmp_path / "out.csv"
        assert cli.main(["exact", "--config", write_spec(tmp_path, spec), "--out", str(out)]) == 0

    def test_enumeration_cap_exit_code(self, tmp_path):
        spec = base_spec(
            model={"kind": "annealed", "values": [0.1, 0.9], "probs": [0.5, 0.5]},
            schedule={"m_count": 24},
        )
        assert cli.main(["exact", "--config", write_spec(tmp_path, spec)]) == cli.ENUMERATION_ERROR


class TestConfigErrors:
    def test_missing_field(self, tmp_path, capsys):
        spec = base_spec()
        del spec["system"]["energy"]
        code = cli.main(["simulate", "--config", write_spec(tmp_path, spec)])
        assert code == cli.CONFIG_ERROR
        assert "system.energy" in capsys.readouterr().err

    def test_bad_probabilities_named(self, tmp_path, capsys):
        spec = base_spec(model={"kind": "quenched", "values": [0.1, 0.9], "probs": [0.6, 0.6]})
        code = cli.main(["simulate", "--config", write_spec(tmp_path, spec)])
        assert code == cli.CONFIG_ERROR
        assert "probabilities" in capsys.readouterr().err

    def test_invalid_json_reports_position(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"system": }')
        code = cli.main(["simulate", "--config", str(path)])
        assert code == cli.CONFIG_ERROR
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == cli.CONFIG_ERROR

    def test_unknown_system_kind(self, tmp_path, capsys):
        spec = base_spec(system={"kind": "spin-chain"})
        assert cli.main(["simulate", "--config", write_spec(tmp_path, spec)]) == cli.CONFIG_ERROR
        assert "system.kind" in capsys.readouterr().err


class TestFigures:
    def test_fig1_lines_and_crossing(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert cli.main(["figure", "fig1", "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns[0] == "c1"
        flat = [float(r[columns.index("g_a0.0")]) for r in rows]
        assert max(abs(v - 1.0) for v in flat) < 1e-12
        c_th = tls.thermal_excited_pop(1.0, 1.0)
        cross = [r for r in rows if abs(float(r[0]) - c_th) < 1e-12]
        assert len(cross) == 1
        for a in ("0.0", "0.1", "0.5"):
            assert float(cross[0][columns.index(f"g_a{a}")]) == pytest.approx(1.0, abs=1e-10)

    def test_fig2_main_and_inset(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert cli.main(["figure", "fig2", "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert len(rows) >= 21
        out2 = tmp_path / "fig2_inset.csv"
        assert cli.main(["figure", "fig2", "--inset", "--out", str(out2)]) == 0
        _, columns2, rows2 = read_csv(out2)
        assert columns2 == ["a", "a_sq", "slope_fixed", "slope_quenched", "slope_annealed"]
        mid = [r for r in rows2 if abs(float(r[0]) - 0.0) < 1e-12][0]
        # Commuting observable: every slope vanishes.
        assert all(abs(float(v)) < 1e-12 for v in mid[2:])

    def test_fig3_columns_and_signs(self, tmp_path):
        out = tmp_path / "fig3.csv"
        assert cli.main(["figure", "fig3", "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns[0] == "mean_tau"
        assert len(columns) == 9
        # Support endpoints are disorder-free: the gap vanishes there.
        for edge in (rows[0], rows[-1]):
            assert all(float(v) == 0.0 for v in edge[1:])
        # Just inside the rapid-measurement end the noisy protocol wins.
        short = rows[1]
        assert all(float(v) < 0 for v in short[1:])

    def test_fig4_reference_curves(self, tmp_path):
        out = tmp_path / "fig4.csv"
        assert cli.main(["figure", "fig4", "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns[0] == "splitting_mean_tau"
        assert len(columns) == 6
        values = np.array([[float(v) for v in r] for r in rows])
        # energy = splitting/2 = 5, mixing 0.2: the peak heat lives between
        # the frozen-dynamics floor 4*E*a2*(1-a2) = 3.2 and E*(1 + (1-2*a2)^2)
        # = 6.8 (the alternating channel can overshoot when the mixed hop
        # probability exceeds one half at an even measurement count).
        assert np.all(values[:, 1:] >= 3.2 - 1e-9)
        assert np.all(values[:, 1:] <= 6.8 + 1e-9)
        # Degenerate-disorder columns dip to the floor at the resonant scale.
        x = values[:, 0]
        p0 = values[:, columns.index("peak_heat_p0.0")]
        near = np.abs(x - 2 * np.pi) < 0.05
        assert p0[near].min() < 3.25

    def test_fig5_slopes_increase_with_count(self, tmp_path):
        out = tmp_path / "fig5.csv"
        assert cli.main(["figure", "fig5", "--out", str(out)]) == 0
        _, columns, rows = read_csv(out)
        assert columns == ["a_sq", "slope_m2", "slope_m10", "slope_m100", "slope_limit"]
        interior = [r for r in rows if 0.05 < float(r[0]) <= 0.5]
        for r in interior:
            m2, m10, m100 = (float(r[i]) for i in (1, 2, 3))
            assert m2 <= m10 + 1e-12 <= m100 + 2e-12

    def test_figure_overrides(self, tmp_path):
        cfg = write_spec(tmp_path, {"n_traj": 50, "c1_points": 3})
        out = tmp_path / "fig1_small.csv"
        assert cli.main(["figure", "fig1", "--config", cfg, "--out", str(out)]) == 0
        _, _, rows = read_csv(out)
        assert len(rows) == 4  # 3 grid points plus the thermal crossing

    def test_figure_determinism(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            cfg = write_spec(tmp_path, {"n_traj": 100, "c1_points": 3}, name=f"{name}.json")
            assert cli.main(["figure", "fig1", "--config", cfg, "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestVerifyCommand:
    def test_quick_gate_passes(self, capsys):
        assert cli.main(["verify", "--quick"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 10
        assert "summary: 10/10" in out

    def test_seed_recorded_in_report(self, capsys):
        assert cli.main(["verify", "--quick", "--seed", "5"]) == 0
        assert "seed=5" in capsys.readouterr().out
