import json
import hashlib
from pathlib import Path

import numpy as np
import pytest

from spinbench.cli import main


def run(args):
    return main(args)


def hash_tree(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


class TestSpectrumCommand:
    def test_fes4_csv_contains_excitation(self, tmp_path):
        out = tmp_path / "s"
        assert run(["spectrum", "--preset", "fes4",
                    "--outdir", str(out)]) == 0
        csv = (out / "spectrum_fes4.csv").read_text()
        energies = [float(line.split(",")[0])
                    for line in csv.strip().splitlines()[1:]]
        exc = [e - energies[0] for e in energies]
        assert any(abs(x - 0.340) < 1e-3 for x in exc)
        assert (out / "levels_fes4.svg").exists()
        assert (out / "manifest.json").exists()

    def test_fes8_first_triplet(self, tmp_path):
        out = tmp_path / "s"
        assert run(["spectrum", "--preset", "fes8",
                    "--outdir", str(out)]) == 0
        csv = (out / "spectrum_fes8.csv").read_text()
        rows = [line.split(",") for line in csv.strip().splitlines()[1:]]
        e0 = float(rows[0][0])
        first = rows[1]
        assert abs(float(first[0]) - e0 - 0.917) < 1e-3
        assert first[2] == "2"  # 2S = 2, a triplet

    def test_custom_topology_two_site(self, tmp_path):
        topo_file = tmp_path / "two_site.json"
        topo_file.write_text(
            '{"n_sites": 2, "bonds": [[0, 1, "generic"]]}')
        out = tmp_path / "s"
        assert run(["spectrum", "--topology", str(topo_file),
                    "--outdir", str(out)]) == 0
        csv = (out / "spectrum_two_site.csv").read_text()
        energies = [float(line.split(",")[0])
                    for line in csv.strip().splitlines()[1:]]
        assert abs((energies[1] - energies[0]) - 1.0) < 1e-9

    def test_unknown_preset_is_config_error(self, tmp_path):
        assert run(["spectrum", "--preset", "nosuch",
                    "--outdir", str(tmp_path)]) == 2


class TestStaticCommand:
    def test_fes4_static_matches_exact_within_tolerance(self, tmp_path):
        out = tmp_path / "st"
        assert run(["static", "--preset", "fes4", "--beta", "2",
                    "--shots", "0", "--outdir", str(out)]) == 0
        rows = (out / "static_fes4.csv").read_text().strip().splitlines()[1:]
        for row in rows:
            _, val, _, exact = row.split(",")
            assert abs(float(val) - float(exact)) < 0.05


class TestThermoCommand:
    def test_kh6_two_peaks(self, tmp_path):
        out = tmp_path / "t"
        assert run(["thermo", "--preset", "kh6", "--Tmin", "0.2",
                    "--Tmax", "10", "--outdir", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        peaks = manifest["results"]["peaks_exact"]
        assert len(peaks) == 2
        assert abs(peaks[0][0] - 1.0) <= 0.5
        assert 5.0 <= peaks[1][0] <= 8.0


class TestDynamicsCommand:
    def test_fes4_staged_outputs(self, tmp_path):
        out = tmp_path / "d"
        code = run(["dynamics", "--preset", "fes4", "--beta", "2",
                    "--noise", "0.005", "--mitigation", "ro,ps",
                    "--t-max", "1.5", "--dt", "0.5",
                    "--basis-subset", "2", "--shots", "0",
                    "--realtime", "trotter", "--outdir", str(out)])
        assert code == 0
        for stage in ("raw", "ro", "ps"):
            assert (out / f"dynamics_fes4_{stage}.csv").exists()
            assert (out / f"spectrum_fes4_{stage}.csv").exists()
        assert (out / "dynamics_fes4_exact.csv").exists()
        assert (out / "dynamics_fes4.svg").exists()

    def test_manifest_rerun_reproduces_files(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        args = ["dynamics", "--preset", "fes4", "--beta", "2",
                "--noise", "0.0075", "--mitigation", "none",
                "--t-max", "0.75", "--dt", "0.25", "--basis-subset", "2",
                "--shots", "1000", "--realtime", "trotter"]
        assert run(args + ["--outdir", str(out1)]) == 0
        # rerun from the emitted manifest
        manifest = out1 / "manifest.json"
        assert run(["dynamics", "--config", str(manifest),
                    "--outdir", str(out2)]) == 0
        h1, h2 = hash_tree(out1), hash_tree(out2)
        for key in h1:
            if key == "manifest.json":
                continue  # embeds the differing outdir paths
            assert h1[key] == h2[key], key


class TestRecompileCommand:
    def test_fes4_budget_report(self, tmp_path):
        out = tmp_path / "r"
        code = run(["recompile", "--preset", "fes4", "--beta", "2",
                    "--t-max", "1.0", "--outdir", str(out)])
        assert code == 0
        rep = json.loads((out / "recompile_fes4.json").read_text())
        assert rep["two_qubit"] <= 22
        assert rep["combined_fidelity"] > 0.9
