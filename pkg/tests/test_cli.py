"""
Tests for the morphoprot command line.

Run with: pytest tests/test_cli.py -v
"""
import csv
import io
import json
import time

import httpx
import pytest
from typer.testing import CliRunner

from morphoprot import ingest
from morphoprot.cli import app
from morphoprot.grid import BinaryGrid
from morphoprot.pipelines import Method1Params, stacked_skeleton

runner = CliRunner()

FAST = ["--resolution", "64", "--face-resolution", "128"]


class TestFetch:
    def test_warm_cache(self, tmp_path, helix_path):
        """Cached ids are reported without touching the network."""
        for pdb_id in ("2lep", "3v2j"):
            (tmp_path / f"{pdb_id}.pdb").write_text(helix_path.read_text())
        result = runner.invoke(app, ["fetch", "2lep", "3V2J", "--cache-dir", str(tmp_path)])
        assert result.exit_code == 0
        lines = result.stdout.splitlines()
        assert len(lines) == 2
        assert all(line.startswith("cached") for line in lines)

    def test_env_cache_dir(self, tmp_path, helix_path, monkeypatch):
        """MORPHOPROT_CACHE picks the cache directory."""
        monkeypatch.setenv("MORPHOPROT_CACHE", str(tmp_path))
        (tmp_path / "2lep.pdb").write_text(helix_path.read_text())
        result = runner.invoke(app, ["fetch", "2lep"])
        assert result.exit_code == 0
        assert result.stdout.startswith("cached 2lep")

    def test_invalid_id(self, tmp_path):
        result = runner.invoke(app, ["fetch", "zz!", "--cache-dir", str(tmp_path)])
        assert result.exit_code == 2
        assert "not a PDB id" in result.output

    def test_cold_cache_downloads(self, tmp_path, helix_path, monkeypatch):
        body = helix_path.read_text()
        real_client = httpx.Client

        def stub_client(**kwargs):
            return real_client(transport=httpx.MockTransport(lambda request: httpx.Response(200, text=body)))

        monkeypatch.setattr(ingest.httpx, "Client", stub_client)
        result = runner.invoke(app, ["fetch", "2lep", "--cache-dir", str(tmp_path)])
        assert result.exit_code == 0
        assert result.stdout.startswith("fetched 2lep")
        assert (tmp_path / "2lep.pdb").read_text() == body

    def test_partial_failure(self, tmp_path, helix_path, monkeypatch):
        """One bad id fails the run but the good one is still fetched."""
        (tmp_path / "2lep.pdb").write_text(helix_path.read_text())
        real_client = httpx.Client

        def stub_client(**kwargs):
            return real_client(transport=httpx.MockTransport(lambda request: httpx.Response(404)))

        monkeypatch.setattr(ingest.httpx, "Client", stub_client)
        result = runner.invoke(app, ["fetch", "2lep", "9zzz", "--cache-dir", str(tmp_path)])
        assert result.exit_code == 2
        assert "cached 2lep" in result.output
        assert "9zzz" in result.output


class TestFd:
    def test_json(self, helix_path):
        result = runner.invoke(app, ["fd", str(helix_path), "--resolution", "64"])
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["pdb_id"] == "helix"
        assert 0.0 <= data["d_p"] <= 2.0
        assert "r_squared" in data
        assert data["params"]["resolution"] == 64

    def test_csv(self, helix_path):
        result = runner.invoke(app, ["fd", str(helix_path), "--resolution", "64", "--format", "csv"])
        assert result.exit_code == 0
        rows = list(csv.reader(io.StringIO(result.stdout)))
        assert rows[0][:2] == ["pdb_id", "d_p"]
        assert rows[1][0] == "helix"

    def test_table(self, helix_path):
        result = runner.invoke(app, ["fd", str(helix_path), "--resolution", "64", "--format", "table"])
        assert result.exit_code == 0
        assert "D_p" in result.stdout

    def test_missing_file(self, tmp_path):
        result = runner.invoke(app, ["fd", str(tmp_path / "missing.pdb")])
        assert result.exit_code == 2
        assert result.output.startswith("Error:")

    def test_file_without_atoms(self, tmp_path):
        path = tmp_path / "empty.pdb"
        path.write_text("HEADER\nEND\n")
        result = runner.invoke(app, ["fd", str(path)])
        assert result.exit_code == 2
        assert "no ATOM/HETATM" in result.output

    def test_dump_dir(self, helix_path, tmp_path):
        out = tmp_path / "dump"
        result = runner.invoke(app, ["fd", str(helix_path), "--resolution", "64", "--dump-dir", str(out)])
        assert result.exit_code == 0
        stacked = BinaryGrid.from_pgm((out / "stacked.pgm").read_bytes())
        assert stacked.shape == (64, 64)
        assert len(list(out.glob("slice_*.pgm"))) == len(list(out.glob("skeleton_*.pgm")))
        assert (out / "box_counts.csv").read_text().startswith("r,n_r,log_inv_r,log_n_r")
        assert len(json.loads(result.stdout)["slices"]) == len(list(out.glob("slice_*.pgm")))

    def test_bad_option_value(self, helix_path):
        result = runner.invoke(app, ["fd", str(helix_path), "--se", "hexagon"])
        assert result.exit_code == 2


class TestCompare:
    def test_self_comparison_is_similar(self, helix_path):
        result = runner.invoke(app, ["compare", str(helix_path), str(helix_path), *FAST])
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert data["rho"] == 0.0
        assert data["delta_p"] == 0
        assert data["verdict"] == "similar"

    def test_dissimilar_exit_code(self, helix_path, strand_path):
        result = runner.invoke(app, ["compare", str(helix_path), str(strand_path), *FAST, "--format", "csv"])
        assert result.exit_code == 1
        rows = list(csv.reader(io.StringIO(result.stdout)))
        assert rows[1][0] == "helix"
        assert rows[1][2] == "strand"
        assert rows[1][6] == "dissimilar"

    def test_thresholds_from_flags(self, helix_path, strand_path):
        """Loose thresholds turn the same pair similar."""
        result = runner.invoke(app, [
            "compare", str(helix_path), str(strand_path), *FAST,
            "--rho-threshold", "10", "--delta-threshold", "100000",
        ])
        assert result.exit_code == 0

    def test_config_file(self, helix_path, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("resolution=64\nface_resolution=128\nformat=csv\n")
        result = runner.invoke(app, ["--config", str(config), "compare", str(helix_path), str(helix_path)])
        assert result.exit_code == 0
        assert result.stdout.startswith("id_1,")

    def test_config_unknown_key(self, helix_path, tmp_path):
        config = tmp_path / "run.env"
        config.write_text("colour=blue\n")
        result = runner.invoke(app, ["--config", str(config), "compare", str(helix_path), str(helix_path)])
        assert result.exit_code == 2
        assert "colour" in result.output

    @pytest.mark.slow
    def test_default_params_runtime(self, helix_path):
        """A full single-threaded comparison at default settings stays under ten seconds."""
        start = time.monotonic()
        result = runner.invoke(app, ["compare", str(helix_path), str(helix_path)])
        assert result.exit_code == 0
        assert time.monotonic() - start < 10.0


class TestGeodesic:
    def test_profile_csv(self, helix_path):
        result = runner.invoke(app, ["geodesic", str(helix_path), str(helix_path), "--face-resolution", "128", "--format", "csv"])
        assert result.exit_code == 0
        rows = list(csv.reader(io.StringIO(result.stdout)))
        assert rows[0][-1] == "delta_p"
        assert rows[1][-1] == "0"

    def test_profile_json(self, helix_path, strand_path):
        result = runner.invoke(app, ["geodesic", str(helix_path), str(strand_path), "--face-resolution", "128"])
        assert result.exit_code == 0
        data = json.loads(result.stdout)
        assert len(data["faces"]) == 6
        assert data["delta_p"] == sum(abs(f["count_s"] - f["count_t"]) for f in data["faces"])


class TestBatch:
    def _manifest(self, tmp_path, *entries):
        path = tmp_path / "ids.txt"
        path.write_text("# structures\n" + "\n".join(entries) + "\n\n")
        return path

    def test_pairs_as_csv(self, tmp_path, helix_path, strand_path):
        manifest = self._manifest(tmp_path, str(helix_path), str(strand_path), f"{helix_path}  # again")
        result = runner.invoke(app, ["batch", str(manifest), *FAST, "--cache-dir", str(tmp_path / "cache")])
        assert result.exit_code == 0
        lines = [line for line in result.stdout.splitlines() if not line.startswith("signatures")]
        rows = list(csv.reader(lines))
        assert rows[0][0] == "id_1"
        assert len(rows) == 4
        assert "cache_hits=" in result.output

    def test_sorted(self, tmp_path, helix_path, strand_path):
        manifest = self._manifest(tmp_path, str(strand_path), str(helix_path), str(helix_path))
        result = runner.invoke(app, ["batch", str(manifest), *FAST, "--sort", "--format", "json"])
        assert result.exit_code == 0
        start = result.stdout.index("[")
        data = json.loads(result.stdout[start:result.stdout.rindex("]") + 1])
        assert data[0]["verdict"] == "similar"
        assert data[0]["rho"] == 0.0

    def test_format_from_config_file(self, tmp_path, helix_path):
        """A format set in the config file replaces the CSV default."""
        manifest = self._manifest(tmp_path, str(helix_path), str(helix_path))
        config = tmp_path / "run.env"
        config.write_text("resolution=64\nface_resolution=128\nformat=json\n")
        result = runner.invoke(app, ["--config", str(config), "batch", str(manifest)])
        assert result.exit_code == 0
        assert '"verdict": "similar"' in result.output

    def test_empty_manifest(self, tmp_path):
        manifest = self._manifest(tmp_path)
        result = runner.invoke(app, ["batch", str(manifest)])
        assert result.exit_code == 2


class TestDeterminism:
    """Same inputs give the same bytes across reruns and thread counts."""

    def _args(self, command, helix_path, strand_path):
        if command == "fd":
            return ["fd", str(helix_path), "--resolution", "64"]
        return ["compare", str(helix_path), str(strand_path), *FAST]

    @pytest.mark.parametrize("command", ["fd", "compare"])
    def test_rerun_is_byte_identical(self, command, helix_path, strand_path):
        args = self._args(command, helix_path, strand_path)
        first = runner.invoke(app, args)
        second = runner.invoke(app, args)
        assert first.exit_code == second.exit_code
        assert first.exit_code in (0, 1)
        assert first.stdout == second.stdout

    @pytest.mark.parametrize("command", ["fd", "compare"])
    def test_thread_count_does_not_change_output(self, command, helix_path, strand_path):
        args = self._args(command, helix_path, strand_path)
        single = runner.invoke(app, [*args, "--threads", "1"])
        pooled = runner.invoke(app, [*args, "--threads", "4"])
        assert single.exit_code == pooled.exit_code
        assert single.stdout == pooled.stdout

    def test_render_skeleton_twice(self, helix_path, tmp_path):
        for name in ("one", "two"):
            result = runner.invoke(app, ["render", str(helix_path), "skeleton", str(tmp_path / name), "--resolution", "64"])
            assert result.exit_code == 0
        assert (tmp_path / "one" / "stacked.pgm").read_bytes() == (tmp_path / "two" / "stacked.pgm").read_bytes()

    def test_batch_with_warm_signature_cache(self, tmp_path, helix_path, strand_path):
        """A second batch run over the same cache computes nothing and prints the same rows."""
        manifest = tmp_path / "ids.txt"
        manifest.write_text(f"{helix_path}\n{strand_path}\n")
        args = ["batch", str(manifest), *FAST, "--cache-dir", str(tmp_path / "cache")]
        cold = runner.invoke(app, args)
        warm = runner.invoke(app, args)
        assert cold.exit_code == warm.exit_code == 0
        assert "signatures computed=2" in cold.output
        assert "signatures computed=0" in warm.output

        def rows(result):
            return [line for line in result.stdout.splitlines() if not line.startswith("signatures")]

        assert rows(cold) == rows(warm)


class TestRender:
    def test_slices_match_pipeline(self, helix, helix_path, tmp_path):
        """One PGM per non-empty slice."""
        result = runner.invoke(app, ["render", str(helix_path), "slices", str(tmp_path), "--resolution", "64"])
        assert result.exit_code == 0
        expected = len(stacked_skeleton(helix, Method1Params(resolution=64)).slices)
        assert len(list(tmp_path.glob("slice_*.pgm"))) == expected

    def test_skeleton(self, helix_path, tmp_path):
        result = runner.invoke(app, ["render", str(helix_path), "skeleton", str(tmp_path), "--resolution", "64"])
        assert result.exit_code == 0
        assert (tmp_path / "stacked.pgm").exists()

    def test_faces(self, helix_path, tmp_path):
        result = runner.invoke(app, ["render", str(helix_path), "faces", str(tmp_path), "--face-resolution", "64"])
        assert result.exit_code == 0
        names = sorted(p.name for p in tmp_path.glob("face_*.pgm"))
        assert names == sorted(f"face_{n}.pgm" for n in ("front", "left", "right", "top", "bottom", "back"))
