import json

import numpy as np
import pytest

from dplm.manifest import (
    BrirRecord,
    DatasetRecord,
    ManifestError,
    load_brir_manifest,
    load_brirs,
    load_dataset_manifest,
    parse_trajectory,
    resolve_path,
    write_jsonl,
)
from dplm.signal import save_wav


def _brir_row(**extra):
    row = {
        "path": "ir.wav",
        "azimuth_deg": 30.0,
        "elevation_deg": 0.0,
        "room_id": "booth",
        "dataset_id": "setA",
    }
    row.update(extra)
    return row


@pytest.fixture
def brir_dir(tmp_path):
    ir = np.zeros((2, 64))
    ir[0, 0] = 1.0
    ir[1, 4] = 0.5
    save_wav(tmp_path / "ir.wav", ir, 16000)
    return tmp_path


class TestBrirManifest:
    def test_round_trip(self, brir_dir):
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row()])
        (rec,) = load_brir_manifest(man)
        assert rec == BrirRecord(
            path="ir.wav",
            resolved_path=brir_dir / "ir.wav",
            azimuth_deg=30.0,
            elevation_deg=0.0,
            room_id="booth",
            dataset_id="setA",
        )
        assert rec.brir_id == "ir.wav"

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError, match="no manifest"):
            load_brir_manifest(tmp_path / "nope.jsonl")

    def test_invalid_json_names_line(self, brir_dir):
        man = brir_dir / "brirs.jsonl"
        man.write_text(json.dumps(_brir_row()) + "\n{not json\n")
        with pytest.raises(ManifestError, match=r":2: invalid JSON"):
            load_brir_manifest(man)

    def test_non_object_line(self, brir_dir):
        man = brir_dir / "brirs.jsonl"
        man.write_text('["a", "list"]\n')
        with pytest.raises(ManifestError, match=r":1: expected a JSON object"):
            load_brir_manifest(man)

    def test_missing_field(self, brir_dir):
        row = _brir_row()
        del row["room_id"]
        man = write_jsonl(brir_dir / "brirs.jsonl", [row])
        with pytest.raises(ManifestError, match="missing field 'room_id'"):
            load_brir_manifest(man)

    def test_bool_is_not_a_number(self, brir_dir):
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row(azimuth_deg=True)])
        with pytest.raises(ManifestError, match="must be a number"):
            load_brir_manifest(man)

    def test_angle_ranges(self, brir_dir):
        man = write_jsonl(brir_dir / "b1.jsonl", [_brir_row(azimuth_deg=181.0)])
        with pytest.raises(ManifestError, match=r"azimuth_deg.*outside"):
            load_brir_manifest(man)
        man = write_jsonl(brir_dir / "b2.jsonl", [_brir_row(elevation_deg=-91.0)])
        with pytest.raises(ManifestError, match=r"elevation_deg.*outside"):
            load_brir_manifest(man)

    def test_duplicate_path(self, brir_dir):
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row(), _brir_row()])
        with pytest.raises(ManifestError, match=r":2: duplicate path"):
            load_brir_manifest(man)

    def test_blank_lines_skipped_but_empty_rejected(self, brir_dir):
        man = brir_dir / "brirs.jsonl"
        man.write_text("\n  \n")
        with pytest.raises(ManifestError, match="empty"):
            load_brir_manifest(man)
        man.write_text("\n" + json.dumps(_brir_row()) + "\n\n")
        assert len(load_brir_manifest(man)) == 1

    def test_missing_file_lists_tried_paths(self, brir_dir):
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row(path="gone.wav")])
        with pytest.raises(ManifestError, match=r"file not found: gone.wav \(tried"):
            load_brir_manifest(man)


class TestResolvePath:
    def test_relative_resolves_against_base_first(self, tmp_path, monkeypatch):
        base = tmp_path / "base"
        other = tmp_path / "data"
        base.mkdir()
        other.mkdir()
        (base / "x.wav").write_bytes(b"")
        (other / "x.wav").write_bytes(b"")
        monkeypatch.setenv("DPLM_DATA_DIR", str(other))
        assert resolve_path("x.wav", base, "ctx") == base / "x.wav"

    def test_data_dir_fallback(self, tmp_path, monkeypatch):
        base = tmp_path / "base"
        other = tmp_path / "data"
        base.mkdir()
        other.mkdir()
        (other / "y.wav").write_bytes(b"")
        monkeypatch.setenv("DPLM_DATA_DIR", str(other))
        assert resolve_path("y.wav", base, "ctx") == other / "y.wav"

    def test_no_fallback_without_env(self, tmp_path, monkeypatch):
        monkeypatch.delenv("DPLM_DATA_DIR", raising=False)
        with pytest.raises(ManifestError, match="file not found"):
            resolve_path("y.wav", tmp_path, "ctx")

    def test_absolute_path(self, tmp_path):
        target = tmp_path / "abs.wav"
        target.write_bytes(b"")
        assert resolve_path(str(target), tmp_path / "elsewhere", "ctx") == target
        with pytest.raises(ManifestError, match="file not found"):
            resolve_path(str(tmp_path / "missing.wav"), tmp_path, "ctx")


class TestLoadBrirs:
    def test_loads_keyed_by_id(self, brir_dir):
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row()])
        brirs = load_brirs(load_brir_manifest(man))
        brir = brirs["ir.wav"]
        assert brir.impulse_responses.shape == (2, 64)
        assert brir.sample_rate == 16000
        assert brir.source_location.azimuth == pytest.approx(np.radians(30.0))
        assert brir.room_id == "booth"

    def test_mono_ir_rejected(self, brir_dir):
        save_wav(brir_dir / "mono.wav", np.zeros(64), 16000)
        man = write_jsonl(brir_dir / "brirs.jsonl", [_brir_row(path="mono.wav")])
        with pytest.raises(ManifestError, match="2 channels"):
            load_brirs(load_brir_manifest(man))


def _traj_obj(duration=1.0):
    return {
        "duration_sec": duration,
        "keyframes": [
            {"time_sec": 0.0, "azimuth_deg": -30.0, "elevation_deg": 0.0},
            {"time_sec": duration, "azimuth_deg": 45.0},
        ],
    }


class TestParseTrajectory:
    def test_fields_and_default_elevation(self):
        traj = parse_trajectory(_traj_obj(), "t")
        assert traj.duration_sec == 1.0
        (t0, a), (t1, b) = traj.locations
        assert (t0, t1) == (0.0, 1.0)
        assert a.azimuth == pytest.approx(np.radians(-30.0))
        assert b.elevation == 0.0

    def test_not_an_object(self):
        with pytest.raises(ManifestError, match="must be an object"):
            parse_trajectory([1, 2], "t")

    def test_keyframes_required(self):
        with pytest.raises(ManifestError, match="keyframes"):
            parse_trajectory({"duration_sec": 1.0, "keyframes": []}, "t")

    def test_keyframe_angles_validated(self):
        obj = _traj_obj()
        obj["keyframes"][1]["elevation_deg"] = 120.0
        with pytest.raises(ManifestError, match=r"keyframes\[1\].*elevation_deg"):
            parse_trajectory(obj, "t")
        obj = _traj_obj()
        obj["keyframes"][0]["azimuth_deg"] = -200.0
        with pytest.raises(ManifestError, match=r"keyframes\[0\].*azimuth_deg"):
            parse_trajectory(obj, "t")

    def test_trajectory_error_wrapped(self):
        obj = _traj_obj()
        obj["keyframes"][1]["time_sec"] = 0.0  # not increasing
        with pytest.raises(ManifestError, match="t:"):
            parse_trajectory(obj, "t")


def _dataset_row(**extra):
    row = {"source_wav": "src.wav", "split": "train", "brir_id": "ir.wav"}
    row.update(extra)
    return row


@pytest.fixture
def dataset_dir(tmp_path):
    save_wav(tmp_path / "src.wav", np.zeros(256), 16000)
    save_wav(tmp_path / "noise.wav", np.zeros(256), 16000)
    return tmp_path


class TestDatasetManifest:
    def test_static_and_moving_records(self, dataset_dir):
        rows = [
            _dataset_row(),
            {
                "source_wav": "src.wav",
                "split": "test",
                "trajectory": _traj_obj(),
                "noise_wav": "noise.wav",
                "snr_db": 12.5,
            },
        ]
        man = write_jsonl(dataset_dir / "data.jsonl", rows)
        static, moving = load_dataset_manifest(man)
        assert static == DatasetRecord(
            source_wav="src.wav",
            resolved_source=dataset_dir / "src.wav",
            split="train",
            brir_id="ir.wav",
        )
        assert moving.trajectory is not None and moving.brir_id is None
        assert moving.resolved_noise == dataset_dir / "noise.wav"
        assert moving.snr_db == 12.5

    def test_split_validated(self, dataset_dir):
        man = write_jsonl(dataset_dir / "data.jsonl", [_dataset_row(split="val")])
        with pytest.raises(ManifestError, match="split must be one of"):
            load_dataset_manifest(man)

    def test_exactly_one_of_brir_and_trajectory(self, dataset_dir):
        man = write_jsonl(
            dataset_dir / "d1.jsonl", [_dataset_row(trajectory=_traj_obj())]
        )
        with pytest.raises(ManifestError, match="exactly one"):
            load_dataset_manifest(man)
        man = write_jsonl(dataset_dir / "d2.jsonl", [{"source_wav": "src.wav", "split": "train"}])
        with pytest.raises(ManifestError, match="exactly one"):
            load_dataset_manifest(man)

    def test_brir_id_checked_against_inventory(self, dataset_dir):
        man = write_jsonl(dataset_dir / "data.jsonl", [_dataset_row(brir_id="other.wav")])
        with pytest.raises(ManifestError, match="unknown brir_id"):
            load_dataset_manifest(man, brir_ids={"ir.wav"})
        # without an inventory the id passes through unchecked
        (rec,) = load_dataset_manifest(man)
        assert rec.brir_id == "other.wav"

    def test_source_must_exist(self, dataset_dir):
        man = write_jsonl(dataset_dir / "data.jsonl", [_dataset_row(source_wav="gone.wav")])
        with pytest.raises(ManifestError, match="file not found"):
            load_dataset_manifest(man)

    def test_error_names_manifest_line(self, dataset_dir):
        man = write_jsonl(
            dataset_dir / "data.jsonl", [_dataset_row(), _dataset_row(split="dev")]
        )
        with pytest.raises(ManifestError, match=r"data\.jsonl:2"):
            load_dataset_manifest(man)


class TestWriteJsonl:
    def test_rows_sorted_and_loadable(self, tmp_path):
        path = write_jsonl(tmp_path / "out.jsonl", [{"b": 1, "a": 2}])
        text = path.read_text()
        assert text == '{"a": 2, "b": 1}\n'
        assert json.loads(text) == {"a": 2, "b": 1}
