"""End-to-end dataset, serialization and CLI tests.

A small shared workspace (6 samples per class, 64-point curves, a
3-day synthetic environment file) keeps the full generate/train/CLI
round trips fast enough for routine runs.
"""

import dataclasses
import hashlib
import json

import numpy as np
import pytest

from pvdiag.cli import main
from pvdiag.envseries import write_synthetic_env_csv
from pvdiag.errors import ClassTooSmall, InvalidConfig
from pvdiag.pipeline import (
    RunConfig,
    generate,
    load_features,
    load_manifest,
    read_feature_file,
    regenerate_check,
    stratified_split,
    write_feature_file,
    _split_arrays,
)


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Workspace with one generated tiny dataset and its config file."""
    root = tmp_path_factory.mktemp("pipeline")
    env_csv = root / "env.csv"
    write_synthetic_env_csv(env_csv, n_days=3, seed=1)
    config = RunConfig(env_csv_path=str(env_csv), output_dir=str(root / "ds"),
                       samples_per_class=6, curve_points=64,
                       architecture="ann", max_epochs=2)
    generate(config)
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config.to_dict()) + "\n")
    return {"root": root, "config": config, "config_path": config_path,
            "ds": root / "ds"}


class TestStratifiedSplit:
    def test_default_fractions_give_72_8_20(self):
        splits = stratified_split([0] * 100, seed=3)
        assert {k: len(v) for k, v in splits.items()} == {
            "train": 72, "val": 8, "test": 20}

    def test_nine_class_dataset_totals(self):
        splits = stratified_split([c for c in range(9) for _ in range(200)],
                                  seed=0)
        assert {k: len(v) for k, v in splits.items()} == {
            "train": 1296, "val": 144, "test": 360}

    @pytest.mark.parametrize("n,expect", [(7, (5, 1, 1)), (13, (9, 1, 3))])
    def test_rounding_half_up(self, n, expect):
        splits = stratified_split([0] * n, seed=1)
        assert (len(splits["train"]), len(splits["val"]),
                len(splits["test"])) == expect

    def test_partition_is_disjoint_and_complete(self):
        labels = [c for c in range(3) for _ in range(40)]
        splits = stratified_split(labels, seed=7)
        merged = sorted(splits["train"] + splits["val"] + splits["test"])
        assert merged == list(range(len(labels)))

    def test_every_class_contributes_its_own_quota(self):
        labels = np.array([c for c in range(4) for _ in range(50)])
        splits = stratified_split(labels, seed=5)
        for part, per_class in (("test", 10), ("val", 4), ("train", 36)):
            counts = np.bincount(labels[splits[part]], minlength=4)
            assert np.all(counts == per_class)

    def test_same_seed_reproduces(self):
        labels = [c for c in range(3) for _ in range(30)]
        assert stratified_split(labels, seed=11) == stratified_split(labels, seed=11)

    def test_different_seed_permutes(self):
        labels = [0] * 100
        assert stratified_split(labels, seed=1) != stratified_split(labels, seed=2)

    def test_indices_are_sorted(self):
        splits = stratified_split([0] * 50 + [1] * 50, seed=9)
        for part in splits.values():
            assert part == sorted(part)

    def test_class_below_minimum_rejected(self):
        with pytest.raises(ClassTooSmall):
            stratified_split([0] * 100 + [1] * 4, seed=0)


class TestFeatureFile:
    def tensor(self):
        rng = np.random.default_rng(42)
        return rng.uniform(-1, 1, size=(50, 50, 2)).astype(np.float32)

    def test_round_trip_is_bit_exact(self, tmp_path):
        data = self.tensor()
        path = tmp_path / "a.pvgf"
        write_feature_file(path, data, class_value=5)
        back, cls = read_feature_file(path)
        assert cls == 5
        assert back.dtype == np.float32
        assert np.array_equal(back, data)

    def test_digest_matches_file_bytes(self, tmp_path):
        path = tmp_path / "a.pvgf"
        digest = write_feature_file(path, self.tensor(), class_value=1)
        assert digest == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_rejects_non_3d_tensor(self, tmp_path):
        with pytest.raises(InvalidConfig):
            write_feature_file(tmp_path / "a.pvgf",
                               np.zeros((4, 4), dtype=np.float32), 0)

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "a.pvgf"
        path.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(InvalidConfig):
            read_feature_file(path)

    def test_rejects_unknown_version(self, tmp_path):
        path = tmp_path / "a.pvgf"
        write_feature_file(path, self.tensor(), 0)
        raw = bytearray(path.read_bytes())
        raw[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(InvalidConfig):
            read_feature_file(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "a.pvgf"
        write_feature_file(path, self.tensor(), 0)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(InvalidConfig):
            read_feature_file(path)


class TestGenerate:
    def test_manifest_counts_and_files(self, ws):
        man = load_manifest(ws["ds"])
        assert len(man["samples"]) == 54
        assert {k: len(v) for k, v in man["splits"].items()} == {
            "train": 36, "val": 9, "test": 9}
        assert (ws["ds"] / "curves.npz").exists()
        for rec in man["samples"]:
            path = ws["ds"] / rec["feature_file"]
            assert path.exists()
            assert rec["sha256"] == hashlib.sha256(
                path.read_bytes()).hexdigest()

    def test_environment_fields_are_plausible(self, ws):
        man = load_manifest(ws["ds"])
        for rec in man["samples"]:
            assert 100.0 <= rec["g_wm2"] <= 1360.0
            assert 230.0 < rec["t_kelvin"] < 340.0

    def test_regeneration_is_checksum_identical(self, ws):
        report = regenerate_check(ws["ds"])
        assert report["total"] == 54
        assert report["mismatched"] == []

    def test_same_config_elsewhere_reproduces_checksums(self, ws):
        config = dataclasses.replace(ws["config"],
                                     output_dir=str(ws["root"] / "ds_copy"))
        man2 = generate(config)
        man1 = load_manifest(ws["ds"])
        assert ([r["sha256"] for r in man1["samples"]]
                == [r["sha256"] for r in man2["samples"]])

    def test_global_strategy_pins_limits_from_train_only(self, ws):
        config = dataclasses.replace(ws["config"], strategy="global",
                                     output_dir=str(ws["root"] / "ds_glob"))
        man = generate(config)
        limits = man["strategy_limits"]
        with np.load(ws["root"] / "ds_glob" / "curves.npz") as arc:
            isc = {}
            voc = {}
            for idx in range(len(man["samples"])):
                v, i = arc[f"v_{idx:05d}"], arc[f"i_{idx:05d}"]
                isc[idx] = float(np.interp(0.0, v, i))
                below = np.nonzero(i <= 0)[0]
                k = int(below[0])
                voc[idx] = float(v[k - 1] + (v[k] - v[k - 1])
                                 * i[k - 1] / (i[k - 1] - i[k]))
        train = man["splits"]["train"]
        assert limits["max_isc"] == pytest.approx(
            max(isc[j] for j in train), rel=1e-12)
        assert limits["max_voc"] == pytest.approx(
            max(voc[j] for j in train), rel=1e-9)
        assert limits["max_isc"] <= max(isc.values()) + 1e-12
        assert limits["max_voc"] <= max(voc.values()) + 1e-9


class TestLoadFeatures:
    def test_channel_selection(self, ws):
        x2, y, class_values = load_features(ws["ds"], channels="iv_pv")
        x1, y1, _ = load_features(ws["ds"], channels="iv")
        assert x2.shape == (54, 50, 50, 2)
        assert x1.shape == (54, 50, 50, 1)
        assert np.array_equal(x1[..., 0], x2[..., 0])
        assert np.array_equal(y, y1)

    def test_labels_are_contiguous_and_mapped(self, ws):
        _, y, class_values = load_features(ws["ds"])
        assert sorted(set(y.tolist())) == list(range(9))
        assert np.all(np.diff(class_values) > 0)

    def test_split_arrays_partition(self, ws):
        man = load_manifest(ws["ds"])
        x, y, _ = load_features(ws["ds"], man)
        parts = _split_arrays(x, y, man["splits"])
        assert parts["train"][0].shape[0] == 36
        assert parts["val"][0].shape[0] == 9
        assert parts["test"][0].shape[0] == 9


class TestCli:
    def run(self, argv, capsys):
        code = main(argv)
        captured = capsys.readouterr()
        return code, captured

    def test_generate_with_verify(self, ws, tmp_path, capsys):
        code, cap = self.run(["generate", "--config", str(ws["config_path"]),
                              "--out", str(tmp_path / "ds2"), "--verify"],
                             capsys)
        assert code == 0
        out = json.loads(cap.out)
        assert out["n_samples"] == 54
        assert out["verify"]["matched"] == 54

    def test_split_matches_manifest(self, ws, capsys):
        code, cap = self.run(["split", "--config", str(ws["config_path"])],
                             capsys)
        assert code == 0
        out = json.loads(cap.out)
        assert out["matches_manifest"] is True
        assert out["sizes"] == {"train": 36, "val": 9, "test": 9}

    def test_train_writes_artifacts(self, ws, capsys):
        code, cap = self.run(["train", "--config", str(ws["config_path"])],
                             capsys)
        assert code == 0
        out = json.loads(cap.out)
        assert out["architecture"] == "ann"
        assert out["epochs_run"] <= 2
        tag = "ann_isc_voc_iv_pv"
        for suffix in (".pvwt", "_history.csv", "_metrics.json",
                       "_confusion.csv"):
            assert (ws["ds"] / f"{tag}{suffix}").exists()

    def test_grid_restricted_sweep(self, ws, capsys):
        code, cap = self.run(["grid", "--config", str(ws["config_path"]),
                              "--strategies", "isc_voc",
                              "--channel-modes", "iv",
                              "--architectures", "ann"], capsys)
        assert code == 0
        rows = json.loads(cap.out)["rows"]
        assert len(rows) == 1
        assert rows[0]["strategy"] == "isc_voc"
        assert (ws["ds"] / "grid_results.csv").exists()

    def test_correct_identity_has_zero_rms(self, ws, tmp_path, capsys):
        cfg = ws["config"].to_dict()
        cfg["output_dir"] = str(tmp_path / "corr")
        cfg["correction"] = {
            "method": "m2",
            "from_env": {"g_wm2": 800.0, "t_celsius": 25.0},
            "to_env": {"g_wm2": 800.0, "t_celsius": 25.0},
        }
        path = tmp_path / "corr.json"
        path.write_text(json.dumps(cfg) + "\n")
        code, cap = self.run(["correct", "--config", str(path)], capsys)
        assert code == 0
        report = json.loads(cap.out)
        assert report["rms_current_a"] == 0.0
        for name in ("source.csv", "corrected.csv", "reference.csv",
                     "correction_report.json"):
            assert (tmp_path / "corr" / name).exists()

    def test_export_images(self, ws, capsys):
        code, cap = self.run(["export-images", "--config",
                              str(ws["config_path"]), "--limit", "2"], capsys)
        assert code == 0
        assert json.loads(cap.out)["n_images"] == 4
        images = sorted((ws["ds"] / "images").glob("*.png"))
        assert len(images) == 4

    def test_missing_config_file_fails_cleanly(self, tmp_path, capsys):
        code, cap = self.run(["split", "--config",
                              str(tmp_path / "absent.json")], capsys)
        assert code == 1
        err = json.loads(cap.err)
        assert "error" in err

    def test_unparseable_config_fails_cleanly(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, cap = self.run(["split", "--config", str(path)], capsys)
        assert code == 1
        assert json.loads(cap.err)["error"] == "InvalidConfig"

    def test_unknown_strategy_fails_cleanly(self, ws, tmp_path, capsys):
        cfg = ws["config"].to_dict()
        cfg["strategy"] = "sideways"
        path = tmp_path / "bad_strategy.json"
        path.write_text(json.dumps(cfg) + "\n")
        code, cap = self.run(["split", "--config", str(path)], capsys)
        assert code == 1
        assert json.loads(cap.err)["error"] == "InvalidConfig"


class TestConfigValidation:
    def kwargs(self, **over):
        base = {"env_csv_path": "e.csv", "output_dir": "d"}
        base.update(over)
        return base

    def test_rejects_unknown_keys(self):
        with pytest.raises(InvalidConfig):
            RunConfig.from_dict(self.kwargs(nonsense=1))

    def test_requires_paths(self):
        with pytest.raises(InvalidConfig):
            RunConfig.from_dict({"output_dir": "d"})

    @pytest.mark.parametrize("field,value", [
        ("scenario", "case99"),
        ("architecture", "transformer"),
        ("channels", "q"),
        ("test_fraction", 0.0),
        ("test_fraction", 1.0),
        ("val_fraction_of_train", -0.1),
        ("samples_per_class", 0),
    ])
    def test_rejects_out_of_range_fields(self, field, value):
        with pytest.raises(InvalidConfig):
            RunConfig(**self.kwargs(**{field: value}))

    def test_weight_decay_round_trips_through_json(self, tmp_path):
        cfg = RunConfig(**self.kwargs(weight_decay=5e-4))
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert RunConfig.from_file(path).weight_decay == 5e-4
        assert cfg.train_settings().weight_decay == 5e-4
