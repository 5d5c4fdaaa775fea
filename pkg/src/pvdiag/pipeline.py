"""End-to-end orchestration: dataset generation, runs, grids, reports.

A run is driven by one JSON config file (see RunConfig).  ``generate``
simulates every labelled curve, splits them per class, featurizes with
the configured normalization strategy and writes one binary feature
file per sample next to a manifest that pins seeds, fault parameters
and checksums.  ``run_experiment`` trains and evaluates on those files;
``run_grid`` sweeps strategy x channel x architecture over the same
stored curves without re-simulating.

Feature file layout, little-endian: 4 magic bytes, u16 version,
3 x u32 dims (H, W, C), u16 class id, then H*W*C raw f32 values in
row-major channel-last order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arraysim import (ArrayConfig, FaultClass, FaultSpec, IVCurve,
                       SCENARIO_CLASSES, simulate_sample)
from .envseries import EnvSeries, load_env_csv
from .errors import ClassTooSmall, InvalidConfig
from .nn.checkpoint import save_weights, write_history_csv
from .nn.metrics import Metrics, evaluate
from .nn.network import ARCHITECTURES
from .nn.train import TrainSettings, train
from .preprocess import (Global, IscVoc, Normal, NormalizationStrategy,
                         channel_to_image, isc_voc_strategy, stacked_feature)
from .pvmodule import EnvCondition
from .correction import (PROCEDURES, correct_m3,
                         default_factors_shell_sp70_array)

PVGF_MAGIC = b"PVGF"
PVGF_VERSION = 1

SCENARIOS = tuple(SCENARIO_CLASSES)
STRATEGIES = ("normal", "global", "isc_voc")
CHANNEL_MODES = {"iv": (0,), "pv": (1,), "iv_pv": (0, 1)}
MIN_CLASS_SAMPLES = 5

MANIFEST_NAME = "manifest.json"
CURVES_NAME = "curves.npz"


@dataclass(frozen=True)
class RunConfig:
    """One experiment, fully pinned: dataset, features, model, training."""

    env_csv_path: str
    output_dir: str
    scenario: str = "case2_no_soiling"
    blocking_diodes: bool = True
    strategy: str = "isc_voc"
    architecture: str = "cbam_cnn"
    channels: str = "iv_pv"
    samples_per_class: int = 200
    test_fraction: float = 0.2
    val_fraction_of_train: float = 0.1
    seed: int = 0
    n_series_modules: int = 3
    n_parallel_strings: int = 2
    v_blocking_drop: float = 0.0
    curve_points: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 15
    weight_decay: float = 1e-4
    correction: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"scenario must be one of {SCENARIOS}, "
                                f"got {self.scenario!r}")
        if self.strategy not in STRATEGIES:
            raise InvalidConfig(f"strategy must be one of {STRATEGIES}, "
                                f"got {self.strategy!r}")
        if self.architecture not in ARCHITECTURES:
            raise InvalidConfig(f"architecture must be one of "
                                f"{tuple(ARCHITECTURES)}, got {self.architecture!r}")
        if self.channels not in CHANNEL_MODES:
            raise InvalidConfig(f"channels must be one of {tuple(CHANNEL_MODES)}, "
                                f"got {self.channels!r}")
        for name in ("test_fraction", "val_fraction_of_train"):
            frac = getattr(self, name)
            if not 0.0 < frac < 1.0:
                raise InvalidConfig(f"{name} must lie in (0, 1), got {frac}")
        if self.samples_per_class < 1:
            raise InvalidConfig("samples_per_class must be positive")

    @property
    def classes(self) -> tuple[FaultClass, ...]:
        return SCENARIO_CLASSES[self.scenario]

    def array_config(self) -> ArrayConfig:
        return ArrayConfig(n_series_modules=self.n_series_modules,
                           n_parallel_strings=self.n_parallel_strings,
                           blocking_diodes=self.blocking_diodes,
                           v_blocking_drop=self.v_blocking_drop)

    def train_settings(self) -> TrainSettings:
        return TrainSettings(learning_rate=self.learning_rate,
                             batch_size=self.batch_size,
                             max_epochs=self.max_epochs,
                             patience=self.patience,
                             weight_decay=self.weight_decay,
                             seed=self.seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        missing = {"env_csv_path", "output_dir"} - set(d)
        if missing:
            raise InvalidConfig(f"config is missing keys: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfig(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise InvalidConfig(f"{path}: top level must be an object")
        return cls.from_dict(raw)


def stratified_split(labels, seed: int, test_fraction: float = 0.2,
                     val_fraction_of_train: float = 0.1) -> dict[str, list[int]]:
    """Shuffle within each class and cut test / val / train slices.

    Counts round half up; the remainder lands in train, so 100 samples
    at the default fractions give 72 / 8 / 20.

    Raises:
        ClassTooSmall: a class holds fewer than MIN_CLASS_SAMPLES.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(0x5350,)))
    out: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < MIN_CLASS_SAMPLES:
            raise ClassTooSmall(
                f"class {int(cls)} has {idx.size} samples, "
                f"need at least {MIN_CLASS_SAMPLES}")
        perm = rng.permutation(idx)
        n_test = int(np.floor(idx.size * test_fraction + 0.5))
        n_val = int(np.floor((idx.size - n_test) * val_fraction_of_train + 0.5))
        out["test"].extend(int(i) for i in perm[:n_test])
        out["val"].extend(int(i) for i in perm[n_test:n_test + n_val])
        out["train"].extend(int(i) for i in perm[n_test + n_val:])
    for part in out.values():
        part.sort()
    return out


def write_feature_file(path, data: np.ndarray, class_value: int) -> str:
    """Serialize one feature tensor; returns the file's sha256 hex digest."""
    if data.ndim != 3:
        raise InvalidConfig(f"feature tensor must be 3-d, got shape {data.shape}")
    buf = bytearray()
    buf += PVGF_MAGIC
    buf += struct.pack("<H", PVGF_VERSION)
    buf += struct.pack("<3I", *data.shape)
    buf += struct.pack("<H", class_value)
    buf += np.ascontiguousarray(data, dtype="<f4").tobytes()
    payload = bytes(buf)
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def read_feature_file(path) -> tuple[np.ndarray, int]:
    """Parse one feature file back into (tensor, class id)."""
    raw = Path(path).read_bytes()
    if raw[:4] != PVGF_MAGIC:
        raise InvalidConfig(f"{path}: not a feature file")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != PVGF_VERSION:
        raise InvalidConfig(f"{path}: unsupported feature version {version}")
    h, w, c = struct.unpack_from("<3I", raw, 6)
    (class_value,) = struct.unpack_from("<H", raw, 18)
    data = np.frombuffer(raw, dtype="<f4", offset=20)
    if data.size != h * w * c:
        raise InvalidConfig(f"{path}: payload holds {data.size} floats, "
                            f"header promises {h * w * c}")
    return data.reshape(h, w, c).copy(), int(class_value)


def _simulate_task(args) -> tuple:
    cfg, env_series, cls_value, k, root_seed, n_points = args
    sample = simulate_sample(cfg, env_series, FaultClass(cls_value), k,
                             root_seed, n_points=n_points)
    return cls_value, k, sample


def simulate_all(config: RunConfig, env_series: EnvSeries,
                 workers: int = 1) -> list:
    """Simulate every (class, k) sample, order-stable for any worker count."""
    cfg = config.array_config()
    tasks = [(cfg, env_series, int(cls), k, config.seed, config.curve_points)
             for cls in config.classes
             for k in range(config.samples_per_class)]
    if workers <= 1:
        results = [_simulate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (workers * 8))
            results = list(pool.map(_simulate_task, tasks, chunksize=chunk))
    # map preserves submission order; keep (class, k) ordering explicit anyway
    results.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in results]


def global_limits(samples, indices) -> Global:
    """Dataset-wide axis maxima over a subset of samples (the train split)."""
    max_isc = max(float(samples[i].curve.isc) for i in indices)
    max_voc = max(float(samples[i].curve.voc) for i in indices)
    return Global(max_isc=max_isc, max_voc=max_voc)


def strategy_for_sample(config: RunConfig, limits: Global | None,
                        env: EnvCondition) -> NormalizationStrategy:
    if config.strategy == "normal":
        return Normal()
    if config.strategy == "global":
        return limits
    return isc_voc_strategy(config.array_config(), env)


def _feature_name(idx: int) -> str:
    return f"sample_{idx:05d}.pvgf"


def generate(config: RunConfig, workers: int = 1) -> dict:
    """Simulate, split, featurize and serialize one dataset.

    Writes per-sample feature files, a curves archive for later
    re-featurization, and the manifest pinning every seed, fault draw
    and file checksum.  Returns the manifest dict.
    """
    env_series = load_env_csv(config.env_csv_path)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    samples = simulate_all(config, env_series, workers=workers)
    labels = [int(s.fault.fault_class) for s in samples]
    splits = stratified_split(labels, config.seed,
                              test_fraction=config.test_fraction,
                              val_fraction_of_train=config.val_fraction_of_train)

    limits = None
    if config.strategy == "global":
        limits = global_limits(samples, splits["train"])

    records = []
    curve_arrays: dict[str, np.ndarray] = {}
    for idx, sample in enumerate(samples):
        strat = strategy_for_sample(config, limits, sample.curve.env)
        feat = stacked_feature(sample.curve, sample.fault.fault_class, strat,
                               rng_seed=sample.fault.rng_seed)
        name = _feature_name(idx)
        digest = write_feature_file(out_dir / name, feat.data,
                                    int(sample.fault.fault_class))
        fault_dict = dataclasses.asdict(sample.fault)
        fault_dict["fault_class"] = sample.fault.fault_class.name
        records.append({
            "id": idx,
            "class": sample.fault.fault_class.name,
            "class_value": int(sample.fault.fault_class),
            "env_index": sample.env_index,
            "g_wm2": float(sample.curve.env.g),
            "t_kelvin": float(sample.curve.env.t),
            "seed": int(sample.fault.rng_seed),
            "fault": fault_dict,
            "feature_file": name,
            "sha256": digest,
        })
        curve_arrays[f"v_{idx:05d}"] = sample.curve.v
        curve_arrays[f"i_{idx:05d}"] = sample.curve.i

    curve_arrays["g"] = np.array([r["g_wm2"] for r in records])
    curve_arrays["t"] = np.array([r["t_kelvin"] for r in records])
    curve_arrays["class_value"] = np.array([r["class_value"] for r in records],
                                           dtype=np.int64)
    np.savez_compressed(out_dir / CURVES_NAME, **curve_arrays)

    manifest = {
        "format": "pvdiag-dataset",
        "version": 1,
        "config": config.to_dict(),
        "n_env_records": len(env_series),
        "n_rejected_low_g": env_series.n_rejected_low_g,
        "classes": [c.name for c in config.classes],
        "strategy_limits": (
            {"max_isc": limits.max_isc, "max_voc": limits.max_voc}
            if limits is not None else None),
        "splits": splits,
        "samples": records,
    }
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(data_dir) -> dict:
    with open(Path(data_dir) / MANIFEST_NAME) as fh:
        return json.load(fh)


def regenerate_check(data_dir, workers: int = 1) -> dict:
    """Rebuild every feature file from the manifest's config in memory
    and compare checksums against the ones on record.

    Returns {"total", "matched", "mismatched": [ids]}.
    """
    manifest = load_manifest(data_dir)
    config = RunConfig.from_dict(manifest["config"])
    env_series = load_env_csv(config.env_csv_path)
    samples = simulate_all(config, env_series, workers=workers)
    limits = None
    if config.strategy == "global":
        limits = global_limits(samples, manifest["splits"]["train"])
    mismatched = []
    for record, sample in zip(manifest["samples"], samples):
        strat = strategy_for_sample(config, limits, sample.curve.env)
        feat = stacked_feature(sample.curve, sample.fault.fault_class, strat)
        buf = bytearray()
        buf += PVGF_MAGIC
        buf += struct.pack("<H", PVGF_VERSION)
        buf += struct.pack("<3I", *feat.data.shape)
        buf += struct.pack("<H", int(sample.fault.fault_class))
        buf += np.ascontiguousarray(feat.data, dtype="<f4").tobytes()
        if hashlib.sha256(bytes(buf)).hexdigest() != record["sha256"]:
            mismatched.append(record["id"])
    return {"total": len(manifest["samples"]),
            "matched": len(manifest["samples"]) - len(mismatched),
            "mismatched": mismatched}


def load_features(data_dir, manifest: dict | None = None,
                  channels: str = "iv_pv"):
    """Assemble (x, y, class_values) from a generated dataset directory.

    Labels are remapped to contiguous ids in ascending class-value
    order; class_values maps them back.
    """
    data_dir = Path(data_dir)
    if manifest is None:
        manifest = load_manifest(data_dir)
    sel = list(CHANNEL_MODES[channels])
    tensors, raw_labels = [], []
    for record in manifest["samples"]:
        data, class_value = read_feature_file(data_dir / record["feature_file"])
        tensors.append(data[:, :, sel])
        raw_labels.append(class_value)
    x = np.stack(tensors).astype(np.float32)
    raw = np.asarray(raw_labels, dtype=np.int64)
    class_values = np.unique(raw)
    y = np.searchsorted(class_values, raw)
    return x, y, class_values


def _split_arrays(x, y, splits):
    parts = {}
    for name in ("train", "val", "test"):
        idx = np.asarray(splits[name], dtype=np.int64)
        parts[name] = (x[idx], y[idx])
    return parts


def _metrics_dict(metrics: Metrics, class_names) -> dict:
    return {
        "accuracy": metrics.accuracy,
        "precision": metrics.macro_precision,
        "recall": metrics.macro_recall,
        "f1": metrics.macro_f1,
        "per_class": {
            name: {
                "precision": cm.precision,
                "recall": cm.recall,
                "f1": cm.f1,
                "support": cm.support,
            }
            for name, cm in zip(class_names, metrics.per_class)
        },
    }


def write_confusion_csv(path, cm: np.ndarray, class_names) -> None:
    with open(path, "w") as fh:
        fh.write("true\\pred," + ",".join(class_names) + "\n")
        for name, row in zip(class_names, cm):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")


def run_experiment(config: RunConfig, data_dir=None) -> dict:
    """Train the configured model on a generated dataset and report.

    Writes weights, history CSV, metrics JSON and the confusion matrix
    into the dataset directory; returns the summary dict.
    """
    data_dir = Path(data_dir if data_dir is not None else config.output_dir)
    manifest = load_manifest(data_dir)
    x, y, class_values = load_features(data_dir, manifest, config.channels)
    parts = _split_arrays(x, y, manifest["splits"])
    n_classes = len(class_values)
    class_names = [FaultClass(int(v)).name for v in class_values]

    net = ARCHITECTURES[config.architecture](
        n_classes, input_shape=x.shape[1:], seed=config.seed)
    result = train(net, *parts["train"], *parts["val"],
                   settings=config.train_settings())
    cm, metrics = evaluate(net, *parts["test"], n_classes=n_classes)

    tag = f"{config.architecture}_{config.strategy}_{config.channels}"
    save_weights(data_dir / f"{tag}.pvwt", net)
    write_history_csv(data_dir / f"{tag}_history.csv", result.history)
    write_confusion_csv(data_dir / f"{tag}_confusion.csv", cm, class_names)
    summary = {
        "architecture": config.architecture,
        "strategy": config.strategy,
        "channels": config.channels,
        "n_classes": n_classes,
        "epochs_run": result.n_epochs,
        "stopped_early": result.stopped_early,
        "val_accuracy": result.best_val_accuracy,
        "metrics": _metrics_dict(metrics, class_names),
    }
    with open(data_dir / f"{tag}_metrics.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _curves_from_archive(data_dir) -> list[IVCurve]:
    with np.load(Path(data_dir) / CURVES_NAME) as arc:
        n = arc["class_value"].size
        g, t = arc["g"], arc["t"]
        return [
            IVCurve(v=arc[f"v_{idx:05d}"], i=arc[f"i_{idx:05d}"],
                    env=EnvCondition(g=float(g[idx]), t=float(t[idx])))
            for idx in range(n)
        ]


def featurize_curves(config: RunConfig, curves, labels, splits,
                     strategy_name: str) -> np.ndarray:
    """Re-featurize stored curves under a named strategy (both channels)."""
    limits = None
    if strategy_name == "global":
        train_idx = splits["train"]
        limits = Global(
            max_isc=max(float(curves[i].isc) for i in train_idx),
            max_voc=max(float(curves[i].voc) for i in train_idx))
    sub = dataclasses.replace(config, strategy=strategy_name)
    out = []
    for curve, label in zip(curves, labels):
        strat = strategy_for_sample(sub, limits, curve.env)
        out.append(stacked_feature(curve, FaultClass(int(label)), strat).data)
    return np.stack(out).astype(np.float32)


def run_grid(config: RunConfig, data_dir=None,
             strategies=STRATEGIES,
             channel_modes=tuple(CHANNEL_MODES),
             architectures=tuple(ARCHITECTURES)) -> list[dict]:
    """Sweep strategy x channels x architecture over one stored dataset.

    Re-featurizes the stored curves once per strategy, trains each
    combination, and writes a comparison table (CSV + JSON).
    """
    data_dir = Path(data_dir if data_dir is not None else config.output_dir)
    manifest = load_manifest(data_dir)
    splits = manifest["splits"]
    curves = _curves_from_archive(data_dir)
    raw = np.array([r["class_value"] for r in manifest["samples"]],
                   dtype=np.int64)
    class_values = np.unique(raw)
    y = np.searchsorted(class_values, raw)
    n_classes = len(class_values)

    rows = []
    for strategy_name in strategies:
        x_full = featurize_curves(config, curves, raw, splits, strategy_name)
        for channels in channel_modes:
            sel = list(CHANNEL_MODES[channels])
            x = x_full[:, :, :, sel]
            parts = _split_arrays(x, y, splits)
            for arch in architectures:
                net = ARCHITECTURES[arch](n_classes, input_shape=x.shape[1:],
                                          seed=config.seed)
                sub = dataclasses.replace(config, strategy=strategy_name,
                                          channels=channels, architecture=arch)
                result = train(net, *parts["train"], *parts["val"],
                               settings=sub.train_settings())
                _, metrics = evaluate(net, *parts["test"], n_classes=n_classes)
                rows.append({
                    "strategy": strategy_name,
                    "channels": channels,
                    "architecture": arch,
                    "test_accuracy": metrics.accuracy,
                    "macro_f1": metrics.macro_f1,
                    "epochs_run": len(result.history),
                })
    with open(data_dir / "grid_results.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(data_dir / "grid_results.csv", "w") as fh:
        fh.write("strategy,channels,architecture,test_accuracy,macro_f1,epochs_run\n")
        for r in rows:
            fh.write(f"{r['strategy']},{r['channels']},{r['architecture']},"
                     f"{r['test_accuracy']:.6f},{r['macro_f1']:.6f},"
                     f"{r['epochs_run']}\n")
    return rows


def _env_from_dict(d: dict) -> EnvCondition:
    if "t_celsius" in d:
        return EnvCondition(g=float(d["g_wm2"]), t=float(d["t_celsius"]) + 273.15)
    return EnvCondition(g=float(d["g_wm2"]), t=float(d["t_kelvin"]))


def _write_curve_csv(path, curve: IVCurve) -> None:
    with open(path, "w") as fh:
        fh.write("v_volts,i_amps\n")
        for v, i in zip(curve.v, curve.i):
            fh.write(f"{v!r},{i!r}\n")


def rms_against_reference(candidate: IVCurve, reference: IVCurve) -> dict:
    """RMS current deviation on the overlapping voltage span."""
    v_hi = min(candidate.voc, reference.voc)
    grid = np.linspace(0.0, v_hi, 200)
    i_c = np.interp(grid, candidate.v, candidate.i)
    i_r = np.interp(grid, reference.v, reference.i)
    rms = float(np.sqrt(np.mean((i_c - i_r) ** 2)))
    return {"rms_current_a": rms,
            "rms_relative_isc": rms / float(reference.isc)}


def correct_cmd(config: RunConfig, out_dir=None) -> dict:
    """Demonstrate a correction procedure against direct simulation.

    Simulates a healthy array curve at the source environment, applies
    the configured procedure toward the target environment, simulates
    the target directly, and reports the RMS current deviation.
    """
    from .arraysim import array_iv_curve

    spec = dict(config.correction)
    if not spec:
        raise InvalidConfig("config has no correction section")
    method = spec.get("method")
    if method not in set(PROCEDURES) | {"m3"}:
        raise InvalidConfig(f"correction method must be one of "
                            f"{sorted(set(PROCEDURES) | {'m3'})}, got {method!r}")
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cfg = config.array_config()
    fault = FaultSpec(fault_class=FaultClass.Healthy)
    factors = default_factors_shell_sp70_array(
        n_series=config.n_series_modules, n_parallel=config.n_parallel_strings)
    if "factors" in spec:
        factors = dataclasses.replace(factors, **spec["factors"])

    from_env = _env_from_dict(spec["from_env"])
    to_env = _env_from_dict(spec["to_env"])
    source = array_iv_curve(cfg, fault, from_env, n_points=config.curve_points)

    if method == "m3":
        from_env_2 = _env_from_dict(spec["from_env_2"])
        gamma = float(spec.get("gamma", 0.5))
        source_2 = array_iv_curve(cfg, fault, from_env_2,
                                  n_points=config.curve_points)
        corrected, reached_env = correct_m3(source, source_2, gamma)
        _write_curve_csv(out_dir / "source_2.csv", source_2)
        reference = array_iv_curve(cfg, fault, reached_env,
                                   n_points=config.curve_points)
    else:
        corrected = PROCEDURES[method](source, to_env, factors)
        reached_env = to_env
        reference = array_iv_curve(cfg, fault, to_env,
                                   n_points=config.curve_points)

    _write_curve_csv(out_dir / "source.csv", source)
    _write_curve_csv(out_dir / "corrected.csv", corrected)
    _write_curve_csv(out_dir / "reference.csv", reference)
    report = {
        "method": method,
        "from_env": {"g_wm2": from_env.g, "t_kelvin": from_env.t},
        "reached_env": {"g_wm2": reached_env.g, "t_kelvin": reached_env.t},
        **rms_against_reference(corrected, reference),
    }
    with open(out_dir / "correction_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def export_images(data_dir, out_dir=None, limit: int | None = None) -> int:
    """Render each feature channel to an 8-bit grayscale PNG."""
    from PIL import Image

    data_dir = Path(data_dir)
    out_dir = Path(out_dir if out_dir is not None else data_dir / "images")
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(data_dir)
    channel_tags = ("iv", "pv")
    n_written = 0
    for record in manifest["samples"][:limit]:
        data, _ = read_feature_file(data_dir / record["feature_file"])
        stem = Path(record["feature_file"]).stem
        for c in range(data.shape[2]):
            tag = channel_tags[c] if c < len(channel_tags) else f"c{c}"
            img = Image.fromarray(channel_to_image(data[:, :, c]), mode="L")
            img.save(out_dir / f"{stem}_{tag}.png")
            n_written += 1
    return n_written
