"""Config parsing and stamped CSV output.

Every CSV starts with a comment line carrying the library version and a
hash of the config that produced it, followed by a self-describing header
row.  Floats are always formatted the same way, so identical runs produce
byte-identical files.
"""

import hashlib
import json
import os

import numpy as np

from . import __version__
from .attacks import AttackSpec
from .datasets import Dataset, load_csv_dataset, make_gaussian_blobs, make_two_moons
from .smoothing import BoundedProbabilityClassifier, SmoothedClassifier
from .training import FeedForwardClassifier, ModelSpec, TrainConfig


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if v is None:
        return ""
    return str(v)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def write_csv(path, header, rows, config: dict | None = None) -> None:
    stamp = config_hash(config) if config is not None else "none"
    lines = [f"# mixcert={__version__} config_sha256={stamp}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    return header, [ln.split(",") for ln in body[1:]]


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def build_dataset(spec: dict, split: str) -> Dataset:
    """Materialize the train or test split described by a dataset config.

    Supported names: two_moons (n_train/n_test, noise, seeds), blobs
    (class_count, means, n_train/n_test, noise, seeds), csv
    (train_path/test_path, class_count).
    """
    name = spec.get("name", "two_moons")
    seed_key = f"{split}_seed"
    seed = int(spec.get(seed_key, spec.get("seed", 0) + (0 if split == "train" else 1)))
    n = int(spec.get(f"n_{split}", 256))
    clip = spec.get("clip_box")
    if name == "two_moons":
        ds = make_two_moons(n, float(spec.get("noise", 0.1)), seed, split)
    elif name == "blobs":
        ds = make_gaussian_blobs(
            int(spec["class_count"]), n, spec["means"], float(spec.get("noise", 1.0)), seed, split
        )
    elif name == "csv":
        return load_csv_dataset(spec[f"{split}_path"], int(spec["class_count"]), split, seed)
    else:
        raise ValueError(f"unknown dataset {name!r}")
    if clip is not None:
        ds = Dataset(ds.X, ds.y, ds.class_count, ds.split, ds.seed, (float(clip[0]), float(clip[1])))
    return ds


def attack_spec_from(spec: dict, target: str | None = None) -> AttackSpec:
    return AttackSpec(
        norm=spec.get("norm", "inf"),
        eps=float(spec.get("eps", 0.1)),
        steps=int(spec.get("steps", 20)),
        step_size=spec.get("step_size"),
        target=target or spec.get("target", "MIX"),
        random_start=bool(spec.get("random_start", False)),
        seed=spec.get("seed"),
    )


def train_config_from(spec: dict) -> TrainConfig:
    adversarial = spec.get("adversarial")
    return TrainConfig(
        epochs=int(spec.get("epochs", 60)),
        learning_rate=float(spec.get("learning_rate", 0.5)),
        batch_size=int(spec.get("batch_size", 32)),
        seed=int(spec.get("seed", 0)),
        adversarial=attack_spec_from(adversarial, target="STD") if adversarial else None,
    )


def model_spec_from(spec: dict) -> ModelSpec:
    return ModelSpec(tuple(spec.get("hidden", (16, 16))), spec.get("activation", "tanh"))


def load_base_classifier(path, base_dir: str = ".") -> FeedForwardClassifier:
    full = path if os.path.isabs(path) else os.path.join(base_dir, path)
    return FeedForwardClassifier.load(full)


def wrap_smoothed(clf, spec: dict) -> SmoothedClassifier:
    floor = spec.get("probability_floor")
    if floor is not None:
        clf = BoundedProbabilityClassifier(base=clf, floor=float(floor))
    return SmoothedClassifier(
        base=clf,
        sigma=float(spec.get("sigma", 0.5)),
        n_samples=int(spec.get("n_samples", 1000)),
        seed=int(spec.get("seed", 0)),
        method=spec.get("method", "mc"),
    )
