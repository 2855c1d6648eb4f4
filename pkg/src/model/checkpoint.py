"""Checkpoint directories: manifest.json plus one FVT1 file per tensor."""

import json
import os

from src.config import _, logger
from src.errors import CheckpointError, ConfigError
from src.model.config import ModelConfig
from src.model.network import V2EMModel
from src.tensor import fvt1
from src.vision.repvgg import MODES, is_buffer

FORMAT = "fv2es-checkpoint"
VERSION = 1
MANIFEST = "manifest.json"
TENSOR_DIR = "tensors"


def save_checkpoint(model: V2EMModel, directory: str) -> str:
    """Write the model; identical models produce identical bytes."""
    os.makedirs(os.path.join(directory, TENSOR_DIR), exist_ok=True)
    entries = []
    for name in sorted(model.state):
        tensor = model.state[name]
        file = f"{TENSOR_DIR}/{name}.fvt"
        fvt1.save(os.path.join(directory, file), tensor)
        entries.append({"name": name, "file": file, "shape": list(tensor.shape),
                        "dtype": tensor.dtype.name, "role": "buffer" if is_buffer(name) else "param"})
    manifest = {"format": FORMAT, "version": VERSION, "mode": model.mode,
                "config": model.config.to_dict(), "tensors": entries}
    path = os.path.join(directory, MANIFEST)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(_("Saved {} checkpoint with {} tensors to {}").format(model.mode, len(entries), directory))
    return path


def read_manifest(directory: str) -> dict:
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"checkpoint directory {directory} does not exist")
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError as error:
        raise CheckpointError(f"{directory} has no {MANIFEST}") from error
    except json.JSONDecodeError as error:
        raise CheckpointError(f"{path}: {error}") from error
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not an {FORMAT} manifest")
    if manifest.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')}")
    if manifest.get("mode") not in MODES:
        raise CheckpointError(f"unknown checkpoint mode {manifest.get('mode')!r}")
    return manifest


def expected_shapes(config: ModelConfig, mode: str) -> dict[str, tuple[int, ...]]:
    model = V2EMModel.initialize(config)
    if mode == "fused":
        model = model.fused()
    return {name: tensor.shape for name, tensor in model.state.items()}


def load_checkpoint(directory: str) -> V2EMModel:
    manifest = read_manifest(directory)
    try:
        config = ModelConfig.from_dict(manifest.get("config"))
    except ConfigError as error:
        raise CheckpointError(f"checkpoint config is invalid: {error}") from error
    mode = manifest["mode"]
    state = {}
    for entry in manifest.get("tensors", []):
        try:
            name, file = entry["name"], entry["file"]
            shape, dtype = tuple(entry["shape"]), entry["dtype"]
        except (KeyError, TypeError) as error:
            raise CheckpointError(f"malformed tensor entry {entry!r}") from error
        try:
            tensor = fvt1.load(os.path.join(directory, file))
        except FileNotFoundError as error:
            raise CheckpointError(f"tensor file {file} is missing") from error
        if tensor.shape != shape or tensor.dtype.name != dtype:
            raise CheckpointError(f"{name}: file holds {tensor.dtype.name}{tensor.shape}, manifest says {dtype}{shape}")
        state[name] = tensor

    expected = expected_shapes(config, mode)
    if set(state) != set(expected):
        missing, extra = sorted(set(expected) - set(state)), sorted(set(state) - set(expected))
        raise CheckpointError(f"tensor set mismatch; missing {missing[:5]}, unexpected {extra[:5]}")
    for name, shape in expected.items():
        if state[name].shape != shape:
            raise CheckpointError(f"{name}: shape {state[name].shape} does not fit the config, expected {shape}")
        if state[name].dtype is not config.tensor_dtype:
            raise CheckpointError(f"{name}: dtype {state[name].dtype.name} differs from config dtype {config.dtype}")
    logger.info(_("Loaded {} checkpoint from {}").format(mode, directory))
    return V2EMModel(config, state, mode)
