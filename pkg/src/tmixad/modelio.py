"""JSON model files and atomic output writing."""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .dataset import StandardizationStats
from .encoder import PARAM_NAMES, EncoderParams
from .mixture import MixtureParams
from .trainer import Model, TrainConfig

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    pass


@contextmanager
def atomic_write(path: str | os.PathLike, mode: str = "w"):
    """Write to a temporary file beside ``path`` and rename on success, so a
    failure never leaves a partial file behind."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, mode, encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def model_to_dict(model: Model) -> dict:
    # json writes floats with repr(), the shortest exact round-trip form
    return {
        "schema_version": SCHEMA_VERSION,
        "config": model.config.to_dict(),
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "std": model.standardization.std.tolist(),
        },
        "encoder": {name: getattr(model.encoder, name).tolist() for name in PARAM_NAMES},
        "mixture": {
            "weights": model.mixture.weights.tolist(),
            "prototypes": model.mixture.prototypes.tolist(),
            "scales": model.mixture.scales.tolist(),
            "density_mode": model.mixture.density_mode.value,
        },
    }


def model_from_dict(doc: dict) -> Model:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFileError(f"unsupported model schema_version {version!r}, expected {SCHEMA_VERSION}")
    try:
        enc = EncoderParams(*(np.array(doc["encoder"][name], dtype=np.float64) for name in PARAM_NAMES))
        mix = doc["mixture"]
        mixture = MixtureParams(
            np.array(mix["weights"], dtype=np.float64),
            np.array(mix["prototypes"], dtype=np.float64),
            np.array(mix["scales"], dtype=np.float64),
            mix["density_mode"],
        )
        stats = StandardizationStats(
            np.array(doc["standardization"]["mean"], dtype=np.float64),
            np.array(doc["standardization"]["std"], dtype=np.float64),
        )
        config = TrainConfig.from_dict(doc["config"])
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc
    if mixture.d != enc.dims[2]:
        raise ModelFileError("mixture dimension does not match encoder latent width")
    return Model(enc, mixture, stats, config)


def save_model(model: Model, path: str | os.PathLike) -> None:
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=True)
    with atomic_write(path) as fh:
        fh.write(text + "\n")


def load_model(path: str | os.PathLike) -> Model:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelFileError(f"no such model file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
