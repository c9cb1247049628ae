"""
Model Bundles

A bundle is a directory holding everything inference needs:

    bundle.json   format version and the ModelSpec (approach, scale, backbone,
                  head and aggregator configs, input normalisation)
    backbone.tqw  backbone weights (position grid already resized for ViT
                  Upscaling)
    heads.tqw     classification head and aggregator weights
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from thumbqc.backbone.weights import load_weights_file, save_weights_file
from thumbqc.core.errors import ModelBundleError
from thumbqc.heads.model import FixationModel, ModelSpec

logger = logging.getLogger(__name__)

BUNDLE_VERSION = 1
SPEC_FILE = "bundle.json"
BACKBONE_FILE = "backbone.tqw"
HEADS_FILE = "heads.tqw"


def save_bundle(model: FixationModel, directory: Union[str, Path], seed: Optional[int] = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": BUNDLE_VERSION, "spec": model.spec.model_dump(mode="json")}
    (out / SPEC_FILE).write_text(json.dumps(manifest, indent=2) + "\n")
    save_weights_file(model.backbone_weights(seed), out / BACKBONE_FILE)
    save_weights_file(model.readout_weights(seed), out / HEADS_FILE)
    logger.info("Saved %s bundle to %s", model.approach.value, out)
    return out


def load_bundle_spec(directory: Union[str, Path]) -> ModelSpec:
    path = Path(directory) / SPEC_FILE
    if not path.is_file():
        raise ModelBundleError(
            f"model bundle {directory} has no {SPEC_FILE}",
            action="Pass the directory written by `thumbqc train`",
        )
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelBundleError(f"{path} is not valid JSON: {e}")
    version = raw.get("format_version")
    if version != BUNDLE_VERSION:
        raise ModelBundleError(f"unsupported bundle version {version!r}, expected {BUNDLE_VERSION}")
    try:
        return ModelSpec.model_validate(raw.get("spec"))
    except ValidationError as e:
        raise ModelBundleError(f"{path} holds an invalid model spec: {e.errors()[0]['msg']}")


def load_bundle(directory: Union[str, Path]) -> FixationModel:
    """Rebuild the model and load both weight containers; the result is in eval mode."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ModelBundleError(f"model bundle {directory} does not exist", action="Check the --model path")
    spec = load_bundle_spec(directory)
    model = FixationModel(spec)
    load_weights_file(directory / BACKBONE_FILE).load_into(model.backbone)
    load_weights_file(directory / HEADS_FILE).load_into(model.readout)
    model.eval()
    logger.info("Loaded %s model (scale %s) from %s", spec.approach.value, spec.scale.value, directory)
    return model
