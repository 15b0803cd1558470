"""Dataset, config, and checkpoint I/O plus the command-line front end."""

from .config import (ModelConfig, RunConfig, SynthConfig, apply_overrides,
                     config_from_dict, config_hash, config_to_dict,
                     load_config, resolve_config, save_config)
from .images import read_pfm, read_ppm, write_pfm, write_ppm
from .manifest import MANIFEST_NAME, MANIFEST_VERSION, load_dataset, write_manifest

__all__ = [
    "MANIFEST_NAME",
    "MANIFEST_VERSION",
    "ModelConfig",
    "RunConfig",
    "SynthConfig",
    "apply_overrides",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "load_config",
    "load_dataset",
    "read_pfm",
    "read_ppm",
    "resolve_config",
    "save_config",
    "write_manifest",
    "write_pfm",
    "write_ppm",
]
