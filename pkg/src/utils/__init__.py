# Utils module
from .blob_io import read_blob, write_blob
from .config import apply_overrides, build_dataclass, load_config, save_config
from .manifest_io import append_to_manifest, read_manifest, write_manifest

__all__ = [
    "append_to_manifest",
    "apply_overrides",
    "build_dataclass",
    "load_config",
    "read_blob",
    "read_manifest",
    "save_config",
    "write_blob",
    "write_manifest",
]
