"""Two-phase periodic microstructure optimization.

Python bindings for the C++ core: experiment configs (with the built-in
presets), the continuation optimizer, effective-tensor evaluation, the
perimeter functional and field I/O.
"""

from ._core import (
    Config,
    config_from_file,
    config_from_toml,
    config_hash,
    evaluate,
    export_field,
    gradcheck,
    load_field,
    modica_mortola,
    optimize,
    preset,
    preset_names,
    project,
    prolongate,
    save_field,
    volume_fractions,
)

__version__ = "0.1.0"

__all__ = [
    "Config",
    "config_from_file",
    "config_from_toml",
    "config_hash",
    "evaluate",
    "export_field",
    "gradcheck",
    "load_field",
    "modica_mortola",
    "optimize",
    "preset",
    "preset_names",
    "project",
    "prolongate",
    "save_field",
    "volume_fractions",
    "__version__",
]
