import os
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np


def split_csv_list(value: Union[str, Sequence[str]]) -> List[str]:
    """Parse a comma-separated string (or pass a list through) into items.

    This allows setting list-valued options as "a,b,c" in config files and
    CLI flags.
    """
    if isinstance(value, str):
        stripped = value.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            stripped = stripped[1:-1]
        return [item.strip().strip("'\"") for item in stripped.split(",") if item.strip()]
    return [str(item) for item in value]


def create_dir_if_not_exists(directory: Union[str, Path]) -> Path:
    """Create a directory if it doesn't exist.

    Args:
        directory: The directory path to create

    Returns:
        The directory as a Path
    """
    os.makedirs(directory, exist_ok=True)
    return Path(directory)


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Derive `count` independent integer seeds from one master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]
