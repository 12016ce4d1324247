import os
import random
import typing

import numpy as np
import torch

SEED_VARIABLE = "ASC_LAB_SEED"


def setup_torch(seed: int):
    torch.set_default_dtype(torch.float64)
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def environment_seed(default: int) -> int:
    value = os.environ.get(SEED_VARIABLE)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        print(f"Warning: ignoring non-integer {SEED_VARIABLE}={value!r}")
        return default


def format_table(rows: typing.Sequence[typing.Sequence[str]]) -> str:
    widths = [max(len(row[i]) for row in rows if i < len(row)) for i in range(max(len(r) for r in rows))]
    lines = ['  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return '\n'.join(lines) + '\n'


def format_number(value: float, digits: int) -> str:
    if value == 0:
        return "0"
    return f"{value:.{digits}g}"

