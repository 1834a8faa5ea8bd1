"""Numeric tabular dataset shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class NumericalError(RuntimeError):
    """A numerical routine (factorization, solve) failed on valid-looking input."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix with an optional response column.

    Parameters
    ----------
    inputs : array_like, shape (n, d)
        Input attributes. A 1-D array is read as a single column.
    response : array_like, shape (n,), optional
        Response values aligned with the rows of ``inputs``.
    column_names : sequence of str, optional
        Names of the input columns.
    response_name : str, optional
        Name of the response column.
    """

    inputs: np.ndarray
    response: Optional[np.ndarray] = None
    column_names: Optional[tuple] = None
    response_name: Optional[str] = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"inputs must be a non-empty n x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            bad = sorted(set(np.argwhere(~np.isfinite(x))[:, 0].tolist()))
            raise ValueError(f"inputs contain non-finite values in rows {bad[:10]}")
        object.__setattr__(self, "inputs", x)

        if self.response is not None:
            y = np.asarray(self.response, dtype=float).reshape(-1)
            if y.shape[0] != x.shape[0]:
                raise ValueError(
                    f"response length {y.shape[0]} does not match {x.shape[0]} input rows"
                )
            if not np.all(np.isfinite(y)):
                raise ValueError("response contains non-finite values")
            object.__setattr__(self, "response", y)

        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != x.shape[1]:
                raise ValueError(f"{len(names)} column names for {x.shape[1]} columns")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def has_response(self) -> bool:
        return self.response is not None

    def require_response(self) -> np.ndarray:
        if self.response is None:
            raise ValueError("dataset has no response column")
        return self.response

    def names(self) -> tuple:
        if self.column_names is not None:
            return self.column_names
        return tuple(f"x{j + 1}" for j in range(self.d))

    def with_values(self, inputs, response=None) -> "Dataset":
        """Copy carrying the same column names with new values."""
        return Dataset(inputs, response, self.column_names, self.response_name)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows)
        y = None if self.response is None else self.response[rows]
        return Dataset(self.inputs[rows], y, self.column_names, self.response_name)

    @staticmethod
    def concat(*parts: "Dataset") -> "Dataset":
        xs = np.vstack([p.inputs for p in parts])
        if all(p.response is not None for p in parts):
            ys = np.concatenate([p.response for p in parts])
        else:
            ys = None
        first = parts[0]
        return Dataset(xs, ys, first.column_names, first.response_name)
