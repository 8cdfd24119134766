"""Test-function generators and plain-text function files."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .space import MetricMeasureSpace
from .spectral import SelfAdjointOperator


def eigenvector(op: SelfAdjointOperator, k: int) -> np.ndarray:
    """The ``k``-th mu-orthonormal eigenvector (ascending eigenvalues)."""
    if not 0 <= k < op.size:
        raise DomainError(f"eigenvector index {k} out of range")
    return np.array(op.eigenvectors[:, k])


def random_gaussian(space: MetricMeasureSpace, seed: int) -> np.ndarray:
    """Independent standard normal values, one per point."""
    return np.random.default_rng(seed).standard_normal(space.size)


def _locate(space: MetricMeasureSpace, where) -> int:
    if np.ndim(where) == 0:
        idx = int(where)
        if not 0 <= idx < space.size:
            raise DomainError(f"point index {idx} out of range")
        return idx
    return space.nearest(where)


def kronecker_delta(space: MetricMeasureSpace, where) -> np.ndarray:
    """Indicator of one point, given by index or by nearest coordinates."""
    f = np.zeros(space.size)
    f[_locate(space, where)] = 1.0
    return f


def smooth_bump(space: MetricMeasureSpace, center, width: float) -> np.ndarray:
    """``exp(1 - 1/(1 - (d/width)^2))`` for ``d < width``, else 0.

    ``d`` is the Euclidean distance to ``center`` when the space has
    coordinates, otherwise the metric distance to point ``center``.
    """
    if not width > 0:
        raise DomainError("bump width must be positive")
    if space.coords is not None and np.ndim(center) > 0:
        d = np.linalg.norm(space.coords - np.asarray(center, float), axis=1)
    else:
        d = space.metric[_locate(space, center)]
    z = np.clip(d / width, 0.0, 1.0)
    out = np.zeros(space.size)
    inside = z < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


_SPEC = re.compile(r"^\s*([a-z-]+)\s*\((.*)\)\s*$")


def _numbers(text: str) -> list[float]:
    return [float(v) for v in re.split(r"[\s,;]+", text.strip()) if v]


def function_from_spec(spec: str, op: SelfAdjointOperator) -> tuple[str, np.ndarray]:
    """Build a function from a tag such as ``eigenvector(3)``.

    Supported tags: ``zero()``, ``constant(c)``, ``eigenvector(k)``,
    ``random-gaussian(seed)``, ``kronecker-delta(i)`` or
    ``kronecker-delta(x; y)``, ``smooth-bump(x; y; width)`` (last number is
    the width, the others the centre) and ``file(path)``.
    """
    space = op.space
    match = _SPEC.match(spec)
    if not match:
        raise DomainError(f"malformed function spec {spec!r}")
    kind, arg = match.groups()
    if kind == "file":
        return spec, load_function(arg.strip(), space.size)
    nums = _numbers(arg)
    if kind == "zero":
        return spec, np.zeros(space.size)
    if kind == "constant":
        return spec, np.full(space.size, nums[0] if nums else 1.0)
    if kind == "eigenvector":
        return spec, eigenvector(op, int(nums[0]))
    if kind == "random-gaussian":
        return spec, random_gaussian(space, int(nums[0]))
    if kind == "kronecker-delta":
        where = int(nums[0]) if len(nums) == 1 else nums
        return spec, kronecker_delta(space, where)
    if kind == "smooth-bump":
        if len(nums) < 2:
            raise DomainError("smooth-bump needs a centre and a width")
        centre = int(nums[0]) if len(nums) == 2 else nums[:-1]
        return spec, smooth_bump(space, centre, nums[-1])
    raise DomainError(f"unknown function kind {kind!r}")


def default_family(op: SelfAdjointOperator) -> list[tuple[str, np.ndarray]]:
    """Twenty test functions: six eigenvectors, six noise draws, eight point masses.

    Spaces with fewer than six points contribute all their eigenvectors.
    Point masses are placed by coordinates so the same family is produced at
    every resolution of a refinable space on the unit interval or square.
    """
    space = op.space
    specs = [f"eigenvector({k})" for k in range(min(6, op.size))]
    specs += [f"random-gaussian({seed})" for seed in range(6)]
    dim = 1 if space.coords is None else space.coords.shape[1]
    if dim == 1:
        spots = [(v,) for v in (0.5, 0.25, 0.0, 0.8, 1.0, 0.1, 0.65, 0.4)]
    else:
        spots = [(0.5, 0.5), (0.25, 0.25), (0.0, 0.0), (0.8, 0.4),
                 (1.0, 1.0), (0.5, 0.0), (0.75, 0.75), (0.1, 0.9)]
    if space.coords is None:
        specs += [f"kronecker-delta({int(i * (space.size - 1))})" for (i, *_) in spots]
    else:
        fmt = lambda pt: "; ".join(repr(float(v)) for v in pt)  # noqa: E731
        specs += [f"kronecker-delta({fmt(pt)})" for pt in spots]
    return [function_from_spec(s, op) for s in specs]


def load_function(path: str | Path, size: int | None = None) -> np.ndarray:
    """Read whitespace-separated values, one per point, in index order."""
    text = Path(path).read_text()
    vals = np.array([float(v) for v in text.split()])
    if size is not None and vals.size != size:
        raise DomainError(f"{path}: expected {size} values, found {vals.size}")
    return vals


def save_function(path: str | Path, f: Sequence[float]) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in f))
