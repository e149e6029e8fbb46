"""Plain-text persistence for arrays and trained models.

Array format::

    f64 2 3
    0.0 1.0 2.0
    3.0 4.0 5.0

The header holds the kind and the dimensions; then one line per last-axis
row in row-major order, each value written with ``repr`` so it reads back
bit-exact.
"""

import logging
from pathlib import Path
from typing import Iterator, List, Union

import numpy as np

from . import ndarray as nd
from .errors import ShapeError
from .ndarray import Kind, Ndarray
from .neural import Activation, Input, Network
from .regression import LinearModel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_text(x: Ndarray) -> str:
    lines = [" ".join([x.kind.value] + [str(d) for d in x.shape])]
    width = x.shape[-1]
    values = x.data.tolist()
    for start in range(0, len(values), width):
        lines.append(" ".join(repr(float(v)) for v in values[start:start + width]))
    return "\n".join(lines) + "\n"


def _read_array(lines: Iterator[str]) -> Ndarray:
    try:
        header = next(lines).split()
    except StopIteration:
        raise ValueError("Missing array header")
    if not header or header[0] not in ("f32", "f64"):
        raise ValueError(f"Bad array header {' '.join(header)!r}")
    kind = Kind(header[0])
    try:
        shape = nd.check_shape([int(d) for d in header[1:]])
    except ValueError as e:
        raise ShapeError(f"Bad array dimensions in header: {e}")
    rows = nd.numel(shape) // shape[-1]
    values: List[float] = []
    for _ in range(rows):
        try:
            row = [float(v) for v in next(lines).split()]
        except StopIteration:
            raise ShapeError(f"Array of shape {shape} is truncated")
        if len(row) != shape[-1]:
            raise ShapeError(f"Row has {len(row)} values, expected {shape[-1]}")
        values.extend(row)
    return Ndarray(shape, np.asarray(values, dtype=kind.dtype), kind)


def from_text(text: str) -> Ndarray:
    return _read_array(iter(text.splitlines()))


def save_ndarray(path: PathLike, x: Ndarray) -> None:
    Path(path).write_text(to_text(x))


def load_ndarray(path: PathLike) -> Ndarray:
    return from_text(Path(path).read_text())


def _write_params(lines: List[str], params) -> None:
    for name, value in params.items():
        lines.append(f"param {name}")
        lines.append(to_text(value).rstrip("\n"))


def _read_params(lines: Iterator[str]) -> dict:
    params = {}
    for line in lines:
        if not line.strip():
            continue
        tag, _, name = line.partition(" ")
        if tag != "param" or not name:
            raise ValueError(f"Expected 'param <name>', got {line!r}")
        params[name] = _read_array(lines)
    return params


def save_network(path: PathLike, net: Network) -> None:
    lines = [f"network {len(net.layers)}"]
    for layer in net.layers:
        if isinstance(layer, Input):
            lines.append("input " + " ".join(str(d) for d in layer.shape))
        else:
            lines.append(f"linear {layer.out_dim} {layer.activation.value}")
    _write_params(lines, net.params)
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info("Saved network with %d parameters to %s", net.param_count(), path)


def load_network(path: PathLike) -> Network:
    lines = iter(Path(path).read_text().splitlines())
    header = next(lines, "").split()
    if len(header) != 2 or header[0] != "network":
        raise ValueError(f"Not a network file: {path}")
    net = None
    for _ in range(int(header[1])):
        fields = next(lines, "").split()
        if fields and fields[0] == "input" and net is None:
            net = Network().input(tuple(int(d) for d in fields[1:]))
        elif fields and fields[0] == "linear" and net is not None:
            net.linear(int(fields[1]), Activation(fields[2]))
        else:
            raise ValueError(f"Bad layer line {' '.join(fields)!r}")
    params = _read_params(lines)
    if set(params) != set(net.params):
        raise ValueError(f"Parameters {sorted(params)} do not match layers {sorted(net.params)}")
    for name, value in params.items():
        if value.shape != net.params[name].shape:
            raise ShapeError(f"Parameter {name} has shape {value.shape}, layer needs {net.params[name].shape}")
    net.params = params
    net.kind = next(iter(params.values())).kind
    return net


def save_linear_model(path: PathLike, model: LinearModel) -> None:
    lines = [f"linear_model {str(model.intercept).lower()}"]
    _write_params(lines, {"w": model.w, "b": model.b})
    Path(path).write_text("\n".join(lines) + "\n")


def load_linear_model(path: PathLike) -> LinearModel:
    lines = iter(Path(path).read_text().splitlines())
    header = next(lines, "").split()
    if len(header) != 2 or header[0] != "linear_model" or header[1] not in ("true", "false"):
        raise ValueError(f"Not a linear model file: {path}")
    params = _read_params(lines)
    if set(params) != {"w", "b"}:
        raise ValueError(f"Linear model needs w and b, got {sorted(params)}")
    return LinearModel(params["w"], params["b"], header[1] == "true")
