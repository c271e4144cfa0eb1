"""Plain-text weight files that round-trip doubles exactly.

Layout: a version header, the embedding dimension, one declaration line
per network (operators first, then heads, names sorted), then each
network's weight rows with 17 significant digits per value.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .network import SIGMOID, TANH, DenseNetwork, Layer
from .tnn import Tnn

MAGIC = "tnn"
VERSION = "v1"


class WeightFormatError(ValueError):
    """Unreadable or inconsistent weight file."""


def save_tnn(tnn: Tnn, path) -> None:
    """Write the model to a deterministic text file."""
    entries = tnn.networks()
    lines = [f"{MAGIC} {VERSION}", f"dim {tnn.embedding_dim}", f"nets {len(entries)}"]
    for kind, name, net in entries:
        dims = net.dims()
        if kind == "op":
            arity = 0 if dims[0] == 1 else dims[0] // tnn.embedding_dim
            extra = arity
        else:
            extra = net.output_size
        lines.append(f"net {name} {kind} {extra} " + " ".join(str(d) for d in dims))
    for _, name, net in entries:
        lines.append(f"weights {name}")
        for layer in net.layers:
            for row in layer.weights:
                lines.append(" ".join(format(v, ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        self.path = str(path)
        self.lines = Path(path).read_text().splitlines()
        self.pos = 0

    def next_line(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise WeightFormatError(f"{self.path}: unexpected end of file, {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def done(self) -> bool:
        return all(not line.strip() for line in self.lines[self.pos :])


def _read_int(text: str, reader: _Reader, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise WeightFormatError(f"{reader.path}: bad {what} {text!r}") from None


def load_tnn(path) -> Tnn:
    """Read a weight file written by save_tnn."""
    reader = _Reader(path)
    header = reader.next_line("expected header").split()
    if len(header) != 2 or header[0] != MAGIC:
        raise WeightFormatError(f"{reader.path}: not a weight file")
    if header[1] != VERSION:
        raise WeightFormatError(
            f"{reader.path}: version {header[1]} is not supported, expected {VERSION}"
        )
    dim_line = reader.next_line("expected dim").split()
    if len(dim_line) != 2 or dim_line[0] != "dim":
        raise WeightFormatError(f"{reader.path}: expected 'dim <n>'")
    dim = _read_int(dim_line[1], reader, "dimension")
    if dim < 1:
        raise WeightFormatError(f"{reader.path}: dimension must be positive")
    count_line = reader.next_line("expected nets").split()
    if len(count_line) != 2 or count_line[0] != "nets":
        raise WeightFormatError(f"{reader.path}: expected 'nets <n>'")
    n_nets = _read_int(count_line[1], reader, "network count")

    declarations = []
    names = set()
    for _ in range(n_nets):
        parts = reader.next_line("expected a net declaration").split()
        if len(parts) < 6 or parts[0] != "net" or parts[2] not in ("op", "head"):
            raise WeightFormatError(f"{reader.path}: bad declaration {parts!r}")
        name, kind = parts[1], parts[2]
        if name in names:
            raise WeightFormatError(f"{reader.path}: duplicate network {name!r}")
        names.add(name)
        extra = _read_int(parts[3], reader, "declaration field")
        dims = [_read_int(v, reader, "layer size") for v in parts[4:]]
        if len(dims) < 2 or min(dims) < 1:
            raise WeightFormatError(
                f"{reader.path}: network {name!r} has bad layer sizes {dims}"
            )
        if kind == "op":
            expected_input = extra * dim if extra > 0 else 1
            if dims[0] != expected_input or dims[-1] != dim:
                raise WeightFormatError(
                    f"{reader.path}: operator {name!r} sizes {dims} do not"
                    f" match arity {extra} and dimension {dim}"
                )
        else:
            if dims[0] != dim or dims[-1] != extra:
                raise WeightFormatError(
                    f"{reader.path}: head {name!r} sizes {dims} do not match"
                    f" dimension {dim} and output size {extra}"
                )
        declarations.append((name, kind, dims))

    operator_nets: dict[str, DenseNetwork] = {}
    head_nets: dict[str, DenseNetwork] = {}
    for name, kind, dims in declarations:
        marker = reader.next_line(f"expected weights for {name!r}").split()
        if marker != ["weights", name]:
            raise WeightFormatError(
                f"{reader.path}: expected 'weights {name}', got {' '.join(marker)!r}"
            )
        final = SIGMOID if kind == "head" else TANH
        layers = []
        last = len(dims) - 2
        for k in range(len(dims) - 1):
            rows = np.empty((dims[k + 1], dims[k] + 1))
            for r in range(dims[k + 1]):
                row = reader.next_line(f"in network {name!r}").split()
                if len(row) != dims[k] + 1:
                    raise WeightFormatError(
                        f"{reader.path}: network {name!r} layer {k} row {r}:"
                        f" expected {dims[k] + 1} values, got {len(row)}"
                    )
                try:
                    rows[r] = [float(v) for v in row]
                except ValueError:
                    raise WeightFormatError(
                        f"{reader.path}: network {name!r} layer {k} row {r}:"
                        f" bad number"
                    ) from None
            if not np.all(np.isfinite(rows)):
                raise WeightFormatError(
                    f"{reader.path}: network {name!r} layer {k} has a"
                    f" non-finite weight"
                )
            layers.append(Layer(rows, final if k == last else TANH))
        if kind == "op":
            operator_nets[name] = DenseNetwork(layers)
        else:
            head_nets[name] = DenseNetwork(layers)
    if not reader.done():
        raise WeightFormatError(f"{reader.path}: trailing content after weights")
    return Tnn(dim, operator_nets, head_nets)
