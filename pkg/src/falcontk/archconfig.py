"""Line-based architecture config parser.

One record per line::

    layer <name> conv=<type> D=<int> M=<int> N=<int> H=<int> W=<int> s=<int> p=<int> [k=<int>] [t=<real>] [g=<int>]

``#`` starts a comment, blank lines are ignored, unknown keys are errors.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from .analysis import ConvType, LayerSpec
from .errors import FormatError
from .tensor import ConvDims

REQUIRED = ("conv", "D", "M", "N", "H", "W", "s", "p")
OPTIONAL = ("k", "t", "g")


def _int(key, value, lineno):
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"line {lineno}: {key}={value!r} is not an integer") from None


def parse_line(line: str, lineno: int) -> LayerSpec | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    words = text.split()
    if words[0] != "layer" or len(words) < 2 or "=" in words[1]:
        raise FormatError(f"line {lineno}: expected 'layer <name> key=value ...', got {text!r}")
    name = words[1]
    fields = {}
    for word in words[2:]:
        key, sep, value = word.partition("=")
        if not sep or not value:
            raise FormatError(f"line {lineno}: malformed field {word!r}")
        if key not in REQUIRED and key not in OPTIONAL:
            raise FormatError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value
    missing = [k for k in REQUIRED if k not in fields]
    if missing:
        raise FormatError(f"line {lineno}: missing keys {', '.join(missing)}")
    try:
        t = Fraction(fields["t"]) if "t" in fields else None
    except ValueError:
        raise FormatError(f"line {lineno}: t={fields['t']!r} is not a number") from None
    g = _int("g", fields["g"], lineno) if "g" in fields else None
    try:
        conv = ConvType(fields["conv"], t=t, g=g)
        dims = ConvDims(*(_int(k, fields[k], lineno) for k in ("D", "M", "N", "H", "W", "s", "p")))
        k = _int("k", fields["k"], lineno) if "k" in fields else 1
        return LayerSpec(name, dims, conv, k)
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(f"line {lineno}: {exc}") from exc


def parse_config(text: str) -> list[LayerSpec]:
    layers = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        spec = parse_line(line, lineno)
        if spec is not None:
            layers.append(spec)
    return layers


def load_config(path) -> list[LayerSpec]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_layer(layer: LayerSpec) -> str:
    d = layer.dims
    parts = [
        f"layer {layer.name} conv={layer.conv.tag}",
        f"D={d.D} M={d.M} N={d.N} H={d.H} W={d.W} s={d.s} p={d.p}",
    ]
    if layer.k != 1:
        parts.append(f"k={layer.k}")
    if layer.conv.t is not None:
        parts.append(f"t={layer.conv.t}")
    if layer.conv.g is not None:
        parts.append(f"g={layer.conv.g}")
    return " ".join(parts)
