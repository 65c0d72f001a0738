"""Parameter and FLOP counts for FALCON and related convolution blocks.

One FLOP is one multiply-add. Counts are computed with exact rational
arithmetic and must come out as integers; rates are returned as
:class:`fractions.Fraction`.

Per-layer formulas (H', W' from the layer geometry)::

    stconv          D²MN                    H'W'D²MN
    falcon          MN + D²N                HWMN + H'W'D²N        (times k)
    falcon_branch   M²/4 + D²M/2            HWM²/4 + HWD²M/2       (M = N)
    dpconv          MN + D²M                HWD²M + H'W'MN
    pdpconv(t)      tM² + tD²M + tMN        tHWM² + tH'W'D²M + tH'W'MN
    gdgconv(g)      (MN/g + D²N + N²/g)/4   (HWMN/g + H'W'D²N + H'W'N²/g)/4
    pdpconv_split   (M² + D²M)/2            HW(M² + D²M)/2         (M = N)
    stconv_branch   D²M²/4                  HWD²M²/4               (M = N)

The dpconv FLOP row charges the depthwise stage HWD²M rather than the
H'W'D²M an executed pass costs at stride > 1; it is kept as written above.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .conv import output_dims
from .errors import CountError, FalconError, ShapeError
from .tensor import ConvDims

TAGS = (
    "stconv", "falcon", "falcon_branch", "dpconv", "pdpconv",
    "gdgconv", "pdpconv_split", "stconv_branch",
)
_BRANCH_TAGS = {"falcon_branch", "pdpconv_split", "stconv_branch"}


@dataclass(frozen=True)
class ConvType:
    tag: str
    t: Fraction | None = None
    g: int | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown convolution type {self.tag!r}; expected one of {TAGS}")
        if self.tag == "pdpconv":
            if self.t is None:
                raise ValueError("pdpconv needs an expansion ratio t")
            t = Fraction(str(self.t)) if isinstance(self.t, float) else Fraction(self.t)
            if t <= 0:
                raise ValueError(f"expansion ratio t must be positive, got {self.t}")
            object.__setattr__(self, "t", t)
        elif self.t is not None:
            raise ValueError(f"t only applies to pdpconv, not {self.tag}")
        if self.tag == "gdgconv":
            if self.g is None or int(self.g) != self.g or self.g < 1:
                raise ValueError(f"gdgconv needs a positive integer group count, got {self.g!r}")
        elif self.g is not None:
            raise ValueError(f"g only applies to gdgconv, not {self.tag}")

    def __str__(self):
        if self.tag == "pdpconv":
            t = self.t
            text = str(t.numerator) if t.denominator == 1 else format(float(t), "g")
            return f"pdpconv(t={text})"
        if self.tag == "gdgconv":
            return f"gdgconv(g={self.g})"
        return self.tag

    @classmethod
    def parse(cls, text: str) -> "ConvType":
        """Parse ``falcon``, ``pdpconv(t=0.5)``, ``gdgconv(g=2)`` and friends."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*(\w)\s*=\s*([^)\s]+)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse convolution type {text!r}")
        tag, key, value = m.groups()
        if key is None:
            return cls(tag)
        if key == "t":
            return cls(tag, t=Fraction(value))
        if key == "g":
            return cls(tag, g=int(value))
        raise ValueError(f"unknown convolution type parameter {key!r} in {text!r}")


STCONV = ConvType("stconv")
FALCON = ConvType("falcon")


def _as_conv(conv) -> ConvType:
    return conv if isinstance(conv, ConvType) else ConvType.parse(conv)


def _exact(value: Fraction, what: str) -> int:
    if value.denominator != 1:
        raise CountError(f"{what} evaluates to the non-integer {value}")
    return int(value)


def _check(conv: ConvType, dims: ConvDims, k: int):
    if int(k) != k or k < 1:
        raise ValueError(f"rank k must be a positive integer, got {k}")
    if conv.tag in _BRANCH_TAGS and dims.M != dims.N:
        raise ShapeError(f"{conv.tag} counts assume M = N, got M={dims.M}, N={dims.N}")
    if conv.tag == "gdgconv" and (dims.M % conv.g or dims.N % conv.g):
        raise ShapeError(f"g={conv.g} must divide M={dims.M} and N={dims.N}")


def count_params(conv, dims: ConvDims, k: int = 1) -> int:
    conv = _as_conv(conv)
    _check(conv, dims, k)
    D2, M, N = Fraction(dims.D ** 2), Fraction(dims.M), Fraction(dims.N)
    tag = conv.tag
    if tag == "stconv":
        value = D2 * M * N
    elif tag == "falcon":
        value = (M * N + D2 * N) * k
    elif tag == "falcon_branch":
        value = M * M / 4 + D2 * M / 2
    elif tag == "dpconv":
        value = M * N + D2 * M
    elif tag == "pdpconv":
        t = conv.t
        value = t * M * M + t * D2 * M + t * M * N
    elif tag == "gdgconv":
        g = conv.g
        value = (M * N / g + D2 * N + N * N / g) / 4
    elif tag == "pdpconv_split":
        value = (M * M + D2 * M) / 2
    else:  # stconv_branch
        value = D2 * M * M / 4
    return _exact(value, f"{conv} parameter count")


def count_flops(conv, dims: ConvDims, k: int = 1) -> int:
    conv = _as_conv(conv)
    _check(conv, dims, k)
    Ho, Wo = output_dims(dims)
    D2, M, N = Fraction(dims.D ** 2), Fraction(dims.M), Fraction(dims.N)
    HW, HWo = Fraction(dims.H * dims.W), Fraction(Ho * Wo)
    tag = conv.tag
    if tag == "stconv":
        value = HWo * D2 * M * N
    elif tag == "falcon":
        value = (HW * M * N + HWo * D2 * N) * k
    elif tag == "falcon_branch":
        value = HW * M * M / 4 + HW * D2 * M / 2
    elif tag == "dpconv":
        value = HW * D2 * M + HWo * M * N
    elif tag == "pdpconv":
        t = conv.t
        value = t * HW * M * M + t * HWo * D2 * M + t * HWo * M * N
    elif tag == "gdgconv":
        g = conv.g
        value = (HW * M * N / g + HWo * D2 * N + HWo * N * N / g) / 4
    elif tag == "pdpconv_split":
        value = HW * (M * M + D2 * M) / 2
    else:  # stconv_branch
        value = HW * D2 * M * M / 4
    return _exact(value, f"{conv} FLOP count")


def compression_rate(dims: ConvDims, k: int = 1) -> Fraction:
    """Standard-convolution parameters over rank-k FALCON parameters."""
    return Fraction(dims.D ** 2 * dims.M * dims.N, dims.M * dims.N + dims.D ** 2 * dims.N) / k


def computation_reduction_rate(dims: ConvDims, k: int = 1) -> Fraction:
    """Standard-convolution FLOPs over rank-k FALCON FLOPs."""
    Ho, Wo = output_dims(dims)
    D2, M, N = dims.D ** 2, dims.M, dims.N
    return Fraction(Ho * Wo * M * D2 * N, dims.H * dims.W * M * N + Ho * Wo * D2 * N) / k


@dataclass(frozen=True)
class LayerSpec:
    name: str
    dims: ConvDims
    conv: ConvType = FALCON
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "conv", _as_conv(self.conv))
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"layer {self.name}: k must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class LayerCount:
    name: str
    conv: ConvType
    params: int
    flops: int
    stconv_params: int
    stconv_flops: int


@dataclass
class ArchitectureReport:
    """Convolution-layer counts only; BN, activations and biases are not included."""

    layers: list = field(default_factory=list)

    @property
    def params(self) -> int:
        return sum(l.params for l in self.layers)

    @property
    def flops(self) -> int:
        return sum(l.flops for l in self.layers)

    @property
    def stconv_params(self) -> int:
        return sum(l.stconv_params for l in self.layers)

    @property
    def stconv_flops(self) -> int:
        return sum(l.stconv_flops for l in self.layers)

    @property
    def compression_rate(self) -> Fraction:
        return Fraction(self.stconv_params, self.params)

    @property
    def computation_reduction_rate(self) -> Fraction:
        return Fraction(self.stconv_flops, self.flops)


class LayerError(FalconError, ValueError):
    """A per-layer failure annotated with the layer name."""


def analyze_architecture(layers) -> ArchitectureReport:
    report = ArchitectureReport()
    for layer in layers:
        try:
            # rank only scales falcon counts
            row = LayerCount(
                name=layer.name,
                conv=layer.conv,
                params=count_params(layer.conv, layer.dims, layer.k),
                flops=count_flops(layer.conv, layer.dims, layer.k),
                stconv_params=count_params(STCONV, layer.dims),
                stconv_flops=count_flops(STCONV, layer.dims),
            )
        except (ValueError, ArithmeticError) as exc:
            raise LayerError(f"layer {layer.name}: {exc}") from exc
        report.layers.append(row)
    return report
