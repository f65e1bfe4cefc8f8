"""Convolutional architecture representation and the rules of the search space.

An architecture is an ordered list of layer specs plus the input shape and
class count. A flatten + softmax classifier head is implicit: it is appended
when a model is materialized and never stored in ``layers``. All operations
here are pure; randomness always comes in through an explicit generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

# Layer kinds. Max and average pooling are distinct kinds on purpose: the
# searches treat them as different choices, not one kind with an attribute.
CONV = "conv"
MAXPOOL = "maxpool"
AVGPOOL = "avgpool"
FC = "fc"
DROPOUT = "dropout"
BATCHNORM = "batchnorm"

KINDS = (CONV, MAXPOOL, AVGPOOL, FC, DROPOUT, BATCHNORM)
POOL_KINDS = (MAXPOOL, AVGPOOL)

# Pooling geometry is fixed: 2x2 window, stride 2, floor division.
POOL_WINDOW = 2
POOL_STRIDE = 2


class ArchError(Exception):
    """Base class for architecture-domain errors."""


class ShapeError(ArchError):
    """Tensor shape inference failed."""

    def __init__(self, message: str, layer_index: int = -1):
        super().__init__(message)
        self.layer_index = layer_index


class PoolUnderflow(ShapeError):
    """A pooling layer would reduce a spatial dimension to zero."""


class OrderingViolation(ShapeError):
    """A conv or pooling layer appears after a fully connected layer."""


class ParseError(ArchError):
    """Malformed architecture document."""

    def __init__(self, message: str, position: int = -1):
        super().__init__(message)
        self.position = position


class SchemaError(ArchError):
    """Well-formed document that does not match the architecture schema."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the searchable stack.

    Only the fields relevant to ``kind`` are set; the rest stay ``None``.
    Pooling layers carry no fields (geometry is fixed module-wide).
    """

    kind: str
    out_channels: int | None = None
    kernel: int | None = None
    units: int | None = None
    rate: float | None = None


def conv(out_channels: int, kernel: int) -> LayerSpec:
    if out_channels < 1:
        raise ValueError(f"out_channels must be positive, got {out_channels}")
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"kernel must be a positive odd int, got {kernel}")
    return LayerSpec(CONV, out_channels=out_channels, kernel=kernel)


def maxpool() -> LayerSpec:
    return LayerSpec(MAXPOOL)


def avgpool() -> LayerSpec:
    return LayerSpec(AVGPOOL)


def fc(units: int) -> LayerSpec:
    if units < 1:
        raise ValueError(f"units must be positive, got {units}")
    return LayerSpec(FC, units=units)


def dropout(rate: float) -> LayerSpec:
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate must be in (0,1), got {rate}")
    return LayerSpec(DROPOUT, rate=rate)


def batchnorm() -> LayerSpec:
    return LayerSpec(BATCHNORM)


@dataclass(frozen=True)
class Architecture:
    """Ordered layer stack over a fixed input shape and class count."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int]  # (height, width, channels)
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))


@dataclass(frozen=True)
class SpaceConfig:
    """Bounds, value sets, and sampling probabilities of the search space.

    ``conv_channels_set`` and ``fc_units_set`` enumerate discrete attribute
    choices; when ``None``, samplers fall back to the continuous-style bands
    (``conv_channels_band``, ``[1, fc_units_max]``). Defaults are the swarm
    search's stock space.
    """

    conv_channels_band: tuple[int, int] = (3, 256)
    conv_channels_set: tuple[int, ...] | None = None
    kernel_set: tuple[int, ...] = (3, 5, 7)
    fc_units_max: int = 300
    fc_units_set: tuple[int, ...] | None = None
    dropout_set: tuple[float, ...] = (0.5,)
    layer_bounds: tuple[int, int] = (3, 20)
    layer_type_probabilities: dict[str, float] = field(
        default_factory=lambda: {"conv": 0.6, "pool": 0.3, "fc": 0.1}
    )
    batch_norm_enabled: bool = True
    # Rate of the dropout layer appended after each FC at materialization.
    # 0.0 disables the expansion.
    dropout_rate_default: float = 0.5

    def check(self) -> None:
        """Raise ValueError if the space itself is malformed."""
        lo, hi = self.conv_channels_band
        if not (1 <= lo <= hi):
            raise ValueError(f"bad conv_channels_band {self.conv_channels_band}")
        if not self.kernel_set or any(k < 1 or k % 2 == 0 for k in self.kernel_set):
            raise ValueError(f"kernel_set must be non-empty odd ints, got {self.kernel_set}")
        if self.fc_units_max < 1:
            raise ValueError("fc_units_max must be positive")
        mn, mx = self.layer_bounds
        if not (0 <= mn <= mx):
            raise ValueError(f"bad layer_bounds {self.layer_bounds}")
        probs = self.layer_type_probabilities
        if set(probs) != {"conv", "pool", "fc"}:
            raise ValueError(f"layer_type_probabilities needs conv/pool/fc keys, got {sorted(probs)}")
        if abs(sum(probs.values()) - 1.0) > 1e-9:
            raise ValueError(f"layer_type_probabilities must sum to 1, got {sum(probs.values())}")
        if any(p < 0 for p in probs.values()):
            raise ValueError("layer_type_probabilities must be non-negative")
        if not 0.0 <= self.dropout_rate_default < 1.0:
            raise ValueError(f"bad dropout_rate_default {self.dropout_rate_default}")
        for r in self.dropout_set:
            if not 0.0 < r < 1.0:
                raise ValueError(f"dropout_set rates must be in (0,1), got {r}")

    def replace(self, **changes) -> "SpaceConfig":
        return replace(self, **changes)

    @classmethod
    def pso_default(cls) -> "SpaceConfig":
        return cls()

    @classmethod
    def aco_default(cls) -> "SpaceConfig":
        """Stock space for the colony search: discrete attribute choice sets."""
        return cls(
            conv_channels_set=(32, 64, 128),
            kernel_set=(1, 3, 5),
            fc_units_set=(64, 128, 256),
            dropout_set=(0.1, 0.3, 0.5),
            layer_bounds=(1, 20),
        )

    def to_dict(self) -> dict:
        return {
            "conv_channels_band": list(self.conv_channels_band),
            "conv_channels_set": list(self.conv_channels_set) if self.conv_channels_set else None,
            "kernel_set": list(self.kernel_set),
            "fc_units_max": self.fc_units_max,
            "fc_units_set": list(self.fc_units_set) if self.fc_units_set else None,
            "dropout_set": list(self.dropout_set),
            "layer_bounds": list(self.layer_bounds),
            "layer_type_probabilities": dict(self.layer_type_probabilities),
            "batch_norm_enabled": self.batch_norm_enabled,
            "dropout_rate_default": self.dropout_rate_default,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown space config fields: {sorted(unknown)}")
        base = cls().to_dict()
        base.update(d)
        space = cls(
            conv_channels_band=tuple(base["conv_channels_band"]),
            conv_channels_set=tuple(base["conv_channels_set"]) if base["conv_channels_set"] else None,
            kernel_set=tuple(base["kernel_set"]),
            fc_units_max=base["fc_units_max"],
            fc_units_set=tuple(base["fc_units_set"]) if base["fc_units_set"] else None,
            dropout_set=tuple(base["dropout_set"]),
            layer_bounds=tuple(base["layer_bounds"]),
            layer_type_probabilities=dict(base["layer_type_probabilities"]),
            batch_norm_enabled=bool(base["batch_norm_enabled"]),
            dropout_rate_default=base["dropout_rate_default"],
        )
        space.check()
        return space


@dataclass(frozen=True)
class Violation:
    rule_id: str
    layer_index: int  # -1 for architecture-level rules
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.valid:
            return "valid"
        lines = [f"{len(self.violations)} violation(s)"]
        lines += [f"- [{v.rule_id}] layer {v.layer_index}: {v.message}" for v in self.violations]
        return "\n".join(lines)


def shape_infer(arch: Architecture) -> tuple[list[tuple[int, int, int]], int]:
    """Infer the output shape of every layer plus the head's flatten width.

    Conv layers are stride 1 with size-preserving padding; pooling floors
    both spatial dims by 2; an FC layer consumes the flattened input and
    yields (1, 1, units). Raises PoolUnderflow or OrderingViolation.
    """
    h, w, c = arch.input_shape
    shapes: list[tuple[int, int, int]] = []
    fc_seen = False
    for i, layer in enumerate(arch.layers):
        if layer.kind == CONV:
            if fc_seen:
                raise OrderingViolation(f"conv at index {i} after a fully connected layer", i)
            c = layer.out_channels
        elif layer.kind in POOL_KINDS:
            if fc_seen:
                raise OrderingViolation(f"{layer.kind} at index {i} after a fully connected layer", i)
            nh, nw = h // POOL_STRIDE, w // POOL_STRIDE
            if nh == 0 or nw == 0:
                raise PoolUnderflow(f"pool at index {i} underflows {h}x{w} spatial dims", i)
            h, w = nh, nw
        elif layer.kind == FC:
            fc_seen = True
            h, w, c = 1, 1, layer.units
        elif layer.kind in (DROPOUT, BATCHNORM):
            pass  # shape preserving
        else:
            raise ArchError(f"unknown layer kind {layer.kind!r} at index {i}")
        shapes.append((h, w, c))
    return shapes, h * w * c


def param_count(arch: Architecture) -> int:
    """Trainable parameter count, including the implicit classifier head.

    Conv: (k*k*c_in + 1)*c_out. FC: (flat_in + 1)*units. BatchNorm: 2 per
    channel. Pooling and dropout are free. Head: (flat + 1)*num_classes.
    """
    h, w, c = arch.input_shape
    total = 0
    for layer in arch.layers:
        if layer.kind == CONV:
            total += (layer.kernel * layer.kernel * c + 1) * layer.out_channels
            c = layer.out_channels
        elif layer.kind in POOL_KINDS:
            nh, nw = h // POOL_STRIDE, w // POOL_STRIDE
            if nh == 0 or nw == 0:
                raise PoolUnderflow(f"pool underflows {h}x{w} spatial dims", -1)
            h, w = nh, nw
        elif layer.kind == FC:
            total += (h * w * c + 1) * layer.units
            h, w, c = 1, 1, layer.units
        elif layer.kind == BATCHNORM:
            total += 2 * c
    total += (h * w * c + 1) * arch.num_classes
    return total


def validate(arch: Architecture, space: SpaceConfig) -> ValidationReport:
    """Check every architecture and layer invariant against a space.

    Collects all violations rather than stopping at the first; shape
    inference problems become violations, never exceptions.
    """
    violations: list[Violation] = []
    layers = arch.layers
    mn, mx = space.layer_bounds

    if not (mn <= len(layers) <= mx):
        violations.append(
            Violation("layer_bounds", -1, f"{len(layers)} layers outside [{mn}, {mx}]")
        )
    if layers and layers[0].kind != CONV:
        violations.append(Violation("first_layer_conv", 0, f"first layer is {layers[0].kind}, not conv"))

    lo, hi = space.conv_channels_band
    fc_at = None
    ordering_broken = False
    for i, layer in enumerate(layers):
        if layer.kind == FC and fc_at is None:
            fc_at = i
        if layer.kind in (CONV, *POOL_KINDS) and fc_at is not None:
            violations.append(
                Violation("ordering", i, f"{layer.kind} after fully connected layer at index {fc_at}")
            )
            ordering_broken = True
        if layer.kind == CONV:
            if not (lo <= layer.out_channels <= hi):
                violations.append(
                    Violation("conv_channels", i, f"out_channels {layer.out_channels} outside [{lo}, {hi}]")
                )
            if layer.kernel not in space.kernel_set:
                violations.append(
                    Violation("conv_kernel", i, f"kernel {layer.kernel} not in {sorted(space.kernel_set)}")
                )
        elif layer.kind == FC:
            if not (1 <= layer.units <= space.fc_units_max):
                violations.append(
                    Violation("fc_units", i, f"units {layer.units} outside [1, {space.fc_units_max}]")
                )
        elif layer.kind == DROPOUT:
            if layer.rate not in space.dropout_set:
                violations.append(
                    Violation("dropout_rate", i, f"rate {layer.rate} not in {sorted(space.dropout_set)}")
                )

    if not ordering_broken:
        try:
            shape_infer(arch)
        except PoolUnderflow as e:
            violations.append(Violation("pool_underflow", e.layer_index, str(e)))

    return ValidationReport(tuple(violations))


def draw_layer_kind(space: SpaceConfig, rng: np.random.Generator) -> str:
    """One three-way slot-kind draw: 'conv' | 'pool' | 'fc'."""
    probs = space.layer_type_probabilities
    u = rng.random()
    if u < probs["conv"]:
        return "conv"
    if u < probs["conv"] + probs["pool"]:
        return "pool"
    return "fc"


def draw_slot_kinds(depth: int, space: SpaceConfig, rng: np.random.Generator) -> list[str]:
    """Draw the kind for every slot of a ``depth``-layer stack.

    Slot 0 is forced to conv; once an fc comes up, every later slot is
    forced to fc (ordering rule). Returned kinds are the coarse classes
    'conv' | 'pool' | 'fc'; pooling flavour and attributes come later.
    """
    kinds = ["conv"]
    fc_locked = False
    for _ in range(depth - 1):
        if fc_locked:
            kinds.append("fc")
            continue
        k = draw_layer_kind(space, rng)
        if k == "fc":
            fc_locked = True
        kinds.append(k)
    return kinds


def _draw_channels(space: SpaceConfig, rng: np.random.Generator) -> int:
    if space.conv_channels_set:
        return int(space.conv_channels_set[rng.integers(len(space.conv_channels_set))])
    lo, hi = space.conv_channels_band
    return int(rng.integers(lo, hi + 1))


def _draw_kernel(space: SpaceConfig, rng: np.random.Generator) -> int:
    return int(space.kernel_set[rng.integers(len(space.kernel_set))])


def _draw_units(space: SpaceConfig, rng: np.random.Generator) -> int:
    if space.fc_units_set:
        return int(space.fc_units_set[rng.integers(len(space.fc_units_set))])
    return int(rng.integers(1, space.fc_units_max + 1))


def sample_conv(space: SpaceConfig, rng: np.random.Generator) -> LayerSpec:
    return conv(_draw_channels(space, rng), _draw_kernel(space, rng))


def sample_fc(space: SpaceConfig, rng: np.random.Generator) -> LayerSpec:
    return fc(_draw_units(space, rng))


def sample_random(
    space: SpaceConfig,
    rng: np.random.Generator,
    input_shape: tuple[int, int, int] = (28, 28, 1),
    num_classes: int = 10,
) -> Architecture:
    """Sample a uniformly random valid architecture from the space.

    Depth is uniform over ``layer_bounds``; slot kinds follow the configured
    type probabilities under the ordering rule. A pool draw that would
    underflow the spatial dims is realized as a conv instead of resampled,
    so sampling stays O(depth).
    """
    mn, mx = space.layer_bounds
    depth = int(rng.integers(mn, mx + 1))
    kinds = draw_slot_kinds(depth, space, rng)

    layers: list[LayerSpec] = []
    h, w = input_shape[0], input_shape[1]
    for k in kinds:
        if k == "pool" and (h < POOL_WINDOW or w < POOL_WINDOW):
            k = "conv"
        if k == "conv":
            layers.append(sample_conv(space, rng))
        elif k == "pool":
            layers.append(maxpool() if rng.random() < 0.5 else avgpool())
            h, w = h // POOL_STRIDE, w // POOL_STRIDE
        else:
            layers.append(sample_fc(space, rng))
    return Architecture(tuple(layers), tuple(input_shape), num_classes)


def materialize(arch: Architecture, space: SpaceConfig) -> Architecture:
    """Expand an architecture to its trainable form.

    When enabled, a batchnorm follows every conv and a default-rate dropout
    follows every fc, unless one is already there. Idempotent; the implicit
    flatten + softmax head stays implicit.
    """
    out: list[LayerSpec] = []
    n = len(arch.layers)
    for i, layer in enumerate(arch.layers):
        out.append(layer)
        nxt = arch.layers[i + 1].kind if i + 1 < n else None
        if layer.kind == CONV and space.batch_norm_enabled and nxt != BATCHNORM:
            out.append(batchnorm())
        if layer.kind == FC and space.dropout_rate_default > 0.0 and nxt != DROPOUT:
            out.append(dropout(space.dropout_rate_default))
    return replace(arch, layers=tuple(out))


def materialized_layer_count(arch: Architecture, space: SpaceConfig) -> int:
    """Layer count of the trainable form, the reporting convention.

    Counts the expanded stack plus the flatten and classifier layers of the
    implicit head, so a 20-slot stack reports as roughly 30.
    """
    return len(materialize(arch, space).layers) + 2


# --- canonical document form -------------------------------------------------

def _layer_to_dict(layer: LayerSpec) -> dict:
    if layer.kind == CONV:
        return {"kind": "conv", "out_channels": layer.out_channels, "kernel": layer.kernel}
    if layer.kind == FC:
        return {"kind": "fc", "units": layer.units}
    if layer.kind == DROPOUT:
        return {"kind": "dropout", "rate": layer.rate}
    if layer.kind in (MAXPOOL, AVGPOOL, BATCHNORM):
        return {"kind": layer.kind}
    raise ArchError(f"unknown layer kind {layer.kind!r}")


def to_document_dict(arch: Architecture) -> dict:
    """Plain-dict form of the canonical document, keys in canonical order."""
    return {
        "input_shape": list(arch.input_shape),
        "num_classes": arch.num_classes,
        "layers": [_layer_to_dict(layer) for layer in arch.layers],
    }


def serialize(arch: Architecture) -> str:
    """Canonical text document: fixed key order, no whitespace, UTF-8 safe.

    Byte equality of two documents implies architecture equality.
    """
    return json.dumps(to_document_dict(arch), separators=(",", ":"), ensure_ascii=True)


def _require(d: dict, key: str, types, ctx: str):
    if key not in d:
        raise SchemaError(f"{ctx}: missing field {key!r}")
    v = d[key]
    if not isinstance(v, types) or isinstance(v, bool):
        raise SchemaError(f"{ctx}: field {key!r} has wrong type {type(v).__name__}")
    return v


def _layer_from_dict(d: dict, index: int) -> LayerSpec:
    ctx = f"layer {index}"
    if not isinstance(d, dict):
        raise SchemaError(f"{ctx}: expected an object")
    kind = _require(d, "kind", str, ctx)
    allowed = {
        "conv": {"kind", "out_channels", "kernel"},
        "fc": {"kind", "units"},
        "dropout": {"kind", "rate"},
        "maxpool": {"kind"},
        "avgpool": {"kind"},
        "batchnorm": {"kind"},
    }
    if kind not in allowed:
        raise SchemaError(f"{ctx}: unknown layer kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise SchemaError(f"{ctx}: unexpected fields {sorted(extra)} for kind {kind!r}")
    try:
        if kind == "conv":
            return conv(_require(d, "out_channels", int, ctx), _require(d, "kernel", int, ctx))
        if kind == "fc":
            return fc(_require(d, "units", int, ctx))
        if kind == "dropout":
            return dropout(_require(d, "rate", (int, float), ctx))
    except ValueError as e:
        raise SchemaError(f"{ctx}: {e}") from e
    return LayerSpec(kind)


def from_document_dict(doc: dict) -> Architecture:
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object")
    extra = set(doc) - {"input_shape", "num_classes", "layers"}
    if extra:
        raise SchemaError(f"unexpected top-level fields {sorted(extra)}")
    shape = _require(doc, "input_shape", list, "document")
    if len(shape) != 3 or not all(isinstance(x, int) and not isinstance(x, bool) and x > 0 for x in shape):
        raise SchemaError(f"input_shape must be three positive ints, got {shape!r}")
    num_classes = _require(doc, "num_classes", int, "document")
    if num_classes < 1:
        raise SchemaError(f"num_classes must be positive, got {num_classes}")
    layers_raw = _require(doc, "layers", list, "document")
    layers = tuple(_layer_from_dict(d, i) for i, d in enumerate(layers_raw))
    return Architecture(layers, (shape[0], shape[1], shape[2]), num_classes)


def deserialize(text: str) -> Architecture:
    """Parse a canonical document. ParseError on bad syntax, SchemaError otherwise."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad document syntax: {e.msg}", position=e.pos) from e
    return from_document_dict(doc)
