"""ReLU feed-forward networks and their exact piecewise-affine structure.

A network is a chain of dense affine layers, each optionally followed by a
ReLU.  For a fixed on/off assignment of every ReLU neuron (an activation
pattern) the network restricted to the matching input region is a single
affine map; this module evaluates networks, extracts patterns, and produces
that affine restriction together with the half-space description of the
region itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .polytope import HPolytope

_uid_counter = itertools.count(1)


@dataclass(frozen=True)
class AffineLayer:
    """One dense layer: x -> ReLU(W x + b) when has_relu, else W x + b."""

    weights: np.ndarray
    bias: np.ndarray
    has_relu: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise InputError(f"layer weights must be a matrix, got ndim={w.ndim}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise InputError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    """A ReLU feed-forward network with chained dense layers."""

    layers: tuple[AffineLayer, ...]
    uid: int = field(default=0, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("a network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise InputError(
                    f"layer dimensions do not chain: {a.out_dim} -> {b.in_dim}"
                )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "uid", next(_uid_counter))

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def relu_layer_sizes(self) -> tuple[int, ...]:
        return tuple(l.out_dim for l in self.layers if l.has_relu)

    @property
    def relu_neuron_count(self) -> int:
        return sum(self.relu_layer_sizes)


@dataclass(frozen=True)
class ActivationPattern:
    """On/off status of every ReLU neuron, grouped by ReLU layer.

    Bit 1 means the pre-activation was strictly positive; a pre-activation of
    exactly 0 is recorded as inactive (bit 0) so patterns are deterministic on
    region boundaries.  Equality and hashing use the bits only.
    """

    bits: tuple[tuple[int, ...], ...]
    network_uid: int

    def __eq__(self, other):
        return isinstance(other, ActivationPattern) and self.bits == other.bits

    def __hash__(self):
        return hash(self.bits)

    def key(self) -> tuple[int, ...]:
        """Flattened bit tuple; a deterministic sort/identity key."""
        return tuple(b for layer in self.bits for b in layer)

    def __str__(self):
        return "|".join("".join(str(b) for b in layer) for layer in self.bits)


@dataclass(frozen=True)
class AffineRestriction:
    """The affine map A' x + b' the network computes on one activation region."""

    A_prime: np.ndarray
    b_prime: np.ndarray


def _check_input(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != net.input_dim:
        raise InputError(f"input has length {x.shape[0]}, expected {net.input_dim}")
    return x


def _check_pattern(net: Network, p: ActivationPattern) -> None:
    if p.network_uid != net.uid:
        raise InputError("activation pattern is not bound to this network")
    shape = tuple(len(layer) for layer in p.bits)
    if shape != net.relu_layer_sizes:
        raise InputError(
            f"pattern shape {shape} does not match ReLU layers {net.relu_layer_sizes}"
        )


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate the network at x."""
    v = _check_input(net, x)
    for layer in net.layers:
        v = layer.weights @ v + layer.bias
        if layer.has_relu:
            v = np.maximum(v, 0.0)
    return v


def activation_pattern(net: Network, x: np.ndarray) -> ActivationPattern:
    """Record which ReLU neurons fire (pre-activation > 0) at input x."""
    v = _check_input(net, x)
    bits = []
    for layer in net.layers:
        v = layer.weights @ v + layer.bias
        if layer.has_relu:
            bits.append(tuple(int(z > 0.0) for z in v))
            v = np.maximum(v, 0.0)
    return ActivationPattern(bits=tuple(bits), network_uid=net.uid)


def preactivation_forms(
    net: Network, p: ActivationPattern
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Affine form (W, c) of every ReLU layer's pre-activation, in input terms.

    Under pattern p each ReLU is replaced by multiplication with its bit, so
    all downstream pre-activations are affine in the network input.  Returns
    one (matrix, offset) pair per ReLU layer.
    """
    _check_pattern(net, p)
    A = np.eye(net.input_dim)
    b = np.zeros(net.input_dim)
    forms = []
    relu_idx = 0
    for layer in net.layers:
        A = layer.weights @ A
        b = layer.weights @ b + layer.bias
        if layer.has_relu:
            forms.append((A.copy(), b.copy()))
            mask = np.asarray(p.bits[relu_idx], dtype=float)
            A = A * mask[:, None]
            b = b * mask
            relu_idx += 1
    return forms


def affine_restriction(net: Network, p: ActivationPattern) -> AffineRestriction:
    """The single affine map the network equals on the region of pattern p."""
    _check_pattern(net, p)
    A = np.eye(net.input_dim)
    b = np.zeros(net.input_dim)
    relu_idx = 0
    for layer in net.layers:
        A = layer.weights @ A
        b = layer.weights @ b + layer.bias
        if layer.has_relu:
            mask = np.asarray(p.bits[relu_idx], dtype=float)
            A = A * mask[:, None]
            b = b * mask
            relu_idx += 1
    return AffineRestriction(A_prime=A, b_prime=b)


def region_halfspaces(net: Network, p: ActivationPattern) -> HPolytope:
    """H-representation of the activation region of pattern p.

    One half-space per ReLU neuron, oriented so points satisfying it reproduce
    the neuron's bit: an active neuron with pre-activation w.x + c contributes
    -w.x <= c, an inactive one w.x <= -c.  Rows are labeled (l, n) with l the
    ReLU-layer ordinal and n the neuron index, both 0-based.
    """
    forms = preactivation_forms(net, p)
    rows_A, rows_b, labels = [], [], []
    for l, (W, c) in enumerate(forms):
        bits = p.bits[l]
        for n in range(W.shape[0]):
            if bits[n]:
                rows_A.append(-W[n])
                rows_b.append(c[n])
            else:
                rows_A.append(W[n])
                rows_b.append(-c[n])
            labels.append((l, n))
    return HPolytope(
        A=np.array(rows_A, dtype=float),
        b=np.array(rows_b, dtype=float),
        row_labels=tuple(labels),
    )


def compose(outer: Network, inner: Network) -> Network:
    """The network computing outer(inner(x)); layer lists concatenate."""
    if inner.output_dim != outer.input_dim:
        raise InputError(
            f"cannot compose: inner outputs {inner.output_dim}, "
            f"outer expects {outer.input_dim}"
        )
    return Network(layers=inner.layers + outer.layers)


def gradient_in_region(net: Network, p: ActivationPattern, j: int) -> np.ndarray:
    """Constant gradient of output j with respect to the input, on region p."""
    if not 0 <= j < net.output_dim:
        raise InputError(f"output index {j} out of range 0..{net.output_dim - 1}")
    return affine_restriction(net, p).A_prime[j]


def flip(p: ActivationPattern, l: int, n: int) -> ActivationPattern:
    """Copy of p with exactly the bit of neuron (l, n) inverted."""
    if not 0 <= l < len(p.bits):
        raise InputError(f"ReLU layer index {l} out of range")
    if not 0 <= n < len(p.bits[l]):
        raise InputError(f"neuron index {n} out of range for layer {l}")
    bits = list(map(list, p.bits))
    bits[l][n] = 1 - bits[l][n]
    return ActivationPattern(
        bits=tuple(tuple(layer) for layer in bits), network_uid=p.network_uid
    )
