"""Parameterized semantic perturbations and their exact ReLU encodings.

Three atomic perturbations are supported: a global brightness decrease, an
additive patch over a fixed window, and a one-step translation blend.  An
ordered list of atoms becomes a single perturbation g(theta, x): atom i
consumes parameter theta_i, atoms apply first-to-last, and the final result
is clamped to [0, 1].

`encode` turns the perturbation, curried with a concrete image, into a ReLU
network from parameter space to image space: one affine stage per atom
followed by two clip layers (-ReLU(v) + 1 applied twice clamps each pixel to
[0, 1]).  `apply_direct` is an independent reference evaluator with the same
semantics; both share one index-map derivation for translation so they cannot
diverge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .network import AffineLayer, Network


@dataclass(frozen=True)
class Brightness:
    """Subtract theta from every pixel (decrease; theta >= 0 darkens)."""


@dataclass(frozen=True)
class Patch:
    """Add theta to every pixel inside a fixed window.

    The window test follows the row/column split of the flattened index i:
    px <= i // w <= px + pw and py <= i % w <= py + ph, all ends inclusive.
    """

    px: int
    py: int
    pw: int
    ph: int


@dataclass(frozen=True)
class Translation:
    """Blend between two integer shifts: at theta=0 pixel i reads its source
    offset by (tx - 1) rows of the flattened grid, at theta=1 by (tx - 2);
    reads outside the image zero-pad the pixel."""

    tx: int


PerturbationKind = Brightness | Patch | Translation


@dataclass(frozen=True)
class ImageMeta:
    width: int
    height: int
    channels: int = 1

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


def translation_index_maps(meta: ImageMeta, tx: int):
    """Source/target flat indices and the in-bounds mask for a translation.

    For output pixel i: s(i) = (i//w + tx - 1) * w + i%w and
    t(i) = s(i) - w.  A pixel is valid when t(i) >= 0 and s(i) <= N-1;
    invalid pixels are zero-padded.  Shared by the encoder, the reference
    evaluator and the expected-map transform.
    """
    w, n = meta.width, meta.n_pixels
    i = np.arange(n)
    s = (i // w + tx - 1) * w + (i % w)
    t = s - w
    valid = (t >= 0) & (s <= n - 1)
    return s, t, valid


@dataclass(frozen=True)
class PerturbationSpec:
    """Ordered atomic perturbations plus the parameter box and image shape."""

    atoms: tuple[PerturbationKind, ...]
    theta_box: np.ndarray
    image_meta: ImageMeta

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise InputError("perturbation needs at least one atom")
        box = np.asarray(self.theta_box, dtype=float)
        if box.shape != (len(atoms), 2):
            raise InputError(
                f"theta box shape {box.shape} does not match {len(atoms)} atoms"
            )
        if np.any(box[:, 0] > box[:, 1]):
            raise InputError("theta box has an empty interval")
        if np.any(box[:, 0] > 0.0) or np.any(box[:, 1] < 0.0):
            raise InputError("theta box must contain the unperturbed point 0")
        if self.image_meta.channels != 1:
            raise InputError("only single-channel images are supported")
        meta = self.image_meta
        for k, atom in enumerate(atoms):
            if isinstance(atom, Patch):
                if not (0 <= atom.px and atom.px + atom.pw < meta.width):
                    raise InputError("patch window exceeds image width")
                if not (0 <= atom.py and atom.py + atom.ph < meta.height):
                    raise InputError("patch window exceeds image height")
                if atom.pw < 0 or atom.ph < 0:
                    raise InputError("patch extents must be nonnegative")
            elif isinstance(atom, Translation):
                if abs(atom.tx) >= meta.width:
                    raise InputError("translation amount must satisfy |tx| < width")
                if k != 0:
                    # With the shift coefficients taken from the original
                    # image, the encoding is only exact when no other atom
                    # precedes the translation.
                    raise InputError("a translation atom must come first")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "theta_box", box)

    @property
    def dim(self) -> int:
        return len(self.atoms)

    @property
    def has_translation(self) -> bool:
        return any(isinstance(a, Translation) for a in self.atoms)


def _patch_mask(atom: Patch, meta: ImageMeta) -> np.ndarray:
    i = np.arange(meta.n_pixels)
    return (
        (atom.px <= i // meta.width)
        & (i // meta.width <= atom.px + atom.pw)
        & (atom.py <= i % meta.width)
        & (i % meta.width <= atom.py + atom.ph)
    )


def _check_image(spec: PerturbationSpec, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape[0] != spec.image_meta.n_pixels:
        raise InputError(
            f"image has {x0.shape[0]} pixels, meta says {spec.image_meta.n_pixels}"
        )
    if np.any(x0 < 0.0) or np.any(x0 > 1.0):
        raise InputError("pixel intensities must lie in [0, 1]")
    return x0


def _atom_stage_matrix(
    spec: PerturbationSpec, k: int, x0: np.ndarray
) -> np.ndarray:
    """Stage matrix of atom k over [remaining params ; pixels].

    Input length (dim-k)+N, output length (dim-k-1)+N: the stage consumes the
    first remaining parameter, copies the rest, and rewrites the pixels.
    """
    meta = spec.image_meta
    n = meta.n_pixels
    n_rest = spec.dim - k - 1
    M = np.zeros((n_rest + n, (n_rest + 1) + n))
    for r in range(n_rest):
        M[r, r + 1] = 1.0
    px_col = n_rest + 1
    atom = spec.atoms[k]
    if isinstance(atom, Brightness):
        for i in range(n):
            M[n_rest + i, px_col + i] = 1.0
            M[n_rest + i, 0] = -1.0
    elif isinstance(atom, Patch):
        on = _patch_mask(atom, meta)
        for i in range(n):
            M[n_rest + i, px_col + i] = 1.0
            if on[i]:
                M[n_rest + i, 0] = 1.0
    elif isinstance(atom, Translation):
        s, t, valid = translation_index_maps(meta, atom.tx)
        for i in range(n):
            if valid[i]:
                M[n_rest + i, px_col + s[i]] = 1.0
                M[n_rest + i, 0] = x0[t[i]] - x0[s[i]]
    else:
        raise InputError(f"unknown atom kind {type(atom).__name__}")
    return M


def encode(
    spec: PerturbationSpec, x0: np.ndarray, *, simplified_brightness: bool = False
) -> Network:
    """Curry the perturbation with image x0 into a ReLU network on theta.

    The network has one linear stage per atom (the first stage absorbs the
    constant image) and ends with the two clip layers that clamp every output
    pixel to [0, 1].  With simplified_brightness=True (tests only, brightness
    single atom) the clip layers are replaced by a single ReLU, i.e. the bare
    ReLU(x0 - theta) form.
    """
    x0 = _check_image(spec, x0)
    n = spec.image_meta.n_pixels
    if simplified_brightness:
        if spec.dim != 1 or not isinstance(spec.atoms[0], Brightness):
            raise InputError(
                "simplified form only exists for a single brightness atom"
            )
        return Network(
            layers=(
                AffineLayer(
                    weights=-np.ones((n, 1)), bias=x0.copy(), has_relu=True
                ),
            )
        )
    layers = []
    for k in range(spec.dim):
        M = _atom_stage_matrix(spec, k, x0)
        if k == 0:
            W = M[:, : spec.dim]
            b = M[:, spec.dim :] @ x0
        else:
            W = M
            b = np.zeros(M.shape[0])
        layers.append(AffineLayer(weights=W, bias=b, has_relu=False))
    eye = np.eye(n)
    ones = np.ones(n)
    layers.append(AffineLayer(weights=eye, bias=np.zeros(n), has_relu=True))
    layers.append(AffineLayer(weights=-eye, bias=ones, has_relu=True))
    layers.append(AffineLayer(weights=-eye, bias=ones, has_relu=False))
    return Network(layers=tuple(layers))


def _check_theta(spec: PerturbationSpec, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != spec.dim:
        raise InputError(f"theta has length {theta.shape[0]}, expected {spec.dim}")
    box = spec.theta_box
    if np.any(theta < box[:, 0] - 1e-9) or np.any(theta > box[:, 1] + 1e-9):
        raise InputError("theta lies outside the parameter box")
    return theta


def apply_direct(
    spec: PerturbationSpec, theta: np.ndarray, x0: np.ndarray
) -> np.ndarray:
    """Reference evaluation of the perturbed image, without any network.

    Atoms apply in order on the running image; translation blends
    x[s] + theta * (x[t] - x[s]) with zero padding where the reads leave the
    grid; the final image is clamped to [0, 1].
    """
    theta = _check_theta(spec, theta)
    x = _check_image(spec, x0).copy()
    for atom, th in zip(spec.atoms, theta):
        if isinstance(atom, Brightness):
            x = x - th
        elif isinstance(atom, Patch):
            x = x + th * _patch_mask(atom, spec.image_meta)
        elif isinstance(atom, Translation):
            s, t, valid = translation_index_maps(spec.image_meta, atom.tx)
            y = np.zeros_like(x)
            y[valid] = x[s[valid]] + th * (x[t[valid]] - x[s[valid]])
            x = y
    return np.clip(x, 0.0, 1.0)


def expected_map_transform(
    spec: PerturbationSpec, m: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """How an attention map is expected to move under the perturbation.

    Brightness and patch atoms keep the map; a translation atom moves it with
    the same blend as the image, but without the [0, 1] clamp since map values
    are not pixel intensities.  Accepts the map flat or image-shaped and
    preserves the shape.
    """
    theta = _check_theta(spec, theta)
    m = np.asarray(m, dtype=float)
    shape = m.shape
    v = m.ravel().copy()
    if v.shape[0] != spec.image_meta.n_pixels:
        raise InputError("attention map does not have image dimensions")
    for atom, th in zip(spec.atoms, theta):
        if isinstance(atom, Translation):
            s, t, valid = translation_index_maps(spec.image_meta, atom.tx)
            y = np.zeros_like(v)
            y[valid] = v[s[valid]] + th * (v[t[valid]] - v[s[valid]])
            v = y
    return v.reshape(shape)
