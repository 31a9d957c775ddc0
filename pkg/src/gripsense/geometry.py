"""Contact-geometry reconstruction.

Calibration maps background-subtracted RGB to surface normals with a small
MLP trained by full-batch gradient descent; a sparse Poisson solve turns the
predicted normal field into a heightmap. Training is hand-rolled (forward,
analytic backprop, plain GD) because the model is tiny and the package needs
deterministic, dependency-free fitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .core import DiffFrame, HeightMap, NormalMap

LAYER_SIZES = (5, 32, 32, 2)
DEFAULT_EPOCHS = 1000
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_SPHERE_RADIUS_MM = 5.0

_NORM_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class Rgb2NormalModel:
    """MLP weights for the RGB-to-normal mapping.

    Input 5 (diff R, G, B, normalized x, y), two tanh hidden layers of 32,
    linear output 2 squashed radially so (nx, ny) always has norm < 1;
    nz = sqrt(1 - nx^2 - ny^2) then makes the normal unit by construction.
    ``final_loss`` is the training loss after the last step (None for models
    loaded from disk); ``loss_history`` holds the loss before each step plus
    the final value.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    final_loss: float | None = None
    loss_history: tuple = ()

    def __post_init__(self):
        shapes = {"w1": (32, 5), "b1": (32,), "w2": (32, 32), "b2": (32,),
                  "w3": (2, 32), "b3": (2,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite weights")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class CalibrationDataset:
    """(feature, unit normal) pairs sampled from sphere presses."""

    features: np.ndarray        # (N, 5)
    normals: np.ndarray         # (N, 3)
    sphere_radius_mm: float = DEFAULT_SPHERE_RADIUS_MM

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        n = np.asarray(self.normals, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != 5:
            raise ValueError("features must be (N, 5)")
        if n.shape != (f.shape[0], 3):
            raise ValueError("normals must be (N, 3)")
        if f.shape[0] == 0:
            raise ValueError("calibration dataset must be non-empty")
        if np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) > 1e-6:
            raise ValueError("ground-truth normals must be unit length")
        f = f.copy(); f.setflags(write=False)
        n = n.copy(); n.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "normals", n)

    def __len__(self) -> int:
        return self.features.shape[0]


def _pixel_features(values: np.ndarray) -> np.ndarray:
    """(H*W, 5) rows of (R, G, B, x, y) with coordinates scaled to [-1, 1]."""
    h, w, _ = values.shape
    xn = 2.0 * np.arange(w) / max(w - 1, 1) - 1.0
    yn = 2.0 * np.arange(h) / max(h - 1, 1) - 1.0
    xm, ym = np.meshgrid(xn, yn)
    return np.column_stack([values.reshape(-1, 3), xm.ravel(), ym.ravel()])


def build_calibration_dataset(presses) -> CalibrationDataset:
    """Label sphere-press frames with analytic cap normals.

    Each press is (DiffFrame, center px (x, y), contact radius px, sphere
    radius mm, px_per_mm). In-contact pixels get the sphere normal at their
    offset from the center; an equal-sized, evenly strided sample of
    out-of-contact pixels gets the flat normal (0, 0, 1) so the model also
    learns the background.
    """
    if not presses:
        raise ValueError("need at least one calibration press")
    feats, norms = [], []
    radius_mm = DEFAULT_SPHERE_RADIUS_MM
    for frame, center, contact_radius_px, sphere_radius_mm, px_per_mm in presses:
        cx, cy = float(center[0]), float(center[1])
        h, w, _ = frame.values.shape
        if not (0.0 <= cx <= w - 1 and 0.0 <= cy <= h - 1):
            raise ValueError("sphere center outside the frame")
        if not contact_radius_px < sphere_radius_mm * px_per_mm:
            raise ValueError("contact radius must be below the sphere radius")
        radius_mm = float(sphere_radius_mm)
        pix = _pixel_features(frame.values)
        xm, ym = np.meshgrid(np.arange(w), np.arange(h))
        dx_mm = (xm.ravel() - cx) / px_per_mm
        dy_mm = (ym.ravel() - cy) / px_per_mm
        rho2 = dx_mm ** 2 + dy_mm ** 2
        inside = rho2 <= (contact_radius_px / px_per_mm) ** 2
        r = sphere_radius_mm
        nz = np.sqrt(np.maximum(r * r - rho2[inside], 0.0)) / r
        feats.append(pix[inside])
        norms.append(np.column_stack([dx_mm[inside] / r, dy_mm[inside] / r, nz]))
        out_idx = np.nonzero(~inside)[0]
        take = min(len(out_idx), max(int(inside.sum()), 1))
        if take:
            sel = out_idx[np.linspace(0, len(out_idx) - 1, take).astype(int)]
            feats.append(pix[sel])
            flat = np.zeros((len(sel), 3))
            flat[:, 2] = 1.0
            norms.append(flat)
    return CalibrationDataset(np.vstack(feats), np.vstack(norms), radius_mm)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def _squash(u: np.ndarray):
    """Radial tanh: n = u * tanh(|u|)/|u|, smooth at 0, norm always < 1.

    Returns n plus the factors needed by the backward pass.
    """
    r = np.linalg.norm(u, axis=1)
    small = r < 1e-6
    g = np.where(small, 1.0 - r * r / 3.0, np.tanh(r) / np.where(r == 0, 1.0, r))
    sech2 = 1.0 / np.cosh(np.clip(r, 0.0, 20.0)) ** 2
    q = np.where(small, -2.0 / 3.0,
                 (sech2 - g) / np.where(small, 1.0, r * r))
    return u * g[:, None], g, q


def _forward(params, x):
    w1, b1, w2, b2, w3, b3 = params
    z1 = np.tanh(x @ w1.T + b1)
    z2 = np.tanh(z1 @ w2.T + b2)
    u = z2 @ w3.T + b3
    n, g, q = _squash(u)
    return n, (x, z1, z2, u, g, q)


def _loss_and_grads(params, x, t):
    w1, b1, w2, b2, w3, b3 = params
    n, (x, z1, z2, u, g, q) = _forward(params, x)
    diff = n - t
    loss = float(np.sum(diff * diff) / x.shape[0])
    dn = 2.0 * diff / x.shape[0]
    du = dn * g[:, None] + u * (np.sum(u * dn, axis=1) * q)[:, None]
    dw3 = du.T @ z2
    db3 = du.sum(axis=0)
    dz2 = (du @ w3) * (1.0 - z2 * z2)
    dw2 = dz2.T @ z1
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ w2) * (1.0 - z1 * z1)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return loss, (dw1, db1, dw2, db2, dw3, db3)


def fit_rgb2normal(data: CalibrationDataset, epochs: int = DEFAULT_EPOCHS,
                   learning_rate: float = DEFAULT_LEARNING_RATE,
                   seed: int = 0) -> Rgb2NormalModel:
    """Full-batch gradient descent on mean squared (nx, ny) error.

    Deterministic for a given seed. At the default learning rate the recorded
    loss history is non-increasing; a diverging run (non-finite loss) raises
    instead of returning garbage weights.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    rng = np.random.default_rng(seed)
    params = []
    for fan_out, fan_in in ((32, 5), (32, 32), (2, 32)):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        params.append(np.zeros(fan_out))
    x = data.features
    t = data.normals[:, :2]
    history = []
    loss = np.inf
    for _ in range(epochs):
        loss, grads = _loss_and_grads(params, x, t)
        if not np.isfinite(loss):
            raise ValueError("diverged; reduce learning rate")
        history.append(loss)
        params = [p - learning_rate * dp for p, dp in zip(params, grads)]
    final, _ = _loss_and_grads(params, x, t)
    if not np.isfinite(final):
        raise ValueError("diverged; reduce learning rate")
    history.append(final)
    return Rgb2NormalModel(*params, final_loss=final, loss_history=tuple(history))


def predict_normals(frame: DiffFrame, model: Rgb2NormalModel) -> NormalMap:
    """Per-pixel inference; output normals are unit length with nz > 0."""
    h, w, _ = frame.values.shape
    params = (model.w1, model.b1, model.w2, model.b2, model.w3, model.b3)
    n2, _ = _forward(params, _pixel_features(frame.values))
    norm = np.linalg.norm(n2, axis=1)
    over = norm > _NORM_CLAMP
    if np.any(over):
        n2 = n2.copy()
        n2[over] *= (_NORM_CLAMP / norm[over])[:, None]
    nz = np.sqrt(np.maximum(1.0 - np.sum(n2 * n2, axis=1), 0.0))
    return NormalMap(np.dstack([n2[:, 0].reshape(h, w), n2[:, 1].reshape(h, w),
                                nz.reshape(h, w)]))


# ---------------------------------------------------------------------------
# Poisson integration
# ---------------------------------------------------------------------------

_SOLVER_CACHE: dict = {}


def _poisson_solver(h: int, w: int):
    """Cached LU factorization of the interior 5-point Laplacian."""
    key = (h, w)
    if key not in _SOLVER_CACHE:
        def lap1(n):
            return sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], (n, n))
        hi, wi = h - 2, w - 2
        lap = sparse.kron(sparse.identity(hi), lap1(wi)) \
            + sparse.kron(lap1(hi), sparse.identity(wi))
        _SOLVER_CACHE[key] = splu(lap.tocsc())
    return _SOLVER_CACHE[key]


def integrate_normals(n: NormalMap, px_per_mm: float) -> HeightMap:
    """Poisson integration of the normal field into a heightmap.

    The slope field g = (-nx/nz, -ny/nz)/px_per_mm (mm per pixel) feeds
    grad h = g; the equation laplacian(h) = div g is solved with zero height
    on the frame edge (the gel is undeformed there) and the result is
    gauge-fixed so its minimum is exactly 0.
    """
    if not px_per_mm > 0:
        raise ValueError("px_per_mm must be positive")
    v = n.values
    h, w = v.shape[:2]
    if h < 3 or w < 3:
        raise ValueError("normal map too small to integrate")
    gx = -v[:, :, 0] / v[:, :, 2] / px_per_mm
    gy = -v[:, :, 1] / v[:, :, 2] / px_per_mm
    div = np.zeros((h, w))
    div[1:-1, 1:-1] = (gx[1:-1, 2:] - gx[1:-1, :-2]
                       + gy[2:, 1:-1] - gy[:-2, 1:-1]) / 2.0
    try:
        solver = _poisson_solver(h, w)
        sol = solver.solve(div[1:-1, 1:-1].ravel())
    except RuntimeError as exc:                    # pragma: no cover
        raise ValueError(f"singular Poisson system: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise ValueError("singular Poisson system: non-finite solution")
    full = np.zeros((h, w))
    full[1:-1, 1:-1] = sol.reshape(h - 2, w - 2)
    return HeightMap(full - full.min(), px_per_mm)


def reconstruction_error(predicted: HeightMap, truth: HeightMap) -> float:
    """Mean squared difference in mm^2 after aligning both gauges to min 0."""
    if predicted.values.shape != truth.values.shape:
        raise ValueError("heightmap shapes differ")
    p = predicted.values - predicted.values.min()
    t = truth.values - truth.values.min()
    return float(np.mean((p - t) ** 2))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_rgb2normal(model: Rgb2NormalModel, path) -> None:
    """Layer-size header plus whitespace-separated weights, full precision."""
    parts = [" ".join(str(s) for s in LAYER_SIZES)]
    for arr in (model.w1, model.b1, model.w2, model.b2, model.w3, model.b3):
        parts.append(" ".join(f"{v:.17g}" for v in arr.ravel()))
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def load_rgb2normal(path) -> Rgb2NormalModel:
    with open(path) as f:
        tokens = f.read().split()
    sizes = tokens[:len(LAYER_SIZES)]
    if [int(float(s)) for s in sizes] != list(LAYER_SIZES):
        raise ValueError(f"unsupported layer sizes {sizes}")
    vals = np.array([float(t) for t in tokens[len(LAYER_SIZES):]])
    shapes = [(32, 5), (32,), (32, 32), (32,), (2, 32), (2,)]
    need = sum(int(np.prod(s)) for s in shapes)
    if vals.size != need:
        raise ValueError(f"expected {need} weights, found {vals.size}")
    arrs, at = [], 0
    for s in shapes:
        cnt = int(np.prod(s))
        arrs.append(vals[at:at + cnt].reshape(s))
        at += cnt
    return Rgb2NormalModel(*arrs, final_loss=None)
