"""Deterministic keypoint motion model.

Keypoints are extracted from a saliency map (Gaussian-blurred gradient
magnitude of luma): the frame is tiled into cells and each cell contributes
one keypoint at the soft-argmax of its saliency, plus a symmetric 2x2
jacobian built from the cell's second moments (normalized to unit
determinant).  Frames are reconstructed by blending per-keypoint local
affine maps into a dense backward flow and bilinearly warping the source.

Everything here is a pure function of its byte inputs; the encoder and the
decoder rely on extract/reconstruct agreeing bit-for-bit.  The two-function
surface (extract + reconstruct) is the seam where a learned keypoint
detector / renderer can be substituted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import gaussian_filter

from .frames import Frame, ensure_frame, luma, to_uint8

JACOBIAN_RIDGE = 1e-3  # added to cell moment matrices before normalization
DET_FLOOR = 1e-4       # minimum |det| for a jacobian to count as invertible
_MASS_FLOOR = 1e-12    # cell saliency mass below which the cell is featureless


@dataclass(frozen=True)
class MotionParams:
    """Extraction and flow-blending parameters; carried in the stream header."""

    num_keypoints: int = 9
    sigma_heat: float = 2.0   # saliency blur, pixels
    sigma_w: float = 0.1      # flow blending kernel width, normalized units
    beta: float = 1.0         # background (identity motion) weight

    def __post_init__(self):
        if self.num_keypoints < 1:
            raise ValueError("num_keypoints must be >= 1")
        if self.sigma_heat <= 0 or self.sigma_w <= 0:
            raise ValueError("sigma_heat and sigma_w must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class KeypointSet:
    """M keypoints as an (M, 5) float64 array with columns x, y, a, b, d.

    (x, y) is the position in normalized [-1, 1]^2 coordinates; (a, b, d)
    encodes the symmetric jacobian [[a, b], [b, d]].
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != 5 or values.shape[0] < 1:
            raise ValueError(f"keypoint array must be (m, 5), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("keypoint values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def positions(self) -> np.ndarray:
        return self.values[:, :2]

    @property
    def jacobians(self) -> np.ndarray:
        return self.values[:, 2:]

    def __len__(self) -> int:
        return self.values.shape[0]


@lru_cache(maxsize=8)
def normalized_grid(width: int, height: int) -> np.ndarray:
    """(h, w, 2) grid of normalized pixel-center coordinates, x then y.

    Pixel column 0 maps to x = -1 and column w-1 to x = +1 (rows likewise),
    so keypoint coordinates address pixel centers directly.
    """
    xs = np.linspace(-1.0, 1.0, width)
    ys = np.linspace(-1.0, 1.0, height)
    grid = np.stack(np.meshgrid(xs, ys), axis=-1)
    grid.setflags(write=False)
    return grid


def saliency_map(frame: Frame, sigma_heat: float = 2.0) -> np.ndarray:
    gy, gx = np.gradient(luma(frame))
    return gaussian_filter(np.hypot(gx, gy), sigma_heat, mode="reflect")


def _cell_edges(extent: int, grid_size: int) -> list[int]:
    # round() keeps the partition mirror-symmetric, which extraction inherits
    return [round(k * extent / grid_size) for k in range(grid_size + 1)]


def extract_keypoints(frame: Frame, num_keypoints: int = 9, sigma_heat: float = 2.0) -> KeypointSet:
    """Detect ``num_keypoints`` keypoints on a ceil(sqrt(m)) grid of cells.

    Featureless cells (no saliency mass, e.g. constant input) fall back to
    the cell centroid with an identity jacobian.
    """
    frame = ensure_frame(frame)
    if num_keypoints < 1:
        raise ValueError("num_keypoints must be >= 1")
    sal = saliency_map(frame, sigma_heat)
    h, w = sal.shape
    grid_size = math.isqrt(num_keypoints - 1) + 1
    if min(h, w) < grid_size:
        raise ValueError(f"frame {h}x{w} too small for {num_keypoints} keypoints")
    row_edges = _cell_edges(h, grid_size)
    col_edges = _cell_edges(w, grid_size)
    xs = np.linspace(-1.0, 1.0, w)
    ys = np.linspace(-1.0, 1.0, h)

    rows = []
    for k in range(num_keypoints):
        r, c = divmod(k, grid_size)
        r0, r1 = row_edges[r], row_edges[r + 1]
        c0, c1 = col_edges[c], col_edges[c + 1]
        cell = sal[r0:r1, c0:c1]
        cx, cy = xs[c0:c1], ys[r0:r1]
        mass = cell.sum()
        if mass <= _MASS_FLOOR:
            rows.append(((cx[0] + cx[-1]) / 2.0, (cy[0] + cy[-1]) / 2.0, 1.0, 0.0, 1.0))
            continue
        prob = cell / mass
        wx = prob.sum(axis=0)
        wy = prob.sum(axis=1)
        px = wx @ cx
        py = wy @ cy
        dx = cx - px
        dy = cy - py
        mxx = wx @ (dx * dx) + JACOBIAN_RIDGE
        myy = wy @ (dy * dy) + JACOBIAN_RIDGE
        mxy = dy @ (prob @ dx)
        det = max(mxx * myy - mxy * mxy, DET_FLOOR)
        scale = math.sqrt(det)
        rows.append((px, py, mxx / scale, mxy / scale, myy / scale))
    return KeypointSet(np.array(rows, dtype=np.float64))


def jacobian_floor(a: float, b: float, d: float, min_det: float = DET_FLOOR) -> tuple[float, float, float, bool]:
    """Clamp a symmetric 2x2 matrix so |det| >= min_det, preserving eigenvectors.

    Returns (a, b, d, changed).  Eigenvalues of magnitude below sqrt(min_det)
    are pushed out to +-sqrt(min_det); zero eigenvalues become positive.
    """
    det = a * d - b * b
    if abs(det) >= min_det:
        return a, b, d, False
    target = math.sqrt(min_det)
    half_tr = (a + d) / 2.0
    disc = math.hypot((a - d) / 2.0, b)
    eig = []
    for lam in (half_tr + disc, half_tr - disc):
        if abs(lam) >= target:
            eig.append(lam)
        else:
            eig.append(target if lam >= 0 else -target)
    l1, l2 = eig
    if disc == 0.0:  # isotropic: any basis works
        return l1, 0.0, l2, True
    # unit eigenvector for the larger eigenvalue; both candidates solve
    # (A - l1 I) v = 0, pick the better conditioned one
    top = half_tr + disc
    v = (b, top - a) if math.hypot(b, top - a) >= math.hypot(top - d, b) else (top - d, b)
    norm = math.hypot(*v)
    if norm == 0.0:
        return l1, 0.0, l2, True
    vx, vy = v[0] / norm, v[1] / norm
    new_a = l1 * vx * vx + l2 * vy * vy
    new_b = (l1 - l2) * vx * vy
    new_d = l1 * vy * vy + l2 * vx * vx
    return new_a, new_b, new_d, True


def _affine_maps(src_kp: KeypointSet, drv_kp: KeypointSet) -> np.ndarray:
    """Per keypoint: A = J_src adj(J_drv) / det(J_drv) and t = p_src - A p_drv.

    Returns (m, 6) rows [a00, a01, a10, a11, tx, ty].  When source and
    driving keypoints are bitwise identical this yields A = I and t = 0
    exactly, which makes identity reconstruction byte-exact downstream.
    """
    out = np.empty((len(src_kp), 6), dtype=np.float64)
    for k in range(len(src_kp)):
        sx, sy, sa, sb, sd = src_kp.values[k]
        dx_, dy_, da, db, dd = drv_kp.values[k]
        det = da * dd - db * db
        if abs(det) < DET_FLOOR:
            raise ValueError(f"driving jacobian of keypoint {k} is singular (|det| < {DET_FLOOR:g})")
        a00 = (sa * dd - sb * db) / det
        a01 = (sb * da - sa * db) / det
        a10 = (sb * dd - sd * db) / det
        a11 = (sd * da - sb * db) / det
        out[k] = (a00, a01, a10, a11, sx - (a00 * dx_ + a01 * dy_), sy - (a10 * dx_ + a11 * dy_))
    return out


def _blend_weights(drv_kp: KeypointSet, grid: np.ndarray, sigma_w: float, beta: float) -> np.ndarray:
    """Unnormalized blending weights, shape (m + 1, h, w); index 0 is background.

    Keypoint k gets a Gaussian kernel in the distance to its driving position;
    the background gets beta * (1 - kernel at the nearest keypoint), so motion
    decays to identity away from all keypoints and vanishes exactly on them.
    """
    inv = 1.0 / (2.0 * sigma_w * sigma_w)
    m = len(drv_kp)
    weights = np.empty((m + 1,) + grid.shape[:2], dtype=np.float64)
    d2_min = None
    for k in range(m):
        dx = grid[..., 0] - drv_kp.values[k, 0]
        dy = grid[..., 1] - drv_kp.values[k, 1]
        d2 = dx * dx + dy * dy
        weights[k + 1] = np.exp(-d2 * inv)
        d2_min = d2 if d2_min is None else np.minimum(d2_min, d2)
    weights[0] = beta * -np.expm1(-d2_min * inv)
    return weights


def dense_motion(
    src_kp: KeypointSet,
    drv_kp: KeypointSet,
    dims: tuple[int, int],
    sigma_w: float = 0.1,
    beta: float = 1.0,
) -> np.ndarray:
    """Backward flow field (h, w, 2): for each target pixel, where to sample the source.

    Each keypoint contributes the local affine map T_k(z) = p_src + A_k (z - p_drv)
    with A_k = J_src J_drv^-1; per-pixel the maps (plus an identity background)
    are blended with normalized Gaussian proximity weights.
    """
    if len(src_kp) != len(drv_kp):
        raise ValueError(f"keypoint count mismatch: {len(src_kp)} vs {len(drv_kp)}")
    width, height = dims
    grid = normalized_grid(width, height)
    maps = _affine_maps(src_kp, drv_kp)
    weights = _blend_weights(drv_kp, grid, sigma_w, beta)

    gx, gy = grid[..., 0], grid[..., 1]
    acc_x = weights[0] * gx
    acc_y = weights[0] * gy
    total = weights[0].copy()
    for k in range(len(src_kp)):
        a00, a01, a10, a11, tx, ty = maps[k]
        acc_x += weights[k + 1] * (tx + a00 * gx + a01 * gy)
        acc_y += weights[k + 1] * (ty + a10 * gx + a11 * gy)
        total += weights[k + 1]

    degenerate = total <= 0.0
    if np.any(degenerate):
        # reachable only with beta == 0 and all kernels underflowed: snap to
        # the nearest keypoint's map (ties to the lowest index)
        d2 = np.stack(
            [
                (gx - drv_kp.values[k, 0]) ** 2 + (gy - drv_kp.values[k, 1]) ** 2
                for k in range(len(drv_kp))
            ]
        )
        nearest = np.argmin(d2, axis=0)
        for k in range(len(src_kp)):
            sel = degenerate & (nearest == k)
            if not np.any(sel):
                continue
            a00, a01, a10, a11, tx, ty = maps[k]
            acc_x[sel] = tx + a00 * gx[sel] + a01 * gy[sel]
            acc_y[sel] = ty + a10 * gx[sel] + a11 * gy[sel]
            total[sel] = 1.0
    return np.stack([acc_x / total, acc_y / total], axis=-1)


def warp(src: Frame, flow: np.ndarray) -> Frame:
    """Backward bilinear warp: out(z) = src(flow(z)), edge-clamped, rounded to uint8."""
    src = ensure_frame(src)
    h, w = src.shape[:2]
    if flow.shape[:2] != (h, w) or flow.shape[-1] != 2:
        raise ValueError(f"flow shape {flow.shape} does not match frame {src.shape}")
    px = np.clip((flow[..., 0] + 1.0) * ((w - 1) / 2.0), 0.0, w - 1.0)
    py = np.clip((flow[..., 1] + 1.0) * ((h - 1) / 2.0), 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.intp)
    y0 = np.floor(py).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (px - x0)[..., None]
    fy = (py - y0)[..., None]
    img = src.astype(np.float64)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return to_uint8(top * (1.0 - fy) + bottom * fy)


def reconstruct(
    src: Frame,
    src_kp: KeypointSet,
    drv_kp: KeypointSet,
    sigma_w: float = 0.1,
    beta: float = 1.0,
) -> Frame:
    """warp(src, dense_motion(src_kp, drv_kp)); byte-exact identity when drv == src."""
    src = ensure_frame(src)
    h, w = src.shape[:2]
    return warp(src, dense_motion(src_kp, drv_kp, (w, h), sigma_w=sigma_w, beta=beta))


# ---------------------------------------------------------------------------
# Keypoint CSV interchange (debugging / plugging externally computed keypoints)


def dump_keypoints_csv(path, keypoint_sets: list[KeypointSet]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "k", "x", "y", "a", "b", "d"])
        for t, kps in enumerate(keypoint_sets):
            for k, row in enumerate(kps.values):
                writer.writerow([t, k] + [repr(float(v)) for v in row])


def load_keypoints_csv(path) -> list[KeypointSet]:
    per_frame: dict[int, dict[int, tuple]] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            t, k = int(rec["frame_index"]), int(rec["k"])
            per_frame.setdefault(t, {})[k] = tuple(float(rec[c]) for c in ("x", "y", "a", "b", "d"))
    if sorted(per_frame) != list(range(len(per_frame))):
        raise ValueError("frame_index values must be contiguous from 0")
    out = []
    for t in range(len(per_frame)):
        cells = per_frame[t]
        if sorted(cells) != list(range(len(cells))):
            raise ValueError(f"keypoint indices of frame {t} must be contiguous from 0")
        out.append(KeypointSet(np.array([cells[k] for k in range(len(cells))])))
    return out
