"""Objective quality metrics and rate-distortion statistics.

PSNR / SSIM / MS-SSIM operate on the BT.601 luma plane.  The Bjontegaard
deltas use the classical cubic fit of quality against log10(rate) (and the
inverse fit for BD-rate), integrated analytically over the overlapping
interval.  VIF / VMAF style model-based metrics are not computed here; the
CSV ingest accepts externally measured scores under any column name.
"""

from __future__ import annotations

import csv
import logging
import math
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np
from scipy.signal import convolve2d

from .frames import Frame, luma

log = logging.getLogger(__name__)

PSNR_MAX = 999.0  # sentinel for identical inputs

_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_L = 255.0
_MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_MSSSIM_MIN_DIM = 161


class RDPoint(NamedTuple):
    rate_kbps: float
    quality: float


def psnr(a: Frame, b: Frame) -> float:
    """Luma PSNR in dB; identical frames return the 999 dB sentinel."""
    la, lb = luma(a), luma(b)
    if la.shape != lb.shape:
        raise ValueError(f"dimension mismatch: {la.shape} vs {lb.shape}")
    mse = np.mean((la - lb) ** 2)
    if mse == 0.0:
        return PSNR_MAX
    return float(10.0 * np.log10(255.0**2 / mse))


@lru_cache(maxsize=1)
def _ssim_window() -> np.ndarray:
    offsets = np.arange(11) - 5.0
    g = np.exp(-(offsets**2) / (2.0 * 1.5**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_maps(la: np.ndarray, lb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and contrast-structure maps over valid 11x11 window positions."""
    win = _ssim_window()
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    mu_a = convolve2d(la, win, mode="valid")
    mu_b = convolve2d(lb, win, mode="valid")
    var_a = convolve2d(la * la, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(lb * lb, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(la * lb, win, mode="valid") - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a: Frame, b: Frame) -> float:
    """Mean SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03."""
    la, lb = luma(a), luma(b)
    if la.shape != lb.shape:
        raise ValueError(f"dimension mismatch: {la.shape} vs {lb.shape}")
    if min(la.shape) < 11:
        raise ValueError("ssim requires dimensions >= 11")
    lum, cs = _ssim_maps(la, lb)
    return float(np.mean(lum * cs))


def _halve(x: np.ndarray) -> np.ndarray:
    # 2x2 mean pooling; odd extents are edge-padded so 5 scales survive >= 161 px
    if x.shape[0] % 2 or x.shape[1] % 2:
        x = np.pad(x, ((0, x.shape[0] % 2), (0, x.shape[1] % 2)), mode="edge")
    return (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2]) / 4.0


def ms_ssim(a: Frame, b: Frame) -> float:
    """5-scale MS-SSIM on luma with the standard scale weights.

    Requires min(height, width) >= 161 so the coarsest scale still fits the
    11x11 window.  Negative contrast-structure means are clamped to zero to
    keep the weighted geometric mean real.
    """
    la, lb = luma(a), luma(b)
    if la.shape != lb.shape:
        raise ValueError(f"dimension mismatch: {la.shape} vs {lb.shape}")
    if min(la.shape) < _MSSSIM_MIN_DIM:
        raise ValueError(f"ms_ssim requires dimensions >= {_MSSSIM_MIN_DIM} for 5 scales")
    score = 1.0
    for level, weight in enumerate(_MSSSIM_WEIGHTS):
        lum, cs = _ssim_maps(la, lb)
        if level == len(_MSSSIM_WEIGHTS) - 1:
            term = float(np.mean(lum * cs))
        else:
            term = float(np.mean(cs))
            la, lb = _halve(la), _halve(lb)
        score *= max(term, 0.0) ** weight
    return score


# ---------------------------------------------------------------------------
# Correlation statistics


def pcc(xs, ys) -> float:
    """Pearson product-moment correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and equally long")
    if x.size < 3:
        raise ValueError("at least 3 samples required")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("constant input has undefined correlation")
    return float((dx @ dy) / math.sqrt(sxx * syy))


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srocc(xs, ys) -> float:
    """Spearman rank-order correlation: Pearson on fractional ranks (ties averaged)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and equally long")
    return pcc(_fractional_ranks(x), _fractional_ranks(y))


# ---------------------------------------------------------------------------
# Bjontegaard deltas


def _curve_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if arr.shape[0] < 4:
        raise ValueError("at least 4 rate-distortion points required")
    if np.any(arr[:, 0] <= 0.0):
        raise ValueError("rates must be strictly positive")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    if np.any(np.diff(arr[:, 1]) < 0.0):
        log.warning("non-monotone rate-distortion curve; proceeding on rate-sorted points")
    return arr[:, 0], arr[:, 1]


def _fit_gap(x_anchor, y_anchor, x_test, y_test) -> float:
    lo = max(x_anchor.min(), x_test.min())
    hi = min(x_anchor.max(), x_test.max())
    if not lo < hi:
        raise ValueError("curves do not overlap")
    p_anchor = np.polyfit(x_anchor, y_anchor, 3)
    p_test = np.polyfit(x_test, y_test, 3)
    int_anchor = np.polyint(p_anchor)
    int_test = np.polyint(p_test)
    area_anchor = np.polyval(int_anchor, hi) - np.polyval(int_anchor, lo)
    area_test = np.polyval(int_test, hi) - np.polyval(int_test, lo)
    return float((area_test - area_anchor) / (hi - lo))


def bd_metrics(anchor, test) -> tuple[float, float]:
    """(BD-quality, BD-rate %) of ``test`` against ``anchor``.

    BD-quality is the average quality gain at equal rate; BD-rate is the
    average rate change in percent at equal quality (negative = savings).
    Each curve needs >= 4 points with overlapping ranges.
    """
    ra, qa = _curve_arrays(anchor)
    rt, qt = _curve_arrays(test)
    la, lt = np.log10(ra), np.log10(rt)
    bd_quality = _fit_gap(la, qa, lt, qt)
    bd_log_rate = _fit_gap(qa, la, qt, lt)
    return bd_quality, (10.0**bd_log_rate - 1.0) * 100.0


# ---------------------------------------------------------------------------
# Pareto / convex hull of operating points


def pareto_hull(points: Iterable[RDPoint]) -> list[RDPoint]:
    """Upper-left convex hull in the (log10 rate, quality) plane.

    Output is sorted by rate, strictly increasing in quality, and a subset of
    the input; no discarded point lies above a chord between retained
    neighbours.  Collinear interior points are dropped.
    """
    pts = [RDPoint(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("at least one point required")
    if any(p.rate_kbps <= 0.0 for p in pts):
        raise ValueError("rates must be strictly positive")
    pts.sort(key=lambda p: (p.rate_kbps, -p.quality))
    front: list[RDPoint] = []
    best = -math.inf
    for p in pts:
        if p.quality > best:
            front.append(p)
            best = p.quality

    def cross(o: RDPoint, a: RDPoint, b: RDPoint) -> float:
        ox, oy = math.log10(o.rate_kbps), o.quality
        ax, ay = math.log10(a.rate_kbps), a.quality
        bx, by = math.log10(b.rate_kbps), b.quality
        return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)

    hull: list[RDPoint] = []
    for p in front:
        while len(hull) >= 2 and cross(hull[-2], hull[-1], p) >= 0.0:
            hull.pop()
        hull.append(p)
    return hull


# ---------------------------------------------------------------------------
# CSV interchange


def read_rd_csv(path) -> dict[str, list[RDPoint]]:
    """Read rate-distortion points: a ``rate_kbps`` column plus one column per metric.

    Returns {metric_name: [RDPoint, ...]} in file order; empty cells are
    skipped for that metric.  Extra metric columns (e.g. externally computed
    vif/vmaf scores) ride along untouched.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        fields = [f.strip() for f in reader.fieldnames]
        rate_col = "rate_kbps" if "rate_kbps" in fields else "rate" if "rate" in fields else None
        if rate_col is None:
            raise ValueError(f"{path}: no rate_kbps column")
        metric_cols = [f for f in fields if f != rate_col]
        curves: dict[str, list[RDPoint]] = {m: [] for m in metric_cols}
        for row in reader:
            row = {(k.strip() if k else k): v for k, v in row.items()}
            rate = float(row[rate_col])
            for m in metric_cols:
                cell = (row.get(m) or "").strip()
                if cell:
                    curves[m].append(RDPoint(rate, float(cell)))
    return {m: pts for m, pts in curves.items() if pts}


def write_rd_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
