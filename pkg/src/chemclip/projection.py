"""2-D projections of embeddings (PCA, exact t-SNE) and SVG scatter output."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .exceptions import PerplexityTooLarge
from .rng import SplitMix64


@dataclass
class Projection2D:
    coordinates: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    kl_history: list[float] = field(default_factory=list)


def _top_eigenvector(cov: np.ndarray, rng: SplitMix64, tol: float, max_iter: int):
    v = rng.normal(cov.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return v, 0.0
        w /= norm
        if 1.0 - abs(float(w @ v)) < tol:
            v = w
            break
        v = w
    return v, float(v @ cov @ v)


def pca_2d(embeddings, tol: float = 1e-10, max_iter: int = 100_000, seed: int = 0) -> Projection2D:
    """Project onto the two leading covariance eigenvectors (power iteration + deflation)."""
    x = np.asarray(embeddings, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(len(x) - 1, 1)
    rng = SplitMix64(seed)
    axes = []
    for _ in range(2):
        v, lam = _top_eigenvector(cov, rng, tol, max_iter)
        if lam <= 1e-14 * max(1.0, float(np.trace(cov))):
            v = np.zeros_like(v)
        # sign convention: largest-magnitude component positive
        if v.any() and v[np.argmax(np.abs(v))] < 0:
            v = -v
        axes.append(v)
        cov = cov - lam * np.outer(v, v)
    coords = centered @ np.column_stack(axes)
    return Projection2D(coords, "pca", {"tol": tol})


def _conditional_p(d2: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 50):
    """Row-wise Gaussian affinities whose entropy matches log(perplexity) (bisection on precision)."""
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d2[i], i)
        beta, lo, hi = 1.0, -np.inf, np.inf
        for _ in range(max_iter):
            w = np.exp(-(di - di.min()) * beta)
            sw = w.sum()
            h = np.log(sw) + beta * np.sum((di - di.min()) * w) / sw
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2 if hi == np.inf else (beta + hi) / 2
            else:
                hi = beta
                beta = beta / 2 if lo == -np.inf else (beta + lo) / 2
        p[i, np.arange(n) != i] = w / sw
    return p


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], 1e-300))))


def tsne_2d(embeddings, perplexity: float = 30.0, iterations: int = 1000, seed: int = 0,
            learning_rate: float = 200.0, exaggeration: float = 12.0,
            exaggeration_iters: int = 250) -> Projection2D:
    """Exact (O(n^2)) t-SNE.

    Momentum 0.5 switches to 0.8 together with the end of early
    exaggeration; per-coordinate gains follow the usual delta-bar-delta rule.
    ``kl_history[k]`` is the KL divergence after iteration ``k + 1``.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n = len(x)
    if n <= 3 * perplexity:
        raise PerplexityTooLarge(f"need more than {3 * perplexity:g} points for perplexity "
                                 f"{perplexity:g}, got {n}")
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0)
    cond = _conditional_p(d2, perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)
    np.fill_diagonal(p, 0.0)
    y = 1e-4 * SplitMix64(seed).normal((n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    history = []
    for it in range(iterations):
        early = it < exaggeration_iters
        pe = p * exaggeration if early else p
        momentum = 0.5 if early else 0.8
        ys = np.sum(y * y, axis=1)
        num = 1.0 / (1.0 + ys[:, None] + ys[None, :] - 2 * y @ y.T)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (pe - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        history.append(_kl(p, q))
    return Projection2D(y, "tsne", {"perplexity": perplexity, "iterations": iterations,
                                    "seed": seed}, history)


class PCAProjection(TransformerMixin, BaseEstimator):
    def __init__(self, tol: float = 1e-10, seed: int = 0):
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        proj = pca_2d(X, self.tol, seed=self.seed)
        centered = X - self.mean_
        self.components_ = np.linalg.lstsq(centered, proj.coordinates, rcond=None)[0].T \
            if len(X) > 1 else np.zeros((2, X.shape[1]))
        self.embedding_ = proj.coordinates
        return self

    def transform(self, X):
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


class TSNEProjection(BaseEstimator):
    """Exact t-SNE; only ``fit_transform`` is meaningful (no out-of-sample map)."""

    def __init__(self, perplexity: float = 30.0, iterations: int = 1000, seed: int = 0):
        self.perplexity = perplexity
        self.iterations = iterations
        self.seed = seed

    def fit(self, X, y=None):
        proj = tsne_2d(check_array(X, dtype=np.float64), self.perplexity, self.iterations, self.seed)
        self.embedding_ = proj.coordinates
        self.kl_divergence_ = proj.kl_history[-1] if proj.kl_history else float("nan")
        self.kl_history_ = proj.kl_history
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


# Inorganic: red squares; organic: blue circles; dark = active, light = inactive.
STYLE = {
    ("inorganic", True): ("square", "#b2182b", "Inorganic active"),
    ("inorganic", False): ("square", "#f4a582", "Inorganic inactive"),
    ("organic", True): ("circle", "#2166ac", "Organic active"),
    ("organic", False): ("circle", "#92c5de", "Organic inactive"),
}


def _glyph(shape: str, x: float, y: float, color: str, r: float = 4.0) -> str:
    if shape == "square":
        return (f'<rect x="{x - r:.3f}" y="{y - r:.3f}" width="{2 * r:.3f}" height="{2 * r:.3f}" '
                f'fill="{color}" fill-opacity="0.8"/>')
    return f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r:.3f}" fill="{color}" fill-opacity="0.8"/>'


def render_scatter_svg(projection: Projection2D | np.ndarray, domains, active, path=None,
                       title: str = "ChemCLIP embeddings", size: int = 600) -> str:
    """Write a domain x activity scatter plot; returns the SVG text.

    Output bytes depend only on the inputs.
    """
    coords = projection.coordinates if isinstance(projection, Projection2D) else np.asarray(projection)
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    pad, legend_h = 40.0, 90.0
    width, height = size, size + legend_h
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height:.0f}" '
           f'viewBox="0 0 {width} {height:.0f}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
           f'font-size="16">{escape(title)}</text>']
    if len(coords):
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        scaled = pad + (coords - lo) / span * (size - 2 * pad)
        order = sorted(range(len(coords)), key=lambda k: (bool(active[k]), domains[k] == "inorganic"))
        for k in order:
            shape, color, _ = STYLE[(domains[k], bool(active[k]))]
            # SVG y axis points down
            out.append(_glyph(shape, scaled[k, 0], size - scaled[k, 1], color))
    y0 = size + 10
    for j, key in enumerate(STYLE):
        shape, color, label = STYLE[key]
        lx, ly = 40 + (j % 2) * 260, y0 + 20 + (j // 2) * 30
        out.append(f'<g class="legend">{_glyph(shape, lx, ly, color, 6.0)}'
                   f'<text x="{lx + 14}" y="{ly + 5}" font-family="sans-serif" font-size="13">'
                   f'{label}</text></g>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def write_coordinates(path, record_ids, coords, domains, active) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_id", "x", "y", "domain", "active"])
        for rid, (x, y), d, a in zip(record_ids, np.asarray(coords), domains, active):
            w.writerow([rid, repr(float(x)), repr(float(y)), d, int(bool(a))])
