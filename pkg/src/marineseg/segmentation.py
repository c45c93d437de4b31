"""Horizon-conditioned Gaussian-mixture / MRF scene model fitted by EM.

Each pixel feature ``y = [u, v, r, g, b]`` (all in [0, 1]) is explained by
three Gaussians (sky, middle band, water) and a uniform outlier component.
Per-pixel label priors are gated by masks derived from the IMU horizon, and
the spatial part of each Gaussian mean has a horizon-dependent hyper-prior.

Component indices are 0-based in code: 0 sky, 1 middle, 2 water, 3 outlier.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .exceptions import InvalidInputError, NumericalDegeneracyError
from .geometry import HorizonLine

logger = logging.getLogger(__name__)

SKY, MIDDLE, WATER, OUTLIER = 0, 1, 2, 3
N_GAUSS = 3
N_COMP = 4
DIM = 5

COV_FLOOR = 1e-6
DEFAULT_WORKING_SIZE = (50, 50)  # (width, height)
DEFAULT_BLUR_SIGMA = 2.0
DEFAULT_MAX_ITERS = 10
DEFAULT_TOL = 1e-3
WARM_START_FLOOR = 1e-2
DEFAULT_INIT_STEPS = 2
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _block_edges(n_src: int, n_dst: int) -> np.ndarray:
    return np.floor(np.arange(n_dst) * n_src / n_dst).astype(np.intp)


def block_mean(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Area-average an (H, W, C) image down to (height, width, C).

    Integer images are summed exactly in integer arithmetic (much faster
    than converting the full-resolution frame to float first).
    """
    img = np.asarray(img)
    H, W = img.shape[:2]
    if height > H or width > W:
        raise InvalidInputError(f"cannot block-average {W}x{H} up to {width}x{height}")
    rows = _block_edges(H, height)
    cols = _block_edges(W, width)
    if np.issubdtype(img.dtype, np.unsignedinteger) and img.dtype.itemsize <= 2:
        block = -(-H // height) * -(-W // width)
        acc_t = np.uint32 if block * np.iinfo(img.dtype).max < 2 ** 32 else np.uint64
    else:
        img = img.astype(np.float64, copy=False)
        acc_t = np.float64
    acc = np.add.reduceat(np.add.reduceat(img, rows, axis=0, dtype=acc_t), cols, axis=1, dtype=acc_t)
    acc = acc.astype(np.float64)
    rcount = np.diff(np.append(rows, H))
    ccount = np.diff(np.append(cols, W))
    counts = np.outer(rcount, ccount)
    if acc.ndim == 3:
        counts = counts[..., None]
    return acc / counts


def nearest_index(n_dst: int, n_src: int) -> np.ndarray:
    """Source index for each destination index under nearest-neighbour upsampling."""
    idx = np.floor((np.arange(n_dst) + 0.5) * n_src / n_dst).astype(np.intp)
    return np.minimum(idx, n_src - 1)


def upsample_nearest(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w = arr.shape[:2]
    return arr[nearest_index(height, h)][:, nearest_index(width, w)]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class FeatureImage:
    """Per-pixel features [u, v, r, g, b] on a (height, width) grid."""

    features: np.ndarray  # (H, W, 5)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 3 or f.shape[2] != DIM:
            raise InvalidInputError(f"features must have shape (H, W, 5), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise InvalidInputError("features must be finite")
        if f.size and (f.min() < 0.0 or f.max() > 1.0):
            raise InvalidInputError("features must lie in [0, 1]")
        self.features = f

    @property
    def height(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.features.reshape(-1, DIM)

    @classmethod
    def from_rgb(cls, rgb: np.ndarray, size: tuple[int, int] | None = DEFAULT_WORKING_SIZE) -> "FeatureImage":
        """Build features from an RGB image (uint8 or float in [0, 1]).

        ``size`` is the (width, height) working resolution; ``None`` keeps
        the native resolution.
        """
        rgb = np.asarray(rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise InvalidInputError(f"expected an (H, W, 3) image, got {rgb.shape}")
        colors = rgb if size is None else block_mean(rgb, size[0], size[1])
        colors = colors.astype(np.float64)
        if np.issubdtype(rgb.dtype, np.integer):
            colors /= 255.0
        h, w = colors.shape[:2]
        v, u = np.mgrid[0:h, 0:w]
        feats = np.empty((h, w, DIM))
        feats[..., 0] = (u + 0.5) / w
        feats[..., 1] = (v + 0.5) / h
        feats[..., 2:] = np.clip(colors, 0.0, 1.0)
        return cls(feats)


@dataclass
class GaussianComponent:
    mean: np.ndarray  # (5,)
    cov: np.ndarray  # (5, 5)

    def copy(self) -> "GaussianComponent":
        return GaussianComponent(self.mean.copy(), self.cov.copy())

    def log_pdf(self, Y: np.ndarray) -> np.ndarray:
        L = np.linalg.cholesky(self.cov)
        z = np.linalg.solve(L, (Y - self.mean).T)
        maha = np.einsum("ij,ij->j", z, z)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return -0.5 * (DIM * _LOG_2PI + logdet + maha)


@dataclass
class ConditionalPriorMasks:
    """Per-pixel p(x_i = k | horizon), shape (H, W, 4)."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def uniform(cls, width: int, height: int) -> "ConditionalPriorMasks":
        return cls(np.ones((height, width, N_COMP)))


@dataclass
class HyperPriorSet:
    """Horizon-dependent priors over the spatial part of the Gaussian means.

    ``spatial_cov[k]`` is the 2x2 covariance of the mean prior over (u, v);
    color dimensions carry zero precision.  An infinite entry means an
    uninformative prior.  ``displacements[k]`` is the vertical offset of the
    component centre from the horizon, as a fraction of image height.
    """

    means: np.ndarray  # (3, 5)
    spatial_cov: np.ndarray  # (3, 2, 2)
    displacements: np.ndarray  # (3,)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64).reshape(N_GAUSS, DIM)
        self.spatial_cov = np.asarray(self.spatial_cov, dtype=np.float64).reshape(N_GAUSS, 2, 2)
        self.displacements = np.asarray(self.displacements, dtype=np.float64).reshape(N_GAUSS)

    @classmethod
    def default(cls) -> "HyperPriorSet":
        means = np.array([
            [0.5, 0.20, 0.5, 0.5, 0.5],
            [0.5, 0.55, 0.5, 0.5, 0.5],
            [0.5, 0.80, 0.5, 0.5, 0.5],
        ])
        spatial_cov = np.array([
            np.diag([0.05, 0.02]),
            np.diag([0.05, 0.002]),
            np.diag([0.05, 0.02]),
        ])
        return cls(means, spatial_cov, np.array([-0.25, 0.05, 0.30]))

    @classmethod
    def uninformative(cls, means: np.ndarray | None = None) -> "HyperPriorSet":
        base = cls.default()
        m = base.means if means is None else means
        return cls(m, np.full((N_GAUSS, 2, 2), np.inf), np.zeros(N_GAUSS))

    def copy(self) -> "HyperPriorSet":
        return HyperPriorSet(self.means.copy(), self.spatial_cov.copy(), self.displacements.copy())

    def precision(self, k: int) -> np.ndarray:
        """5x5 precision of the mean prior of component k (zero on colors)."""
        P = np.zeros((DIM, DIM))
        S = self.spatial_cov[k]
        if np.all(np.isfinite(S)):
            P[:2, :2] = np.linalg.inv(S)
        return P


@dataclass(frozen=True)
class MrfKernel:
    """3x3 discrete Gaussian with zero centre, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (3, 3) or w[1, 1] != 0.0 or abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
            raise InvalidInputError("MRF kernel must be a nonnegative 3x3 array, zero centre, sum 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "MrfKernel":
        d = np.arange(-1, 2)
        g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
        g[1, 1] = 0.0
        return cls(g / g.sum())

    @property
    def with_center(self) -> np.ndarray:
        """lambda_1 = 1 + lambda, i.e. the kernel with centre weight one."""
        w = self.weights.copy()
        w[1, 1] = 1.0
        return w


@dataclass
class MixtureModel:
    components: list[GaussianComponent]
    priors: np.ndarray  # (H, W, 4)
    posteriors: np.ndarray  # (H, W, 4)
    uniform_density: float = 1.0
    iterations: int = 0
    converged: bool = False
    history: list[float] = field(default_factory=list)

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def covs(self) -> np.ndarray:
        return np.stack([c.cov for c in self.components])

    def labels(self) -> np.ndarray:
        return np.argmax(self.posteriors, axis=-1)

    def to_dict(self, include_fields: bool = True) -> dict:
        out = {
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
            "uniform_density": self.uniform_density,
            "iterations": self.iterations,
            "converged": self.converged,
            "history": list(self.history),
        }
        if include_fields:
            out["priors"] = self.priors.tolist()
            out["posteriors"] = self.posteriors.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureModel":
        comps = [GaussianComponent(np.array(m, dtype=float), np.array(c, dtype=float))
                 for m, c in zip(d["means"], d["covs"])]
        priors = np.array(d.get("priors", []), dtype=float)
        posteriors = np.array(d.get("posteriors", []), dtype=float)
        return cls(comps, priors, posteriors, float(d.get("uniform_density", 1.0)),
                   int(d.get("iterations", 0)), bool(d.get("converged", False)),
                   list(d.get("history", [])))


# ---------------------------------------------------------------------------
# Conditional priors and hyper-priors
# ---------------------------------------------------------------------------

def build_conditional_priors(h: HorizonLine, width: int, height: int,
                             blur_sigma: float = DEFAULT_BLUR_SIGMA) -> ConditionalPriorMasks:
    """Horizon masks on a (height, width) grid; ``h`` is in that grid's pixels.

    Water is forbidden above the line, sky below it.  A pixel centre exactly on
    the line keeps both.
    """
    if blur_sigma < 0:
        raise InvalidInputError("blur_sigma must be nonnegative")
    masks = np.ones((height, width, N_COMP))
    if not h.valid:
        return ConditionalPriorMasks(masks)
    rows = np.arange(height, dtype=float)[:, None]
    line = h.row_at(np.arange(width, dtype=float))[None, :]
    masks[..., WATER] = (rows >= line).astype(float)
    masks[..., SKY] = (rows <= line).astype(float)
    if blur_sigma > 0:
        for k in (SKY, WATER):
            masks[..., k] = ndimage.gaussian_filter(masks[..., k], blur_sigma, mode="nearest")
    return ConditionalPriorMasks(masks)


def project_covariance(S: np.ndarray, angle: float) -> np.ndarray:
    """Proximal projection of a 2x2 covariance onto the frame of a line at ``angle``.

    Rotates into the line frame, drops the off-diagonal terms and rotates
    back, so the result's principal axes follow the line and its normal.
    """
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, s], [-s, c]])
    D = np.diag(np.diag(R @ S @ R.T))
    out = R.T @ D @ R
    return 0.5 * (out + out.T)


def horizon_row_normalized(h: HorizonLine, u_norm: float, width: int, height: int) -> float:
    """Normalized row of the horizon at normalized column ``u_norm``."""
    u_px = u_norm * width - 0.5
    return (float(h.row_at(u_px)) + 0.5) / height


def horizon_angle_normalized(h: HorizonLine, width: int, height: int) -> float:
    return math.atan(h.slope * width / height)


def build_hyper_priors(h: HorizonLine, learned: HyperPriorSet, width: int,
                       height: int) -> HyperPriorSet:
    """Shift the learned mean priors to the horizon and align the middle band's covariance.

    ``h`` is in pixels of the (height, width) working grid.
    """
    if not h.valid:
        return learned.copy()
    out = learned.copy()
    for k in range(N_GAUSS):
        hrow = horizon_row_normalized(h, out.means[k, 0], width, height)
        out.means[k, 1] = min(1.0, max(0.0, hrow + out.displacements[k]))
    S = out.spatial_cov[MIDDLE]
    if np.all(np.isfinite(S)):
        out.spatial_cov[MIDDLE] = project_covariance(S, horizon_angle_normalized(h, width, height))
    return out


# ---------------------------------------------------------------------------
# E-step pieces
# ---------------------------------------------------------------------------

def neighbor_sum(field_: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 correlation of each channel with replicate-edge padding."""
    H, W = field_.shape[:2]
    pad = np.pad(field_, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(field_)
    for dy in range(3):
        for dx in range(3):
            w = kernel[dy, dx]
            if w != 0.0:
                out += w * pad[dy:dy + H, dx:dx + W]
    return out


def mrf_smooth(dist: np.ndarray, kernel: MrfKernel) -> np.ndarray:
    """Auxiliary update (xi o d o (d * lambda)) * lambda_1; rows sum to 2."""
    a = dist * neighbor_sum(dist, kernel.weights)
    tot = a.sum(axis=-1, keepdims=True)
    ok = tot > 0
    b = np.where(ok, a / np.where(ok, tot, 1.0), dist)
    return neighbor_sum(b, kernel.with_center)


def normalize_rows(a: np.ndarray) -> np.ndarray:
    tot = a.sum(axis=-1, keepdims=True)
    bad = ~(tot > 0)
    if np.any(bad):
        logger.debug("%d rows with zero mass reset to uniform", int(bad.sum()))
    return np.where(bad, 1.0 / a.shape[-1], a / np.where(bad, 1.0, tot))


def _log_terms(components, uniform_density, Y, priors_flat, masks_flat):
    M = Y.shape[0]
    logp = np.empty((M, N_COMP))
    for k, comp in enumerate(components):
        logp[:, k] = comp.log_pdf(Y)
    logp[:, OUTLIER] = math.log(uniform_density)
    with np.errstate(divide="ignore"):
        logp += np.log(priors_flat * masks_flat)
    return logp


def _responsibilities(components, uniform_density, Y, priors_flat, masks_flat) -> np.ndarray:
    logp = _log_terms(components, uniform_density, Y, priors_flat, masks_flat)
    mx = logp.max(axis=1, keepdims=True)
    dead = ~np.isfinite(mx[:, 0])
    if np.any(dead):
        logger.warning("%d pixels with all-zero class terms; assigning uniform posterior",
                       int(dead.sum()))
    mx[dead] = 0.0
    p = np.exp(logp - mx)
    p[dead] = 1.0
    return p / p.sum(axis=1, keepdims=True)


def posterior_responsibilities(model: MixtureModel, img: FeatureImage,
                               masks: ConditionalPriorMasks) -> np.ndarray:
    """Normalized per-pixel class posteriors (H, W, 4) under ``model``'s priors."""
    _check_shapes(img, masks)
    H, W = img.height, img.width
    priors = model.priors.reshape(-1, N_COMP)
    p = _responsibilities(model.components, model.uniform_density, img.flat,
                          priors, masks.values.reshape(-1, N_COMP))
    return p.reshape(H, W, N_COMP)


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def floor_covariance(S: np.ndarray, floor: float = COV_FLOOR, component: int | None = None) -> np.ndarray:
    S = 0.5 * (S + S.T)
    if not np.all(np.isfinite(S)):
        raise NumericalDegeneracyError(f"non-finite covariance for component {component}", component)
    w, V = np.linalg.eigh(S)
    w = np.maximum(w, floor)
    out = (V * w) @ V.T
    out = 0.5 * (out + out.T)
    if not np.all(np.isfinite(out)) or np.min(np.linalg.eigvalsh(out)) <= 0:
        raise NumericalDegeneracyError(f"singular covariance for component {component}", component)
    return out


def m_step(Y: np.ndarray, weights: np.ndarray, hyp: HyperPriorSet,
           components: list[GaussianComponent], mean_update: str = "standard") -> list[GaussianComponent]:
    """Recompute the Gaussian means and covariances from posterior weights.

    ``mean_update="standard"`` is the conjugate MAP update with the data term
    averaged over the effective count:

        mu = Lambda (Sigma^-1 ybar + P mu_prior),  Lambda = (Sigma^-1 + P)^-1

    ``"literal"`` evaluates ``(Lambda Sigma^-1 sum_i q_i y_i - P mu_prior) / beta``.
    Both reduce to the weighted mean when the prior precision P is zero.
    """
    if mean_update not in ("standard", "literal"):
        raise InvalidInputError(f"unknown mean_update {mean_update!r}")
    out = []
    for k in range(N_GAUSS):
        wk = weights[:, k]
        beta = float(wk.sum())
        prev = components[k]
        if beta <= 1e-12:
            out.append(prev.copy())
            continue
        wy = wk @ Y
        ybar = wy / beta
        P = hyp.precision(k)
        if np.any(P):
            Sinv = np.linalg.inv(prev.cov)
            Lam = np.linalg.inv(Sinv + P)
            if mean_update == "standard":
                mu = Lam @ (Sinv @ ybar + P @ hyp.means[k])
            else:
                mu = (Lam @ Sinv @ wy - P @ hyp.means[k]) / beta
        else:
            mu = ybar
        d = Y - mu
        cov = (wk[:, None] * d).T @ d / beta
        out.append(GaussianComponent(mu, floor_covariance(cov, component=k)))
    return out


# ---------------------------------------------------------------------------
# EM driver
# ---------------------------------------------------------------------------

def initial_components(hyp: HyperPriorSet) -> list[GaussianComponent]:
    comps = []
    for k in range(N_GAUSS):
        mean = np.empty(DIM)
        mean[:2] = hyp.means[k, :2]
        mean[2:] = 0.5
        cov = np.zeros((DIM, DIM))
        S = hyp.spatial_cov[k]
        cov[:2, :2] = S if np.all(np.isfinite(S)) else np.diag([1.0 / 12.0, 1.0 / 12.0])
        cov[2:, 2:] = np.eye(3) * 0.25
        comps.append(GaussianComponent(mean, floor_covariance(cov, component=k)))
    return comps


def _check_shapes(img: FeatureImage, masks: ConditionalPriorMasks):
    if masks.values.shape != (img.height, img.width, N_COMP):
        raise InvalidInputError(
            f"mask shape {masks.values.shape} does not match image {img.height}x{img.width}")


def em_fit(img: FeatureImage, masks: ConditionalPriorMasks, hyp: HyperPriorSet,
           warm_start: MixtureModel | None = None, kernel: MrfKernel | None = None,
           max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
           mean_update: str = "standard", uniform_density: float = 1.0,
           init_steps: int = DEFAULT_INIT_STEPS,
           callback: Callable[[int, MixtureModel], None] | None = None) -> MixtureModel:
    """Fit the scene model to one image.

    Alternates the smoothed E-step on priors and posteriors with the
    hyper-prior regularized M-step until the mean absolute prior change falls
    below ``tol`` or ``max_iters`` is reached.  The returned model carries the
    final smoothed posteriors (rows sum to one).

    Without ``warm_start`` the Gaussians start from the hyper-prior means, and
    ``init_steps`` M-steps under flat label priors settle their colors before
    the priors start to evolve.
    """
    _check_shapes(img, masks)
    kernel = kernel or MrfKernel.gaussian()
    H, W = img.height, img.width
    Y = img.flat
    mask = masks.values

    if warm_start is not None:
        comps = [c.copy() for c in warm_start.components]
        if warm_start.priors.shape == (H, W, N_COMP):
            pi = (1.0 - WARM_START_FLOOR) * warm_start.priors + WARM_START_FLOOR / N_COMP
        else:
            pi = np.full((H, W, N_COMP), 1.0 / N_COMP)
    else:
        comps = initial_components(hyp)
        pi = np.full((H, W, N_COMP), 1.0 / N_COMP)
        # colors start uninformative; fit them under flat label priors first
        for _ in range(init_steps):
            post = _responsibilities(comps, uniform_density, Y, pi.reshape(-1, N_COMP),
                                     mask.reshape(-1, N_COMP))
            comps = m_step(Y, post, hyp, comps, mean_update)

    model = MixtureModel(comps, pi, np.full((H, W, N_COMP), 1.0 / N_COMP), uniform_density)
    for it in range(1, max_iters + 1):
        post = _responsibilities(comps, uniform_density, Y, pi.reshape(-1, N_COMP),
                                 mask.reshape(-1, N_COMP)).reshape(H, W, N_COMP)
        s_hat = mrf_smooth(pi, kernel)
        q_hat = mrf_smooth(post, kernel)
        pi_new = normalize_rows((s_hat + q_hat) * mask / 4.0)
        q_norm = q_hat / 2.0
        comps = m_step(Y, q_norm.reshape(-1, N_COMP), hyp, comps, mean_update)
        change = float(np.mean(np.abs(pi_new - pi)))
        pi = pi_new
        model = MixtureModel(comps, pi, q_norm, uniform_density, it, change < tol,
                             model.history + [change])
        if callback is not None:
            callback(it, model)
        if change < tol:
            break
    return model


def segment(img: FeatureImage, h: HorizonLine, hyp_template: HyperPriorSet | None = None,
            warm_start: MixtureModel | None = None, blur_sigma: float = DEFAULT_BLUR_SIGMA,
            **kwargs) -> tuple[MixtureModel, ConditionalPriorMasks, HyperPriorSet]:
    """Masks, hyper-priors and EM fit for one working-resolution image.

    ``h`` must already be expressed in the working grid's pixels.
    """
    masks = build_conditional_priors(h, img.width, img.height, blur_sigma)
    hyp = build_hyper_priors(h, hyp_template or HyperPriorSet.default(), img.width, img.height)
    model = em_fit(img, masks, hyp, warm_start=warm_start, **kwargs)
    return model, masks, hyp

