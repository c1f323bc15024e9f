"""Pipeline components behind a uniform fit/transform/predict contract.

Three roles exist: extractors turn image stacks into feature matrices,
transformers are fit on train features and applied to anything, learners are
fit on (features, labels) and emit class-probability rows. Every component is
deterministic given its inputs, hyperparameters and seed, and none may emit
NaN or inf for finite inputs.

The learner named ``ksvm`` is a declared stand-in: one-vs-rest kernel ridge
with an RBF kernel and a softmax over margins, keeping the (cost, kernel
width) semantics of a soft-margin RBF SVM without the SMO machinery. The
``cnn`` extractor is likewise a frozen stand-in for a pretrained network: a
fixed seeded random projection of the downsampled image.
"""
from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path
from sklearn.tree import DecisionTreeClassifier

from .model import PipelineSpec, load_spec

N_GRAY_LEVELS = 16
GLCM_ANGLES = (0, 45, 90, 135)
_GLCM_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
HARALICK_FEATURE_NAMES = ("contrast", "correlation", "energy", "entropy", "homogeneity", "variance")


class ComponentError(RuntimeError):
    """A component received inputs it cannot process."""


class DegenerateInputError(ComponentError):
    """Inputs are degenerate (for example an all-identical train matrix)."""


def assert_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ComponentError(f"{what} produced non-finite values")
    return arr


# ---------------------------------------------------------------------------
# feature extraction


def _quantize(image: np.ndarray, n_levels: int = N_GRAY_LEVELS) -> np.ndarray:
    lo = image.min()
    hi = image.max()
    if hi <= lo:
        return np.zeros(image.shape, dtype=np.intp)
    levels = np.floor((image - lo) / (hi - lo) * n_levels).astype(np.intp)
    return np.minimum(levels, n_levels - 1)


def glcm_matrix(image: np.ndarray, distance: int, angle: int,
                n_levels: int = N_GRAY_LEVELS) -> np.ndarray | None:
    """Symmetrized, normalized co-occurrence matrix at one offset.

    Returns None when the image has no pixel pairs at this offset.
    """
    dr, dc = _GLCM_OFFSETS[angle]
    dr, dc = dr * distance, dc * distance
    levels = _quantize(np.asarray(image, dtype=np.float64), n_levels)
    h, w = levels.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    if r1 <= r0 or c1 <= c0:
        return None
    a = levels[r0:r1, c0:c1].ravel()
    b = levels[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
    m = np.zeros((n_levels, n_levels), dtype=np.float64)
    np.add.at(m, (a, b), 1.0)
    m = m + m.T
    return m / m.sum()


def _haralick_stats(P: np.ndarray) -> np.ndarray:
    idx = np.arange(len(P), dtype=np.float64)
    diff2 = (idx[:, None] - idx[None, :]) ** 2
    marginal = P.sum(axis=1)
    mu = float(idx @ marginal)
    var = float(((idx - mu) ** 2) @ marginal)
    contrast = float((diff2 * P).sum())
    energy = float((P * P).sum())
    nz = P[P > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    homogeneity = float((P / (1.0 + diff2)).sum())
    if var <= 1e-15:
        correlation = 1.0  # single-level image: pairs are trivially identical
    else:
        correlation = (float((np.outer(idx, idx) * P).sum()) - mu * mu) / var
    return np.array([contrast, correlation, energy, entropy, homogeneity, var])


def haralick_features(images: np.ndarray, distance: int) -> np.ndarray:
    """Six Haralick statistics per image, averaged over the four orientations.

    Images are quantized to 16 gray levels per image before the co-occurrence
    counts; feature order is HARALICK_FEATURE_NAMES.
    """
    out = np.empty((len(images), len(HARALICK_FEATURE_NAMES)), dtype=np.float64)
    for i, image in enumerate(images):
        stats = []
        for angle in GLCM_ANGLES:
            P = glcm_matrix(image, distance, angle)
            if P is not None:
                stats.append(_haralick_stats(P))
        if not stats:
            raise ComponentError(
                f"image of shape {np.asarray(image).shape} too small for distance {distance}")
        out[i] = np.mean(stats, axis=0)
    return assert_finite(out, "haralick_features")


def _bin_reduce(arr: np.ndarray, out: int, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    bounds = np.floor(np.arange(out) * n / out).astype(np.intp)
    summed = np.add.reduceat(arr, bounds, axis=axis)
    counts = np.maximum(np.diff(np.append(bounds, n)), 1).astype(np.float64)
    shape = [1] * arr.ndim
    shape[axis] = out
    return summed / counts.reshape(shape)


def downsample(image: np.ndarray, size: int) -> np.ndarray:
    """Area-average resample of a 2-D image to (size, size)."""
    arr = np.asarray(image, dtype=np.float64)
    return _bin_reduce(_bin_reduce(arr, size, 0), size, 1)


FROZEN_PROJECTION_WIDTH = 64
_FROZEN_INPUT_SIZE = 16
_FROZEN_MATRIX_SEED = 46_220_301
_frozen_matrix_cache: np.ndarray | None = None


def _frozen_matrix() -> np.ndarray:
    global _frozen_matrix_cache
    if _frozen_matrix_cache is None:
        rng = np.random.default_rng(_FROZEN_MATRIX_SEED)
        size = _FROZEN_INPUT_SIZE * _FROZEN_INPUT_SIZE
        _frozen_matrix_cache = rng.standard_normal((size, FROZEN_PROJECTION_WIDTH)) / math.sqrt(size)
    return _frozen_matrix_cache


def frozen_projection_features(images: np.ndarray) -> np.ndarray:
    """tanh of a fixed random projection of the 16x16 downsampled image.

    The projection matrix is a compile-time constant of the artifact; the
    extractor has no hyperparameters.
    """
    flat = np.stack([downsample(img, _FROZEN_INPUT_SIZE).ravel() for img in images])
    return assert_finite(np.tanh(flat @ _frozen_matrix()), "frozen_projection_features")


def naive_downsample_features(images: np.ndarray) -> np.ndarray:
    """Benchmark extractor: 8x8 downsample, flattened to 64 features."""
    out = np.stack([downsample(img, 8).ravel() for img in images])
    return assert_finite(out, "naive_downsample_features")


# ---------------------------------------------------------------------------
# feature transformation


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (cols, r)
    eigenvalues: np.ndarray  # (r,)
    whitening: bool

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) @ self.components
        if self.whitening:
            Z = Z / np.sqrt(self.eigenvalues)
        return assert_finite(Z, "pca transform")


def fit_pca(train: np.ndarray, whitening: bool) -> PcaModel:
    X = np.asarray(train, dtype=np.float64)
    if X.shape[0] < 2:
        raise ComponentError("PCA needs at least 2 train rows")
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    eig = (s * s) / (X.shape[0] - 1)
    limit = min(X.shape[0] - 1, X.shape[1])
    eig = eig[:limit]
    if eig.size == 0 or eig[0] <= 0.0:
        raise DegenerateInputError("PCA on an all-identical train matrix has no components")
    keep = eig > eig[0] * 1e-10
    r = int(np.count_nonzero(keep))
    return PcaModel(mean=mean, components=vt[:r].T.copy(), eigenvalues=eig[:r].copy(),
                    whitening=whitening)


def pca_fit_transform(train: np.ndarray, apply: np.ndarray, whitening: bool) -> np.ndarray:
    """Fit on train (centering, all nonzero-eigenvalue components), project apply."""
    return fit_pca(train, whitening).transform(apply)


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)


@dataclass
class IsomapModel:
    """Fitted manifold embedding; immutable after fit."""

    train: np.ndarray
    n_neighbors: int
    n_components: int
    geodesics: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    embedding: np.ndarray
    stitched: bool

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Out-of-sample embedding via the Nystrom formula.

        Geodesic distances from a new point are approximated through its
        nearest neighbors among the train points.
        """
        X = np.asarray(X, dtype=np.float64)
        d_euc = np.sqrt(_pairwise_sq_dists(X, self.train))
        nn_idx = np.argsort(d_euc, axis=1, kind="stable")[:, : self.n_neighbors]
        n = len(self.train)
        d_graph = np.empty((len(X), n))
        for i in range(len(X)):
            through = d_euc[i, nn_idx[i]][:, None] + self.geodesics[nn_idx[i], :]
            d_graph[i] = through.min(axis=0)
        col_mean_sq = (self.geodesics ** 2).mean(axis=0)
        centered = col_mean_sq[None, :] - d_graph ** 2
        out = np.zeros((len(X), self.n_components))
        for k in range(self.n_components):
            lam = self.eigenvalues[k]
            if lam > 0.0:
                out[:, k] = (centered @ self.eigenvectors[:, k]) / (2.0 * math.sqrt(lam))
        return assert_finite(out, "isomap transform")


def fit_isomap(train: np.ndarray, n_neighbors: int, n_components: int) -> IsomapModel:
    X = np.asarray(train, dtype=np.float64)
    n = X.shape[0]
    if n <= n_neighbors:
        raise ComponentError(f"isomap needs more than n_neighbors={n_neighbors} train rows")
    if n_components > n - 1:
        raise ComponentError(f"n_components={n_components} exceeds train rows - 1")
    D = np.sqrt(_pairwise_sq_dists(X, X))
    ranked = D.copy()
    np.fill_diagonal(ranked, -1.0)  # self first even among duplicate points
    order = np.argsort(ranked, axis=1, kind="stable")
    knn = order[:, 1:n_neighbors + 1]
    edge = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), n_neighbors)
    edge[rows, knn.ravel()] = True
    edge |= edge.T
    np.fill_diagonal(edge, False)

    stitched = False
    while True:
        ncomp, labels = connected_components(edge, directed=False)
        if ncomp == 1:
            break
        stitched = True
        # shortest Euclidean edge between any two components, Kruskal-style
        best = (np.inf, -1, -1)
        for a in range(ncomp):
            ia = np.flatnonzero(labels == a)
            for b in range(a + 1, ncomp):
                ib = np.flatnonzero(labels == b)
                block = D[np.ix_(ia, ib)]
                pos = np.unravel_index(np.argmin(block), block.shape)
                if block[pos] < best[0]:
                    best = (block[pos], ia[pos[0]], ib[pos[1]])
        edge[best[1], best[2]] = edge[best[2], best[1]] = True

    weights = np.ma.masked_array(D, mask=~edge)
    G = shortest_path(weights, method="D", directed=False)
    if not np.all(np.isfinite(G)):
        raise ComponentError("isomap graph unexpectedly disconnected after stitching")

    D2 = G ** 2
    row_mean = D2.mean(axis=1, keepdims=True)
    col_mean = D2.mean(axis=0, keepdims=True)
    B = -0.5 * (D2 - row_mean - col_mean + D2.mean())
    vals, vecs = np.linalg.eigh(B)
    vals = vals[::-1][:n_components]
    vecs = vecs[:, ::-1][:, :n_components]
    vals = np.maximum(vals, 0.0)
    embedding = vecs * np.sqrt(vals)[None, :]
    return IsomapModel(train=X.copy(), n_neighbors=n_neighbors, n_components=n_components,
                       geodesics=G, eigenvalues=vals, eigenvectors=vecs,
                       embedding=assert_finite(embedding, "isomap embedding"),
                       stitched=stitched)


def isomap_fit_transform(train: np.ndarray, apply: np.ndarray,
                         n_neighbors: int, n_components: int) -> np.ndarray:
    return fit_isomap(train, n_neighbors, n_components).transform(apply)


# ---------------------------------------------------------------------------
# learners


def _digest_array(arr: np.ndarray) -> bytes:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).digest()


_stack_lock = threading.Lock()
_stack_cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_STACK_CACHE_MAX = 48


def _tree_probs(train_X32, train_y, apply_X32, max_features: int, n_classes: int,
                seed: int, t: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, t]))
    idx = rng.integers(0, len(train_y), len(train_y))
    tree = DecisionTreeClassifier(criterion="gini", max_features=max_features,
                                  min_samples_leaf=1, random_state=int(rng.integers(2 ** 31)))
    Xb = np.asfortranarray(train_X32[idx])
    tree.fit(Xb, train_y[idx], check_input=False)
    small = tree.predict_proba(apply_X32, check_input=False)
    full = np.zeros((len(apply_X32), n_classes))
    full[:, tree.classes_.astype(int)] = small
    return full


def _forest_stack(train_X: np.ndarray, train_y: np.ndarray, apply_X: np.ndarray,
                  max_features: int, n_classes: int, seed: int, n_trees: int) -> np.ndarray:
    """Per-tree apply probabilities for the first ``n_trees`` seeded trees.

    Tree t is a pure function of (train data, max_features, seed, t), so the
    k-tree forest is the prefix of the 300-tree one and one build serves the
    whole n_estimators domain. A small LRU keeps recent stacks.
    """
    key = (_digest_array(train_X), _digest_array(train_y), _digest_array(apply_X),
           max_features, n_classes, seed)
    with _stack_lock:
        cached = _stack_cache.get(key)
        if cached is not None:
            _stack_cache.move_to_end(key)
            if cached.shape[0] >= n_trees:
                return cached
    start = 0 if cached is None else cached.shape[0]
    X32 = np.ascontiguousarray(train_X, dtype=np.float32)
    A32 = np.ascontiguousarray(apply_X, dtype=np.float32)
    y = np.ascontiguousarray(train_y, dtype=np.intp)
    fresh = np.stack([
        _tree_probs(X32, y, A32, max_features, n_classes, seed, t)
        for t in range(start, n_trees)
    ])
    stack = fresh if cached is None else np.concatenate([cached, fresh], axis=0)
    with _stack_lock:
        _stack_cache[key] = stack
        _stack_cache.move_to_end(key)
        while len(_stack_cache) > _STACK_CACHE_MAX:
            _stack_cache.popitem(last=False)
    return stack


def random_forest(train_X: np.ndarray, train_y: np.ndarray, apply_X: np.ndarray,
                  n_estimators: int, max_features: float, seed: int = 0,
                  n_classes: int | None = None) -> np.ndarray:
    """Seeded bootstrap CART forest; class probabilities are the across-tree
    mean of leaf class frequencies. ``max_features`` is a fraction of the
    feature count (ceil, minimum 1)."""
    train_X = np.asarray(train_X, dtype=np.float64)
    apply_X = np.asarray(apply_X, dtype=np.float64)
    train_y = np.asarray(train_y)
    if len(train_X) == 0:
        raise ComponentError("random forest got an empty train set")
    if n_classes is None:
        n_classes = int(train_y.max()) + 1
    n_feat = train_X.shape[1]
    mf = max(1, min(n_feat, math.ceil(max_features * n_feat)))
    stack = _forest_stack(train_X, train_y, apply_X, mf, n_classes, seed, int(n_estimators))
    probs = stack[: int(n_estimators)].mean(axis=0)
    probs = probs / probs.sum(axis=1, keepdims=True)
    return assert_finite(probs, "random_forest")


def rbf_kernel(A: np.ndarray, B: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-width * _pairwise_sq_dists(np.asarray(A, float), np.asarray(B, float)))


def kernel_classifier(train_X: np.ndarray, train_y: np.ndarray, apply_X: np.ndarray,
                      cost: float, kernel_width: float,
                      n_classes: int | None = None) -> np.ndarray:
    """One-vs-rest kernel ridge on standardized features, softmax over margins.

    Regularization strength is 1/cost; the RBF width plays the usual kernel
    scale role, so both hyperparameters keep their soft-margin-SVM semantics.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    apply_X = np.asarray(apply_X, dtype=np.float64)
    train_y = np.asarray(train_y)
    if len(train_X) == 0:
        raise ComponentError("kernel classifier got an empty train set")
    if n_classes is None:
        n_classes = int(train_y.max()) + 1
    mu = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    Zt = (train_X - mu) / sd
    Za = (apply_X - mu) / sd
    K = rbf_kernel(Zt, Zt, kernel_width)
    targets = np.zeros((len(train_y), n_classes))
    targets[np.arange(len(train_y)), train_y] = 1.0
    alpha = np.linalg.solve(K + (1.0 / cost) * np.eye(len(K)), targets)
    margins = rbf_kernel(Za, Zt, kernel_width) @ alpha
    margins -= margins.max(axis=1, keepdims=True)
    probs = np.exp(margins)
    probs /= probs.sum(axis=1, keepdims=True)
    return assert_finite(probs, "kernel_classifier")


def one_nearest_neighbor(train_X: np.ndarray, train_y: np.ndarray, apply_X: np.ndarray,
                         n_classes: int | None = None) -> np.ndarray:
    if len(train_X) == 0:
        raise ComponentError("1-NN got an empty train set")
    if n_classes is None:
        n_classes = int(np.asarray(train_y).max()) + 1
    dists = _pairwise_sq_dists(np.asarray(apply_X, float), np.asarray(train_X, float))
    nearest = np.asarray(train_y)[dists.argmin(axis=1)]
    probs = np.zeros((len(apply_X), n_classes))
    probs[np.arange(len(apply_X)), nearest] = 1.0
    return probs


# ---------------------------------------------------------------------------
# uniform fit/transform/predict wrappers and the registry

ROLE_EXTRACT = "extract"
ROLE_TRANSFORM = "transform"
ROLE_LEARN = "learn"


class HaralickExtractor:
    role = ROLE_EXTRACT

    def __init__(self, distance: int):
        self.distance = int(distance)

    def transform(self, images: np.ndarray) -> np.ndarray:
        return haralick_features(images, self.distance)


class FrozenProjectionExtractor:
    role = ROLE_EXTRACT

    def transform(self, images: np.ndarray) -> np.ndarray:
        return frozen_projection_features(images)


class NaiveDownsampleExtractor:
    role = ROLE_EXTRACT

    def transform(self, images: np.ndarray) -> np.ndarray:
        return naive_downsample_features(images)


class PcaTransformer:
    role = ROLE_TRANSFORM

    def __init__(self, whitening: bool):
        self.whitening = bool(whitening)
        self._model: PcaModel | None = None

    def fit(self, train: np.ndarray) -> "PcaTransformer":
        self._model = fit_pca(train, self.whitening)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self._model is None:
            raise ComponentError("transform called before fit")
        return self._model.transform(X)


class IsomapTransformer:
    role = ROLE_TRANSFORM

    def __init__(self, n_neighbors: int, n_components: int):
        self.n_neighbors = int(n_neighbors)
        self.n_components = int(n_components)
        self._model: IsomapModel | None = None

    def fit(self, train: np.ndarray) -> "IsomapTransformer":
        self._model = fit_isomap(train, self.n_neighbors, self.n_components)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self._model is None:
            raise ComponentError("transform called before fit")
        return self._model.transform(X)


class IdentityTransformer:
    role = ROLE_TRANSFORM

    def fit(self, train: np.ndarray) -> "IdentityTransformer":
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return X


class RandomForestLearner:
    role = ROLE_LEARN

    def __init__(self, n_estimators: int, max_features: float, seed: int = 0):
        self.n_estimators = int(n_estimators)
        self.max_features = float(max_features)
        self.seed = int(seed)
        self._train: tuple[np.ndarray, np.ndarray, int] | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "RandomForestLearner":
        self._train = (np.asarray(X, float), np.asarray(y), n_classes)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self._train is None:
            raise ComponentError("predict called before fit")
        train_X, train_y, n_classes = self._train
        return random_forest(train_X, train_y, X, self.n_estimators, self.max_features,
                             seed=self.seed, n_classes=n_classes)


class KernelRidgeLearner:
    role = ROLE_LEARN

    def __init__(self, cost: float, kernel_width: float):
        self.cost = float(cost)
        self.kernel_width = float(kernel_width)
        self._train = None

    def fit(self, X, y, n_classes: int) -> "KernelRidgeLearner":
        self._train = (np.asarray(X, float), np.asarray(y), n_classes)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self._train is None:
            raise ComponentError("predict called before fit")
        train_X, train_y, n_classes = self._train
        return kernel_classifier(train_X, train_y, X, self.cost, self.kernel_width,
                                 n_classes=n_classes)


class OneNearestNeighborLearner:
    role = ROLE_LEARN

    def fit(self, X, y, n_classes: int) -> "OneNearestNeighborLearner":
        self._train = (np.asarray(X, float), np.asarray(y), n_classes)
        return self

    def predict_proba(self, X) -> np.ndarray:
        train_X, train_y, n_classes = self._train
        return one_nearest_neighbor(train_X, train_y, X, n_classes=n_classes)


def naive_components(role: str):
    """The benchmark component for a step role; all are hyperparameter-free."""
    if role == "feature-extraction":
        return NaiveDownsampleExtractor()
    if role == "feature-transformation":
        return IdentityTransformer()
    if role == "learning":
        return OneNearestNeighborLearner()
    raise ComponentError(f"unknown naive role {role!r}")


@dataclass(frozen=True)
class ComponentFactory:
    role: str
    build: Callable[[Mapping[str, object], int], object]


REGISTRY: dict[str, ComponentFactory] = {
    "haralick": ComponentFactory(ROLE_EXTRACT, lambda v, s: HaralickExtractor(v["haralick-distance"])),
    "cnn": ComponentFactory(ROLE_EXTRACT, lambda v, s: FrozenProjectionExtractor()),
    "naive-downsample": ComponentFactory(ROLE_EXTRACT, lambda v, s: NaiveDownsampleExtractor()),
    "pca": ComponentFactory(ROLE_TRANSFORM, lambda v, s: PcaTransformer(v["whitening"])),
    "isomap": ComponentFactory(
        ROLE_TRANSFORM, lambda v, s: IsomapTransformer(v["n-neighbors"], v["n-components"])),
    "identity": ComponentFactory(ROLE_TRANSFORM, lambda v, s: IdentityTransformer()),
    "rf": ComponentFactory(
        ROLE_LEARN, lambda v, s: RandomForestLearner(v["n-estimators"], v["max-features"], seed=s)),
    "ksvm": ComponentFactory(ROLE_LEARN, lambda v, s: KernelRidgeLearner(v["cost"], v["kernel-width"])),
    "1nn": ComponentFactory(ROLE_LEARN, lambda v, s: OneNearestNeighborLearner()),
}


def build_component(algo_id: str, values: Mapping[str, object], seed: int,
                    registry: Mapping[str, ComponentFactory] | None = None):
    reg = REGISTRY if registry is None else registry
    if algo_id not in reg:
        raise ComponentError(f"no component registered for algorithm {algo_id!r}")
    return reg[algo_id].build(values, seed)


def default_document() -> dict:
    """The built-in three-step image classification pipeline document."""
    return {
        "metric": "cross-entropy",
        "folds": 5,
        "steps": [
            {
                "name": "feature-extraction",
                "algorithms": [
                    {"id": "haralick", "naive": False, "hyperparameters": [
                        {"name": "haralick-distance", "kind": "integer", "values": [1, 2, 3, 4]},
                    ]},
                    {"id": "cnn", "naive": False, "hyperparameters": []},
                    {"id": "naive-downsample", "naive": True, "hyperparameters": []},
                ],
            },
            {
                "name": "feature-transformation",
                "algorithms": [
                    {"id": "pca", "naive": False, "hyperparameters": [
                        {"name": "whitening", "kind": "boolean", "values": [True, False]},
                    ]},
                    {"id": "isomap", "naive": False, "hyperparameters": [
                        {"name": "n-neighbors", "kind": "integer", "values": [3, 4, 5, 6, 7]},
                        {"name": "n-components", "kind": "integer", "values": [2, 3, 4]},
                    ]},
                    {"id": "identity", "naive": True, "hyperparameters": []},
                ],
            },
            {
                "name": "learning",
                "algorithms": [
                    {"id": "rf", "naive": False, "hyperparameters": [
                        {"name": "n-estimators", "kind": "integer", "values": [8, 81, 154, 227, 300]},
                        {"name": "max-features", "kind": "real-discretized", "values": [0.3, 0.5, 0.7]},
                    ]},
                    {"id": "ksvm", "naive": False, "hyperparameters": [
                        {"name": "cost", "kind": "real-discretized",
                         "values": [0.1, 25.075, 50.05, 75.025, 100.0]},
                        {"name": "kernel-width", "kind": "real-discretized", "values": [0.3, 0.5, 0.7]},
                    ]},
                    {"id": "1nn", "naive": True, "hyperparameters": []},
                ],
            },
        ],
    }


def default_spec() -> PipelineSpec:
    return load_spec(default_document())
