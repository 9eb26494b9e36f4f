"""Dataset loading, multi-label reduction, splitting, and PCA projection.

The on-disk input format is the sparse text format used by the Extreme
Classification Repository: one example per line,

    label[,label...] idx:val idx:val ...

An optional first line of exactly three integers ``N K C`` is treated as a
header. Cached datasets and PCA projections are stored as ``.npz`` files
with a magic string (see ``save_dataset`` / ``save_pca``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParseError

DATASET_MAGIC = "advsamp-dataset-v1"
PCA_MAGIC = "advsamp-pca-v1"


@dataclass(frozen=True)
class SparseVector:
    """Sparse feature vector with strictly increasing indices."""

    indices: np.ndarray  # int64, strictly increasing, < dim
    values: np.ndarray  # float64, same length
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape:
            raise DataError("indices and values length mismatch")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise DataError("feature indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise DataError(f"feature index out of range for dim={self.dim}")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class RawExample:
    labels: tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray


@dataclass
class RawDataset:
    """Multi-label dataset as read from disk, before label reduction."""

    examples: list[RawExample]
    num_features: int


class SparseDataset:
    """Immutable single-label dataset backed by a CSR feature matrix."""

    def __init__(self, features: sp.csr_matrix, labels: np.ndarray, num_labels: int):
        features = features.tocsr()
        labels = np.asarray(labels, dtype=np.int64)
        if features.shape[0] != labels.shape[0]:
            raise DataError("feature/label count mismatch")
        if labels.size and (labels.min() < 0 or labels.max() >= num_labels):
            raise DataError("label out of range")
        self.features = features
        self.labels = labels
        self.num_labels = int(num_labels)
        self.label_counts = np.bincount(labels, minlength=num_labels)

    @property
    def num_examples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def example(self, i: int) -> tuple[SparseVector, int]:
        lo, hi = self.features.indptr[i], self.features.indptr[i + 1]
        vec = SparseVector(
            self.features.indices[lo:hi].astype(np.int64),
            self.features.data[lo:hi],
            self.num_features,
        )
        return vec, int(self.labels[i])

    def __len__(self) -> int:
        return self.num_examples


def _parse_header(line: str) -> tuple[int, int, int] | None:
    toks = line.split()
    if len(toks) != 3:
        return None
    try:
        n, k, c = (int(t) for t in toks)
    except ValueError:
        return None
    return n, k, c


def load_svmlight(path, one_based: bool = False) -> RawDataset:
    """Load a sparse multi-label text file.

    ``one_based`` shifts feature indices down by one. K is taken from a
    three-integer ``N K C`` header if present, otherwise inferred as
    max index + 1.
    """
    examples: list[RawExample] = []
    num_features = 0
    header_k = None
    offset = 1 if one_based else 0

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if lineno == 1 and ":" not in stripped and "," not in stripped:
                header = _parse_header(stripped)
                if header is not None:
                    header_k = header[1]
                    continue
            # A leading feature token means the label field is empty.
            leading_ws = line[0] in " \t"
            toks = stripped.split()
            if leading_ws or ":" in toks[0]:
                label_toks, feat_toks = [], toks
            else:
                label_toks, feat_toks = toks[0].split(","), toks[1:]
            try:
                labels = tuple(int(t) for t in label_toks if t != "")
            except ValueError:
                raise ParseError(f"bad label field {toks[0]!r}", lineno)
            idx = np.empty(len(feat_toks), dtype=np.int64)
            val = np.empty(len(feat_toks))
            for j, tok in enumerate(feat_toks):
                head, sep, tail = tok.partition(":")
                if not sep:
                    raise ParseError(f"bad feature token {tok!r}", lineno)
                try:
                    idx[j] = int(head) - offset
                    val[j] = float(tail)
                except ValueError:
                    raise ParseError(f"bad feature token {tok!r}", lineno)
            if idx.size:
                if np.any(np.diff(idx) <= 0):
                    raise ParseError("feature indices not strictly increasing", lineno)
                if idx[0] < 0:
                    raise ParseError("negative feature index", lineno)
                num_features = max(num_features, int(idx[-1]) + 1)
            examples.append(RawExample(labels, idx, val))

    if header_k is not None:
        if num_features > header_k:
            raise ParseError(f"feature index exceeds header K={header_k}")
        num_features = header_k
    return RawDataset(examples, num_features)


def reduce_multilabel(raw: RawDataset, policy: str = "smallest_id",
                      label_map: dict | None = None, return_map: bool = False,
                      num_features: int | None = None):
    """Reduce each example to a single label and re-index labels densely.

    ``policy`` is ``smallest_id`` or ``first_listed``. Examples without any
    label are dropped. Passing ``label_map`` (original id -> dense id, e.g.
    from a previous reduction of the training split) applies an existing
    indexing instead of building a fresh one; examples whose chosen label
    is unmapped are dropped. ``return_map`` additionally returns the map.
    """
    if policy not in ("smallest_id", "first_listed"):
        raise DataError(f"unknown multi-label policy {policy!r}")
    kept = [ex for ex in raw.examples if ex.labels]
    if policy == "smallest_id":
        chosen = [min(ex.labels) for ex in kept]
    else:
        chosen = [ex.labels[0] for ex in kept]
    if label_map is None:
        remap = {lab: i for i, lab in enumerate(sorted(set(chosen)))}
    else:
        remap = label_map
        filtered = [(ex, lab) for ex, lab in zip(kept, chosen) if lab in remap]
        kept = [ex for ex, _ in filtered]
        chosen = [lab for _, lab in filtered]
    if not kept:
        raise DataError("no examples with labels remain after reduction")
    labels = np.array([remap[lab] for lab in chosen], dtype=np.int64)
    num_labels = max(remap.values()) + 1

    K = max(raw.num_features, num_features or 0)
    indptr = np.zeros(len(kept) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([ex.indices.size for ex in kept])
    indices = np.concatenate([ex.indices for ex in kept] or [np.empty(0, dtype=np.int64)])
    data = np.concatenate([ex.values for ex in kept] or [np.empty(0)])
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(kept), K))
    dataset = SparseDataset(mat, labels, num_labels)
    return (dataset, remap) if return_map else dataset


@dataclass(frozen=True)
class PcaProjection:
    """Top-k principal directions of the empirical feature covariance."""

    mean: np.ndarray  # (K,)
    components: np.ndarray  # (k, K), rows orthonormal
    eigenvalues: np.ndarray = field(default=None)  # (k,), nonincreasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]


def _power_iteration(matvec, dim, rng, tol=1e-9, max_iter=1000):
    """Dominant eigenpair of a symmetric PSD operator given as a matvec."""
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, v, True
        w /= norm
        if w @ v < 0:
            w = -w
        done = np.linalg.norm(w - v) < tol
        v = w
        lam = v @ matvec(v)
        if done:
            return lam, v, True
    return lam, v, False


def fit_pca(dataset: SparseDataset, k: int, tol=1e-9, max_iter=1000, seed=0) -> PcaProjection:
    """Top-k PCA by power iteration with deflation.

    The covariance is never formed densely; matvecs go through the sparse
    feature matrix. Rank-deficient data (rank < k) is completed with
    arbitrary orthonormal directions and a warning.
    """
    K = dataset.num_features
    n = dataset.num_examples
    if not 0 < k < K:
        raise DataError(f"require 0 < k < K, got k={k}, K={K}")
    if n < k:
        raise DataError(f"need at least k={k} examples, have {n}")

    X = dataset.features
    mean = np.asarray(X.mean(axis=0)).ravel()
    comps = np.zeros((k, K))
    eigs = np.zeros(k)
    rng = np.random.default_rng(seed)

    def cov_matvec(v):
        # (1/n) X^T X v - mean (mean . v), then deflate found components
        out = X.T @ (X @ v) / n - mean * (mean @ v)
        for j in range(found):
            out -= eigs[j] * comps[j] * (comps[j] @ v)
        return out

    found = 0
    deficient = False
    for i in range(k):
        lam, v, converged = _power_iteration(cov_matvec, K, rng, tol, max_iter)
        if lam <= 1e-12:
            deficient = True
            break
        if not converged:
            warnings.warn(f"PCA component {i} did not converge in {max_iter} iterations")
        # re-orthogonalize against earlier components for numerical safety
        for j in range(found):
            v -= comps[j] * (comps[j] @ v)
        v /= np.linalg.norm(v)
        comps[i] = v
        eigs[i] = lam
        found += 1

    if deficient:
        warnings.warn(
            f"data rank {found} < k={k}; completing with arbitrary orthonormal directions"
        )
        for i in range(found, k):
            v = rng.standard_normal(K)
            for j in range(i):
                v -= comps[j] * (comps[j] @ v)
            v /= np.linalg.norm(v)
            comps[i] = v
            eigs[i] = 0.0
    return PcaProjection(mean, comps, eigs)


def apply_pca(proj: PcaProjection, x: SparseVector) -> np.ndarray:
    """Project a single sparse vector: components @ (x - mean)."""
    if x.dim != proj.input_dim:
        raise DataError(f"dimension mismatch: x.dim={x.dim}, K={proj.input_dim}")
    out = proj.components[:, x.indices] @ x.values
    out -= proj.components @ proj.mean
    return out


def apply_pca_matrix(proj: PcaProjection, features: sp.csr_matrix) -> np.ndarray:
    """Project all rows of a CSR matrix at once; returns (n, k) dense."""
    if features.shape[1] != proj.input_dim:
        raise DataError("dimension mismatch in batch projection")
    return np.asarray((features @ proj.components.T) - proj.mean @ proj.components.T)


def split(dataset: SparseDataset, validation_fraction: float, seed: int):
    """Deterministic disjoint train/validation split."""
    n = dataset.num_examples
    if n < 2:
        raise DataError("need at least 2 examples to split")
    if not 0.0 < validation_fraction < 1.0:
        raise DataError("validation_fraction must be in (0, 1)")
    n_val = int(round(n * validation_fraction))
    if n_val == 0 or n_val == n:
        raise DataError(f"fraction {validation_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])

    def subset(idx):
        return SparseDataset(dataset.features[idx], dataset.labels[idx], dataset.num_labels)

    return subset(train_idx), subset(val_idx)


def save_dataset(path, dataset: SparseDataset) -> None:
    np.savez(
        path,
        magic=DATASET_MAGIC,
        shape=np.array([dataset.num_examples, dataset.num_features, dataset.num_labels]),
        data=dataset.features.data,
        indices=dataset.features.indices,
        indptr=dataset.features.indptr,
        labels=dataset.labels,
    )


def load_dataset(path) -> SparseDataset:
    with np.load(path, allow_pickle=False) as z:
        if str(z["magic"]) != DATASET_MAGIC:
            raise DataError(f"not a dataset cache: {path}")
        n, K, C = (int(v) for v in z["shape"])
        mat = sp.csr_matrix((z["data"], z["indices"], z["indptr"]), shape=(n, K))
        return SparseDataset(mat, z["labels"], C)


def save_pca(path, proj: PcaProjection) -> None:
    np.savez(
        path,
        magic=PCA_MAGIC,
        mean=proj.mean,
        components=proj.components,
        eigenvalues=proj.eigenvalues if proj.eigenvalues is not None else np.zeros(proj.k),
    )


def load_pca(path) -> PcaProjection:
    with np.load(path, allow_pickle=False) as z:
        if str(z["magic"]) != PCA_MAGIC:
            raise DataError(f"not a PCA cache: {path}")
        return PcaProjection(z["mean"], z["components"], z["eigenvalues"])
