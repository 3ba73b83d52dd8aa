"""PCA fit/transform for optional embedding dimensionality reduction.

Fit runs an SVD of the centered data matrix (numerically stabler than an
explicit covariance eigendecomposition) with a fixed sign convention: the
largest-magnitude entry of every component is made positive, so refits and
reloads reproduce identical transforms. A fitted model records the embedder
it was fitted under; mixing models across embedders is refused, because the
same projection must be applied at generation and detection time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientData, ProvenanceMismatch
from .jsonutil import read_json, write_json_exact

ORTHONORMALITY_TOL = 1e-9


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows orthonormal, descending variance
    explained_variance: np.ndarray
    d: int
    k: int
    fit_corpus_id: str = ""
    embedder_model_id: str = ""
    instruction: str = ""

    def check_provenance(self, embedder_model_id: str, instruction: str | None = None):
        if self.embedder_model_id and self.embedder_model_id != embedder_model_id:
            raise ProvenanceMismatch(
                f"PCA model was fitted under embedder {self.embedder_model_id!r}, "
                f"got {embedder_model_id!r}"
            )
        if instruction is not None and self.instruction and self.instruction != instruction:
            raise ProvenanceMismatch(
                f"PCA model was fitted under instruction {self.instruction!r}, "
                f"got {instruction!r}"
            )

    def validate(self) -> None:
        gram = self.components @ self.components.T
        if np.max(np.abs(gram - np.eye(self.k))) > ORTHONORMALITY_TOL:
            raise DimensionMismatch("PCA components are not orthonormal")
        if np.any(np.diff(self.explained_variance) > 0):
            raise DimensionMismatch("explained variances must be non-increasing")

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "mean": self.mean,
            "components": self.components,
            "explained_variance": self.explained_variance,
            "fit_corpus_id": self.fit_corpus_id,
            "embedder_model_id": self.embedder_model_id,
            "instruction": self.instruction,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(rec["mean"], dtype=np.float64),
            components=np.asarray(rec["components"], dtype=np.float64),
            explained_variance=np.asarray(rec["explained_variance"], dtype=np.float64),
            d=int(rec["d"]),
            k=int(rec["k"]),
            fit_corpus_id=rec.get("fit_corpus_id", ""),
            embedder_model_id=rec.get("embedder_model_id", ""),
            instruction=rec.get("instruction", ""),
        )

    def save(self, path: str) -> None:
        write_json_exact(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "PcaModel":
        return cls.from_dict(read_json(path))


def pca_fit(
    data: np.ndarray,
    k: int,
    fit_corpus_id: str = "",
    embedder_model_id: str = "",
    instruction: str = "",
) -> PcaModel:
    """Fit a rank-k PCA model on rows of ``data``.

    Requires more samples than components and k <= d. Deterministic for
    identical input order thanks to the sign convention.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionMismatch("PCA input must be a (n, d) matrix")
    n, d = data.shape
    if k < 1:
        raise InsufficientData(f"k must be >= 1, got {k}")
    if k > d:
        raise DimensionMismatch(f"k={k} exceeds input dim d={d}")
    if n <= k:
        raise InsufficientData(f"need more than k={k} samples, got {n}")

    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    explained = (singular[:k] ** 2) / (n - 1)

    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0

    model = PcaModel(
        mean=mean,
        components=components,
        explained_variance=explained,
        d=d,
        k=k,
        fit_corpus_id=fit_corpus_id,
        embedder_model_id=embedder_model_id,
        instruction=instruction,
    )
    model.validate()
    return model


def pca_transform(model: PcaModel, v: np.ndarray) -> np.ndarray:
    """Project ``v`` (a vector or a row matrix) into the k principal axes."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.d:
        raise DimensionMismatch(f"expected dim {model.d}, got {v.shape[-1]}")
    return (v - model.mean) @ model.components.T


def reconstruction_error(model: PcaModel, data: np.ndarray) -> float:
    """Mean squared reconstruction error of ``data`` under the model."""
    data = np.asarray(data, dtype=np.float64)
    projected = pca_transform(model, data)
    reconstructed = projected @ model.components + model.mean
    return float(np.mean((data - reconstructed) ** 2))
