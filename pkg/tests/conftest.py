"""Shared builders for the test suite."""

import numpy as np

from agxai.dataset import Category, Dataset, FeatureSchema, SchemaEntry


def simple_schema(n_features: int, prefix: str = "f") -> FeatureSchema:
    return FeatureSchema(tuple(
        SchemaEntry(f"{prefix}{i}", Category.SOIL) for i in range(n_features)
    ))


def build_dataset(features, targets) -> Dataset:
    features = np.array(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    targets = np.array(targets, dtype=np.float64)
    return Dataset(
        simple_schema(features.shape[1]),
        tuple(f"row{i:03d}" for i in range(features.shape[0])),
        features,
        targets,
    )
