"""
Field survey table and the bootstrap forest
===========================================

Load a survey-shaped dataset, pick forest hyperparameters by leave-one-out
cross-validation, and fit the final model on all rows.
"""

import numpy as np

from agxai import (
    Category,
    ForestConfig,
    catalog_summary,
    cv_report_to_csv,
    default_schema,
    fit_forest,
    forest_from_json,
    forest_to_json,
    grid_search,
    predict_rows,
    r_squared,
    synthetic_dataset,
)

# The bundled schema describes the survey variables by category. A real
# study would ship its own table; the synthetic generator draws one with the
# same shape so every script here runs offline.
schema = default_schema()
for category, count in catalog_summary(schema).items():
    print(f"{category.value:>14}: {count} variables")

data = synthetic_dataset(seed=7, n_rows=40)
print(f"\n{len(data)} farms x {len(schema)} variables, "
      f"yield range {data.targets.min():.2f}..{data.targets.max():.2f} t/ha")

# Hyperparameter search. Each grid point is scored by leave-one-out R^2:
# refit with one farm held out, predict it, repeat for every farm. The demo
# grid is deliberately small; default_grid() holds the full six-point one.
grid = (
    ForestConfig(n_estimators=20, max_depth=None),
    ForestConfig(n_estimators=20, max_depth=6),
    ForestConfig(n_estimators=40, max_depth=6),
)
report = grid_search(data, grid)
print("\n" + cv_report_to_csv(report))
print(f"selected: {report.best_config.n_estimators} trees, "
      f"max_depth={report.best_config.max_depth}, LOO R^2 = {report.best_r2:.4f}")

forest = fit_forest(data, report.best_config)

# Training-set fit is always optimistic next to the LOO number above; both
# are worth reporting.
train_r2 = r_squared(predict_rows(forest, data.features), data.targets)
print(f"training R^2 = {train_r2:.4f}")

# The JSON round trip is exact: every threshold and leaf value survives, so
# a persisted forest predicts identically.
clone = forest_from_json(forest_to_json(forest))
assert np.array_equal(predict_rows(clone, data.features),
                      predict_rows(forest, data.features))
print("JSON round trip preserves predictions bit for bit")
