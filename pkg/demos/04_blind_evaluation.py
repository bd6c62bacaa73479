"""
Blind randomized scoring of the round texts
===========================================

Evaluators never learn which refinement round produced the text in front of
them: each gets a private shuffled sheet of neutral labels. Scores come back
keyed by label, are de-blinded internally, and aggregate into per-round
means with standard errors.
"""

import numpy as np

from agxai import (
    AVERAGE,
    EvaluatorProfile,
    Group,
    Metric,
    ScoreMatrix,
    aggregate,
    make_evaluation_sheet,
    metric_series,
    record_scores,
    summarize_trajectory,
    summary_to_csv,
)

N_ROUNDS = 11  # rounds 0..10

# One sheet per evaluator. The JSON payload sent out contains only the
# evaluator id and the item labels, nothing that hints at round order.
lead = EvaluatorProfile("cs-01", Group.HUMAN, label="crop scientist")
sheet = make_evaluation_sheet(N_ROUNDS, lead, seed=2024)
print(f"{lead.evaluator_id} sees items in order: {' '.join(sheet.labels)}")
print("outbound payload:", sheet.to_json().replace("\n", " "))

# Simulated panel. Score quality follows a gentle hump over rounds, plus
# per-evaluator noise; real studies replace this block with collected forms.
rng = np.random.default_rng(99)
HUMP = np.array([3, 4, 4, 5, 6, 5, 5, 4, 4, 3, 3])

matrix = ScoreMatrix()
panel = [
    EvaluatorProfile(f"cs-{i:02d}", Group.HUMAN) for i in range(1, 5)
] + [
    EvaluatorProfile(f"judge-{i:02d}", Group.LLM) for i in range(1, 5)
]
for evaluator in panel:
    sheet = make_evaluation_sheet(N_ROUNDS, evaluator, seed=2024)
    raw = []
    for label in sheet.labels:
        true_round = sheet.round_for_label(label)
        for metric in Metric:
            wobble = int(rng.integers(-1, 2))
            raw.append((label, metric, int(np.clip(HUMP[true_round] + wobble, 1, 7))))
    # record_scores refuses partial sheets and out-of-range values, then
    # maps labels back to true rounds.
    matrix.ingest(evaluator, record_scores(sheet, raw))

summary = aggregate(matrix)
print(f"\n{len(matrix.evaluator_ids)} evaluators, rounds {summary.rounds[0]}"
      f"..{summary.rounds[-1]}")

for group in (Group.HUMAN, Group.LLM):
    series = metric_series(summary, group, AVERAGE)
    digest = summarize_trajectory(summary, group, AVERAGE)
    means = " ".join(f"{v:.2f}" for v in series.y)
    print(f"\n{group.value} overall means by round: {means}")
    print(f"  round 0 {digest.round0:.3f} -> peak {digest.peak:.3f} at "
          f"round(s) {digest.peak_rounds} -> final {digest.last:.3f}")
    print(f"  deltas: peak vs round0 {digest.delta_peak_vs_round0:+.3f}, "
          f"final vs peak {digest.delta_last_vs_peak:+.3f}")

# The CSV export carries group, round, metric, mean, sem, n; the Average
# pseudo-metric row leads each block.
print("\nfirst lines of the summary export:")
for line in summary_to_csv(summary).splitlines()[:4]:
    print(f"  {line}")
