"""
Scripted recommendation-refinement session
==========================================

Run the agent loop end to end without any model endpoint: a scripted client
replays canned replies and a scripted executor replays canned artifact
bundles. The same orchestration code drives real HTTP clients and real
subprocess executors in production.
"""

from pathlib import Path

from agxai import (
    ArtifactBundle,
    PromptTemplates,
    ScriptedExecutor,
    ScriptedLlmClient,
    archive_session,
    load_session,
    progression_report,
    run_session,
)

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

# A session consumes one reply for round 0, then two per refinement round:
# first a fenced analysis script, then a revised recommendation that reads
# the executed results.
ROUNDS = 3

replies = ["Round 0 recommendation: raise nitrogen on the low-yield farms."]
for n in range(1, ROUNDS + 1):
    replies.append(
        "Checking the interaction next.\n"
        "```python\n"
        f"print('analysis for round {n}')\n"
        "```\n"
    )
    replies.append(
        f"Round {n} recommendation: split the nitrogen dose, "
        "second application at heading."
    )

# Each executed script yields an artifact bundle: figures (bytes), tables
# (text), captured stdout, exit status.
FIG = b'<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"/>'
outcomes = [
    ArtifactBundle(
        figures=tuple((f"r{n}_fig{i:02d}.svg", FIG) for i in range(n + 1)),
        tables=(("summary.csv", "variable,effect\nnitrogen,0.41\n"),),
        stdout=f"analysis for round {n}\n",
        exit_status=0,
    )
    for n in range(1, ROUNDS + 1)
]

client = ScriptedLlmClient(replies)
executor = ScriptedExecutor(outcomes)

# The initial prompt embeds the ranked variable list and the beeswarm image;
# a stand-in byte string keeps this demo self-contained.
variable_list = "1. Total nitrogen (Soil)\n2. Manure (Management)"
session = run_session(
    dataset_path="survey.csv",
    shap_image=FIG,
    variable_list=variable_list,
    templates=PromptTemplates.defaults(),
    client=client,
    executor=executor,
    rounds=ROUNDS,
)

print("round  new_figures  cumulative")
for round_index, new, cumulative in progression_report(session):
    print(f"{round_index:>5}  {new:>11}  {cumulative:>10}")

print(f"\nfinal recommendation:\n  {session.rounds[ROUNDS].recommendation}")

# Archiving writes manifest.json, the full conversation (image payloads
# reduced to hashes), and one directory per round with its code, artifacts,
# and recommendation. Loading restores an equivalent session.
root = OUT / "session"
archive_session(session, root)
restored = load_session(root)
assert restored.rounds[ROUNDS].recommendation == session.rounds[ROUNDS].recommendation
print(f"\narchived to {root} and reloaded: recommendations match")
for path in sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())[:8]:
    print(f"  {path}")
