"""Plug an external process in as the editor over the line protocol.

Editors and evaluators can live outside the engine entirely: a child
process speaking newline-delimited JSON (one request per line, replies in
order, version 1 handshake first). This demo drives the reference worker
from the companion bridge-worker package, which paraphrases by rule table
instead of by model; a model-backed worker would speak the same protocol.
"""

import importlib.util
import sys

from macs import (
    EditRequest,
    EpisodeConfig,
    EvaluationCache,
    ExternalEditor,
    MultiConstraint,
    RewardModel,
    Scorer,
    ThresholdWindow,
    WorkerClient,
    WorkerPool,
    run_episode,
)
from macs.evaluators import ToyComplexityEvaluator, ToySentimentEvaluator
from macs.synth import style_space

if importlib.util.find_spec("bridgeworker") is None:
    print("bridge-worker is not installed; run `pip install -e ./worker` first.")
    raise SystemExit(0)

WORKER = [sys.executable, "-m", "bridgeworker"]
space = style_space()
scorer = Scorer(
    space, (ToySentimentEvaluator(), ToyComplexityEvaluator()), cache=EvaluationCache()
)
target = MultiConstraint(
    (ThresholdWindow("sentiment", 3.5, 5.0), ThresholdWindow("complexity", -1.0, 1.0))
)

client = WorkerClient.launch(WORKER, roles=("editor", "evaluator"), attr_ids=space.ids)
print(f"handshake: protocol {client.worker_hello['protocol']}, "
      f"roles {client.worker_hello['roles']}")

current = scorer.score("The meal was good. Service felt slow but the staff stayed friendly.")
request = EditRequest(
    episode_id="demo",
    context="",
    anchor=None,
    current=current,
    target=target,
    n_candidates=3,
    seed=7,
)
print(f"\ncurrent: {current.seq!r}")
print("three rule-based paraphrase candidates:")
for cand in client.edit(request):
    print(f"  - {cand!r}")

print("\nevaluator proxy (distinct-token ratio for 'fluency'):")
print(f"  {client.evaluate('fluency', ['a a a a', 'a b c d'])}")
client.close()

# The same worker can carry a whole episode; the engine owns its lifecycle.
pool = WorkerPool(WORKER, roles=("editor",), attr_ids=space.ids, size=1)
try:
    result = run_episode(
        ExternalEditor(pool),
        scorer,
        RewardModel(space, cache=EvaluationCache()),
        current,
        target,
        EpisodeConfig(strategy="prioritized", budget=4, seed=3),
        "demo-episode",
    )
finally:
    pool.close()

print(f"\nepisode over {result.budget_used} worker calls, satisfied: {result.satisfied}")
print(f"final: {result.final.seq!r}")
print(f"  sentiment {result.final.attrs[0]:.2f}, complexity {result.final.attrs[1]:+.2f}")
print("\nthe CLI does the same at campaign scale with")
print('  "editor": {"kind": "external", "command": ["python3", "-m", "bridgeworker"]}')
