# %% [markdown]
# # Priority versus confidence
#
# Two domain routes, math first. A physics question that looks a little like
# math still goes to the math model under first-match routing. Putting the
# domains in a softmax group fixes it.

# %%
from pathlib import Path

import numpy as np

from probpol import Router, StaticScores, parse, voronoi_scores
from probpol.engine import INDEPENDENT, VORONOI

CORPUS = Path(__file__).resolve().parents[1] / "corpus"
listing = (CORPUS / "listing1.srdsl").read_text()
print(listing)

# %%
# classifier scores for "compute the momentum of a falling ball"
scores = StaticScores({"math": 0.52, "science": 0.89, "coding": 0.31, "general": 0.25})

plain = Router(parse(listing), provider=scores, mode=INDEPENDENT).route("q")
for t in plain.trace:
    print(f"{t.route:15s} matched={t.matched!s:5s} conf={t.confidence:.2f} {t.reason}")
print("->", plain.route)

# %% [markdown]
# Both signals clear 0.5, so the higher priority wins even though science
# is far more confident.

# %%
sims = np.array([0.52, 0.89, 0.31])
for T in (1.0, 0.3, 0.1, 0.03):
    print(f"T={T:<5} {np.round(voronoi_scores(sims, T), 4)}")

# %%
grouped = parse((CORPUS / "signal_group.srdsl").read_text())
decision = Router(grouped, provider=scores, mode=VORONOI).route("q")
print({k: round(v, 4) for k, v in decision.scores.normalized.items()})
print("->", decision.route)
