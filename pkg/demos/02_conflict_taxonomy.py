# %% [markdown]
# # Conflict reports across the corpus
#
# Crisp conflicts come from enumerating truth assignments, embedding overlaps
# from spherical caps, and soft shadowing from replaying a query trace.

# %%
from pathlib import Path

from probpol import analyze, parse_file

CORPUS = Path(__file__).resolve().parents[1] / "corpus"

for name in ("contradiction", "shadowing", "embedding_caps", "listing1"):
    print(f"== {name}")
    for r in analyze(parse_file(CORPUS / f"{name}.srdsl")):
        print(f"  {r.kind:18s} {' > '.join(r.routes) or '-':35s} {r.tier}")

# %% [markdown]
# Soft shadowing needs traffic. Eleven support questions are enough to see
# the broad help route overriding the refund route.

# %%
trace = [q for q in (CORPUS / "traces" / "soft_shadowing.txt").read_text().splitlines() if q.strip()]
for r in analyze(parse_file(CORPUS / "soft_shadowing.srdsl"), corpus=trace):
    print(r.kind, r.routes, r.to_json()["evidence"])
