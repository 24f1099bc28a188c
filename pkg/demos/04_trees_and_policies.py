# %% [markdown]
# # Conflict-free constructs
#
# A decision tree compiles to routes that are disjoint by construction.
# An exclusive union must prove its operands never co-fire.

# %%
from pathlib import Path

from probpol import check_tree, compile_tree, lower, parse_file, print_program, validate

CORPUS = Path(__file__).resolve().parents[1] / "corpus"

tree_prog = parse_file(CORPUS / "decision_tree.srdsl")
print(check_tree(tree_prog.trees[0], tree_prog))
for r in compile_tree(tree_prog.trees[0]):
    print(r.priority, r.name)

# %%
policies = parse_file(CORPUS / "policy_algebra.srdsl")
print(print_program(lower(policies)))

# %% [markdown]
# Without a softmax group the classifier leaves cannot be certified.

# %%
for d in validate(parse_file(CORPUS / "invalid" / "policy_overlap.srdsl")):
    print(d.format())
