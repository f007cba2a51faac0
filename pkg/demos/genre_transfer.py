# %% [markdown]
# Training on one genre, testing on another
#
# Every synthetic genre draws its words from its own slice of the label
# dictionaries, so a sitcom question never mentions a medical word. A model
# that learned "the answer shares actions and objects with the subtitle" still
# transfers; one that memorised particular words does not. This runs a few
# rows of the ablation matrix on two genre splits.

# %%
from aopath import GenreSplit, RunConfig, SyntheticSpec, build_lexicon, generate_synthetic
from aopath.training import ablation_matrix, format_table, run_ablation

lexicon = build_lexicon()
pool = generate_synthetic(SyntheticSpec(2400, seed=4), lexicon)
splits = [GenreSplit.from_pools(a, b, pool) for a, b in (("medical", "sitcom"), ("crime", "medical"))]
for s in splits:
    print(s.name, len(s.train_records), "train /", len(s.eval_records), "eval")

# %%
wanted = {"atclassifier", "nopaths", "aopath-s", "actions", "objects", "no-attention"}
matrix = [(name, cfg) for name, cfg in ablation_matrix(RunConfig(epochs=5)) if name in wanted]
rows = run_ablation(matrix, splits, lexicon)
print(format_table(rows))
