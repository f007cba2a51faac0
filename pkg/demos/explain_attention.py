# %% [markdown]
# Reading a prediction term by term
#
# The pathway classifier's logit for a candidate is a plain sum: one
# attention-weighted cosine per pathway (audio/text x action/object), plus the
# linear text head. Because nothing is hidden in a nonlinearity after the sum,
# every prediction can be taken apart exactly.

# %%
import numpy as np

from aopath import PathwayConfig, RunConfig, SyntheticSpec, build_lexicon, generate_synthetic, train
from aopath.aoextractor import extract_records, extract_subtitle_words
from aopath.classifier import PATHWAYS, forward_batch
from aopath.numerics import no_grad

lexicon = build_lexicon()
recs = generate_synthetic(SyntheticSpec(1200, genres=("sitcom",), seed=3), lexicon)
params, _ = train(RunConfig(pathway=PathwayConfig.preset("aopath-s"), epochs=5), recs[:1000], lexicon)

# %% Pick one held-out question and look at what the extractor retrieved
rec = recs[1000]
ext = extract_records([rec], lexicon, K=15)[0]
verbs, nouns = extract_subtitle_words(rec.subtitle, lexicon)
print("subtitle verbs:", verbs)
print("subtitle nouns:", nouns)
actions = lexicon.actions.labels
print("gold candidate's top text actions:", [actions[i] for i in ext.ids["TA"][rec.gold][:6]])

# %% Per-candidate breakdown
with no_grad():
    _, info = forward_batch([ext], params, lexicon, details=True)
print(f"{'cand':>4} " + " ".join(f"{p:>13}" for p in PATHWAYS) + f" {'text head':>10} {'total':>8}")
for n in range(5):
    terms = [info[f"{p}.term"][0, n] for p in PATHWAYS]
    mark = "*" if n == rec.gold else " "
    print(f"{n:>3}{mark} " + " ".join(f"{t:>13.4f}" for t in terms) + f" {info['text_logit'][0, n]:>10.4f} {info['total'][0, n]:>8.4f}")

# %% The attention weights alpha, and the sum check
for p in PATHWAYS:
    print(f"{p:<13} alpha = {np.round(info[f'{p}.alpha'][0], 3)}")
parts = sum(info[f"{p}.term"] for p in PATHWAYS) + info["text_logit"]
print("largest |total - sum of parts|:", np.abs(parts - info["total"]).max())
