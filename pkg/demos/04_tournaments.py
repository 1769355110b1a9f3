"""
Picking the best of N with a pairwise judge
===========================================

A pairwise reward model can only say which of two responses is better.
Single elimination turns that into a best-of-N pick; double elimination gives
every candidate a score (its number of wins).
"""

import numpy as np

from critique_rl.tournament import OracleJudge, bon_select, double_elimination

rng = np.random.default_rng(0)
quality = {f"response {i}": float(q) for i, q in enumerate(rng.normal(size=7))}
candidates = list(quality)
judge = OracleJudge(quality.__getitem__)

bon = bon_select(candidates, judge, seed=0)
print("best of 7:", candidates[bon.winner], f"after {len(bon.match_log)} matches")

de = double_elimination(candidates, judge, seed=0)
for rank, i in enumerate(de.ranking, 1):
    print(f"{rank}. {candidates[i]:11s} wins={de.pointwise_scores[i]}  quality={quality[candidates[i]]:+.2f}")

# %%
# With a live judge, swap OracleJudge for GrmJudge(JudgeClient(...)); set
# JUDGE_ENDPOINT, JUDGE_MODEL and JUDGE_API_KEY first.
