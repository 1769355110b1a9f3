"""
Scoring a critique against a human reference
============================================

A critique is a set of arguments. Each argument names a point (content key),
the response it talks about and whether it praises or faults it. Matching is
exact on all three fields.
"""

from critique_rl.data import Argument, ArgumentSet
from critique_rl.rewards import composite_reward, process_reward
from critique_rl.similarity import compute_similarity

human = ArgumentSet((
    Argument("accuracy", "A", "positive"),
    Argument("tone", "B", "negative"),
    Argument("length", "A", "positive"),
))

# The model found two of the three human points, one with the wrong stance.
model = ArgumentSet((
    Argument("accuracy", "A", "positive"),
    Argument("tone", "B", "positive"),
    Argument("length", "A", "positive"),
    Argument("format", "B", "negative"),
))

s = compute_similarity(human, model, "all")
print(f"TP={s.tp}  N_ref={s.n_ref}  N_gen={s.n_gen}")
print(f"precision={s.precision:.3f} recall={s.recall:.3f} F1={s.f1:.3f}")

# %%
# A fatal flaw in the reference overrides everything else: only finding it counts.
fatal_ref = ArgumentSet(human.arguments + (Argument("math", "B", "negative", fatal=True),))
print("core mode, fatal missed:", compute_similarity(fatal_ref, model, "core").f1)
print("core mode, fatal found: ",
      compute_similarity(fatal_ref, ArgumentSet((Argument("math", "B", "negative"),)), "core").f1)

# %%
# Repeating a point zeroes the score.
print("repeated point, F1 =", compute_similarity(human, ArgumentSet(model.arguments + model.arguments[:1])).f1)

# %%
# The similarity becomes a binary process reward, which only pays out when
# the preference label is also right.
r = process_reward(s.f1)
for label_ok in (True, False):
    print(f"label correct={label_ok}: reward {composite_reward(True, label_ok, r, lam=0.5)}")
print("unparseable output:", composite_reward(False, False))
