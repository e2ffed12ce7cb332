"""How many episodes does social learning save?

Per generation, p solo learners with e episodes each cost p*e. Social
training costs e_c shared episodes plus e_i per agent, yet every agent sees
e_c + e_i episodes.
"""
from socialtrees import budget_report
from socialtrees.config import load_config

for name in ("invertedpendulum", "lunarlander", "swimmer"):
    cfg = load_config(f"{name}.cfg")
    soc = cfg.social_config()
    print(f"{name}: {cfg.planned_budget()}")
    rep = budget_report(cfg.population_size, soc.e_c, soc.e_i, baseline_e=soc.e_i + 6)
    print("  " + str(rep).replace("\n", "\n  "))

print("\nbreak-even baseline for p=500, e_c=1000, e_i=3:")
for e in (4, 5, 6, 9, 20):
    rep = budget_report(500, 1000, 3, e)
    print(f"  e={e:2d}: social {rep.social_cost} vs solo {rep.baseline_cost}  cheaper={rep.cheaper}")
