"""
Bounded enumeration
===================

Enumerate every stable execution within the scenario bounds and check
balance, progress and the authentication properties on each.  Then look
at the one execution class where the unamended protocol lets B accept an
abort that T never made.
"""

# %%
import time
from pathlib import Path

from strandmsr.checker import (Exploration, check_authentication, check_balance, check_progress,
                               explore)
from strandmsr.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# %%
# A compliant initiator facing an adversarial responder and network.
sc = load_scenario(str(SCENARIOS / "balance-at.scn"))
res = Exploration()
t0 = time.perf_counter()
bad = 0
for e in explore(sc, result=res):
    checks = [check_balance(e, sc), check_progress(e, sc)] + check_authentication(e, sc)
    bad += sum(not v.holds for v in checks)
print(res.summary(), f"in {time.perf_counter() - t0:.0f}s;", bad, "violations")

# %%
# The unamended protocol with everyone honest.  Some execution has B
# depositing A's bare abort request while T recovered the exchange.
sc = load_scenario(str(SCENARIOS / "auth-original.scn"))
for e in explore(sc):
    failing = [v for v in check_authentication(e, sc) if not v.holds]
    if failing:
        print(failing[0].line())
        for line in e.trace_lines:
            print(" ".join(line.split()[:5]))
        print(check_balance(e, sc).line())
        break
