"""
Running one exchange
====================

Build a world from a scenario, run it on a passive network, and look at
the resulting bundle, the TTP-side state and the checks.
"""

# %%
# A scenario fixes the principals, who is compliant, channel properties
# and the search bounds.  The defaults describe one session between
# honest A, B and T.
from strandmsr.checker import check_authentication, check_balance
from strandmsr.executor import make_world, simulate
from strandmsr.scenario import Scenario, render_scenario

sc = Scenario()
print(render_scenario(sc))

# %%
# ``simulate`` delivers every message and then stabilizes.  The seed only
# breaks ties between enabled steps.
e = simulate(make_world(sc), seed=7)
for line in e.trace_lines:
    kind, who, node = line.split()[1:4]
    print(kind, who, node)

# %%
# Deposits made through synchronization nodes show up as facts in the
# last state of the computation.
print(e.state_text())

# %%
# Both parties hold evidence, and every deposit is backed by the expected
# transmissions.
print(check_balance(e, sc).line())
for v in check_authentication(e, sc):
    print(v.line())

# %%
# Losing B's receipt sends A to T for an abort; both sides then hold the
# abort token.
lost = Scenario(drop=("eor",))
e = simulate(make_world(lost), seed=7)
print(sorted(f.predicate + "(" + f.args[0].id + ")" for f in e.computation.last.facts()))
print(check_balance(e, lost).line())
