"""
Searching for abort-token reuse
===============================

With the unamended protocol and a dishonest responder, B can end up
holding both A's abort request and the key release while A holds B's
receipt.  The bounded search finds such an execution; the amended
protocol and a confidential A -> T link remove it.

Each search takes one to two minutes.
"""

# %%
from pathlib import Path

from strandmsr.checker import check_attack
from strandmsr.scenario import load_scenario
from strandmsr.wang import messages

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

sc = load_scenario(str(SCENARIOS / "original.scn"))
v = check_attack(sc)
print(v.line())

# %%
# The witness is the shortest stable execution satisfying the attack
# predicate.  Adversary steps are the ``adv`` lines.
for line in v.witness.trace_lines:
    print(" ".join(line.split()[:5]))

# %%
# What B (through the adversary) can now produce.
w = messages(v.witness.world.sessions[0])
k = v.witness.knowledge
print("abort request:", k.can_derive(w.AR))
print("key release:  ", k.can_derive(w.KR))

# %%
# The same setting with the amended protocol, and with the abort request
# hidden from the network.
for name in ("corrected", "confidential"):
    print(name, check_attack(load_scenario(str(SCENARIOS / f"{name}.scn"))).line())
