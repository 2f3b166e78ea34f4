"""Command-line scenario runner.

Exit status: 0 when every requested property holds (for ``find-attack``,
when the search outcome matches the scenario's ``expect``), 1 on a property
failure, 2 on a scenario or configuration error.
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .checker import (Exploration, Verdict, check_attack, check_authentication, check_balance,
                      check_gw_lemma5, check_progress, explore)
from .executor import Execution, Policy, is_stable, make_world, run_network, simulate, stabilize
from .scenario import ATTACK, Scenario, ScenarioError, load_scenario
from .wang import VARIANTS, random_gw_computation

MODES = ("simulate", "stabilize", "enumerate", "check-balance", "check-auth", "find-attack",
         "check-lemma5")
LEMMA5_SAMPLES = 1000
LEMMA5_MAX_LEN = 30


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    mode: str = "simulate"
    seed: int = 0
    variant: Optional[str] = None
    max_depth: Optional[int] = None
    trace: Optional[str] = None
    state: Optional[str] = None
    report: Optional[str] = None


@dataclass
class Outcome:
    verdicts: List[Verdict]
    witness: Optional[Execution] = None
    notes: Tuple[str, ...] = ()
    ok: Optional[bool] = None

    @property
    def success(self) -> bool:
        return all(v.holds for v in self.verdicts) if self.ok is None else self.ok


def load(cfg: RunConfig) -> Scenario:
    sc = load_scenario(cfg.scenario)
    if cfg.variant is not None:
        if cfg.variant not in VARIANTS:
            raise ScenarioError(f"unknown variant {cfg.variant!r}")
        sc = sc.with_(variant=cfg.variant)
    if cfg.max_depth is not None:
        if cfg.max_depth < 0:
            raise ScenarioError("max depth must be non-negative")
        sc = sc.with_(depth=cfg.max_depth)
    return sc


def _merge(name: str, results: List[Verdict], unit: str = "executions") -> Verdict:
    """Fold per-execution verdicts into one; the first failure is the witness."""
    for v in results:
        if not v.holds:
            return Verdict(name, False, v.witness, v.nodes, v.detail)
    return Verdict(name, True, detail=f"{len(results)} {unit}")


def _run_simulate(sc: Scenario, cfg: RunConfig) -> Outcome:
    e = simulate(make_world(sc), cfg.seed)
    return Outcome([Verdict("stable", is_stable(e), e), check_balance(e, sc)], e)


def _run_stabilize(sc: Scenario, cfg: RunConfig) -> Outcome:
    before = run_network(make_world(sc), cfg.seed)
    e = stabilize(before, Policy(seed=cfg.seed, budget=sc.budget))
    notes = (f"stabilization steps {len(e.trace) - len(before.trace)}",)
    return Outcome([Verdict("stable", is_stable(e), e), check_progress(e, sc, before)], e, notes)


def _enumerate(sc: Scenario, checks: Tuple[str, ...]) -> Outcome:
    res = Exploration()
    per: Dict[str, List[Verdict]] = {}
    for e in explore(sc, result=res):
        found = []
        if "balance" in checks:
            found.append(check_balance(e, sc))
        if "progress" in checks:
            found.append(check_progress(e, sc))
        if "auth" in checks:
            found += check_authentication(e, sc)
        for v in found:
            per.setdefault(v.property, []).append(v)
    verdicts = [_merge(k, vs) for k, vs in per.items()]
    witness = next((v.witness for v in verdicts if not v.holds), None)
    notes = (res.summary(), "bounded verification: results hold only within the scenario bounds")
    return Outcome(verdicts, witness, notes)


def _run_lemma5(sc: Scenario, cfg: RunConfig) -> Outcome:
    rng = random.Random(cfg.seed)
    per: Dict[str, List[Verdict]] = {}
    params = sc.session_params()
    if not params:
        return Outcome([], notes=("no sessions",))
    for _ in range(LEMMA5_SAMPLES):
        c = random_gw_computation(rng, params, LEMMA5_MAX_LEN)
        for v in check_gw_lemma5(c):
            per.setdefault(v.property, []).append(v)
    return Outcome([_merge(k, vs, "computations") for k, vs in per.items()],
                   notes=(f"{LEMMA5_SAMPLES} random computations of length <= {LEMMA5_MAX_LEN}",))


def _run_attack(sc: Scenario, cfg: RunConfig) -> Outcome:
    v = check_attack(sc)
    expected = sc.expect == ATTACK
    return Outcome([v], v.witness, (f"expect {sc.expect}",), ok=v.holds == expected)


RUNNERS: Dict[str, Callable[[Scenario, RunConfig], Outcome]] = {
    "simulate": _run_simulate,
    "stabilize": _run_stabilize,
    "enumerate": lambda sc, cfg: _enumerate(sc, ("balance", "progress", "auth")),
    "check-balance": lambda sc, cfg: _enumerate(sc, ("balance",)),
    "check-auth": lambda sc, cfg: _enumerate(sc, ("auth",)),
    "find-attack": _run_attack,
    "check-lemma5": _run_lemma5,
}


def _write(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def report_text(cfg: RunConfig, sc: Scenario, out: Outcome) -> str:
    lines = [f"mode {cfg.mode}", f"scenario {cfg.scenario}", f"variant {sc.variant}",
             f"seed {cfg.seed}"]
    lines += list(out.notes)
    lines += [v.line() for v in out.verdicts]
    lines.append(f"witness {cfg.trace if cfg.trace and out.witness is not None else '-'}")
    lines.append(f"result {'ok' if out.success else 'failed'}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.mode not in MODES:
        print(f"error: unknown mode {cfg.mode!r}", file=stderr)
        return 2
    try:
        sc = load(cfg)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    out = RUNNERS[cfg.mode](sc, cfg)
    if out.witness is not None:
        _write(cfg.trace, out.witness.trace_text())
        _write(cfg.state, out.witness.state_text())
    rep = report_text(cfg, sc, out)
    if cfg.report:
        _write(cfg.report, rep)
    else:
        stdout.write(rep)
    return 0 if out.success else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strandmsr",
                                 description="Run, enumerate and check fair-exchange scenarios.")
    ap.add_argument("--mode", choices=MODES, default="simulate")
    ap.add_argument("--scenario", required=True, help="scenario file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--variant", choices=VARIANTS, help="override the scenario's variant")
    ap.add_argument("--max-depth", type=int, help="override the adversary depth bound")
    ap.add_argument("--emit-trace", metavar="PATH", help="write the (witness) trace here")
    ap.add_argument("--emit-state", metavar="PATH", help="write the final state here")
    ap.add_argument("--report", metavar="PATH", help="write the report here instead of stdout")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    return run(RunConfig(a.scenario, a.mode, a.seed, a.variant, a.max_depth,
                         a.emit_trace, a.emit_state, a.report))
