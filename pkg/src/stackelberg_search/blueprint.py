"""Offline leader blueprints.

Four sources:
  * zero_sum_blueprint — the leader's side of a sequence-form Nash LP on a
    zero-sum surrogate of the game (the surrogate may replace the payoffs,
    e.g. tie-splitting bids or removing a rake).
  * stage_sse_blueprint — for two-stage games: commit via the multiple-LP
    Stackelberg solution of the first-stage matrix alone, then play uniformly
    in every second-stage infoset.
  * uniform_blueprint — uniform behavior everywhere (baseline/fallback).
  * fixed_blueprint — the pure plan a fixture bundles in its metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from stackelberg_search.efg import (
    FOLLOWER,
    LEADER,
    BehavioralStrategy,
    GameError,
    GameTree,
    RealizationPlan,
    behavioral_to_realization,
    uniform_plan,
)
from stackelberg_search.solver import (
    OPTIMAL,
    LinearProgram,
    SolverError,
    solve_lp,
)

ZERO_SUM_TOL = 1e-9


@dataclass
class Blueprint:
    plan: RealizationPlan
    provenance: str  # ZeroSumNE | StageSSE | Uniform | Fixed
    source: dict = field(default_factory=dict)


def _chance_weighted_leader_payoffs(game: GameTree,
                                    surrogate_u1: np.ndarray | None,
                                    ) -> dict[tuple[int, int], float]:
    """g(s1, s2) tables for the zero-sum LP, from real or surrogate payoffs."""
    ids, s1, s2, reach, u1, u2 = game.leaf_arrays()
    if surrogate_u1 is None:
        if np.max(np.abs(u1 + u2)) > ZERO_SUM_TOL:
            raise GameError(
                "game is not zero-sum; pass surrogate leader payoffs")
        values = u1
    else:
        values = np.asarray(surrogate_u1, dtype=float)[ids]
    table: dict[tuple[int, int], float] = {}
    for k in range(len(ids)):
        key = (int(s1[k]), int(s2[k]))
        table[key] = table.get(key, 0.0) + float(values[k] * reach[k])
    return table


def _leader_flow_constraints(lp: LinearProgram, game: GameTree,
                             r_vars: list[int]) -> None:
    tp1 = game.treeplex(LEADER)
    lp.add_constraint({r_vars[0]: 1.0}, "==", 1.0, name="r1-root")
    for infoset in tp1.infoset_ids:
        coeffs = {r_vars[tp1.entry_seq[infoset]]: 1.0}
        for seq in tp1.actions_of(infoset):
            coeffs[r_vars[seq]] = coeffs.get(r_vars[seq], 0.0) - 1.0
        lp.add_constraint(coeffs, "==", 0.0, name=f"r1-flow-{infoset}")


def zero_sum_blueprint(game: GameTree,
                       surrogate_u1: np.ndarray | None = None) -> Blueprint:
    """Sequence-form maximin leader strategy of a zero-sum (surrogate) game.

    Maximizes the dual value of the follower's flow system:
        max v_root
        s.t. leader flow constraints on r_1,
             v_root + sum of root-infoset values <= g(r_1, empty),
             (child infoset values) - v_I <= g(r_1, sigma)  for sigma = (I, a).
    """
    tp1 = game.treeplex(LEADER)
    tp2 = game.treeplex(FOLLOWER)
    table = _chance_weighted_leader_payoffs(game, surrogate_u1)

    lp = LinearProgram()
    r_vars = [lp.add_var(f"r1[{tp1.seq_label(s)}]", 0.0, 1.0)
              for s in range(tp1.n_sequences)]
    v_root = lp.add_var("v[root]", -np.inf, np.inf, objective=1.0)
    v_inf = {i: lp.add_var(f"v[I{i}]", -np.inf, np.inf)
             for i in tp2.infoset_ids}
    _leader_flow_constraints(lp, game, r_vars)

    terms_by_s2: dict[int, list[tuple[int, float]]] = {}
    for (s1, s2), g in table.items():
        terms_by_s2.setdefault(s2, []).append((s1, g))
    for s2 in range(tp2.n_sequences):
        coeffs: dict[int, float] = {}
        if s2 == 0:
            coeffs[v_root] = 1.0
        else:
            coeffs[v_inf[tp2.sequences[s2].parent_infoset]] = -1.0
        for child in tp2.children_infosets.get(s2, ()):
            coeffs[v_inf[child]] = coeffs.get(v_inf[child], 0.0) + 1.0
        for s1, g in terms_by_s2.get(s2, ()):
            coeffs[r_vars[s1]] = coeffs.get(r_vars[s1], 0.0) - g
        lp.add_constraint(coeffs, "<=", 0.0, name=f"dual-{tp2.seq_label(s2)}")

    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        raise SolverError(f"zero-sum LP ended with status {sol.status}")
    plan = RealizationPlan(LEADER, np.clip(
        sol.assignment[: tp1.n_sequences], 0.0, 1.0))
    plan.check_flow(tp1, tol=1e-6)
    _renormalize_flow(plan, game)
    return Blueprint(plan, "ZeroSumNE", {
        "game": game.metadata.get("name", "?"),
        "surrogate_value": sol.objective,
    })


def _renormalize_flow(plan: RealizationPlan, game: GameTree) -> None:
    """Scrub LP round-off so flow holds to full precision top-down."""
    tp = game.treeplex(plan.owner)
    plan.probs[0] = 1.0
    for infoset in sorted(tp.infoset_ids, key=lambda i: tp.entry_seq[i]):
        entry = plan.probs[tp.entry_seq[infoset]]
        seqs = tp.actions_of(infoset)
        total = sum(plan.probs[s] for s in seqs)
        if total <= 0.0:
            share = entry / len(seqs)
            for s in seqs:
                plan.probs[s] = share
        else:
            scale = entry / total
            for s in seqs:
                plan.probs[s] *= scale
    plan.check_flow(tp)


def stage_sse_blueprint(game: GameTree) -> Blueprint:
    """Commit to the first-stage matrix SSE; play uniformly afterwards."""
    if game.metadata.get("name") != "two-stage":
        raise GameError("stage blueprint requires a two-stage game")
    a1 = np.array(game.metadata["stage1_leader"])
    a2 = np.array(game.metadata["stage1_follower"])
    x, value, chosen = sse_of_matrix_game(a1, a2)

    root = game.node(game.root)
    probs: dict[int, np.ndarray] = {root.infoset: x}
    for infoset in game.player_infosets(LEADER):
        if infoset.id != root.infoset:
            probs[infoset.id] = np.full(len(infoset.actions),
                                        1.0 / len(infoset.actions))
    plan = behavioral_to_realization(
        game, BehavioralStrategy(LEADER, probs))
    return Blueprint(plan, "StageSSE", {
        "game": game.metadata.get("name", "?"),
        "stage1_value": value,
        "stage1_follower_action": chosen,
    })


def sse_of_matrix_game(u1: np.ndarray, u2: np.ndarray,
                       ) -> tuple[np.ndarray, float, int]:
    """Multiple-LP Stackelberg solution of a matrix game.

    One LP per follower action b: maximize the leader's payoff over mixed
    strategies for which b is a best response.  Returns the best (x, value)
    and the supporting follower action (lowest index on ties).
    """
    n, m = u1.shape
    best: tuple[np.ndarray, float, int] | None = None
    for b in range(m):
        lp = LinearProgram()
        xs = [lp.add_var(f"x{a}", 0.0, 1.0, objective=float(u1[a, b]))
              for a in range(n)]
        lp.add_constraint({v: 1.0 for v in xs}, "==", 1.0)
        for other in range(m):
            if other != b:
                lp.add_constraint(
                    {xs[a]: float(u2[a, b] - u2[a, other]) for a in range(n)},
                    ">=", 0.0)
        sol = solve_lp(lp)
        if sol.status != OPTIMAL:
            continue
        if best is None or sol.objective > best[1] + 1e-9:
            x = np.clip(sol.assignment[:n], 0.0, 1.0)
            best = (x / x.sum(), sol.objective, b)
    if best is None:
        raise SolverError("no follower action is ever a best response")
    return best


def uniform_blueprint(game: GameTree) -> Blueprint:
    return Blueprint(uniform_plan(game, LEADER), "Uniform",
                     {"game": game.metadata.get("name", "?")})


def fixed_blueprint(game: GameTree) -> Blueprint:
    """The pure leader plan named by the game's metadata."""
    actions = game.metadata.get("blueprint_actions")
    if actions is None:
        raise GameError("game metadata bundles no blueprint")
    probs: dict[int, np.ndarray] = {}
    for infoset in game.player_infosets(LEADER):
        dist = np.zeros(len(infoset.actions))
        choice = actions.get(str(infoset.id))
        if choice is None:
            dist[:] = 1.0 / len(infoset.actions)
        else:
            dist[int(choice)] = 1.0
        probs[infoset.id] = dist
    plan = behavioral_to_realization(game, BehavioralStrategy(LEADER, probs))
    return Blueprint(plan, "Fixed", {"game": game.metadata.get("name", "?")})


def make_blueprint(game: GameTree, method: str) -> Blueprint:
    """Dispatch used by the CLI and the experiment harness."""
    if method == "zerosum":
        name = game.metadata.get("name")
        if name == "goofspiel":
            from stackelberg_search.games import goofspiel_surrogate_payoffs
            return zero_sum_blueprint(game, goofspiel_surrogate_payoffs(game))
        if name == "leduc":
            from stackelberg_search.games import leduc_surrogate_payoffs
            return zero_sum_blueprint(game, leduc_surrogate_payoffs(game))
        return zero_sum_blueprint(game)
    if method == "stage-sse":
        return stage_sse_blueprint(game)
    if method == "uniform":
        return uniform_blueprint(game)
    if method == "fixed":
        return fixed_blueprint(game)
    raise GameError(f"unknown blueprint method {method!r}")
