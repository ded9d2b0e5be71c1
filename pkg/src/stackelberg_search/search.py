"""Safe subgame re-solving: partitions, bounds, and the Stackelberg MILPs.

A subgame is a union of subtrees that play can never leave, closed under both
players' information sets.  Re-solving a subgame in isolation is unsafe: the
follower anticipates the leader's refinement and may change behavior *before*
the subgame.  Safety is restored by bounding the follower's value at every
head information set of each subgame — lower bounds where the follower's
best response to the blueprint actually goes (the trunk), upper bounds
everywhere else — and refining the leader's plan subject to those bounds.

Values here are chance-weighted throughout and, inside a subgame, weighted by
the leader's blueprint reach ("the follower plays to reach the subgame"):

    ctilde(z) = chance(z) * r1_bp(prefix of the leader's sequence to z taken
                                  outside the subgame)

The mass/objective scale additionally multiplies the follower's blueprint
best-response reach:

    cj(z) = ctilde(z) * r2_bp(outside prefix of the follower's sequence)

ctilde drives the follower-value recursion and the bounds (so bounds bind
even where the blueprint response never goes); cj drives the leader's
objective and the entry-mass bookkeeping.  Mixing the two up makes the
upper-bound constraints vacuous and the refinement unsafe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from stackelberg_search.efg import (
    FOLLOWER,
    LEADER,
    GameError,
    GameTree,
    RealizationPlan,
    uniform_plan,
)
from stackelberg_search.response import (
    NEG_INF,
    BrvTable,
    Trunk,
    compute_brvs,
    enumerate_pure_plans,
)
from stackelberg_search.solver import (
    OPTIMAL,
    INCUMBENT_TIME_LIMIT,
    LinearProgram,
    MilpProblem,
    MilpSolution,
    SolverError,
    solve_lp,
    solve_milp,
)

LOWER = "lower"
UPPER = "upper"


# ---------------------------------------------------------------------------
# Partitions


@dataclass(frozen=True)
class Subgame:
    index: int
    initial: tuple[int, ...]
    nodes: frozenset[int]
    terminals: tuple[int, ...]
    infosets: dict[int, tuple[int, ...]]  # player -> infoset ids inside
    heads: dict[int, tuple[int, ...]]     # player -> head infoset ids


@dataclass(frozen=True)
class SubgamePartition:
    subgames: tuple[Subgame, ...]

    def __len__(self) -> int:
        return len(self.subgames)

    def __iter__(self):
        return iter(self.subgames)


def _descendants(game: GameTree, roots: list[int]) -> frozenset[int]:
    seen = set()
    stack = list(roots)
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise GameError(f"node {nid}: duplicated across initial states")
        seen.add(nid)
        stack.extend(game.node(nid).children)
    return frozenset(seen)


def _build_subgame(game: GameTree, index: int, initial: list[int]) -> Subgame:
    nodes = _descendants(game, initial)
    terminals = tuple(sorted(n for n in nodes if game.node(n).is_terminal))
    member_infosets: dict[int, set[int]] = {LEADER: set(), FOLLOWER: set()}
    for nid in nodes:
        node = game.node(nid)
        if node.kind == "player":
            member_infosets[node.player].add(node.infoset)
    infosets: dict[int, tuple[int, ...]] = {}
    heads: dict[int, tuple[int, ...]] = {}
    for player in (LEADER, FOLLOWER):
        tp = game.treeplex(player)
        inside_set = member_infosets[player]
        for infoset_id in inside_set:
            outside = [m for m in game.infosets[infoset_id].members
                       if m not in nodes]
            if outside:
                raise GameError(
                    f"subgame {index}: infoset {infoset_id} straddles the "
                    f"boundary (members {sorted(outside)} outside)")
        head_list = []
        for infoset_id in inside_set:
            entry = tp.entry_seq[infoset_id]
            parent_infoset = tp.sequences[entry].parent_infoset
            if parent_infoset is None or parent_infoset not in inside_set:
                head_list.append(infoset_id)
        infosets[player] = tuple(sorted(inside_set))
        heads[player] = tuple(sorted(head_list))
    return Subgame(index=index, initial=tuple(sorted(initial)), nodes=nodes,
                   terminals=terminals, infosets=infosets, heads=heads)


def check_partition(game: GameTree, partition: SubgamePartition) -> None:
    """Disjointness across subgames (closure/containment hold by build)."""
    seen: dict[int, int] = {}
    for sub in partition:
        for nid in sub.nodes:
            if nid in seen:
                raise GameError(
                    f"node {nid} belongs to subgames {seen[nid]} and {sub.index}")
            seen[nid] = sub.index


def partition_subgames(game: GameTree, scheme: str, *,
                       m: Optional[int] = None,
                       initial_nodes: Optional[list[list[int]]] = None,
                       ) -> SubgamePartition:
    """Build the partition named by the scheme.

    Schemes: "whole-game", "metadata" (fixture-bundled roots), "explicit"
    (initial_nodes given), "two-stage", "goofspiel" (needs m = rounds left),
    "leduc" (round-two public states).
    """
    name = game.metadata.get("name")
    if scheme == "whole-game":
        groups = [[game.root]]
    elif scheme == "explicit":
        if not initial_nodes:
            raise GameError("explicit scheme needs initial_nodes")
        groups = initial_nodes
    elif scheme == "metadata":
        groups = game.metadata.get("subgames")
        if not groups:
            raise GameError("game metadata bundles no subgames")
    elif scheme == "two-stage":
        if name != "two-stage":
            raise GameError("two-stage scheme needs a two-stage game")
        groups = [[child]
                  for node in game.nodes if node.kind == "chance"
                  for child in node.children]
    elif scheme == "goofspiel":
        groups = _goofspiel_groups(game, m)
    elif scheme == "leduc":
        groups = _leduc_groups(game)
    else:
        raise GameError(f"unknown partition scheme {scheme!r}")
    subgames = tuple(_build_subgame(game, i, list(group))
                     for i, group in enumerate(groups))
    partition = SubgamePartition(subgames)
    check_partition(game, partition)
    return partition


def _goofspiel_groups(game: GameTree, m: Optional[int]) -> list[list[int]]:
    if game.metadata.get("name") != "goofspiel":
        raise GameError("goofspiel scheme needs a goofspiel game")
    if m is None:
        raise GameError("goofspiel scheme needs m (rounds remaining)")
    n = game.metadata["params"]["n"]
    perms = [tuple(p) for p in game.metadata["perms"]]
    if not 1 <= m <= n:
        raise GameError("m must lie in 1..n")
    if m == n:
        return [[game.root]]
    done = n - m
    groups: dict[tuple, list[int]] = {}
    root = game.node(game.root)

    def walk(nid: int, perm: tuple, rounds: int, bids: tuple,
             hand1: tuple, hand2: tuple) -> None:
        if rounds == done:
            key = (perm[:done], bids)
            groups.setdefault(key, []).append(nid)
            return
        lead = game.node(nid)
        for i1, child1 in enumerate(lead.children):
            foll = game.node(child1)
            for i2, child2 in enumerate(foll.children):
                c1, c2 = hand1[i1], hand2[i2]
                walk(child2, perm, rounds + 1, bids + ((c1, c2),),
                     tuple(c for c in hand1 if c != c1),
                     tuple(c for c in hand2 if c != c2))

    hand = tuple(range(1, n + 1))
    for perm, child in zip(perms, root.children):
        walk(child, perm, 0, (), hand, hand)
    return [groups[key] for key in sorted(groups)]


def _leduc_groups(game: GameTree) -> list[list[int]]:
    if game.metadata.get("name") != "leduc":
        raise GameError("leduc scheme needs a leduc game")
    groups: dict[tuple, list[int]] = {}

    def line_of(nid: int) -> str:
        # Concatenate round-one betting actions on the path to the node.
        moves = []
        node = game.node(nid)
        while node.parent is not None:
            parent = game.node(node.parent)
            if parent.kind == "player":
                moves.append(parent.actions[parent.children.index(node.id)])
            node = parent
        return "".join(reversed(moves))

    for node in game.nodes:
        if node.kind != "chance" or node.parent is None:
            continue
        if game.node(node.parent).kind != "player":
            continue  # dealing chance, not the board
        line = line_of(node.id)
        for label, child in zip(node.actions, node.children):
            board = int(label[1:])
            groups.setdefault((line, board), []).append(child)
    return [groups[key] for key in sorted(groups)]


# ---------------------------------------------------------------------------
# Blueprint-derived quantities per subgame


@dataclass
class SubgameQuantities:
    """Reach-derived scalars of one subgame under a blueprint + response."""

    index: int
    omega: dict[int, float]          # initial state -> leader*chance reach
    mass: float                      # blueprint probability of entering
    eta: Optional[float]             # 1 / sum(omega), None when unreachable
    pre1: dict[int, int]             # member node -> outside leader seq
    pre2: dict[int, int]             # member node -> outside follower seq
    ctilde: dict[int, float]         # terminal -> chance * leader-bp reach
    cj: dict[int, float]             # terminal -> ctilde * follower-bp reach


def compute_subgame_quantities(game: GameTree, partition: SubgamePartition,
                               r1_bp: RealizationPlan,
                               r2_bp: RealizationPlan,
                               ) -> list[SubgameQuantities]:
    tp1 = game.treeplex(LEADER)
    tp2 = game.treeplex(FOLLOWER)
    reach = game.chance_reach()
    out = []
    for sub in partition:
        pre1: dict[int, int] = {}
        pre2: dict[int, int] = {}
        omega: dict[int, float] = {}
        for h in sub.initial:
            p1 = int(tp1.node_seq[h])
            p2 = int(tp2.node_seq[h])
            omega[h] = float(reach[h] * r1_bp.probs[p1])
            stack = [h]
            while stack:
                nid = stack.pop()
                pre1[nid] = p1
                pre2[nid] = p2
                stack.extend(game.node(nid).children)
        ctilde: dict[int, float] = {}
        cj: dict[int, float] = {}
        mass = 0.0
        for z in sub.terminals:
            ct = float(reach[z] * r1_bp.probs[pre1[z]])
            ctilde[z] = ct
            cj[z] = ct * float(r2_bp.probs[pre2[z]])
            mass += float(reach[z]
                          * r1_bp.probs[tp1.node_seq[z]]
                          * r2_bp.probs[tp2.node_seq[z]])
        total_omega = sum(omega.values())
        eta = (1.0 / total_omega) if total_omega > 0.0 else None
        out.append(SubgameQuantities(sub.index, omega, mass, eta,
                                     pre1, pre2, ctilde, cj))
    return out


# ---------------------------------------------------------------------------
# Bound generation


@dataclass
class BoundsMap:
    """Per head follower infoset: a lower (trunk) or upper bound on its value.

    Values are chance-and-blueprint weighted (the ctilde scale), exactly like
    best-response values.  -inf lower bounds are legal and vacuous.
    """

    bounds: dict[int, tuple[str, float]]
    alpha: float
    beta: float


@dataclass
class BoundsTrace:
    """The lb/ub argument at every visited sequence and information set."""

    seq: dict[int, tuple[str, float]] = field(default_factory=dict)
    infoset: dict[int, tuple[str, float]] = field(default_factory=dict)


def compute_bounds(game: GameTree, brvs: BrvTable, trunk: Trunk,
                   partition: SubgamePartition, alpha: float = 0.5,
                   beta: float = 1.0,
                   ) -> tuple[dict[int, BoundsMap], BoundsTrace]:
    """Head bounds via slack-splitting over the follower treeplex.

    Walking down from the root, the follower's best-response values leave
    slack between what the response achieves and what a bound must permit;
    the slack is split evenly among parallel information sets (scaled by beta
    along the trunk) and the walk freezes a bound when it reaches a subgame
    head.  alpha interpolates the branch-point bound between the second-best
    (0) and best (1) action values.
    """
    if not 0.0 <= alpha <= 1.0:
        raise GameError("alpha must lie in [0, 1]")
    if beta < 1.0:
        raise GameError("beta must be >= 1")
    tp2 = game.treeplex(FOLLOWER)
    head_owner: dict[int, int] = {}
    for sub in partition:
        for infoset in sub.heads[FOLLOWER]:
            head_owner[infoset] = sub.index
    result = {sub.index: BoundsMap({}, alpha, beta) for sub in partition}
    trace = BoundsTrace()

    def branch_bound(infoset: int, lb: float) -> float:
        v_star = brvs.brv_inf[infoset]
        v_second = brvs.second_value[infoset]
        if alpha == 1.0:
            term = v_star
        elif v_second == NEG_INF:
            term = NEG_INF
        else:
            term = alpha * v_star + (1.0 - alpha) * v_second
        return max(term, lb)

    def exp_seq_trunk(seq: int, lb: float) -> None:
        trace.seq[seq] = (LOWER, lb)
        children = tp2.children_infosets.get(seq, ())
        if not children:
            return
        slack = beta * (brvs.brv_seq[seq] - lb) / len(children)
        for infoset in children:
            exp_inf_trunk(infoset, brvs.brv_inf[infoset] - slack)

    def exp_inf_trunk(infoset: int, lb: float) -> None:
        trace.infoset[infoset] = (LOWER, lb)
        if infoset in head_owner:
            result[head_owner[infoset]].bounds[infoset] = (LOWER, lb)
            return
        bound = branch_bound(infoset, lb)
        chosen = brvs.best_action[infoset]
        for seq in tp2.actions_of(infoset):
            if seq == chosen:
                exp_seq_trunk(seq, bound)
            else:
                exp_seq_non_trunk(seq, bound)

    def exp_seq_non_trunk(seq: int, ub: float) -> None:
        trace.seq[seq] = (UPPER, ub)
        children = tp2.children_infosets.get(seq, ())
        if not children:
            return
        slack = (ub - brvs.brv_seq[seq]) / len(children)
        for infoset in children:
            exp_inf_non_trunk(infoset, brvs.brv_inf[infoset] + slack)

    def exp_inf_non_trunk(infoset: int, ub: float) -> None:
        trace.infoset[infoset] = (UPPER, ub)
        if infoset in head_owner:
            result[head_owner[infoset]].bounds[infoset] = (UPPER, ub)
            return
        for seq in tp2.actions_of(infoset):
            exp_seq_non_trunk(seq, ub)

    exp_seq_trunk(0, NEG_INF)

    # Sanity: directions must agree with trunk membership, and the blueprint
    # response must satisfy every bound (lower <= BRV at trunk heads, upper
    # >= BRV elsewhere).
    for sub in partition:
        for infoset, (direction, value) in result[sub.index].bounds.items():
            in_trunk = infoset in trunk
            if (direction == LOWER) != in_trunk:
                raise GameError(
                    f"bound direction at infoset {infoset} contradicts trunk")
            brv = brvs.brv_inf[infoset]
            if direction == LOWER and value > brv + 1e-9:
                raise GameError(f"infeasible lower bound at {infoset}")
            if direction == UPPER and value < brv - 1e-9:
                raise GameError(f"infeasible upper bound at {infoset}")
    return result, trace


# ---------------------------------------------------------------------------
# MILP assembly

# Leaves with no in-subgame decision variable for a player cap p(z) by the
# constant 1 instead; this sentinel marks that case.
_CONST_ONE = -1


def _local_seq(tp, node_id: int, inside: set[int]) -> int:
    """Deepest in-subgame sequence on the path to node_id."""
    seq = int(tp.node_seq[node_id])
    while True:
        record = tp.sequences[seq]
        if record.parent_infoset is None:
            return _CONST_ONE
        if record.parent_infoset in inside:
            return seq
        seq = tp.entry_seq[record.parent_infoset]


@dataclass
class SubgameModel:
    """A constrained-refinement MILP plus the maps to read its solution."""

    problem: MilpProblem
    subgame: Subgame
    r1_vars: dict[int, int]          # leader global seq id -> LP var
    r2_vars: dict[int, int]          # follower global seq id -> LP var
    entry2_vars: dict[int, int]      # follower entry seq id -> LP var
    v_vars: dict[int, int]           # follower infoset -> LP var
    p_vars: dict[int, int]           # terminal node -> LP var
    warm: np.ndarray
    big_m: float
    leader_heads_entry: dict[int, int]  # leader infoset -> entry seq id


def _local_leader_entry(tp, sub: Subgame, infoset: int,
                        inside: set[int]) -> Optional[int]:
    """The in-subgame leader sequence feeding this infoset (None for heads)."""
    entry = tp.entry_seq[infoset]
    parent = tp.sequences[entry].parent_infoset
    if parent is None or parent not in inside:
        return None
    return entry


def build_constrained_milp(game: GameTree, sub: Subgame,
                           quantities: SubgameQuantities,
                           bounds: BoundsMap,
                           r1_bp: RealizationPlan,
                           brvs: BrvTable,
                           big_m: Optional[float] = None) -> SubgameModel:
    """The bounded refinement program over one subgame's local sequences.

    Maximizes the leader's full-game payoff contribution of the subgame
    subject to: sequence-form flow for both players (heads normalized to 1),
    exact follower best-response structure via slack variables and big-M,
    entry-mass conservation, and the head-value bounds.
    """
    tp1 = game.treeplex(LEADER)
    tp2 = game.treeplex(FOLLOWER)
    lp = LinearProgram()

    inside1 = set(sub.infosets[LEADER])
    inside2 = set(sub.infosets[FOLLOWER])

    # Leader local action sequences.
    r1_vars: dict[int, int] = {}
    for infoset in sub.infosets[LEADER]:
        for seq in tp1.actions_of(infoset):
            r1_vars[seq] = lp.add_var(f"r1[{tp1.seq_label(seq)}]", 0.0, 1.0)
    leader_heads_entry = {i: tp1.entry_seq[i] for i in sub.heads[LEADER]}
    for infoset in sub.infosets[LEADER]:
        entry = _local_leader_entry(tp1, sub, infoset, inside1)
        coeffs = {r1_vars[seq]: -1.0 for seq in tp1.actions_of(infoset)}
        if entry is None:
            lp.add_constraint(coeffs, "==", -1.0, name=f"r1-head-{infoset}")
        else:
            coeffs[r1_vars[entry]] = coeffs.get(r1_vars[entry], 0.0) + 1.0
            lp.add_constraint(coeffs, "==", 0.0, name=f"r1-flow-{infoset}")

    # Follower local action sequences plus explicit entry variables.
    r2_vars: dict[int, int] = {}
    entry2_vars: dict[int, int] = {}
    for infoset in sub.infosets[FOLLOWER]:
        for seq in tp2.actions_of(infoset):
            r2_vars[seq] = lp.add_var(f"r2[{tp2.seq_label(seq)}]", 0.0, 1.0)
    for infoset in sub.heads[FOLLOWER]:
        entry = tp2.entry_seq[infoset]
        if entry not in entry2_vars:
            entry2_vars[entry] = lp.add_var(
                f"r2-entry[{tp2.seq_label(entry)}]", 1.0, 1.0)
    for infoset in sub.infosets[FOLLOWER]:
        entry = tp2.entry_seq[infoset]
        coeffs = {r2_vars[seq]: -1.0 for seq in tp2.actions_of(infoset)}
        var = entry2_vars.get(entry, r2_vars.get(entry))
        if var is None:
            raise GameError(f"follower infoset {infoset} has no entry inside "
                            f"subgame {sub.index}")
        coeffs[var] = coeffs.get(var, 0.0) + 1.0
        lp.add_constraint(coeffs, "==", 0.0, name=f"r2-flow-{infoset}")

    # Follower value/slack system on the ctilde scale.
    v_vars = {infoset: lp.add_var(f"v[I{infoset}]", -np.inf, np.inf)
              for infoset in sub.infosets[FOLLOWER]}

    leaf_seq1 = {z: _local_seq(tp1, z, inside1) for z in sub.terminals}
    leaf_seq2 = {z: _local_seq(tp2, z, inside2) for z in sub.terminals}

    # Group the g2 terms of each local follower sequence.
    g2_terms: dict[int, list[tuple[int, float]]] = {}
    for z in sub.terminals:
        s2 = leaf_seq2[z]
        if s2 == _CONST_ONE:
            # The follower never acts inside before this leaf; its value
            # belongs to the entry of whatever head group the leaf precedes.
            # Such leaves exist only when the subgame has no follower infoset
            # on that path, so no value row consumes them.
            continue
        weight = quantities.ctilde[z] * game.node(z).payoffs[1]
        if weight != 0.0:
            g2_terms.setdefault(s2, []).append((z, weight))

    # Per-infoset payoff mass: every value variable of the system satisfies
    # |v_I| <= mass(I) at integer-feasible points, so each slack constraint
    # can carry its own (much tighter) big-M instead of one global constant.
    mass_of: dict[int, float] = {}
    for infoset in sorted(sub.infosets[FOLLOWER],
                          key=lambda i: -tp2.entry_seq[i]):
        total = 0.0
        for seq in tp2.actions_of(infoset):
            total += sum(abs(w) for _, w in g2_terms.get(seq, ()))
            total += sum(mass_of.get(child, 0.0)
                         for child in tp2.children_infosets.get(seq, ()))
        mass_of[infoset] = total

    s_vars: dict[int, int] = {}
    max_m = 0.0
    for infoset in sub.infosets[FOLLOWER]:
        seq_m = big_m if big_m is not None \
            else 2.0 * mass_of[infoset] + 1.0
        max_m = max(max_m, seq_m)
        for seq in tp2.actions_of(infoset):
            s_vars[seq] = lp.add_var(f"s[{tp2.seq_label(seq)}]", 0.0, np.inf)
            # v_I - s_seq - sum(child v) - sum(g2 * r1) = const
            coeffs = {v_vars[infoset]: 1.0, s_vars[seq]: -1.0}
            const = 0.0
            for child in tp2.children_infosets.get(seq, ()):
                if child in v_vars:
                    coeffs[v_vars[child]] = coeffs.get(v_vars[child], 0.0) - 1.0
            for z, weight in g2_terms.get(seq, ()):
                s1 = leaf_seq1[z]
                if s1 == _CONST_ONE:
                    const += weight
                else:
                    var = r1_vars[s1]
                    coeffs[var] = coeffs.get(var, 0.0) - weight
            lp.add_constraint(coeffs, "==", const,
                              name=f"value-{tp2.seq_label(seq)}")
            # Slack is released only when the sequence is not chosen.
            lp.add_constraint({s_vars[seq]: 1.0, r2_vars[seq]: seq_m},
                              "<=", seq_m, name=f"slack-{tp2.seq_label(seq)}")

    # Head-value bounds.
    for infoset, (direction, value) in bounds.bounds.items():
        if infoset not in v_vars:
            raise GameError(f"bound for infoset {infoset} outside subgame")
        if direction == LOWER:
            if value == NEG_INF:
                continue  # vacuous
            lp.add_constraint({v_vars[infoset]: 1.0}, ">=", value,
                              name=f"bound-lo-I{infoset}")
        else:
            lp.add_constraint({v_vars[infoset]: 1.0}, "<=", value,
                              name=f"bound-up-I{infoset}")

    # Leaf probabilities, objective, and entry-mass conservation.
    p_vars: dict[int, int] = {}
    mass_coeffs: dict[int, float] = {}
    for z in sub.terminals:
        p = lp.add_var(f"p[z{z}]", 0.0, 1.0,
                       objective=quantities.cj[z] * game.node(z).payoffs[0])
        p_vars[z] = p
        s1 = leaf_seq1[z]
        if s1 != _CONST_ONE:
            lp.add_constraint({p: 1.0, r1_vars[s1]: -1.0}, "<=", 0.0,
                              name=f"p-cap1-z{z}")
        s2 = leaf_seq2[z]
        if s2 != _CONST_ONE:
            var = r2_vars.get(s2, entry2_vars.get(s2))
            lp.add_constraint({p: 1.0, var: -1.0}, "<=", 0.0,
                              name=f"p-cap2-z{z}")
        if quantities.cj[z] != 0.0:
            mass_coeffs[p] = quantities.cj[z]
    if mass_coeffs:
        lp.add_constraint(mass_coeffs, "==", quantities.mass, name="mass")

    binaries = tuple(sorted(list(r2_vars.values()) + list(entry2_vars.values())))
    problem = MilpProblem(lp, binaries)

    # Warm start: the blueprint response's binary pattern (entries at 1,
    # best-response action below every inside infoset, zeros elsewhere).
    warm = np.zeros(lp.n_vars)
    for var in entry2_vars.values():
        warm[var] = 1.0
    reached = {tp2.entry_seq[i] for i in sub.heads[FOLLOWER]}
    for infoset in sorted(sub.infosets[FOLLOWER],
                          key=lambda i: tp2.entry_seq[i]):
        if tp2.entry_seq[infoset] in reached:
            chosen = brvs.best_action[infoset]
            warm[r2_vars[chosen]] = 1.0
            reached.add(chosen)
    return SubgameModel(problem=problem, subgame=sub, r1_vars=r1_vars,
                        r2_vars=r2_vars, entry2_vars=entry2_vars,
                        v_vars=v_vars, p_vars=p_vars, warm=warm, big_m=max_m,
                        leader_heads_entry=leader_heads_entry)


def whole_game_subgame(game: GameTree) -> tuple[Subgame, SubgameQuantities]:
    """The trivial decomposition: one subgame containing everything."""
    sub = _build_subgame(game, 0, [game.root])
    reach = game.chance_reach()
    terminals = sub.terminals
    ctilde = {z: float(reach[z]) for z in terminals}
    quantities = SubgameQuantities(
        index=0, omega={game.root: 1.0}, mass=1.0, eta=1.0,
        pre1={n: 0 for n in sub.nodes}, pre2={n: 0 for n in sub.nodes},
        ctilde=ctilde, cj=dict(ctilde))
    return sub, quantities


def build_full_milp(game: GameTree,
                    r1_warm: Optional[RealizationPlan] = None) -> SubgameModel:
    """The unconstrained commitment program over the whole game.

    The optional plan only seeds the warm start (its best response's binary
    pattern); the uniform plan is used when none is given.
    """
    sub, quantities = whole_game_subgame(game)
    bounds = BoundsMap({}, 0.5, 1.0)
    r1 = r1_warm if r1_warm is not None else uniform_plan(game, LEADER)
    brvs = compute_brvs(game, r1)
    return build_constrained_milp(game, sub, quantities, bounds, r1, brvs)


def extract_leader_plan(game: GameTree, model: SubgameModel,
                        solution: MilpSolution) -> RealizationPlan:
    """Full-game leader plan from a whole-game model's solution."""
    tp1 = game.treeplex(LEADER)
    probs = np.zeros(tp1.n_sequences)
    probs[0] = 1.0
    for seq, var in model.r1_vars.items():
        probs[seq] = float(np.clip(solution.assignment[var], 0.0, 1.0))
    plan = RealizationPlan(LEADER, probs)
    _scrub_flow(plan, tp1)
    return plan


def _scrub_flow(plan: RealizationPlan, tp) -> None:
    plan.probs[0] = 1.0
    for infoset in sorted(tp.infoset_ids, key=lambda i: tp.entry_seq[i]):
        entry = plan.probs[tp.entry_seq[infoset]]
        seqs = tp.actions_of(infoset)
        total = sum(plan.probs[s] for s in seqs)
        if total <= 0.0:
            for s in seqs:
                plan.probs[s] = entry / len(seqs)
        else:
            for s in seqs:
                plan.probs[s] *= entry / total
    plan.check_flow(tp)


# ---------------------------------------------------------------------------
# Subgame solving


@dataclass
class SubgameSolution:
    index: int
    status: str
    objective: float                  # leader full-game contribution
    local_plan: dict[int, float]      # leader seq id -> head-normalized prob
    used_fallback: bool
    wall_time: float
    bound_gap: float


def blueprint_local_plan(game: GameTree, sub: Subgame,
                         r1_bp: RealizationPlan) -> dict[int, float]:
    """The blueprint itself, renormalized to 1 at each leader head."""
    tp1 = game.treeplex(LEADER)
    local: dict[int, float] = {}
    inside = set(sub.infosets[LEADER])

    def entry_value(infoset: int) -> float:
        entry = tp1.entry_seq[infoset]
        parent = tp1.sequences[entry].parent_infoset
        if parent is None or parent not in inside:
            return 1.0
        return local[entry]

    for infoset in sorted(sub.infosets[LEADER],
                          key=lambda i: tp1.entry_seq[i]):
        entry = entry_value(infoset)
        seqs = tp1.actions_of(infoset)
        bp_entry = r1_bp.probs[tp1.entry_seq[infoset]]
        if bp_entry > 1e-12:
            for seq in seqs:
                local[seq] = entry * float(r1_bp.probs[seq]) / float(bp_entry)
        else:
            for seq in seqs:
                local[seq] = entry / len(seqs)
    return local


def solve_subgame(game: GameTree, model: SubgameModel,
                  r1_bp: RealizationPlan,
                  time_limit: Optional[float] = None) -> SubgameSolution:
    """Solve one subgame model; fall back to the blueprint on failure.

    Failure means the solver produced no incumbent (timeout before the warm
    start, or an infeasible warm start coupled with an unsolved model); the
    blueprint restricted to the subgame is then returned, so search can
    never do worse than not searching.  An incumbent that violates a head
    bound beyond tolerance is a solver defect and raises.
    """
    sub = model.subgame

    def fallback(status: str, wall: float) -> SubgameSolution:
        return SubgameSolution(
            index=sub.index, status=status, objective=float("nan"),
            local_plan=blueprint_local_plan(game, sub, r1_bp),
            used_fallback=True, wall_time=wall, bound_gap=float("inf"))

    try:
        solution = solve_milp(model.problem, warm=model.warm,
                              time_limit=time_limit)
    except SolverError:
        # Degenerate numerics in the warm pattern; retry cold.
        try:
            solution = solve_milp(model.problem, time_limit=time_limit)
        except SolverError:
            return fallback("WarmStartFailed", 0.0)
    if solution.status not in (OPTIMAL, INCUMBENT_TIME_LIMIT) or \
            solution.assignment is None:
        return fallback(solution.status, solution.wall_time)
    for constraint_check in _bound_violations(model, solution):
        raise SolverError(
            f"subgame {sub.index}: incumbent violates bound "
            f"{constraint_check!r} (solver bug)")
    local = {}
    for seq, var in model.r1_vars.items():
        local[seq] = float(np.clip(solution.assignment[var], 0.0, 1.0))
    _normalize_local(game, sub, local)
    recomputed = _incumbent_payoff(game, model, solution, local)
    if abs(recomputed - solution.objective) > 1e-6:
        raise SolverError(
            f"subgame {sub.index}: incumbent objective "
            f"{solution.objective!r} disagrees with the payoff "
            f"{recomputed!r} of the strategy it encodes (solver bug)")
    return SubgameSolution(index=sub.index, status=solution.status,
                           objective=solution.objective, local_plan=local,
                           used_fallback=False, wall_time=solution.wall_time,
                           bound_gap=solution.bound_gap)


def _incumbent_payoff(game: GameTree, model: SubgameModel,
                      solution: MilpSolution,
                      local: dict[int, float]) -> float:
    """The leader payoff encoded by an incumbent, recomputed from scratch.

    Walks the subgame terminals and multiplies each one's objective weight by
    the scrubbed local leader realization and the incumbent's binary follower
    realization, bypassing the solver's own objective bookkeeping.
    """
    sub = model.subgame
    tp1 = game.treeplex(LEADER)
    tp2 = game.treeplex(FOLLOWER)
    inside1 = set(sub.infosets[LEADER])
    inside2 = set(sub.infosets[FOLLOWER])
    objective = model.problem.lp.objective
    total = 0.0
    for z, p_var in model.p_vars.items():
        weight = objective[p_var]
        if weight == 0.0:
            continue
        s1 = _local_seq(tp1, z, inside1)
        f1 = 1.0 if s1 == _CONST_ONE else local[s1]
        s2 = _local_seq(tp2, z, inside2)
        if s2 == _CONST_ONE:
            f2 = 1.0
        else:
            var = model.r2_vars.get(s2, model.entry2_vars.get(s2))
            f2 = 1.0 if solution.assignment[var] > 0.5 else 0.0
        total += weight * f1 * f2
    return total


def _bound_violations(model: SubgameModel, solution: MilpSolution):
    for idx, val, rel, rhs, name in model.problem.lp.rows:
        if not name.startswith("bound-"):
            continue
        lhs = sum(v * solution.assignment[i] for i, v in zip(idx, val))
        if rel == ">=" and lhs < rhs - 1e-6:
            yield name
        if rel == "<=" and lhs > rhs + 1e-6:
            yield name


def _normalize_local(game: GameTree, sub: Subgame,
                     local: dict[int, float]) -> None:
    """Scrub solver round-off so local flow is exact, heads at 1."""
    tp1 = game.treeplex(LEADER)
    inside = set(sub.infosets[LEADER])
    for infoset in sorted(sub.infosets[LEADER],
                          key=lambda i: tp1.entry_seq[i]):
        entry = tp1.entry_seq[infoset]
        parent = tp1.sequences[entry].parent_infoset
        entry_val = 1.0 if (parent is None or parent not in inside) \
            else local[entry]
        seqs = tp1.actions_of(infoset)
        total = sum(local[s] for s in seqs)
        if total <= 0.0:
            for s in seqs:
                local[s] = entry_val / len(seqs)
        else:
            for s in seqs:
                local[s] *= entry_val / total


# ---------------------------------------------------------------------------
# Brute-force commitment oracle (small games)


def sse_oracle(game: GameTree) -> tuple[float, RealizationPlan]:
    """Exact leader commitment value by enumerating follower pure plans.

    For each reduced pure follower plan, a linear program maximizes the
    leader's payoff over plans for which that response is (weakly) a best
    response; the best LP value over all plans is the commitment optimum.
    Exponential in the follower's decision structure — keep it to games with
    a handful of follower strategies (it is the test oracle, not the solver).
    """
    tp1 = game.treeplex(LEADER)
    tp2 = game.treeplex(FOLLOWER)
    _, s1, s2, reach, u1, u2 = game.leaf_arrays()
    best: tuple[float, Optional[np.ndarray]] = (-np.inf, None)

    for response in enumerate_pure_plans(game, FOLLOWER):
        lp = LinearProgram()
        r_vars = [lp.add_var(f"r1[{s}]", 0.0, 1.0)
                  for s in range(tp1.n_sequences)]
        v_vars = {i: lp.add_var(f"v[{i}]", -np.inf, np.inf)
                  for i in tp2.infoset_ids}
        lp.add_constraint({r_vars[0]: 1.0}, "==", 1.0)
        for infoset in tp1.infoset_ids:
            coeffs = {r_vars[tp1.entry_seq[infoset]]: 1.0}
            for seq in tp1.actions_of(infoset):
                coeffs[r_vars[seq]] = coeffs.get(r_vars[seq], 0.0) - 1.0
            lp.add_constraint(coeffs, "==", 0.0)

        # Upper-bound recursion: v_I >= value of each action sequence.
        terms: dict[int, dict[int, float]] = {}
        for k in range(len(reach)):
            terms.setdefault(int(s2[k]), {})
            var = r_vars[int(s1[k])]
            terms[int(s2[k])][var] = terms[int(s2[k])].get(var, 0.0) \
                + float(reach[k] * u2[k])
        for infoset in tp2.infoset_ids:
            for seq in tp2.actions_of(infoset):
                coeffs = {v_vars[infoset]: 1.0}
                for child in tp2.children_infosets.get(seq, ()):
                    coeffs[v_vars[child]] = coeffs.get(v_vars[child], 0.0) - 1.0
                for var, g in terms.get(seq, {}).items():
                    coeffs[var] = coeffs.get(var, 0.0) - g
                lp.add_constraint(coeffs, ">=", 0.0)

        # The enumerated response must achieve the root best-response value.
        achieved: dict[int, float] = {}
        for k in range(len(reach)):
            if response.probs[int(s2[k])] > 0.5:
                var = r_vars[int(s1[k])]
                achieved[var] = achieved.get(var, 0.0) + float(reach[k] * u2[k])
        coeffs = dict(achieved)
        for infoset in tp2.children_infosets.get(0, ()):
            coeffs[v_vars[infoset]] = coeffs.get(v_vars[infoset], 0.0) - 1.0
        # Leaves the follower cannot avoid (empty sequence) appear on both
        # sides; subtracting them here cancels their achieved-value terms.
        for var, g in terms.get(0, {}).items():
            coeffs[var] = coeffs.get(var, 0.0) - g
        lp.add_constraint(coeffs, ">=", 0.0)

        for k in range(len(reach)):
            if response.probs[int(s2[k])] > 0.5:
                var = r_vars[int(s1[k])]
                lp.set_objective(var, lp.objective[var]
                                 + float(reach[k] * u1[k]))

        sol = solve_lp(lp)
        if sol.status != OPTIMAL:
            continue
        if sol.objective > best[0] + 1e-12:
            best = (sol.objective, sol.assignment[: tp1.n_sequences])
    if best[1] is None:
        raise SolverError("oracle found no inducible follower response")
    plan = RealizationPlan(LEADER, np.clip(best[1], 0.0, 1.0))
    _scrub_flow(plan, tp1)
    return best[0], plan
