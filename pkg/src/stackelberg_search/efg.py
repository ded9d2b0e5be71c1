"""Two-player extensive-form games with chance, and their sequence form.

The game tree is a flat list of nodes (chance / player / terminal) with
information sets over player nodes.  Player 0 is the leader (the committing
player), player 1 the follower.  Perfect recall is required and checked.

The sequence form of a player is a *treeplex*: a tree alternating sequences
(ordered lists of the player's own actions) and information sets, rooted at
the empty sequence.  Mixed strategies live on it as realization plans
``r(sigma)`` with ``r(empty) = 1`` and, at every infoset ``I`` with entry
sequence ``sigma``, ``r(sigma) = sum_a r(sigma a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

LEADER = 0
FOLLOWER = 1
CHANCE = -1

PLAYER_NAMES = {LEADER: "leader", FOLLOWER: "follower", CHANCE: "chance"}

# Flow-constraint / probability tolerance.  Solver-facing comparisons use a
# looser 1e-6; see solver.py.
FLOW_TOL = 1e-9
CHANCE_TOL = 1e-12


class GameError(ValueError):
    """Raised for structurally invalid games or mismatched plans."""


@dataclass(frozen=True)
class GameNode:
    """One node of the game tree.

    kind: "chance", "player" or "terminal".
    player: LEADER or FOLLOWER for player nodes (CHANCE for chance nodes).
    infoset: game-level infoset id for player nodes, else None.
    chance_probs: outcome probabilities for chance nodes, else None.
    payoffs: (leader utility, follower utility) for terminals, else None.
    """

    id: int
    kind: str
    parent: Optional[int] = None
    player: int = CHANCE
    infoset: Optional[int] = None
    actions: tuple[str, ...] = ()
    children: tuple[int, ...] = ()
    chance_probs: tuple[float, ...] = ()
    payoffs: tuple[float, float] = (0.0, 0.0)

    @property
    def is_terminal(self) -> bool:
        return self.kind == "terminal"


@dataclass(frozen=True)
class InfoSet:
    """An information set: the acting player cannot tell its members apart."""

    id: int
    player: int
    actions: tuple[str, ...]
    members: tuple[int, ...]


@dataclass
class GameTree:
    """Immutable-after-construction game tree plus cached sequence form."""

    nodes: list[GameNode]
    infosets: list[InfoSet]
    root: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._treeplexes: dict[int, "Treeplex"] = {}
        self._leaf_arrays = None

    # -- basic accessors -------------------------------------------------

    def node(self, node_id: int) -> GameNode:
        return self.nodes[node_id]

    def infoset(self, infoset_id: int) -> InfoSet:
        return self.infosets[infoset_id]

    def terminals(self) -> Iterator[GameNode]:
        return (n for n in self.nodes if n.is_terminal)

    def player_infosets(self, player: int) -> list[InfoSet]:
        return [i for i in self.infosets if i.player == player]

    def chance_reach(self) -> np.ndarray:
        """Chance probability of every node's path (1 where no chance acts)."""
        reach = np.ones(len(self.nodes))
        for node in self.nodes:
            if node.kind == "chance":
                for child, prob in zip(node.children, node.chance_probs):
                    reach[child] = reach[node.id] * prob
            else:
                for child in node.children:
                    reach[child] = reach[node.id]
        return reach

    def treeplex(self, player: int) -> "Treeplex":
        if player not in self._treeplexes:
            self._treeplexes[player] = build_treeplex(self, player)
        return self._treeplexes[player]

    def leaf_arrays(self):
        """(leaf ids, leader seq, follower seq, chance reach, u1, u2) arrays."""
        if self._leaf_arrays is None:
            tp1, tp2 = self.treeplex(LEADER), self.treeplex(FOLLOWER)
            reach = self.chance_reach()
            leaves = [n for n in self.nodes if n.is_terminal]
            ids = np.array([n.id for n in leaves], dtype=np.int64)
            self._leaf_arrays = (
                ids,
                tp1.node_seq[ids],
                tp2.node_seq[ids],
                reach[ids],
                np.array([n.payoffs[0] for n in leaves]),
                np.array([n.payoffs[1] for n in leaves]),
            )
        return self._leaf_arrays


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate_game(game: GameTree) -> ValidationReport:
    """Structural checks: links, chance normalization, infosets, perfect recall.

    Returns a report listing every violation (with node ids) rather than
    raising; downstream operations refuse games whose report is not ok.
    """
    report = ValidationReport()
    n = len(game.nodes)
    for node in game.nodes:
        if node.id < 0 or node.id >= n or game.nodes[node.id] is not node:
            report.add(f"node {node.id}: id does not match position")
            continue
        if node.kind == "terminal":
            if node.actions or node.children:
                report.add(f"node {node.id}: terminal with actions/children")
            continue
        if len(node.actions) != len(node.children) or not node.actions:
            report.add(f"node {node.id}: actions/children mismatch")
        for child in node.children:
            if child < 0 or child >= n:
                report.add(f"node {node.id}: child {child} out of range")
            elif game.nodes[child].parent != node.id:
                report.add(f"node {node.id}: child {child} parent link broken")
        if node.kind == "chance":
            if len(node.chance_probs) != len(node.actions):
                report.add(f"node {node.id}: chance probs/actions mismatch")
            elif abs(sum(node.chance_probs) - 1.0) > CHANCE_TOL:
                report.add(f"node {node.id}: chance normalization "
                           f"(sum = {sum(node.chance_probs)!r})")
            if any(p < 0 for p in node.chance_probs):
                report.add(f"node {node.id}: negative chance probability")
        elif node.kind == "player":
            if node.player not in (LEADER, FOLLOWER):
                report.add(f"node {node.id}: bad player {node.player}")
            if node.infoset is None or not (0 <= node.infoset < len(game.infosets)):
                report.add(f"node {node.id}: missing/bad infoset id")
        else:
            report.add(f"node {node.id}: unknown kind {node.kind!r}")

    # Tree-ness: every non-root node reachable exactly once from its parent.
    seen = [False] * n
    stack = [game.root]
    while stack:
        nid = stack.pop()
        if seen[nid]:
            report.add(f"node {nid}: reached twice (not a tree)")
            break
        seen[nid] = True
        stack.extend(game.nodes[nid].children)
    for node in game.nodes:
        if not seen[node.id]:
            report.add(f"node {node.id}: unreachable from root")

    # Infoset consistency.
    for infoset in game.infosets:
        for member in infoset.members:
            if member >= n:
                report.add(f"infoset {infoset.id}: member {member} out of range")
                continue
            node = game.nodes[member]
            if node.kind != "player" or node.infoset != infoset.id:
                report.add(f"infoset {infoset.id}: node {member} not a member back-ref")
            elif node.player != infoset.player:
                report.add(f"infoset {infoset.id}: node {member} owned by other player")
            elif node.actions != infoset.actions:
                report.add(f"infoset {infoset.id}: node {member} action list differs")

    if report.ok:
        _check_perfect_recall(game, report)
    return report


def _own_history(game: GameTree, node_id: int, player: int) -> tuple:
    """The player's (infoset id, action index) pairs on the path to node_id."""
    history = []
    node = game.nodes[node_id]
    while node.parent is not None:
        parent = game.nodes[node.parent]
        if parent.kind == "player" and parent.player == player:
            history.append((parent.infoset, parent.children.index(node.id)))
        node = parent
    history.reverse()
    return tuple(history)


def _check_perfect_recall(game: GameTree, report: ValidationReport) -> None:
    for infoset in game.infosets:
        histories = {
            member: _own_history(game, member, infoset.player)
            for member in infoset.members
        }
        distinct = set(histories.values())
        if len(distinct) > 1:
            report.add(
                f"infoset {infoset.id}: perfect recall violated, members "
                f"{sorted(infoset.members)} reached by different own-histories"
            )


def require_valid(game: GameTree) -> None:
    report = validate_game(game)
    if not report.ok:
        raise GameError("invalid game: " + "; ".join(report.violations[:5]))


# ---------------------------------------------------------------------------
# Treeplex / sequence form


@dataclass(frozen=True)
class Sequence:
    """One sequence of a player: parent sequence extended by one action.

    id 0 is always the empty sequence (parent_infoset None, action None).
    """

    id: int
    owner: int
    parent_infoset: Optional[int]
    action_index: Optional[int]
    parent_seq: Optional[int]
    label: str = ""


@dataclass
class Treeplex:
    """Sequence-form structure of one player.

    node_seq[h] is the id of the player's sequence *on entering* node h (the
    actions taken at the player's own infosets strictly above h).
    """

    owner: int
    sequences: list[Sequence]
    infoset_ids: list[int]                      # this player's infosets, ordered
    entry_seq: dict[int, int]                   # infoset id -> seq id of seq(I)
    action_seq: dict[tuple[int, int], int]      # (infoset id, action idx) -> seq id
    children_infosets: dict[int, list[int]]     # seq id -> infosets I with seq(I)=sigma
    node_seq: np.ndarray                        # per game node
    infoset_depth: dict[int, int]               # recursion order helper

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)

    def seq_label(self, seq_id: int) -> str:
        return self.sequences[seq_id].label or "()"

    def actions_of(self, infoset_id: int) -> list[int]:
        """Sequence ids extending this infoset's entry sequence."""
        seq = self.entry_seq[infoset_id]
        count = len(self.action_seq)  # unused; kept simple below
        del count
        out = []
        idx = 0
        while (infoset_id, idx) in self.action_seq:
            out.append(self.action_seq[(infoset_id, idx)])
            idx += 1
        assert out, f"infoset {infoset_id} has no actions"
        assert self.sequences[out[0]].parent_seq == seq
        return out

    def infosets_bottom_up(self) -> list[int]:
        """Infoset ids ordered so children (deeper) come before parents."""
        return sorted(self.infoset_ids, key=lambda i: -self.infoset_depth[i])


def build_treeplex(game: GameTree, player: int) -> Treeplex:
    """Enumerate the player's sequences/infoset structure in DFS order."""
    if player not in (LEADER, FOLLOWER):
        raise GameError(f"treeplex is only defined for players, got {player}")
    require_valid(game)

    sequences = [Sequence(0, player, None, None, None, "")]
    entry_seq: dict[int, int] = {}
    action_seq: dict[tuple[int, int], int] = {}
    children_infosets: dict[int, list[int]] = {0: []}
    infoset_ids: list[int] = []
    infoset_depth: dict[int, int] = {}
    node_seq = np.zeros(len(game.nodes), dtype=np.int64)

    # DFS in child order from the root; assign ids on first encounter of each
    # (infoset, action).  Depth = number of own infosets on the path.
    stack: list[tuple[int, int, int]] = [(game.root, 0, 0)]  # node, cur seq, depth
    while stack:
        node_id, seq_id, depth = stack.pop()
        node_seq[node_id] = seq_id
        node = game.nodes[node_id]
        if node.is_terminal:
            continue
        if node.kind == "player" and node.player == player:
            infoset = node.infoset
            if infoset not in entry_seq:
                entry_seq[infoset] = seq_id
                infoset_ids.append(infoset)
                infoset_depth[infoset] = depth
                children_infosets[seq_id].append(infoset)
                for idx, action in enumerate(game.infosets[infoset].actions):
                    new_id = len(sequences)
                    parent_label = sequences[seq_id].label
                    label = (parent_label + "/" if parent_label else "") + action
                    sequences.append(Sequence(new_id, player, infoset, idx, seq_id, label))
                    action_seq[(infoset, idx)] = new_id
                    children_infosets[new_id] = []
            elif entry_seq[infoset] != seq_id:
                # Perfect recall already validated; this is a belt-and-braces check.
                raise GameError(f"infoset {infoset} entered with differing sequences")
            for idx in range(len(node.children) - 1, -1, -1):
                child_seq = action_seq[(infoset, idx)]
                stack.append((node.children[idx], child_seq, depth + 1))
        else:
            for child in reversed(node.children):
                stack.append((child, seq_id, depth))

    return Treeplex(
        owner=player,
        sequences=sequences,
        infoset_ids=infoset_ids,
        entry_seq=entry_seq,
        action_seq=action_seq,
        children_infosets=children_infosets,
        node_seq=node_seq,
        infoset_depth=infoset_depth,
    )


def sequence_of(game: GameTree, node_id: int, player: int) -> int:
    """The player's sequence id on entering the given node."""
    return int(game.treeplex(player).node_seq[node_id])


def payoff_tables(game: GameTree) -> dict[tuple[int, int], np.ndarray]:
    """The sparse g tables: (leader seq, follower seq) -> chance-weighted payoffs.

    g_i(s1, s2) = sum over terminals z with seq pair (s1, s2) of u_i(z) * C(z).
    """
    _, s1, s2, reach, u1, u2 = game.leaf_arrays()
    table: dict[tuple[int, int], np.ndarray] = {}
    for k in range(len(reach)):
        key = (int(s1[k]), int(s2[k]))
        entry = table.get(key)
        if entry is None:
            table[key] = np.array([u1[k] * reach[k], u2[k] * reach[k]])
        else:
            entry[0] += u1[k] * reach[k]
            entry[1] += u2[k] * reach[k]
    return table


# ---------------------------------------------------------------------------
# Strategies


@dataclass
class RealizationPlan:
    """A mixed strategy in sequence form: probs indexed by sequence id."""

    owner: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)

    def check_flow(self, treeplex: Treeplex, tol: float = FLOW_TOL) -> None:
        if self.owner != treeplex.owner:
            raise GameError("plan owner does not match treeplex owner")
        if len(self.probs) != treeplex.n_sequences:
            raise GameError(
                f"plan has {len(self.probs)} sequences, game expects "
                f"{treeplex.n_sequences}: plan belongs to a different game"
            )
        if abs(self.probs[0] - 1.0) > tol:
            raise GameError(f"empty sequence has probability {self.probs[0]!r}")
        if np.any(self.probs < -tol):
            raise GameError("negative sequence probability")
        for infoset in treeplex.infoset_ids:
            entry = self.probs[treeplex.entry_seq[infoset]]
            total = sum(self.probs[s] for s in treeplex.actions_of(infoset))
            if abs(entry - total) > tol:
                raise GameError(
                    f"flow violated at infoset {infoset}: {entry!r} vs {total!r}"
                )

    def is_pure(self, tol: float = FLOW_TOL) -> bool:
        return bool(np.all((np.abs(self.probs) < tol)
                           | (np.abs(self.probs - 1.0) < tol)))


@dataclass
class BehavioralStrategy:
    """Action distributions per infoset of one player."""

    owner: int
    probs: dict[int, np.ndarray]


def uniform_behavioral(game: GameTree, player: int) -> BehavioralStrategy:
    probs = {
        i.id: np.full(len(i.actions), 1.0 / len(i.actions))
        for i in game.player_infosets(player)
    }
    return BehavioralStrategy(player, probs)


def behavioral_to_realization(game: GameTree, bs: BehavioralStrategy) -> RealizationPlan:
    tp = game.treeplex(bs.owner)
    probs = np.zeros(tp.n_sequences)
    probs[0] = 1.0
    # entry_seq ids only grow along the treeplex, so process in id order.
    for infoset in sorted(tp.infoset_ids, key=lambda i: tp.entry_seq[i]):
        entry = probs[tp.entry_seq[infoset]]
        dist = bs.probs[infoset]
        for idx, seq in enumerate(tp.actions_of(infoset)):
            probs[seq] = entry * dist[idx]
    return RealizationPlan(bs.owner, probs)


def realization_to_behavioral(game: GameTree, plan: RealizationPlan) -> BehavioralStrategy:
    """b(a | I) = r(seq(I) a) / r(seq(I)); uniform where r(seq(I)) = 0."""
    tp = game.treeplex(plan.owner)
    plan.check_flow(tp)
    probs = {}
    for infoset in tp.infoset_ids:
        entry = plan.probs[tp.entry_seq[infoset]]
        seqs = tp.actions_of(infoset)
        if entry > FLOW_TOL:
            probs[infoset] = np.array([plan.probs[s] / entry for s in seqs])
        else:
            probs[infoset] = np.full(len(seqs), 1.0 / len(seqs))
    return BehavioralStrategy(plan.owner, probs)


def uniform_plan(game: GameTree, player: int) -> RealizationPlan:
    return behavioral_to_realization(game, uniform_behavioral(game, player))


def expected_payoffs(game: GameTree, r_leader: RealizationPlan,
                     r_follower: RealizationPlan) -> tuple[float, float]:
    """Exact bilinear payoff sum over terminals (order-independent)."""
    if r_leader.owner != LEADER or r_follower.owner != FOLLOWER:
        raise GameError("expected_payoffs wants (leader plan, follower plan)")
    tp1, tp2 = game.treeplex(LEADER), game.treeplex(FOLLOWER)
    r_leader.check_flow(tp1)
    r_follower.check_flow(tp2)
    _, s1, s2, reach, u1, u2 = game.leaf_arrays()
    weight = reach * r_leader.probs[s1] * r_follower.probs[s2]
    return float(weight @ u1), float(weight @ u2)


# ---------------------------------------------------------------------------
# Construction helper


class TreeBuilder:
    """Incremental game-tree construction with named infosets.

    Children must be added after their parent; node ids are assigned in call
    order, so building in DFS order gives DFS ids.  Infosets are keyed by
    arbitrary hashable labels and numbered in first-use order.
    """

    def __init__(self) -> None:
        self._nodes: list[dict] = []
        self._infoset_ids: dict = {}
        self._infoset_actions: dict[int, tuple[str, ...]] = {}
        self._infoset_players: dict[int, int] = {}
        self._members: dict[int, list[int]] = {}

    def _new_node(self, parent: Optional[int], **kw) -> int:
        node_id = len(self._nodes)
        if parent is not None:
            self._nodes[parent]["children"].append(node_id)
        self._nodes.append({"id": node_id, "parent": parent, "children": [], **kw})
        return node_id

    def chance(self, parent: Optional[int], probs: Iterable[float],
               labels: Optional[Iterable[str]] = None) -> int:
        probs = tuple(float(p) for p in probs)
        labels = tuple(labels) if labels is not None else tuple(
            f"o{k}" for k in range(len(probs)))
        return self._new_node(parent, kind="chance", player=CHANCE,
                              actions=labels, chance_probs=probs)

    def player(self, parent: Optional[int], player: int, infoset_key,
               actions: Iterable[str]) -> int:
        actions = tuple(actions)
        if infoset_key not in self._infoset_ids:
            iid = len(self._infoset_ids)
            self._infoset_ids[infoset_key] = iid
            self._infoset_actions[iid] = actions
            self._infoset_players[iid] = player
            self._members[iid] = []
        iid = self._infoset_ids[infoset_key]
        if self._infoset_actions[iid] != actions:
            raise GameError(f"infoset {infoset_key!r}: inconsistent action lists")
        if self._infoset_players[iid] != player:
            raise GameError(f"infoset {infoset_key!r}: inconsistent owner")
        node_id = self._new_node(parent, kind="player", player=player,
                                 infoset=iid, actions=actions)
        self._members[iid].append(node_id)
        return node_id

    def terminal(self, parent: Optional[int], u1: float, u2: float) -> int:
        return self._new_node(parent, kind="terminal",
                              payoffs=(float(u1), float(u2)))

    def infoset_id(self, infoset_key) -> Optional[int]:
        """The id assigned to a key, or None if no node ever used it."""
        return self._infoset_ids.get(infoset_key)

    def build(self, metadata: Optional[dict] = None) -> GameTree:
        nodes = [
            GameNode(
                id=d["id"], kind=d["kind"], parent=d["parent"],
                player=d.get("player", CHANCE), infoset=d.get("infoset"),
                actions=d.get("actions", ()), children=tuple(d["children"]),
                chance_probs=d.get("chance_probs", ()),
                payoffs=d.get("payoffs", (0.0, 0.0)),
            )
            for d in self._nodes
        ]
        infosets = [
            InfoSet(id=iid, player=self._infoset_players[iid],
                    actions=self._infoset_actions[iid],
                    members=tuple(self._members[iid]))
            for iid in sorted(self._infoset_actions)
        ]
        game = GameTree(nodes=nodes, infosets=infosets,
                        metadata=dict(metadata or {}))
        require_valid(game)
        return game
