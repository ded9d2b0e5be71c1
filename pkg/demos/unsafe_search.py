"""Why re-solving subgames without bounds backfires, on two tiny games.

Both games have a follower who moves *before* the subgames are reached and
can simply leave.  The blueprint keeps the follower in because staying pays;
an unconstrained re-solve inside each subgame squeezes the follower so hard
that leaving becomes the better response, and the leader's overall value
collapses.  The bounded re-solve improves the leader while provably keeping
the follower's entry incentives intact.

Run:  python3 demos/unsafe_search.py
"""

from __future__ import annotations

from stackelberg_search.blueprint import fixed_blueprint
from stackelberg_search.harness import evaluate_leader, naive_search, safe_search
from stackelberg_search.games import shared_exit_game, two_subgame_exit_game
from stackelberg_search.search import partition_subgames


def show(title, game):
    print(f"=== {title} ===")
    blueprint = fixed_blueprint(game).plan
    partition = partition_subgames(game, "metadata")
    blueprint_ev = evaluate_leader(game, blueprint)
    print(f"blueprint EV (vs exact best response): {blueprint_ev:.4f}")

    naive = naive_search(game, blueprint, partition)
    naive_ev = evaluate_leader(game, naive)
    print(f"naive re-solve EV:                     {naive_ev:.4f}"
          f"   <- follower anticipates and dodges")

    report = safe_search(game, blueprint, partition, alpha=0.5, beta=1.0)
    safe_ev = evaluate_leader(game, report.plan)
    print(f"bounded re-solve EV:                   {safe_ev:.4f}"
          f"   >= blueprint, by construction")
    print()


def main():
    show("two subgames, one exit each", two_subgame_exit_game())
    show("two subgames behind a shared exit", shared_exit_game())
    print("The bounded search may only use slack the blueprint's own best\n"
          "response leaves behind, so the follower never gains by changing\n"
          "its pre-subgame play; the naive version hands that slack away.")


if __name__ == "__main__":
    main()
