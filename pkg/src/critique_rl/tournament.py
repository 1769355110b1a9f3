"""Tournament selection with a pairwise judge.

A judge is any object with ``compare(a_text, b_text) -> "A" | "B"``. Every
match shows the two candidates in a seeded random order, so a judge with a
position bias cannot systematically favour one bracket slot. Candidates are
identified by their index in the input list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .judge import parse_critics


class TournamentError(RuntimeError):
    pass


@dataclass(frozen=True)
class Match:
    a: int
    b: int
    winner: int
    swapped: bool  # True when b was shown as response A


@dataclass
class TournamentResult:
    winner: int
    ranking: list
    pointwise_scores: dict
    match_log: list = field(default_factory=list)


class _Referee:
    def __init__(self, candidates, judge, seed):
        self.candidates = list(candidates)
        self.judge = judge
        self.rng = np.random.default_rng(seed)
        self.log = []
        self.wins = {i: 0 for i in range(len(self.candidates))}

    def play(self, a: int, b: int) -> tuple[int, int]:
        """Returns ``(winner, loser)``."""
        swapped = bool(self.rng.random() < 0.5)
        first, second = (b, a) if swapped else (a, b)
        try:
            verdict = self.judge.compare(self.candidates[first], self.candidates[second])
        except Exception as exc:
            raise TournamentError(f"match {len(self.log) + 1} ({a} vs {b}): {exc}") from exc
        if verdict not in ("A", "B"):
            raise TournamentError(f"match {len(self.log) + 1}: judge returned {verdict!r}")
        winner = first if verdict == "A" else second
        loser = second if winner == first else first
        self.wins[winner] += 1
        self.log.append(Match(a, b, winner, swapped))
        return winner, loser

    def round(self, players):
        """Pair players in order; with an odd count the first one sits out."""
        players = list(players)
        advancing, losers = [], []
        if len(players) % 2:
            advancing.append(players.pop(0))
        for j in range(0, len(players), 2):
            w, l = self.play(players[j], players[j + 1])
            advancing.append(w)
            losers.append(l)
        # keep bracket order stable: earlier input positions first
        return sorted(advancing), losers


def bon_select(candidates, judge, seed=0) -> TournamentResult:
    """Single-elimination bracket; the final's winner is the selection."""
    n = len(candidates)
    if n < 1:
        raise ValueError("need at least one candidate")
    ref = _Referee(candidates, judge, seed)
    alive = list(range(n))
    out_round = {}
    r = 0
    while len(alive) > 1:
        r += 1
        alive, losers = ref.round(alive)
        for i in losers:
            out_round[i] = r
    champion = alive[0]
    rest = sorted(out_round, key=lambda i: (-out_round[i], -ref.wins[i], i))
    return TournamentResult(champion, [champion] + rest, dict(ref.wins), ref.log)


def double_elimination(candidates, judge, seed=0) -> TournamentResult:
    """Winners and losers brackets; two losses eliminate.

    Losers of each winners-bracket round join the losers bracket, which then
    plays one round of its own. The grand final pits the two bracket
    champions; if the losers-bracket champion wins, a reset match decides.
    Pointwise score is the number of matches won; ranking follows
    elimination order, later eliminations first.
    """
    n = len(candidates)
    if n < 2:
        raise ValueError("double elimination needs at least two candidates")
    ref = _Referee(candidates, judge, seed)
    winners = list(range(n))
    losers_bracket = []
    eliminated = []  # in elimination order

    while len(winners) > 1 or len(losers_bracket) > 1:
        dropped = []
        if len(winners) > 1:
            winners, dropped = ref.round(winners)
        pool = losers_bracket + sorted(dropped)
        if len(pool) > 1:
            pool, out = ref.round(pool)
            eliminated.append(sorted(out))
        losers_bracket = pool

    champ_w, champ_l = winners[0], losers_bracket[0]
    w, l = ref.play(champ_w, champ_l)
    if w == champ_l:
        w, l = ref.play(champ_w, champ_l)
    eliminated.append([l])

    ranking = [w]
    for group in reversed(eliminated):
        ranking.extend(sorted(group, key=lambda i: (-ref.wins[i], i)))
    return TournamentResult(w, ranking, dict(ref.wins), ref.log)


# --- judges --------------------------------------------------------------------

class OracleJudge:
    """Prefers the candidate with the higher ``quality(text)``; ties go to A."""

    def __init__(self, quality):
        self.quality = quality
        self.calls = 0

    def compare(self, a, b):
        self.calls += 1
        return "A" if self.quality(a) >= self.quality(b) else "B"


class GrmJudge:
    """Pairwise judge backed by the GRM prompt on a ``JudgeClient``."""

    def __init__(self, client, query: str = ""):
        self.client = client
        self.query = query

    def _call(self, a, b):
        return self.client.call("grm", {"conv_his": self.query, "response_A": a, "response_B": b})

    def compare(self, a, b):
        return self._call(a, b).parsed

    def critique(self, a, b) -> str:
        return parse_critics(self._call(a, b).raw)


def feedback_edit(candidates, grm_judge, edit_client, query: str = "", seed=0) -> str:
    """Pick the two strongest candidates, critique them, and have the edit
    model rewrite the pair into one response following the critique."""
    if len(candidates) < 2:
        raise ValueError("feedback edit needs at least two candidates")
    result = bon_select(candidates, grm_judge, seed)
    first, second = result.ranking[0], result.ranking[1]
    critique = grm_judge.critique(candidates[first], candidates[second])
    resp = edit_client.call("edit", {
        "conv_his": query,
        "response_A": candidates[first],
        "response_B": candidates[second],
        "critique": critique,
    })
    return resp.parsed
