"""Successive halving over models, with minimal budget and chunk size."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from shift.errors import BudgetTooSmall, InsufficientBudget, InvalidPool
from shift.readers.mutable import uniform_sizes


def _halve(L: int) -> int:
    return -(-L // 2)


def round_sizes(M: int, q: int = 1) -> list[int]:
    """Surviving-set sizes ``L_0 = M, L_{k+1} = ceil(L_k / 2)`` for every round.

    The last round is the first whose halving reaches ``q`` or fewer models.
    """
    if M < 2 or not 1 <= q < M:
        raise InvalidPool(f"need M >= 2 and 1 <= q < M, got M={M}, q={q}")
    sizes = [M]
    while _halve(sizes[-1]) > q:
        sizes.append(_halve(sizes[-1]))
    return sizes


def pulls_per_round(M: int, B: int, q: int = 1) -> list[int]:
    """``r_k = floor(B / (L_k * n))`` with ``n`` the number of rounds."""
    sizes = round_sizes(M, q)
    n = len(sizes)
    return [B // (L * n) for L in sizes]


def minimal_budget(M: int, q: int = 1) -> int:
    """Least ``B`` for which every round gets at least one pull per model."""
    sizes = round_sizes(M, q)
    n = len(sizes)
    B = max(L * n for L in sizes)
    return B


def minimal_chunk(N: int, M: int, B: int, q: int = 1) -> int:
    """Smallest chunk size letting the final survivors see all ``N`` samples."""
    if N < 1:
        raise InvalidPool("the train reader is empty")
    r = pulls_per_round(M, B, q)
    if min(r) < 1:
        raise BudgetTooSmall(f"budget {B} is below the minimum {minimal_budget(M, q)} for {M} models")
    return -(-N // sum(r))


@dataclass
class SHConfig:
    budget: int | None = None
    chunk_size: int | None = None
    q: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.chunk_size is not None and self.chunk_size < 1:
            raise InvalidPool("chunk size must be >= 1")
        if self.q < 1:
            raise InvalidPool("q must be >= 1")

    def resolve(self, M: int, N: int) -> tuple[int, int]:
        """Concrete ``(B, C)``, defaulting to ``B_min`` and ``C_min``."""
        B = minimal_budget(M, self.q) if self.budget is None else int(self.budget)
        if B < minimal_budget(M, self.q):
            raise InsufficientBudget(f"budget {B} is below the minimum {minimal_budget(M, self.q)}")
        C = minimal_chunk(N, M, B, self.q) if self.chunk_size is None else int(self.chunk_size)
        return B, C


@dataclass
class SHRound:
    k: int
    survivors: list
    pulls: int
    buckets_used: int
    samples: int
    losses: dict
    eliminated: list


@dataclass
class SHState:
    """Trace of one successive-halving run."""

    arms: list
    budget: int
    q: int
    bucket_sizes: list
    rounds: list = field(default_factory=list)
    ranking: list = field(default_factory=list)
    final_losses: dict = field(default_factory=dict)
    early_exit: bool = False

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    @property
    def total_pulls(self) -> int:
        return sum(len(r.survivors) * r.pulls for r in self.rounds)

    @property
    def survivor_samples(self) -> int:
        return self.rounds[-1].samples if self.rounds else 0

    @property
    def winners(self) -> list:
        return self.ranking[: self.q]

    def to_dict(self) -> dict:
        return {
            "arms": list(self.arms),
            "budget": self.budget,
            "q": self.q,
            "bucket_sizes": list(self.bucket_sizes),
            "early_exit": self.early_exit,
            "ranking": list(self.ranking),
            "rounds": [
                {
                    "k": r.k, "survivors": r.survivors, "pulls": r.pulls, "buckets_used": r.buckets_used,
                    "samples": r.samples, "losses": r.losses, "eliminated": r.eliminated,
                }
                for r in self.rounds
            ],
        }


def successive_halving(
    arms: list,
    evaluate: Callable[[list, int], dict],
    bucket_sizes: list[int],
    budget: int,
    q: int = 1,
) -> SHState:
    """Run successive halving.

    Args:
        arms: model ids.
        evaluate: ``(survivors, n_samples) -> {arm: loss}``; called once per
            round, with the proxy evaluated on the first ``n_samples`` train
            rows and the full test set.
        bucket_sizes: sizes of the consecutive train buckets (arm pulls).
        budget: total pull budget ``B``.
        q: number of models to return as winners.

    Returns:
        The trace; ``ranking`` lists survivors first, then models eliminated
        in later rounds before earlier ones, each group by loss then id.
    """
    arms = sorted(arms)
    state = SHState(list(arms), budget, q, list(bucket_sizes))
    if len(arms) <= q:
        n = sum(bucket_sizes)
        losses = evaluate(list(arms), n) if arms else {}
        state.rounds.append(SHRound(0, list(arms), len(bucket_sizes), len(bucket_sizes), n, dict(losses), []))
        state.final_losses = dict(losses)
        state.ranking = sorted(arms, key=lambda a: (losses[a], a))
        return state
    sizes = round_sizes(len(arms), q)
    n_rounds = len(sizes)
    if budget < minimal_budget(len(arms), q):
        raise InsufficientBudget(f"budget {budget} is below the minimum {minimal_budget(len(arms), q)}")
    survivors = list(arms)
    last_loss: dict = {}
    eliminated_in: dict = {}
    used = 0
    for k in range(n_rounds):
        L = len(survivors)
        r_k = budget // (L * n_rounds)
        if used >= len(bucket_sizes):
            state.early_exit = True
            break
        used = min(len(bucket_sizes), used + r_k)
        n_samples = sum(bucket_sizes[:used])
        losses = evaluate(list(survivors), n_samples)
        last_loss.update(losses)
        order = sorted(survivors, key=lambda a: (losses[a], a))
        keep = _halve(L) if k < n_rounds - 1 else q
        keep = max(keep, q)
        dropped = order[keep:]
        for a in dropped:
            eliminated_in[a] = k
        state.rounds.append(SHRound(k, list(survivors), r_k, used, n_samples, dict(losses), list(dropped)))
        survivors = order[:keep]
    if state.early_exit:
        survivors = sorted(survivors, key=lambda a: (last_loss[a], a))
        for a in survivors[q:]:
            eliminated_in[a] = len(state.rounds)
        survivors = survivors[:q]
    state.final_losses = last_loss
    rest = sorted(eliminated_in, key=lambda a: (-eliminated_in[a], last_loss[a], a))
    state.ranking = sorted(survivors, key=lambda a: (last_loss[a], a)) + rest
    return state


def default_buckets(N: int, C: int) -> list[int]:
    return uniform_sizes(N, C)


def n_rounds_expected(M: int) -> int:
    return math.ceil(math.log2(M))
