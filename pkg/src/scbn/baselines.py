"""Reference allocation schemes the matching game is compared against.

Best effort is a single uncoordinated pass: every demander asks for the
blocks it would want in a vacuum, each block goes to the strongest
requester, and nobody gets a second try.  Losing a contested block or
running out of money mid-purchase is simply absorbed.  Random allocation
assigns each BRB to a uniformly drawn station that still wants and can
afford it.
"""

from __future__ import annotations

import numpy as np

from .matching import Brb, Matching, _flat_brb_arrays, scenario_brbs
from .propagation import ChannelRealization, rate_tensor
from .scenario import Scenario

__all__ = ["best_effort_allocate", "random_allocate"]


def _finalize(
    s: Scenario,
    ch: ChannelRealization,
    brbs: tuple[Brb, ...],
    holder: np.ndarray,
    rate: np.ndarray,
    cost: np.ndarray,
) -> Matching:
    demander_ids = list(ch.demander_ids)
    assigned: dict[int, frozenset[Brb]] = {}
    owner_of: dict[Brb, int] = {}
    for j, d in enumerate(demander_ids):
        held = frozenset(brbs[k] for k in np.nonzero(holder == j)[0])
        assigned[d] = held
        for b in held:
            owner_of[b] = d
    return Matching(
        assigned=assigned,
        owner_of=owner_of,
        rate_bps={d: float(rate[j]) for j, d in enumerate(demander_ids)},
        cost={d: float(cost[j]) for j, d in enumerate(demander_ids)},
    )


def best_effort_allocate(s: Scenario, ch: ChannelRealization) -> Matching:
    """Allocate BRBs by raw link rate in one shot, with no retries.

    Every demander requests, in descending rate order (ties in canonical
    block order), just enough blocks to cover its demand, ignoring prices
    and the other demanders.  Each requested block is then granted to the
    requester with the highest rate on it (ties to the lower id).
    Winners buy their grants in the order they asked for them and stop at
    the first one they cannot pay for.  Blocks lost to a stronger rival
    or dropped for lack of money are never re-requested, so an unlucky
    demander can finish both poor and underserved.
    """
    brbs = scenario_brbs(s)
    owner_axis, _, global_n, price, _, _ = _flat_brb_arrays(s, brbs)
    r_flat = rate_tensor(s, ch)[owner_axis, global_n, :]  # (M, K2)
    demander_ids = list(ch.demander_ids)
    k2 = len(demander_ids)
    m_total = len(brbs)

    requests: list[np.ndarray] = []
    for j, d in enumerate(demander_ids):
        need = s.demands_bps[d]
        order = np.argsort(-r_flat[:, j], kind="stable")
        useful = order[r_flat[order, j] > 0.0]
        if need <= 0.0 or useful.size == 0:
            requests.append(useful[:0])
            continue
        covered = np.cumsum(r_flat[useful, j])
        cut = int(np.searchsorted(covered, need)) + 1
        requests.append(useful[:cut])

    best = np.zeros(m_total)
    winner = np.full(m_total, -1, dtype=int)
    for j in range(k2):
        req = requests[j]
        won = req[r_flat[req, j] > best[req]]
        winner[won] = j
        best[won] = r_flat[won, j]

    holder = np.full(m_total, -1, dtype=int)
    rate = np.zeros(k2)
    cost = np.zeros(k2)
    for j, d in enumerate(demander_ids):
        budget = s.budgets[d]
        for m in requests[j]:
            if winner[m] != j:
                continue
            if cost[j] + price[m] > budget:
                break
            holder[m] = j
            rate[j] += r_flat[m, j]
            cost[j] += price[m]
    return _finalize(s, ch, brbs, holder, rate, cost)


def random_allocate(
    s: Scenario, ch: ChannelRealization, rng: np.random.Generator
) -> Matching:
    """Assign each BRB to a uniformly random eligible demander.

    BRBs are visited in a random order; a demander is eligible while its
    demand is unmet and the BRB fits its remaining budget.  BRBs with no
    eligible taker stay unassigned.  Deterministic for a given ``rng``.
    """
    brbs = scenario_brbs(s)
    owner_axis, _, global_n, price, _, _ = _flat_brb_arrays(s, brbs)
    rates = rate_tensor(s, ch)
    r_flat = rates[owner_axis, global_n, :]
    demander_ids = list(ch.demander_ids)
    k2 = len(demander_ids)
    m_total = len(brbs)

    budgets = np.array([s.budgets[d] for d in demander_ids], dtype=float)
    demands = np.array([s.demands_bps[d] for d in demander_ids], dtype=float)
    holder = np.full(m_total, -1, dtype=int)
    rate = np.zeros(k2)
    cost = np.zeros(k2)
    for m in rng.permutation(m_total):
        eligible = np.nonzero((rate < demands) & (cost + price[m] <= budgets))[0]
        if eligible.size == 0:
            continue
        j = int(eligible[rng.integers(eligible.size)])
        holder[m] = j
        rate[j] += r_flat[m, j]
        cost[j] += price[m]
    return _finalize(s, ch, brbs, holder, rate, cost)
