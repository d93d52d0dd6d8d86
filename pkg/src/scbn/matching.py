"""Distributed one-to-many matching of BRBs to demanding stations.

Demanders propose, BRBs dispose.  Each demander ranks every BRB by its
own utility (link rate minus price weighted by ``zeta``) and, while its
demand is unmet and it can still afford something it has not tried,
proposes to its best affordable untried BRB once per round.  Each BRB
keeps the highest-rate station among its current holder and the round's
applicants, displacing the holder when beaten.  A displaced station
re-enters the proposing pool automatically.  Quotas are dynamic: a
demander holds as many BRBs as its demand and budget allow, a BRB holds
exactly one demander.

The procedure terminates because a demander never proposes to the same
BRB twice, and the result is stable in the sense checked by
:func:`find_blocking_pairs`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .propagation import ChannelRealization, brb_rate, gamma_tensor, rate_tensor
from .scenario import BandKind, Scenario

__all__ = [
    "Brb",
    "Matching",
    "InconsistentMatchingError",
    "scenario_brbs",
    "brb_global_index",
    "dbs_utility",
    "brb_utility",
    "run_matching",
    "matching_from_assignment",
    "recompute_totals",
    "find_blocking_pairs",
    "save_matching_csv",
]


class InconsistentMatchingError(ValueError):
    """Raised when a matching's bookkeeping contradicts itself."""


@dataclass(frozen=True)
class Brb:
    """One backhaul resource block offered by one anchor.

    ``index`` counts within the band, so a BRB is identified by the
    triple (owner, band, index).  Bandwidth and price ride along for
    convenience; they are functions of (owner, band) in any one scenario.
    """

    owner: int
    band: BandKind
    index: int
    bandwidth_hz: float
    price: float

    def key(self) -> tuple[int, int, int]:
        return (self.owner, 0 if self.band is BandKind.MMWAVE else 1, self.index)


@dataclass
class Matching:
    """Result of an allocation scheme.

    ``assigned`` maps demander id to its set of BRBs, ``owner_of`` maps
    each assigned BRB back to its demander.  ``rate_bps`` and ``cost``
    carry the algorithm's own running totals; they must agree with a
    recomputation from the channel realization.  ``rounds`` and
    ``proposals`` count the proposal rounds and individual proposals the
    scheme used (zero for one-shot schemes).
    """

    assigned: dict[int, frozenset[Brb]]
    owner_of: dict[Brb, int]
    rate_bps: dict[int, float]
    cost: dict[int, float]
    rounds: int = 0
    proposals: int = 0


def scenario_brbs(s: Scenario) -> tuple[Brb, ...]:
    """All K1 * (N1 + N2) BRBs, sorted by (owner, band, index), mmWave first."""
    out: list[Brb] = []
    for anchor in s.anchors:
        for band in (s.mmw_band, s.sub6_band):
            price = s.prices.price(anchor.id, band.kind)
            for idx in range(band.num_brbs):
                out.append(
                    Brb(
                        owner=anchor.id,
                        band=band.kind,
                        index=idx,
                        bandwidth_hz=band.brb_bandwidth_hz,
                        price=price,
                    )
                )
    return tuple(out)


def brb_global_index(s: Scenario, brb: Brb) -> int:
    """Global BRB axis index (mmWave block first, then sub-6)."""
    band = s.mmw_band if brb.band is BandKind.MMWAVE else s.sub6_band
    if not 0 <= brb.index < band.num_brbs:
        raise InconsistentMatchingError(
            f"BRB index {brb.index} out of range for band {brb.band.value}"
        )
    if brb.band is BandKind.MMWAVE:
        return brb.index
    return s.mmw_band.num_brbs + brb.index


def dbs_utility(brb: Brb, gamma: float, zeta: float) -> float:
    """Demander-side utility of one BRB: rate minus price at exchange rate zeta.

    ``zeta`` converts price units into bit/s, so a BRB is attractive when
    its rate buys more than its price costs.
    """
    return brb_rate(brb.bandwidth_hz, gamma) - zeta * brb.price

def brb_utility(gamma: float, bandwidth_hz: float) -> float:
    """BRB-side utility of serving a station: just the achievable rate."""
    return brb_rate(bandwidth_hz, gamma)


@dataclass
class _ProposalState:
    """Mutable per-demander state inside run_matching."""

    order: np.ndarray          # flat BRB indices in preference order
    applied: np.ndarray        # bool per flat BRB
    scan_from: int = 0         # first position possibly unapplied
    cost: float = 0.0
    rate_bps: float = 0.0
    held: set[int] = field(default_factory=set)


def _flat_brb_arrays(s: Scenario, brbs: tuple[Brb, ...]):
    """Per-BRB lookup arrays aligned with the canonical BRB order."""
    owner_axis = np.empty(len(brbs), dtype=int)
    global_n = np.empty(len(brbs), dtype=int)
    price = np.empty(len(brbs), dtype=float)
    band_code = np.empty(len(brbs), dtype=int)
    index_in_band = np.empty(len(brbs), dtype=int)
    owner_id = np.empty(len(brbs), dtype=int)
    anchor_axis = {a: i for i, a in enumerate(s.anchor_ids)}
    for k, b in enumerate(brbs):
        owner_axis[k] = anchor_axis[b.owner]
        owner_id[k] = b.owner
        global_n[k] = brb_global_index(s, b)
        price[k] = b.price
        band_code[k] = 0 if b.band is BandKind.MMWAVE else 1
        index_in_band[k] = b.index
    return owner_axis, owner_id, global_n, price, band_code, index_in_band


def run_matching(s: Scenario, ch: ChannelRealization, zeta: float) -> Matching:
    """Run the proposal/acceptance rounds to a stable allocation.

    ``zeta`` is the price weight in bit/s per price unit.  Rounds are
    batch-synchronous: all active demanders propose against the state at
    the start of the round, then every BRB picks its winner.  Bookkeeping
    adds a BRB's rate and price on acceptance and subtracts them on
    displacement, so budgets are never exceeded.
    """
    brbs = scenario_brbs(s)
    owner_axis, owner_ids, global_n, price, band_code, index_in_band = _flat_brb_arrays(
        s, brbs
    )
    rates = rate_tensor(s, ch)           # (K1, N, K2) bit/s
    demander_ids = list(ch.demander_ids)
    k2 = len(demander_ids)
    m_total = len(brbs)

    # rate and utility of every flat BRB for every demander
    r_flat = rates[owner_axis, global_n, :]              # (M, K2)
    u_flat = r_flat - zeta * price[:, None]

    states: list[_ProposalState] = []
    for j in range(k2):
        order = np.lexsort(
            (index_in_band, owner_ids, band_code, price, -u_flat[:, j])
        )
        states.append(
            _ProposalState(order=order, applied=np.zeros(m_total, dtype=bool))
        )

    budgets = np.array([s.budgets[d] for d in demander_ids], dtype=float)
    demands = np.array([s.demands_bps[d] for d in demander_ids], dtype=float)
    holder = np.full(m_total, -1, dtype=int)
    rounds = 0
    proposals = 0

    while True:
        round_proposals: dict[int, list[int]] = {}
        for j in range(k2):
            st = states[j]
            if st.rate_bps >= demands[j]:
                continue
            order = st.order
            applied = st.applied
            pos = st.scan_from
            while pos < m_total and applied[order[pos]]:
                pos += 1
            st.scan_from = pos
            choice = -1
            while pos < m_total:
                m = order[pos]
                # the comparison uses the same float sum later stored as
                # the cost, so cost <= budget can never be violated
                if not applied[m] and st.cost + price[m] <= budgets[j]:
                    choice = m
                    break
                pos += 1
            if choice >= 0:
                applied[choice] = True
                round_proposals.setdefault(choice, []).append(j)
                proposals += 1
        if not round_proposals:
            break
        rounds += 1
        for m, applicants in round_proposals.items():
            best = min(applicants, key=lambda j: (-r_flat[m, j], demander_ids[j]))
            incumbent = holder[m]
            if incumbent >= 0 and r_flat[m, best] <= r_flat[m, incumbent]:
                continue  # incumbent keeps the BRB, ties included
            if incumbent >= 0:
                st = states[incumbent]
                st.rate_bps -= float(r_flat[m, incumbent])
                st.cost -= float(price[m])
                st.held.discard(m)
            st = states[best]
            st.rate_bps += float(r_flat[m, best])
            st.cost += float(price[m])
            st.held.add(m)
            holder[m] = best

    assigned: dict[int, frozenset[Brb]] = {}
    owner_of: dict[Brb, int] = {}
    rate_out: dict[int, float] = {}
    cost_out: dict[int, float] = {}
    for j, d in enumerate(demander_ids):
        held = frozenset(brbs[m] for m in states[j].held)
        assigned[d] = held
        for b in held:
            owner_of[b] = d
        rate_out[d] = states[j].rate_bps
        cost_out[d] = states[j].cost
    return Matching(
        assigned=assigned,
        owner_of=owner_of,
        rate_bps=rate_out,
        cost=cost_out,
        rounds=rounds,
        proposals=proposals,
    )


def matching_from_assignment(
    s: Scenario, ch: ChannelRealization, assignment: dict[int, set[Brb]]
) -> Matching:
    """Build a Matching with totals recomputed from the channels."""
    rates = rate_tensor(s, ch)
    assigned: dict[int, frozenset[Brb]] = {d: frozenset() for d in ch.demander_ids}
    owner_of: dict[Brb, int] = {}
    rate_out = {d: 0.0 for d in ch.demander_ids}
    cost_out = {d: 0.0 for d in ch.demander_ids}
    for d, brbs in assignment.items():
        assigned[d] = frozenset(brbs)
        j = ch.demander_axis(d)
        for b in brbs:
            if b in owner_of:
                raise InconsistentMatchingError(
                    f"BRB {b.key()} assigned to both {owner_of[b]} and {d}"
                )
            owner_of[b] = d
            i = ch.anchor_axis(b.owner)
            rate_out[d] += rates[i, brb_global_index(s, b), j]
            cost_out[d] += b.price
    return Matching(
        assigned=assigned,
        owner_of=owner_of,
        rate_bps=rate_out,
        cost=cost_out,
    )


def recompute_totals(
    m: Matching, s: Scenario, ch: ChannelRealization
) -> tuple[dict[int, float], dict[int, float]]:
    """Independent per-demander rate and cost sums from the realization."""
    rates = rate_tensor(s, ch)
    rate_out: dict[int, float] = {}
    cost_out: dict[int, float] = {}
    for d, brbs in m.assigned.items():
        j = ch.demander_axis(d)
        rate_out[d] = float(
            sum(rates[ch.anchor_axis(b.owner), brb_global_index(s, b), j] for b in brbs)
        )
        cost_out[d] = float(sum(b.price for b in brbs))
    return rate_out, cost_out


def _check_consistency(m: Matching, s: Scenario, ch: ChannelRealization) -> None:
    seen: dict[Brb, int] = {}
    for d, brbs in m.assigned.items():
        if d not in ch.demander_ids:
            raise InconsistentMatchingError(f"unknown demander id {d}")
        for b in brbs:
            if b in seen:
                raise InconsistentMatchingError(
                    f"BRB {b.key()} assigned to both {seen[b]} and {d}"
                )
            seen[b] = d
            if b.owner not in ch.anchor_ids:
                raise InconsistentMatchingError(f"BRB {b.key()} has unknown owner")
            brb_global_index(s, b)  # range check
    for b, d in m.owner_of.items():
        if seen.get(b) != d:
            raise InconsistentMatchingError(
                f"owner_of[{b.key()}] = {d} but assigned says {seen.get(b)}"
            )
    for b in seen:
        if b not in m.owner_of:
            raise InconsistentMatchingError(f"BRB {b.key()} missing from owner_of")


def find_blocking_pairs(
    m: Matching, s: Scenario, ch: ChannelRealization, zeta: float
) -> list[tuple[int, Brb]]:
    """All (demander, BRB) pairs that would break the matching.

    A pair blocks when the BRB strictly prefers the demander to its
    current holder (or is unassigned) and the demander strictly gains by
    taking the BRB, either adding it within budget while its demand is
    unmet, or swapping out a held BRB of lower utility while staying
    within budget.
    """
    _check_consistency(m, s, ch)
    brbs = scenario_brbs(s)
    owner_axis, owner_ids, global_n, price, _band, _idx = _flat_brb_arrays(s, brbs)
    rates = rate_tensor(s, ch)
    r_flat = rates[owner_axis, global_n, :]          # (M, K2)
    u_flat = r_flat - zeta * price[:, None]
    demander_ids = list(ch.demander_ids)
    axis_of = {d: j for j, d in enumerate(demander_ids)}
    flat_index = {b: k for k, b in enumerate(brbs)}

    holder_axis = np.full(len(brbs), -1, dtype=int)
    for b, d in m.owner_of.items():
        holder_axis[flat_index[b]] = axis_of[d]
    holder_rate = np.where(
        holder_axis >= 0,
        r_flat[np.arange(len(brbs)), np.clip(holder_axis, 0, None)],
        -np.inf,
    )

    pairs: list[tuple[int, Brb]] = []
    m_total = len(brbs)
    for d in demander_ids:
        j = axis_of[d]
        held = sorted(flat_index[b] for b in m.assigned.get(d, ()))
        cost_j = m.cost.get(d, 0.0)
        rate_j = m.rate_bps.get(d, 0.0)
        budget_j = s.budgets[d]
        demand_j = s.demands_bps[d]
        not_held = np.ones(m_total, dtype=bool)
        not_held[held] = False
        # (i) BRB side: unassigned, or strictly prefers this demander
        brb_wants = (holder_axis < 0) | (r_flat[:, j] > holder_rate)
        # (ii-a) beneficial addition within budget while demand is unmet
        wants_add = (
            (cost_j + price <= budget_j)
            if rate_j < demand_j
            else np.zeros(m_total, dtype=bool)
        )
        # (ii-b) beneficial swap: some held BRB has strictly lower utility
        # and releasing it keeps the new BRB within budget
        if held:
            held_utils = u_flat[held, j]
            sort = np.argsort(held_utils, kind="stable")
            held_utils_sorted = held_utils[sort]
            prefix_max_price = np.maximum.accumulate(price[np.array(held)[sort]])
            cut = np.searchsorted(held_utils_sorted, u_flat[:, j], side="left")
            wants_swap = (cut > 0) & (
                prefix_max_price[np.maximum(cut - 1, 0)] >= cost_j + price - budget_j
            )
        else:
            wants_swap = np.zeros(m_total, dtype=bool)
        blocking = not_held & brb_wants & (wants_add | wants_swap)
        pairs.extend((d, brbs[k]) for k in np.nonzero(blocking)[0])
    pairs.sort(key=lambda pair: (pair[0],) + pair[1].key())
    return pairs


def save_matching_csv(
    m: Matching, s: Scenario, ch: ChannelRealization, path: str
) -> None:
    """Dump rows of k2, k1, band, n, gamma, rate_bps, price, sorted."""
    gamma = gamma_tensor(s, ch)
    rates = rate_tensor(s, ch)
    rows = []
    for d in sorted(m.assigned):
        j = ch.demander_axis(d)
        for b in sorted(m.assigned[d], key=Brb.key):
            i = ch.anchor_axis(b.owner)
            n = brb_global_index(s, b)
            rows.append(
                [
                    d,
                    b.owner,
                    b.band.value,
                    b.index,
                    repr(float(gamma[i, n, j])),
                    repr(float(rates[i, n, j])),
                    repr(float(b.price)),
                ]
            )
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k2", "k1", "band", "n", "gamma", "rate_bps", "price"])
        writer.writerows(rows)
