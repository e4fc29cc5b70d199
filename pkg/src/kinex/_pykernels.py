"""Pure-Python exchange kernels.

This module is the reference semantics for the pairwise-exchange inner loop;
the compiled twin (_ckernels) mirrors it operation for operation. Both consume
the random stream through next_double only, in a fixed per-step order (pair
draws first, then the rule's amount/split draw), and draws are consumed even
when the credit policy blocks the step, so trajectories are bitwise identical
across backends.

Rule codes: 0 fixed amount, 1 random fraction of global mean, 2 random
fraction of pair mean, 3 proportional, 4 uniform saving propensity,
5 per-agent saving propensity, 6 proportional exchange with growth.
Credit codes: 0 no debt, 1 per-agent limit, 2 aggregate cap, 3 unlimited.
"""

from __future__ import annotations

import numpy as np

from .rng import splitmix64

RULE_FIXED = 0
RULE_FRAC_MEAN = 1
RULE_FRAC_PAIR_MEAN = 2
RULE_PROPORTIONAL = 3
RULE_SAVING = 4
RULE_RANDOM_SAVING = 5
RULE_GROWTH = 6

CREDIT_NO_DEBT = 0
CREDIT_LIMIT = 1
CREDIT_BANK = 2
CREDIT_UNLIMITED = 3

SPLIT_RULES = (RULE_SAVING, RULE_RANDOM_SAVING)
AMOUNT_DRAW_RULES = (RULE_FRAC_MEAN, RULE_FRAC_PAIR_MEAN, RULE_SAVING, RULE_RANDOM_SAVING)


def select_pair(u1: float, u2: float, n: int) -> tuple[int, int]:
    """Ordered pair (i, j), i != j, from two uniforms.

    i is uniform on {0..n-1}; j is uniform on the remaining n-1 indices.
    """
    i = int(u1 * n)
    j = int(u2 * (n - 1))
    if j >= i:
        j += 1
    return i, j


def orient_pair(i: int, j: int, n: int, key: int) -> tuple[int, int]:
    """Quenched orientation of the unordered pair {i, j} under a 64-bit key.

    The orientation is a pure function of (key, pair): fixed at setup, never
    redrawn, identical in both backends.
    """
    if i < j:
        lo, hi = i, j
    else:
        lo, hi = j, i
    if splitmix64(key ^ (lo * n + hi)) & 1:
        return hi, lo
    return lo, hi


def step_outcome(m, i, j, u3, rule_id, rp1, rp2, lam, credit_id, cp, debt, mean_money):
    """Decide one exchange between roles i (payer/first) and j.

    Returns (executed, new_i, new_j, debt_after). New balances are final
    (growth factor applied); on a blocked step they echo the current ones.

    The second post-balance is computed as pair_sum - first_post_balance so
    the executed step preserves m_i + m_j to within one ulp of the pair sum.
    """
    mi = m[i]
    mj = m[j]
    s = mi + mj
    if rule_id == RULE_SAVING:
        pool = (1.0 - rp1) * s
        new_i = rp1 * mi + u3 * pool
        new_j = s - new_i
    elif rule_id == RULE_RANDOM_SAVING:
        li = lam[i]
        lj = lam[j]
        pool = (1.0 - li) * mi + (1.0 - lj) * mj
        new_i = li * mi + u3 * pool
        new_j = s - new_i
    else:
        if rule_id == RULE_FIXED:
            amt = rp1
        elif rule_id == RULE_FRAC_MEAN:
            amt = u3 * mean_money
        elif rule_id == RULE_FRAC_PAIR_MEAN:
            amt = u3 * 0.5 * s
        else:  # proportional / growth
            amt = rp1 * mi
        new_i = mi - amt
        new_j = s - new_i

    if credit_id == CREDIT_NO_DEBT:
        if new_i < 0.0 or new_j < 0.0:
            return False, mi, mj, debt
    elif credit_id == CREDIT_LIMIT:
        if new_i < -cp or new_j < -cp:
            return False, mi, mj, debt
    elif credit_id == CREDIT_BANK:
        ddelta = (
            (-new_i if new_i < 0.0 else 0.0)
            - (-mi if mi < 0.0 else 0.0)
            + (-new_j if new_j < 0.0 else 0.0)
            - (-mj if mj < 0.0 else 0.0)
        )
        if debt + ddelta > cp:
            return False, mi, mj, debt
        debt = debt + ddelta

    if rule_id == RULE_GROWTH:
        gf = 1.0 + rp2
        new_i = new_i * gf
        new_j = new_j * gf
    return True, new_i, new_j, debt


def run_pairwise(
    rng,
    m: np.ndarray,
    rule_id: int,
    rp1: float,
    rp2: float,
    lam: np.ndarray,
    credit_id: int,
    cp: float,
    debt: float,
    directed: bool,
    pair_key: int,
    mean_money: float,
    n_steps: int,
) -> tuple[int, int, float]:
    """Run n_steps exchange attempts in place on balances m.

    rng is an RngStream; balances mutate in place. Returns
    (executed_count, blocked_count, aggregate_debt).
    """
    n = m.shape[0]
    draw = rng.generator.random
    needs_u3 = rule_id in AMOUNT_DRAW_RULES
    executed = 0
    blocked = 0
    mm = m  # local alias; ndarray scalar access returns np.float64
    for _ in range(n_steps):
        i, j = select_pair(draw(), draw(), n)
        if directed:
            i, j = orient_pair(i, j, n, pair_key)
        u3 = draw() if needs_u3 else 0.0
        ok, new_i, new_j, debt = step_outcome(
            mm, i, j, u3, rule_id, rp1, rp2, lam, credit_id, cp, debt, mean_money
        )
        if ok:
            mm[i] = new_i
            mm[j] = new_j
            executed += 1
        else:
            blocked += 1
    return executed, blocked, debt
