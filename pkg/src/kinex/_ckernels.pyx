# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exchange kernels.

Mirror of _pykernels.run_pairwise, operation for operation: same draw order,
same arithmetic expression order, same blocking semantics. Both backends pull
uniforms from the stream's next_double, so trajectories are bitwise identical.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

ctypedef unsigned long long u64

DEF RULE_FIXED = 0
DEF RULE_FRAC_MEAN = 1
DEF RULE_FRAC_PAIR_MEAN = 2
DEF RULE_PROPORTIONAL = 3
DEF RULE_SAVING = 4
DEF RULE_RANDOM_SAVING = 5
DEF RULE_GROWTH = 6

DEF CREDIT_NO_DEBT = 0
DEF CREDIT_LIMIT = 1
DEF CREDIT_BANK = 2
DEF CREDIT_UNLIMITED = 3


cdef inline u64 splitmix64(u64 z) noexcept nogil:
    z = z + <u64>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


def run_pairwise(object rng, double[::1] m, int rule_id, double rp1, double rp2,
                 double[::1] lam, int credit_id, double cp, double debt,
                 bint directed, u64 pair_key, double mean_money, long long n_steps):
    """Run n_steps exchange attempts in place on balances m.

    rng is an RngStream; balances mutate in place. Returns
    (executed_count, blocked_count, aggregate_debt).
    """
    cdef bitgen_t *bg
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t nm1 = n - 1
    cdef bint needs_u3 = (rule_id == RULE_FRAC_MEAN or rule_id == RULE_FRAC_PAIR_MEAN
                          or rule_id == RULE_SAVING or rule_id == RULE_RANDOM_SAVING)
    cdef long long executed = 0, blocked = 0, k
    cdef Py_ssize_t i, j, lo, hi
    cdef double u1, u2, u3, mi, mj, s, pool, amt, new_i, new_j, li, lj, ddelta, gf
    cdef bint ok

    with nogil:
        for k in range(n_steps):
            u1 = bg.next_double(bg.state)
            i = <Py_ssize_t>(u1 * n)
            u2 = bg.next_double(bg.state)
            j = <Py_ssize_t>(u2 * nm1)
            if j >= i:
                j += 1
            if directed:
                if i < j:
                    lo = i; hi = j
                else:
                    lo = j; hi = i
                if splitmix64(pair_key ^ (<u64>lo * <u64>n + <u64>hi)) & 1:
                    i = hi; j = lo
                else:
                    i = lo; j = hi
            if needs_u3:
                u3 = bg.next_double(bg.state)
            else:
                u3 = 0.0

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
                else:
                    amt = rp1 * mi
                new_i = mi - amt
                new_j = s - new_i

            ok = True
            if credit_id == CREDIT_NO_DEBT:
                if new_i < 0.0 or new_j < 0.0:
                    ok = False
            elif credit_id == CREDIT_LIMIT:
                if new_i < -cp or new_j < -cp:
                    ok = False
            elif credit_id == CREDIT_BANK:
                ddelta = ((-new_i if new_i < 0.0 else 0.0)
                          - (-mi if mi < 0.0 else 0.0)
                          + (-new_j if new_j < 0.0 else 0.0)
                          - (-mj if mj < 0.0 else 0.0))
                if debt + ddelta > cp:
                    ok = False
                else:
                    debt = debt + ddelta

            if ok:
                if rule_id == RULE_GROWTH:
                    gf = 1.0 + rp2
                    new_i = new_i * gf
                    new_j = new_j * gf
                m[i] = new_i
                m[j] = new_j
                executed += 1
            else:
                blocked += 1

    return executed, blocked, debt
