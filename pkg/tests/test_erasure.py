import math
import random
from fractions import Fraction
from itertools import combinations

import pytest

from qpcodes.construct import Code, CodeSpec, Lineage, extended_hamming, panchenko, seed, shorten
from qpcodes.erasure import (
    ApproxParams,
    ErasureReport,
    binomial_spectrum_estimate,
    delta_entropy_bound,
    delta_lower,
    delta_tilde,
    delta_tilde_2,
    erasure_report,
    is_exact_regime,
    psi,
    psi_tilde,
    s_rho_exact,
    s_rho_sampled,
    table1,
    trailing_shortening_provider,
)
from qpcodes.errors import BudgetError, ConsistencyError, PreconditionError
from qpcodes.gf2 import BitMatrix
from qpcodes.spectrum import oracle_spectrum

pan5 = panchenko(5)
eh4 = extended_hamming(4)


def brute_s_rho(h: BitMatrix, rho: int) -> int:
    return sum(1 for sub in combinations(range(h.cols), rho) if h.columns_independent(sub))


def bare_code(h: BitMatrix) -> Code:
    return Code(CodeSpec(h.cols, h.nrows, None, Lineage()), h)


def with_padding_rows(code: Code, extra: int) -> Code:
    # zero rows leave every column value, hence every rank question, unchanged;
    # they only push the matrix off the packed 8-row fast path
    h = BitMatrix(code.H.rows + (0,) * extra, code.H.cols)
    return bare_code(h)


def test_psi_known_values():
    eh7 = oracle_spectrum(extended_hamming(7))
    assert psi(64, 4, 4, eh7) == 624960
    assert psi(64, 4, 5, eh7) == 6999552
    assert psi(64, 4, 6, eh7) == 55371456
    p7 = oracle_spectrum(panchenko(7))
    assert psi(40, 4, 4, p7) == 90200
    assert psi(40, 4, 5, p7) == 611072
    assert psi(8, 4, 4, oracle_spectrum(eh4)) == 56


def test_psi_below_distance_is_total():
    s = oracle_spectrum(eh4)
    assert psi(8, 4, 3, s) == math.comb(8, 3)
    assert psi(8, 4, 0, s) == 1


def test_psi_validation():
    s = oracle_spectrum(eh4)
    with pytest.raises(PreconditionError):
        psi(8, 4, 9, s)
    with pytest.raises(PreconditionError):
        psi(9, 4, 4, s)
    with pytest.raises(PreconditionError):
        psi(8, 0, 4, s)


def test_exact_regime_predicate():
    assert is_exact_regime(4, 5)
    assert not is_exact_regime(4, 6)
    assert is_exact_regime(3, 4)
    assert not is_exact_regime(3, 5)


def test_exact_count_matches_brute_force_on_family_codes():
    for code in (eh4, pan5, seed("example_9_5")):
        n = code.spec.n
        for rho in range(0, min(n, 7) + 1):
            expect = brute_s_rho(code.H, rho) if rho else 1
            assert s_rho_exact(code, rho) == expect


def test_exact_count_equals_psi_in_exact_regime():
    for code in (eh4, extended_hamming(5), pan5, panchenko(6), seed("example_9_5")):
        s = oracle_spectrum(code)
        for rho in range(4, 6):
            if rho > code.spec.n:
                continue
            assert s_rho_exact(code, rho) == psi(code.spec.n, 4, rho, s)


def test_exact_count_known_midsize_values():
    assert s_rho_exact(extended_hamming(7), 4) == 624960
    assert s_rho_exact(extended_hamming(7), 5) == 6999552


def test_exact_count_trivial_cases():
    assert s_rho_exact(pan5, 0) == 1
    assert s_rho_exact(pan5, 1) == 10  # every column nonzero since d >= 2
    assert s_rho_exact(pan5, 6) == 0  # rank is only 5
    assert s_rho_exact(eh4, 5) == 0


def test_packed_and_python_engines_agree():
    rng = random.Random(5)
    for _ in range(12):
        n = rng.randint(6, 12)
        nrows = rng.randint(2, 8)
        rows = tuple(rng.randrange(1 << n) for _ in range(nrows))
        h = BitMatrix(rows, n)
        fast = bare_code(h)
        slow = with_padding_rows(fast, 9 - nrows)
        assert slow.H.nrows > 8
        for rho in (2, 3, 4):
            expect = brute_s_rho(h, rho)
            assert s_rho_exact(fast, rho) == expect
            assert s_rho_exact(slow, rho) == expect


def test_exact_count_thread_invariance():
    expect = s_rho_exact(extended_hamming(7), 4, threads=1)
    for t in (2, 4, 8):
        assert s_rho_exact(extended_hamming(7), 4, threads=t) == expect


def test_exact_count_permutation_invariance():
    perm = [7, 2, 9, 0, 4, 1, 8, 3, 6, 5]
    permuted = bare_code(pan5.H.select_columns(perm))
    for rho in range(1, 6):
        assert s_rho_exact(permuted, rho) == s_rho_exact(pan5, rho)


def test_exact_count_budget_refusal():
    with pytest.raises(BudgetError) as err:
        s_rho_exact(extended_hamming(7), 7, budget=10**6)
    assert str(math.comb(64, 7)) in str(err.value)


def test_sampling_is_deterministic_across_threads_and_repeats():
    a = s_rho_sampled(pan5, 4, 20000, master_seed=42, threads=1)
    for t in (2, 5):
        assert s_rho_sampled(pan5, 4, 20000, master_seed=42, threads=t) == a
    assert s_rho_sampled(pan5, 4, 20000, master_seed=42) == a


def test_sampling_unbiased_within_three_sigma():
    exact = Fraction(s_rho_exact(pan5, 4), math.comb(10, 4))
    for master_seed in (1, 2, 3):
        est = s_rho_sampled(pan5, 4, 30000, master_seed)
        sigma = est.std_error
        assert abs(float(est.estimate) - float(exact)) <= 3 * sigma


def test_sampling_chunking_does_not_change_the_plan():
    # chunk size is part of the stream plan; the default must stay stable
    a = s_rho_sampled(pan5, 4, 5000, master_seed=9, chunk_size=1 << 20)
    b = s_rho_sampled(pan5, 4, 5000, master_seed=9)
    assert a == b


def test_sampling_validation():
    with pytest.raises(PreconditionError):
        s_rho_sampled(pan5, 0, 100, 1)
    with pytest.raises(PreconditionError):
        s_rho_sampled(pan5, 4, 0, 1)
    wide = with_padding_rows(pan5, 5)
    with pytest.raises(BudgetError):
        s_rho_sampled(wide, 4, 10**7, 1)


def test_wide_matrix_sampling_fallback_agrees():
    wide = with_padding_rows(pan5, 5)
    a = s_rho_sampled(pan5, 4, 4000, master_seed=7)
    b = s_rho_sampled(wide, 4, 4000, master_seed=7)
    assert a.hits == b.hits


def test_psi_tilde_depth_one_is_psi():
    code = extended_hamming(7)
    prov = trailing_shortening_provider(code)
    s = oracle_spectrum(code)
    for rho in range(4, 8):
        assert psi_tilde(64, 4, rho, prov, depth=1) == psi(64, 4, rho, s)


def test_psi_tilde_collapses_below_twice_distance():
    # recursion depth never exceeds one while rho < 2d, so the refinement
    # coincides with the closed form there
    code = panchenko(7)
    prov = trailing_shortening_provider(code)
    s = oracle_spectrum(code)
    for rho in range(4, 8):
        assert psi_tilde(40, 4, rho, prov) == psi(40, 4, rho, s)
        assert delta_tilde(40, 4, rho, prov) == delta_lower(40, 4, rho, s)
        assert delta_tilde_2(40, 4, rho, prov) == delta_lower(40, 4, rho, s)


def test_psi_tilde_refines_psi_at_deeper_recursion():
    code = extended_hamming(7)
    prov = trailing_shortening_provider(code)
    s = oracle_spectrum(code)
    rho = 8
    assert psi_tilde(64, 4, rho, prov) > psi(64, 4, rho, s)
    assert psi_tilde(64, 4, rho, prov) <= math.comb(64, rho)


def test_bound_ordering_with_exact_count_at_deep_recursion():
    c = shorten(extended_hamming(8), list(range(14, 128)))
    assert c.spec.d == 4  # the first 14 columns still hold a dependent quadruple
    prov = trailing_shortening_provider(c)
    s = oracle_spectrum(c)
    for rho in range(4, 9):
        lo = psi(14, 4, rho, s)
        mid = psi_tilde(14, 4, rho, prov)
        hi = s_rho_exact(c, rho)
        assert lo <= mid <= hi <= math.comb(14, rho)
        assert hi == brute_s_rho(c.H, rho)


def test_report_with_negative_closed_form():
    # at rho near the rank the closed form can dip below zero; the report
    # keeps the signed integer but floors the probability at zero instead
    # of refusing the whole record
    keep = {8, 11, 12, 13, 15, 16, 49, 54, 56, 59, 61, 63}
    c = shorten(extended_hamming(7), [j for j in range(64) if j not in keep])
    assert c.H.rank() == 7
    rep = erasure_report(c, 7)
    assert rep.method == "exact"
    assert rep.psi < 0 <= rep.s_rho_exact
    assert rep.delta_lower == 0
    assert rep.delta_exact == Fraction(rep.s_rho_exact, math.comb(12, 7))


def test_entropy_bounds():
    b = delta_entropy_bound(4, 6, 7.0)
    assert b.weak_bound == pytest.approx(0.5)
    assert b.entropy_bound > b.weak_bound  # entropy form is the tighter floor
    eq = delta_entropy_bound(4, 4, 7.0)
    assert eq.entropy_bound == pytest.approx(1 - 2.0**-7)
    vac = delta_entropy_bound(4, 8, 7.0)
    assert vac.weak_bound is None
    with pytest.raises(PreconditionError):
        delta_entropy_bound(4, 3, 7.0)


def test_binomial_spectrum_estimate_and_params():
    assert binomial_spectrum_estimate(64, 4, 7.0) == pytest.approx(635376 / 128)
    ApproxParams(z=6.5, r=7)
    with pytest.raises(PreconditionError):
        ApproxParams(z=6.0, r=7)
    with pytest.raises(PreconditionError):
        ApproxParams(z=7.5, r=7)


def test_report_exact_path():
    rep = erasure_report(pan5, 4)
    assert rep.method == "exact"
    assert rep.psi == rep.psi_tilde == rep.s_rho_exact == 200
    assert rep.delta_exact == rep.delta_lower == Fraction(20, 21)
    assert rep.ci_halfwidth is None
    assert rep.s_exact_or_estimate == 200


def test_report_below_distance():
    rep = erasure_report(pan5, 2)
    assert rep.delta_exact == 1
    assert rep.psi == math.comb(10, 2)


def test_report_beyond_rank_is_all_zero():
    rep = erasure_report(pan5, 7)
    assert rep.method == "exact"
    assert rep.s_rho_exact == 0
    assert rep.delta_exact == 0
    assert rep.psi == 0 and rep.psi_tilde == 0


def test_report_sampled_path():
    rep = erasure_report(panchenko(7), 6, method="sampled", samples=50000, master_seed=3)
    assert rep.method == "sampled"
    assert rep.sample is not None and rep.ci_halfwidth > 0
    exact = Fraction(s_rho_exact(panchenko(7), 6), math.comb(40, 6))
    assert abs(float(rep.delta_exact_or_estimate) - float(exact)) <= 4 * rep.sample.std_error


def test_report_psi_bound_path_and_z():
    rep = erasure_report(panchenko(7), 6, method="psi-bound", z=6.5)
    assert rep.s_rho_exact is None and rep.sample is None
    assert rep.entropy_bound is not None and rep.weak_bound is not None
    with pytest.raises(PreconditionError):
        erasure_report(pan5, 4, method="nonsense")


def test_report_delta_monotone_in_rho():
    deltas = [erasure_report(pan5, rho).delta_exact for rho in range(0, 6)]
    assert all(a >= b for a, b in zip(deltas, deltas[1:]))


def test_report_invariant_enforcement():
    with pytest.raises(ConsistencyError):
        ErasureReport(
            n=8, rho=4, total=70, psi=60, psi_tilde=60,
            delta_lower=Fraction(6, 7), delta_tilde=Fraction(6, 7),
            delta_tilde_2=Fraction(6, 7), method="exact",
            s_rho_exact=59, delta_exact=Fraction(59, 70),
        )


def test_table_single_row_matches_reference():
    cells = table1(codes=[("panchenko", panchenko(7))], rhos=(4, 5))
    assert [c.reference for c in cells] == ["0.9870", "0.9287"]
    for cell in cells:
        assert cell.report.method == "exact"
        assert abs(cell.deviation) <= 1e-4
