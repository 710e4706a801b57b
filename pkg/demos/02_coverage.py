"""
Full and k-LOS coverage of a typical receiver
=============================================

Transmitters form a Poisson process on the top line and only those within
the detection radius count.  Full coverage asks for LOS to all of them,
k-LOS for at least k of them.
"""

from loscov import CoverageQuery, full_coverage_prob, k_los_prob, load_scenario

# a short detection radius keeps about four transmitters in range on average
params = load_scenario("kcov")
print("mean number of detectable transmitters:", params.lambda_t * params.xi)

# two interchangeable evaluators for the expectation over positions
for method in ("conditional-mc", "nested-quadrature"):
    res = full_coverage_prob(CoverageQuery(params, method=method, seed=1))
    print(f"full coverage ({method}): {res.value:.5f} +- {res.stderr:.1e}, "
          f"n_max={res.n_max}")

# at least k LOS links through inclusion-exclusion over transmitter subsets
for k in (1, 2, 3):
    res = k_los_prob(CoverageQuery(params, k=k, method="nested-quadrature"))
    print(f"at least {k} LOS links: {res.value:.5f}")

# contribution of each transmitter count to the full-coverage sum
res = full_coverage_prob(CoverageQuery(params, method="nested-quadrature"))
for n, term in enumerate(res.terms[:8]):
    print(f"  n={n}: {term:.5f}")
