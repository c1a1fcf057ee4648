"""Oracle outputs frozen once from tests/oracles.py (mpmath, 30-40 digits).

Regenerate with ``python3 -c "import oracles; ..."`` from the tests directory.
"""

# local_transform_mp(p, sigma, r, x)
LOCAL_TRANSFORM = {
    (2, 1.0, 1, 2.0): 0.598020094600997 - 0.23744537362658782j,
    (3, 0.8, 2, 2.0): 0.8071133708441668 + 0.13071537289224278j,
    (5, 0.6, 1, 10.0): -0.025966376674106464 + 0.09835246671465461j,
    (2, 0.6, 2, 50.0): -0.10531647919969382 - 0.12442377982008601j,
}

# pair_sum_direct(0, 2, 1.0, 1.0), 200 terms
PAIR_SUM_NU0_P2_S1_X1 = 0.7542666819988983 - 0.033779170368235606j

# product of local_transform_mp over {2, 3}, sigma = 1, r = 2, x = 1
FINITE_23_S1_R2_X1 = 0.8694885651667489 + 0.21509692651044707j
