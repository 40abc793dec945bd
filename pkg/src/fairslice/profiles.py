"""Valuation fixtures: the eight lab profiles, analysis fixtures, random draws.

Lab tables are stored exactly as printed — 1-indexed inclusive pixel ranges
plus one 0/1 desire flag per agent — and converted to half-open [a-1, b)
spans at build time. Every lab agent desires exactly 120 pixels.
"""

from __future__ import annotations

import numpy as np

from .cake import WIDTH, Valuation

PROCEDURES = ("2acc", "2scc", "3ds", "4ds", "3ld", "4ld", "4ep", "3sc")

# Number of agents per procedure (the subject is always agent 0).
AGENTS = {
    "2acc": 2, "2scc": 2, "3ds": 3, "4ds": 4,
    "3ld": 3, "4ld": 4, "4ep": 4, "3sc": 3,
}

_LAB_RANGES = {
    "2acc": "61-120 121-130 171-190 291-310 411-430 451-540",
    "2scc": "141-170 191-220 231-240 241-260 271-300 311-320 321-330 361-390 471-490 511-540",
    "3ds": "71-110 121-130 131-150 151-160 171-180 191-200 271-310 311-380 411-430 451-540",
    "4ds": "61-80 81-90 91-120 141-150 151-170 171-180 181-210 211-240 241-270 271-300 "
           "301-330 331-360 371-390 391-420 421-450 451-480 491-510 511-540",
    "3ld": "71-90 91-110 121-190 221-230 231-260 281-300 301-320 341-350 351-370 371-400 "
           "401-410 431-440 451-460",
    "4ld": "61-90 91-110 111-160 181-230 231-250 251-270 271-280 281-290 311-340 341-350 "
           "351-370 371-380 381-410 421-520",
    "4ep": "91-110 111-120 121-140 161-170 171-190 191-210 211-220 221-240 241-270 281-300 "
           "301-320 331-340 341-350 351-360 361-370 411-430 471-510",
    "3sc": "71-80 81-90 91-100 101-110 141-150 151-170 171-190 211-230 271-280 281-290 "
           "291-300 301-320 321-330 331-340 381-400 451-470 471-490",
}

# Desire flags, one row per agent, subject first.
_LAB_FLAGS = {
    "2acc": ["101110",
             "010011"],
    "2scc": ["0011110011",
             "1110011100"],
    "3ds": ["1111001000",
            "0100000011",
            "0110110100"],
    "4ds": ["100110001000100010",
            "110000100010001000",
            "001000010001000100",
            "000011000100010001"],
    "3ld": ["0101110110100",
            "1111000000000",
            "0000011011111"],
    "4ld": ["10011011000000",
            "00100110011100",
            "00001100110110",
            "01000000000001"],
    "4ep": ["11001111001000000",
            "01101100011001000",
            "00000110011011110",
            "00011000100110001"],
    "3sc": ["00000111000000111",
            "01011100110101001",
            "11110000011111001"],
}


def _parse_ranges(text):
    spans = []
    for token in text.split():
        a, b = token.split("-")
        spans.append((int(a) - 1, int(b)))
    return spans


def lab_profile(procedure: str):
    """The published valuations for one procedure, subject first."""
    spans = _parse_ranges(_LAB_RANGES[procedure])
    profile = []
    for flags in _LAB_FLAGS[procedure]:
        desired = [span for span, flag in zip(spans, flags) if flag == "1"]
        profile.append(Valuation.from_desired(desired))
    return profile


def random_profile(n_agents: int, rng, desired_pixels: int = 120):
    """Random 0/1 profile: each agent desires `desired_pixels` random pixels."""
    profile = []
    for _ in range(n_agents):
        w = np.zeros(WIDTH, dtype=np.int64)
        w[rng.choice(WIDTH, size=desired_pixels, replace=False)] = 1
        profile.append(Valuation(w))
    return profile


def random_positive_valuation(rng, low: int = 1, high: int = 4) -> Valuation:
    """Strictly positive integer weights, for dominance-oracle comparisons."""
    return Valuation(rng.integers(low, high + 1, size=WIDTH))


# ---------------------------------------------------------------------------
# Strategy-analysis fixtures (general integer weights).
# ---------------------------------------------------------------------------

def blocks_profile(block_lists):
    return [Valuation.from_blocks(blocks) for blocks in block_lists]


def partition_profile(n_agents: int):
    """n agents, each caring only about its own 1/n stretch of the cake."""
    size = WIDTH // n_agents
    return blocks_profile(
        [[(i * size, (i + 1) * size, 1)] for i in range(n_agents)]
    )


def gap_fixture(procedure: str):
    """Profile used to measure the manipulation-gain gap of a procedure.

    The subject (agent 0) owns the leftmost block in the partition profiles,
    which is the position a manipulator can exploit hardest.
    """
    n = AGENTS[procedure]
    if procedure == "2scc":
        # Both cutters nearly indifferent over the middle; the subject can
        # shade its cut right and drag the midpoint across the robot's mass.
        subject = [(0, 150, 1), (296, 298, 75)]
        robot = [(300, 302, 75), (302, 304, 75)]
        return blocks_profile([subject, robot])
    return partition_profile(n)


def three_way_tie_fixture():
    """The two-cut search fixture: agent 1 vs two identical opponents.

    Six 100-pixel parts; the strategic agent's mass sits in parts 2, 4 and 6
    with dust in 3 and 5, while both opponents want parts 1-3 and 5.
    """
    agent1 = [(100, 200, 40), (200, 300, 1), (300, 400, 39),
              (400, 500, 1), (500, 600, 39)]
    opponent = [(0, 100, 20), (100, 200, 20), (200, 300, 40), (400, 500, 40)]
    return blocks_profile([agent1, opponent, list(opponent)])
