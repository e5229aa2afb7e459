"""One-decimal round-half-up percentages using decimal arithmetic."""
import json
import sys
from decimal import Decimal, ROUND_HALF_UP

CELLS = [
    (179, 200), (185, 200), (148, 200), (200, 200), (158, 185), (148, 185),
    (87, 100), (48, 50), (44, 50), (89, 100), (94, 100), (34, 50), (20, 50),
    (74, 89), (43, 48), (41, 48), (70, 89), (40, 48), (38, 48),
    (151, 200), (28, 49), (93, 104), (78, 98), (1, 8), (3, 8), (5, 8), (7, 8),
    (1, 3), (2, 3), (0, 7), (1, 2000), (1999, 2000), (0, 0),
]


def fmt(num, den):
    if den == 0:
        return "n/a"
    v = (Decimal(100) * num / den).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return "100%" if v == 100 else "%s%%" % v


json.dump([{"num": n, "den": d, "text": fmt(n, d)} for n, d in CELLS], sys.stdout, indent=0)
sys.stdout.write("\n")
