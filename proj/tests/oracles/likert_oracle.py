"""Mean and sample standard deviation via the statistics module."""
import json
import random
import statistics
import sys


def main():
    rng = random.Random(5150)
    samples = [[5, 4, 5, 3], [4, 4, 4], [1], [5, 4]]
    for _ in range(1000):
        samples.append([rng.randint(1, 5) for _ in range(rng.randint(1, 120))])
    out = []
    for s in samples:
        out.append({"values": s, "mean": statistics.fmean(s),
                    "sd": statistics.stdev(s) if len(s) > 1 else None})
    json.dump(out, sys.stdout, indent=0)
    sys.stdout.write("\n")


main()
