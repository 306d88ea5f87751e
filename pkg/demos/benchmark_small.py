"""Small-scale strategy benchmark.

Generates five random instances, runs each sampling strategy twice, and
prints the comparison CSV summary that `ltlplan compare` would produce on
the shipped suite. Finishes in about a minute on one core.

Run:  python demos/benchmark_small.py
"""

import tempfile

from ltlplan.bench import cmd_compare, cmd_generate, median_iterations
from ltlplan.workspace import GenParams


def main():
    params = GenParams(
        width=100, height=100, m=5,
        n_obstacles=(6, 12), obstacle_size=(8, 25), region_size=(6, 12),
    )
    with tempfile.TemporaryDirectory() as d:
        manifest = cmd_generate(seed=5, count=5, out_dir=d, params=params)
        for e in manifest["instances"]:
            print(f"{e['id']}: {e['formula']}")
        out_csv = f"{d}/runs.csv"
        summary = cmd_compare(d, ["uniform", "biased", "guided"], trials=2, out_csv=out_csv)
        print()
        header = ("class", "strategy", "T", "n", "len", "m", "timeouts")
        print(" ".join(f"{h:>12}" for h in header))
        for row in summary:
            print(" ".join(f"{str(row[h]):>12}" for h in header))
        print()
        med = median_iterations(out_csv)
        print("median iterations to first plan:", {k: round(v, 1) for k, v in med.items()})


if __name__ == "__main__":
    main()
