"""Dataset export walkthrough.

Generates a handful of random planning instances, computes expert plans
with the biased strategy, and writes the training dataset layout consumed
by the neural trainer: per-instance workspace tensors, automaton graphs,
and rasterized expert-path labels, plus a manifest.

Run:  python demos/dataset_export.py [out_dir]
"""

import json
import pathlib
import sys
import tempfile

from ltlplan.bench import generate_instance
from ltlplan.encodings import ExpertConfig, export_dataset, read_bin
from ltlplan.workspace import GenParams


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="ltlplan-ds-")
    params = GenParams(
        width=100, height=100, m=5,
        n_obstacles=(6, 12), obstacle_size=(8, 25), region_size=(6, 12),
    )
    instances = []
    for i in range(4):
        w, formula, nba = generate_instance(9000 + i, params)
        print(f"inst{i}: {formula}")
        instances.append((f"inst{i}", w, nba))

    manifest = export_dataset(instances, out, ExpertConfig(iterations=20000, seed=1))
    print(json.dumps(manifest, indent=1))

    first = pathlib.Path(out) / "inst0"
    tensor = read_bin(str(first / "tensor.bin"), str(first / "tensor.meta.json"))["tensor"]
    labels = read_bin(str(first / "labels.bin"), str(first / "labels.meta.json"))
    graph = json.loads((first / "graph.json").read_text())
    print(f"workspace tensor: {tensor.shape} (channels: obstacles+init, then one per region)")
    print(f"path mask: {labels['path_mask'].shape}, "
          f"{int(labels['path_mask'].sum())} cells marked")
    print(f"state mask: {labels['state_mask'].tolist()}")
    print(f"automaton graph: {len(graph['state_features'])} state nodes, "
          f"{len(graph['edge_features'])} guard nodes, pooling node {graph['pooling']}")
    print(f"dataset written to {out}")


if __name__ == "__main__":
    main()
