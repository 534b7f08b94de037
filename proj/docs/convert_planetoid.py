#!/usr/bin/env python3
"""Convert a cora.npz / citeseer.npz citation archive into a dataset bundle.

The input is the CSR-packed format distributed with the nettack code and many
GNN-robustness repositories: a .npz containing

    adj_data, adj_indices, adj_indptr, adj_shape      (binary adjacency, CSR)
    attr_data, attr_indices, attr_indptr, attr_shape  (node attributes, CSR)
    labels                                            (int class per node)

The output directory holds meta.json, edges.tsv, features.tsv and labels.tsv
as described in the README. The adjacency is symmetrized, deduplicated and
stripped of self-loops; the loader extracts the largest connected component
itself, so the full graph is written here.

Usage:
    python3 convert_planetoid.py cora.npz data/cora
"""

import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_csr(loader, prefix):
    return sp.csr_matrix(
        (loader[f"{prefix}_data"], loader[f"{prefix}_indices"],
         loader[f"{prefix}_indptr"]),
        shape=loader[f"{prefix}_shape"],
    )


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    loader = np.load(src, allow_pickle=True)

    adj = load_csr(loader, "adj")
    attr = load_csr(loader, "attr")
    labels = np.asarray(loader["labels"]).astype(int)

    n = adj.shape[0]
    if attr.shape[0] != n or labels.shape[0] != n:
        sys.exit("node counts disagree between adjacency, attributes and labels")

    # undirected simple graph: symmetrize, drop self-loops, binarize
    adj = adj.maximum(adj.T).tolil()
    adj.setdiag(0)
    adj = adj.tocsr()
    adj.eliminate_zeros()

    out_dir.mkdir(parents=True, exist_ok=True)

    name = src.stem.lower()
    meta = {
        "name": name,
        "num_nodes": int(n),
        "num_features": int(attr.shape[1]),
        "num_classes": int(labels.max()) + 1,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta) + "\n")

    coo = sp.triu(adj, k=1).tocoo()
    with open(out_dir / "edges.tsv", "w") as f:
        for u, v in sorted(zip(coo.row.tolist(), coo.col.tolist())):
            f.write(f"{u}\t{v}\n")

    attr = attr.tocoo()
    with open(out_dir / "features.tsv", "w") as f:
        order = np.lexsort((attr.col, attr.row))
        for k in order:
            f.write(f"{attr.row[k]}\t{attr.col[k]}\t{attr.data[k]:.17g}\n")

    with open(out_dir / "labels.tsv", "w") as f:
        for node, cls in enumerate(labels.tolist()):
            f.write(f"{node}\t{cls}\n")

    print(f"wrote {out_dir}: {n} nodes, {coo.nnz} edges, "
          f"{meta['num_features']} features, {meta['num_classes']} classes")


if __name__ == "__main__":
    main()
