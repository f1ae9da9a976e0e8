#!/usr/bin/env python3
"""Independent MAP/MRR scorer for TREC qrel + run files.

Implements the classic trec_eval ranking semantics: candidates are ordered
by score descending, ties broken by document id descending; AP divides by
the number of relevant documents in the qrels; queries with no relevant
documents are excluded from the means. Output mirrors trec_eval's
`measure all value` lines so callers can parse either tool identically.

Usage: reference_scorer.py QRELS RUN
"""

import sys
from collections import defaultdict


def read_qrels(path):
    rel = defaultdict(dict)  # qid -> {docno: relevance}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise SystemExit(f"{path}:{line_no}: expected 4 fields")
            qid, _iter, docno, judgment = parts
            rel[qid][docno] = int(judgment)
    return rel


def read_run(path):
    runs = defaultdict(list)  # qid -> [(docno, score)]
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise SystemExit(f"{path}:{line_no}: expected 6 fields")
            qid, _q0, docno, _rank, score, _tag = parts
            runs[qid].append((docno, float(score)))
    return runs


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__.strip())
    qrels = read_qrels(sys.argv[1])
    runs = read_run(sys.argv[2])

    aps, rrs = [], []
    for qid in qrels:
        n_rel = sum(1 for j in qrels[qid].values() if j > 0)
        if n_rel == 0:
            continue
        # score descending; equal scores by docno descending (stable resort)
        ranked = sorted(runs.get(qid, []), key=lambda e: e[0], reverse=True)
        ranked.sort(key=lambda e: e[1], reverse=True)
        hits = 0
        ap = 0.0
        rr = 0.0
        for rank, (docno, _score) in enumerate(ranked, 1):
            if qrels[qid].get(docno, 0) > 0:
                hits += 1
                ap += hits / rank
                if rr == 0.0:
                    rr = 1.0 / rank
        aps.append(ap / n_rel)
        rrs.append(rr)

    if not aps:
        raise SystemExit("no query has a relevant document")
    print(f"map all {sum(aps) / len(aps):.6f}")
    print(f"recip_rank all {sum(rrs) / len(rrs):.6f}")


if __name__ == "__main__":
    main()
