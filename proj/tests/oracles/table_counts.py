"""Brute-force the integer (tp, flagged) pairs behind the reference detection
percentages (all 76 snippets, 39 misuses).  Prints one C++ initializer per
cell; the acceptance suite freezes them."""

TOTAL_MISUSES = 39

# (model, variant): (P, R, F1) as printed, in percent.
TABLE = {
    ("4o-mini", "base"): (45.65, 53.85, 49.41),
    ("4o-mini", "data"): (37.04, 51.28, 43.01),
    ("4o-mini", "dir"): (38.46, 51.28, 43.96),
    ("4o-mini", "full"): (33.33, 46.15, 38.71),
    ("4o-mini", "fewshot"): (41.67, 64.10, 50.51),
    ("4o", "base"): (48.78, 51.28, 50.00),
    ("4o", "data"): (51.16, 56.41, 53.66),
    ("4o", "dir"): (52.38, 56.41, 54.32),
    ("4o", "full"): (55.00, 56.41, 55.70),
    ("4o", "fewshot"): (57.14, 61.54, 59.26),
    ("llama", "base"): (48.89, 56.41, 52.38),
    ("llama", "data"): (50.00, 48.72, 49.35),
    ("llama", "dir"): (52.17, 61.54, 56.47),
    ("llama", "full"): (56.52, 66.67, 61.18),
    ("llama", "fewshot"): (56.82, 64.10, 60.24),
}


def pct(x):
    return round(100.0 * x, 2)


for (model, variant), (p, r, f1) in TABLE.items():
    hits = []
    for tp in range(0, TOTAL_MISUSES + 1):
        for flagged in range(max(tp, 1), 77):
            pp = tp / flagged
            rr = tp / TOTAL_MISUSES
            ff = 0.0 if pp + rr == 0 else 2 * pp * rr / (pp + rr)
            if pct(pp) == p and pct(rr) == r and pct(ff) == f1:
                hits.append((tp, flagged))
    assert len(hits) == 1, (model, variant, hits)
    tp, flagged = hits[0]
    print(f'    {{"{model}", "{variant}", {tp}, {flagged}, {p:.2f}, {r:.2f}, {f1:.2f}}},')
