"""Independent recomputation of the fixture's evaluation metrics.

Reimplements the offline embedders and metric formulas in Python from their
definitions and checks a report.json against them. Usage:
    oracle.py REPORT_JSON
Exits non-zero on any mismatch.
"""

import json
import math
import pathlib
import re
import sys

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
from make_fixture import CASES  # noqa: E402

STOPWORDS = {
    line.strip()
    for line in (HERE.parents[2] / "data" / "stopwords_en.txt").read_text(encoding="utf-8").splitlines()
    if line.strip() and not line.startswith("#")
}
F32 = np.float32


def fnv1a64(text):
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def tokens(text, stop=frozenset()):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t and t not in stop]


def unit(v):
    s = sum(float(x) * float(x) for x in v)
    if s <= 0:
        return v
    n = math.sqrt(s)
    return [F32(float(x) / n) for x in v]


def cosine(a, b):
    dot = na = nb = 0.0
    for x, y in zip(a, b):
        x, y = float(x), float(y)
        dot += x * y
        na += x * x
        nb += y * y
    return dot / (math.sqrt(na) * math.sqrt(nb))


def deterministic(text, dim=256):
    v = [F32(0)] * dim
    toks = tokens(text)
    for i, t in enumerate(toks):
        v[fnv1a64("u:" + t) % dim] += F32(1)
        if i + 1 < len(toks):
            v[fnv1a64("b:" + t + " " + toks[i + 1]) % dim] += F32(1)
    return unit(v)


def token_vectors(text, dim=128):
    out = []
    for t in tokens(text):
        v = [F32(0)] * dim
        v[fnv1a64("w:" + t) % dim] += F32(1)
        padded = "<" + t + ">"
        for i in range(len(padded) - 2):
            v[fnv1a64("g:" + padded[i:i + 3]) % dim] += F32(1)
        out.append(unit(v))
    return out


def bert_f1(candidate, reference):
    c, r = token_vectors(candidate), token_vectors(reference)
    sims = [[min(1.0, max(0.0, cosine(x, y))) for y in r] for x in c]
    p = sum(max(row) for row in sims) / len(c)
    rec = sum(max(sims[i][j] for i in range(len(c))) for j in range(len(r))) / len(r)
    return 0.0 if p + rec == 0 else 2 * p * rec / (p + rec)


def load_table(path):
    table = {}
    lines = path.read_text(encoding="utf-8").splitlines()
    for n, line in enumerate(lines):
        parts = line.split()
        if n == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue
        table.setdefault(parts[0].lower(), [F32(x) for x in parts[1:]])
    return table


def sentence(table, toks):
    rows = [table[t] for t in toks if t in table]
    if not rows:
        return None
    dim = len(rows[0])
    return [F32(sum(float(r[d]) for r in rows) / len(rows)) for d in range(dim)]


def table_score(table, a, b):
    va, vb = sentence(table, tokens(a, STOPWORDS)), sentence(table, tokens(b, STOPWORDS))
    return None if va is None or vb is None else cosine(va, vb)


def expected_metrics(case, w2v, glove):
    m = {
        "s1": table_score(w2v, case["bot_answer"], case["human_answer"]),
        "s2": table_score(glove, case["bot_answer"], case["human_answer"]),
        "s3": cosine(deterministic(case["bot_answer"]), deterministic(case["human_answer"])),
    }
    qs = case["questions"]
    if len(set(qs)) >= 5:
        m["indirect_avg"] = sum(bert_f1(q, case["query"]) for q in qs) / len(qs)
        qv = deterministic(case["query"])
        m["AR"] = sum(cosine(qv, deterministic(q)) for q in qs) / len(qs)
    else:
        m["indirect_avg"] = m["AR"] = None

    def ratio(verdicts):
        return sum(1 for _, ok in verdicts if ok) / len(verdicts)

    m["F"] = ratio(case["answer_statements"]) if case["contexts"] else None
    if case["contexts"]:
        m["CR"] = ratio(case["truth_statements"])
        m["CP"] = ratio([v for group in case["context_statements"] for v in group])
    else:
        m["CR"] = 0.0
        m["CP"] = None
    return m


TOLERANCE = {"s1": 1e-6, "s2": 1e-6}


def main(report_path):
    report = json.loads(pathlib.Path(report_path).read_text(encoding="utf-8"))
    w2v = load_table(HERE / "tables" / "w2v_small.txt")
    glove = load_table(HERE / "tables" / "glove_small.txt")
    by_id = {c["case_id"]: c for c in report["cases"]}
    failures = 0
    for case in CASES:
        got = by_id[case["id"]]["metrics"]
        for name, want in expected_metrics(case, w2v, glove).items():
            have = got[name]
            tol = TOLERANCE.get(name, 1e-9)
            ok = (want is None and have is None) or (
                want is not None and have is not None and abs(want - have) <= tol)
            failures += not ok
            print(f"{'ok  ' if ok else 'FAIL'} {case['id']:<18} {name:<12} want={want} have={have}")
    print(f"{failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
