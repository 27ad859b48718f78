#!/usr/bin/env python3
"""Brute-force monthly density oracle, written independently of the Rust
implementation. Reads testdata/density_fixture.jsonl plus the fixture
emotion lexicon and writes testdata/expected/monthly_densities.csv with
the raw integer counts (the test recomputes the ratio itself so the
comparison is exact).
"""

import collections
import json
import os
import re

ROOT = os.path.join(os.path.dirname(__file__), "..", "testdata")
ASSETS = os.path.join(os.path.dirname(__file__), "..", "assets")

CATEGORIES = ["anger", "anticipation", "disgust", "fear", "joy", "sadness",
              "surprise", "trust", "positive", "negative"]


def load_exclusions():
    words = set()
    for name in ("vaccine_variants.txt", "illness_terms.txt"):
        with open(os.path.join(ASSETS, "exclusions", name)) as f:
            for line in f:
                line = line.split("#")[0].strip()
                if line:
                    words.add(line.lower())
    return words


def load_lexicon(excluded):
    lex = collections.defaultdict(set)
    with open(os.path.join(ROOT, "lexicons", "emotion.tsv")) as f:
        for line in f:
            word, cat, flag = line.rstrip("\n").split("\t")
            word = word.lower()
            if flag == "1":
                lex[word].add(cat)
            else:
                lex[word].discard(cat)
    return {w: c for w, c in lex.items() if c and w not in excluded}


def tokens(text):
    return [t for t in re.split(r"[^0-9A-Za-z]+", text.lower()) if t]


def main():
    lex = load_lexicon(load_exclusions())
    counts = collections.defaultdict(lambda: collections.Counter())
    totals = collections.Counter()
    with open(os.path.join(ROOT, "density_fixture.jsonl")) as f:
        for line in f:
            rec = json.loads(line)
            month = rec["created_at"][:7]
            toks = tokens(rec["text"])
            totals[month] += len(toks)
            for tok in toks:
                for cat in lex.get(tok, ()):
                    counts[month][cat] += 1
    out = os.path.join(ROOT, "expected", "monthly_densities.csv")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as f:
        f.write("month,category,emotion_word_count,token_total\n")
        for month in sorted(totals):
            for cat in CATEGORIES:
                n = counts[month][cat]
                if n:
                    f.write(f"{month},{cat},{n},{totals[month]}\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
