#!/usr/bin/env python3
"""Generate the bundled synthetic test corpus and fixture lexicons.

Deterministic (fixed seed). Re-running overwrites testdata/ in place; the
golden manifests must be refrozen afterwards (see scripts/freeze_golden.sh).
"""

import json
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "testdata")

FAVOR_TEXTS = [
    "so grateful for the vaccines they keep us safe",
    "love how effective the boosters are science wins",
    "glad to protect my family feeling happy and hopeful",
    "grateful and delighted the clinic was quick today",
    "feeling safe and happy after my second dose love it",
]
AGAINST_TEXTS = [
    "this mandate is dangerous and forced total hoax",
    "refuse the poison i am furious at this outrage",
    "terrified of injury reports this is vile and gross",
    "the rollout is a hoax and the side effects are scary",
    "furious about the mandatory rules this is dangerous",
]
NEUTRAL_TEXTS = [
    "waiting in the queue at the clinic today",
    "read an unexpected article about vaccines this morning",
    "my appointment got moved to tuesday again",
    "sudden change in schedule shocking lines today",
    "the weather was nice on my walk to the office",
    "grateful but the mandate is forced so i am unsure",
    "an honest and reliable summary would be nice",
    "grieving with a friend today sad news all around",
    "eager and hopeful for the announcement next week",
]
BAND_TEXTS = [
    "the vaccines music band played",
    "the vaccines music band tour",
    "loved the vaccines music band",
    "the vaccines music band again",
]
NOISE = [
    " see https://t.co/{} for more",
    " cc @user{} thoughts",
    " :) ",
    " \U0001F489",
]


def month_iter():
    for year in range(2018, 2022):
        for month in range(1, 13):
            yield year, month


def main():
    rng = random.Random(20130101)
    os.makedirs(os.path.join(ROOT, "lexicons"), exist_ok=True)
    os.makedirs(os.path.join(ROOT, "expected"), exist_ok=True)

    lines = []
    pid = 0
    for year, month in month_iter():
        # the mix drifts over time so eras differ
        covid = year >= 2020
        n_posts = rng.randint(18, 24)
        for _ in range(n_posts):
            pid += 1
            user = rng.randint(0, 19)
            day = rng.randint(1, 28)
            hour = rng.randint(0, 23)
            roll = rng.random()
            if covid:
                if roll < 0.30:
                    text = rng.choice(FAVOR_TEXTS)
                elif roll < 0.55:
                    text = rng.choice(AGAINST_TEXTS)
                else:
                    text = rng.choice(NEUTRAL_TEXTS)
            else:
                if roll < 0.20:
                    text = rng.choice(FAVOR_TEXTS)
                elif roll < 0.55:
                    text = rng.choice(AGAINST_TEXTS)
                else:
                    text = rng.choice(NEUTRAL_TEXTS)
            noise = rng.random()
            if noise < 0.10:
                text += rng.choice(NOISE).format(rng.randint(100, 999))
            rec = {
                "id": f"p{pid:04d}",
                "user_id": f"u{user:02d}",
                "created_at": f"{year:04d}-{month:02d}-{day:02d}T{hour:02d}:00:00Z",
                "text": text,
            }
            if rng.random() < 0.03:
                rec["text"] = "RT @someone " + rec["text"]
            lines.append(json.dumps(rec))
        # one same-user same-day duplicate pair per quarter
        if month % 3 == 0:
            pid += 1
            lines.append(json.dumps({
                "id": f"p{pid:04d}",
                "user_id": "u00",
                "created_at": f"{year:04d}-{month:02d}-15T08:00:00Z",
                "text": rng.choice(NEUTRAL_TEXTS),
            }))
            pid += 1
            lines.append(json.dumps({
                "id": f"p{pid:04d}",
                "user_id": "u00",
                "created_at": f"{year:04d}-{month:02d}-15T17:00:00Z",
                "text": rng.choice(NEUTRAL_TEXTS),
            }))
        # occasional music-band post, removed by the semantic filter
        if month % 4 == 1:
            pid += 1
            lines.append(json.dumps({
                "id": f"p{pid:04d}",
                "user_id": f"u{rng.randint(0, 19):02d}",
                "created_at": f"{year:04d}-{month:02d}-20T20:00:00Z",
                "text": rng.choice(BAND_TEXTS),
            }))
    # two malformed lines exercising the reject path
    lines.append("{not valid json")
    lines.append(json.dumps({"id": "", "user_id": "u01",
                             "created_at": "2020-01-01T00:00:00Z", "text": "x"}))
    with open(os.path.join(ROOT, "corpus.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")

    emotion_rows = [
        ("furious", "anger", 1), ("outrage", "anger", 1), ("angry", "anger", 1),
        ("eager", "anticipation", 1), ("hopeful", "anticipation", 1),
        ("gross", "disgust", 1), ("poison", "disgust", 1), ("vile", "disgust", 1),
        ("scared", "fear", 1), ("dangerous", "fear", 1), ("terrified", "fear", 1),
        ("scary", "fear", 1),
        ("happy", "joy", 1), ("grateful", "joy", 1), ("delighted", "joy", 1),
        ("grieving", "sadness", 1), ("sad", "sadness", 1),
        ("sudden", "surprise", 1), ("unexpected", "surprise", 1),
        ("shocking", "surprise", 1),
        ("safe", "trust", 1), ("reliable", "trust", 1), ("honest", "trust", 1),
        ("grateful", "positive", 1), ("happy", "positive", 1),
        ("effective", "positive", 1), ("protect", "positive", 1),
        ("love", "positive", 1), ("glad", "positive", 1), ("hopeful", "positive", 1),
        ("hoax", "negative", 1), ("dangerous", "negative", 1),
        ("poison", "negative", 1), ("refuse", "negative", 1),
        ("furious", "negative", 1), ("scary", "negative", 1),
        # excluded by the shipped lists
        ("vaccine", "trust", 1), ("vaccines", "trust", 1), ("flu", "fear", 1),
        # flag-0 row: association rejected by the annotators
        ("boring", "sadness", 0),
    ]
    with open(os.path.join(ROOT, "lexicons", "emotion.tsv"), "w") as f:
        for word, cat, flag in emotion_rows:
            f.write(f"{word}\t{cat}\t{flag}\n")

    warmth_rows = [
        # word, warmth, sociability, trust, competence, arousal
        ("grateful", 0.90, 0.85, 0.85, 0.60, 0.40),
        ("love", 0.95, 0.90, 0.80, 0.50, 0.60),
        ("safe", 0.80, 0.60, 0.90, 0.70, 0.20),
        ("effective", 0.60, 0.50, 0.70, 0.90, 0.30),
        ("protect", 0.75, 0.65, 0.80, 0.80, 0.50),
        ("glad", 0.85, 0.80, 0.70, 0.55, 0.45),
        ("happy", 0.90, 0.85, 0.75, 0.55, 0.50),
        ("honest", 0.80, 0.70, 0.95, 0.75, 0.30),
        ("reliable", 0.70, 0.55, 0.90, 0.85, 0.20),
        ("hopeful", 0.75, 0.65, 0.70, 0.60, 0.45),
        ("delighted", 0.88, 0.82, 0.72, 0.55, 0.60),
        ("dangerous", 0.20, 0.30, 0.10, 0.45, 0.90),
        ("hoax", 0.10, 0.20, 0.05, 0.20, 0.70),
        ("poison", 0.05, 0.10, 0.05, 0.30, 0.80),
        ("forced", 0.15, 0.20, 0.10, 0.50, 0.70),
        ("refuse", 0.25, 0.20, 0.20, 0.40, 0.60),
        ("furious", 0.20, 0.25, 0.15, 0.35, 0.95),
        ("vile", 0.10, 0.15, 0.05, 0.25, 0.80),
        ("gross", 0.15, 0.20, 0.10, 0.20, 0.70),
        ("scared", 0.30, 0.30, 0.25, 0.20, 0.85),
        ("terrified", 0.25, 0.25, 0.20, 0.15, 0.95),
        ("outrage", 0.15, 0.25, 0.10, 0.30, 0.90),
        ("grieving", 0.45, 0.40, 0.40, 0.30, 0.55),
        ("sad", 0.40, 0.35, 0.40, 0.30, 0.40),
        ("unsure", 0.45, 0.40, 0.35, 0.25, 0.50),
        ("mandate", 0.30, 0.30, 0.25, 0.60, 0.55),
        ("clinic", 0.55, 0.50, 0.65, 0.70, 0.30),
        ("queue", 0.45, 0.45, 0.50, 0.40, 0.35),
        ("vaccines", 0.50, 0.50, 0.50, 0.50, 0.50),
    ]
    with open(os.path.join(ROOT, "lexicons", "warmth.csv"), "w") as f:
        f.write("word,warmth,sociability,trust,competence,arousal\n")
        for row in warmth_rows:
            f.write(",".join(str(x) for x in row) + "\n")

    # 100-post density fixture: plain posts, no noise, single user per day
    drng = random.Random(7)
    vocab = ["happy", "sad", "dangerous", "safe", "waiting", "today", "news",
             "grateful", "poison", "queue", "office", "walk", "sudden"]
    dlines = []
    for i in range(100):
        month = (i // 10) + 1
        words = [drng.choice(vocab) for _ in range(drng.randint(5, 12))]
        dlines.append(json.dumps({
            "id": f"d{i:03d}",
            "user_id": f"w{i:03d}",
            "created_at": f"2021-{month:02d}-{(i % 27) + 1:02d}T12:00:00Z",
            "text": " ".join(words),
        }))
    with open(os.path.join(ROOT, "density_fixture.jsonl"), "w") as f:
        f.write("\n".join(dlines) + "\n")

    # gold labels for 30 corpus posts: the mock rule's answer, with 6
    # deliberate flips so evaluation metrics are nontrivial
    favor_cues = ["grateful", "safe", "effective", "protect", "love", "glad", "boosted"]
    against_cues = ["dangerous", "forced", "mandatory", "refuse", "hoax", "poison", "injury"]

    def mock_label(text):
        low = text.lower()
        fav = sum(c in low for c in favor_cues)
        agn = sum(c in low for c in against_cues)
        if fav > agn:
            return "favor"
        if agn > fav:
            return "against"
        return "neutral"

    # candidates must survive ingest: not a repost, not dropped by the
    # daily dedup, not removed by the similarity filter (band posts)
    grng = random.Random(99)
    survivors = {}
    for line in lines:
        try:
            rec = json.loads(line)
        except ValueError:
            continue
        if not rec.get("id") or rec["text"].startswith("RT @"):
            continue
        key = (rec["user_id"], rec["created_at"][:10])
        cur = survivors.get(key)
        if cur is None or (rec["created_at"], rec["id"]) < (cur["created_at"], cur["id"]):
            survivors[key] = rec
    chosen = [r for r in survivors.values() if "music band" not in r["text"]]
    chosen = grng.sample(sorted(chosen, key=lambda r: r["id"]), 30)
    rotate = {"favor": "against", "against": "neutral", "neutral": "favor"}
    with open(os.path.join(ROOT, "gold_labels.csv"), "w") as f:
        f.write("post_id,label\n")
        for i, rec in enumerate(sorted(chosen, key=lambda r: r["id"])):
            label = mock_label(rec["text"])
            if i % 5 == 0:
                label = rotate[label]
            f.write(f"{rec['id']},{label}\n")

    print(f"wrote {pid} corpus posts plus fixtures under {os.path.normpath(ROOT)}")


if __name__ == "__main__":
    main()
