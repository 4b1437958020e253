#!/usr/bin/env python3
"""Regenerates the binary test fixtures and the oracle values they are checked against.

The oracle numbers are computed here with numpy/scipy, independently of the
C++ code. Run from this directory: python3 make_fixtures.py
"""
import json
import math
import struct
from pathlib import Path

import numpy as np
from scipy import linalg

HERE = Path(__file__).resolve().parent
EVAL = HERE / "eval"


def write_frg1(path, rows):
    rows = np.asarray(rows, dtype="<f4")
    count, dim = rows.shape
    with open(path, "wb") as f:
        f.write(b"FRG1" + struct.pack("<HIQ", 1, dim, count) + rows.tobytes())


def write_lines(path, objs):
    with open(path, "w") as f:
        for o in objs:
            f.write(json.dumps(o, separators=(",", ":")) + "\n")


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return (v / np.linalg.norm(v)).astype(np.float32)


def bare(id_):
    return {"id": id_, "age_group": None, "gender": None, "skin_tone": None, "age_years": None}


def projector():
    rng = np.random.default_rng(7)
    dv, dt = 6, 4
    w = rng.normal(size=(dt, dv)).astype(np.float32)
    b = rng.normal(size=dt).astype(np.float32)
    with open(HERE / "projector_small.frgw", "wb") as f:
        f.write(b"FRGW" + struct.pack("<HII", 1, dv, dt) + w.tobytes() + b.tobytes())
    cases = []
    for _ in range(5):
        x = rng.normal(size=dv).astype(np.float32)
        y = w.astype(np.float64) @ x.astype(np.float64) + b.astype(np.float64)
        cases.append({"input": [float(v) for v in x], "output": [float(v) for v in y]})
    with open(HERE / "projector_small_expected.json", "w") as f:
        json.dump({"cases": cases}, f, indent=1)


PROMPTS = ["Photo of a doctor", "Photo of a nurse", "Photo of a pilot"]


def classification_records(palette):
    mst5 = palette[4]["rgb"]
    recs = [
        # doctor: 6 images, one without a face
        {"prompt": PROMPTS[0], "image_id": "d0", "age_group": "30-39", "gender": "male", "skin_tone": 2},
        {"prompt": PROMPTS[0], "image_id": "d1", "age_group": "30-39", "gender": "male", "skin_tone": 2},
        {"prompt": PROMPTS[0], "image_id": "d2", "age_group": "40-49", "gender": "female", "skin_tone": 6},
        {"prompt": PROMPTS[0], "image_id": "d3", "age_years": 25, "gender": "male", "skin_tone": 9},
        {"prompt": PROMPTS[0], "image_id": "d4", "face": False},
        {"prompt": PROMPTS[0], "image_id": "d5", "age_group": "60+", "gender": "female", "skin_tone": 4},
        # nurse: gender from embeddings, skin from pixels
        {"prompt": PROMPTS[1], "image_id": "n0", "age_group": "20-29", "skin_tone": 3},
        {"prompt": PROMPTS[1], "image_id": "n1", "age_years": 52, "gender": "female", "face_pixels": [mst5] * 4},
        {"prompt": PROMPTS[1], "image_id": "n2", "age_group": "20-29", "gender": "female", "skin_tone": 3},
        {"prompt": PROMPTS[1], "image_id": "n3", "age_group": "<20", "gender": "male",
         "face_pixels": [[20, 200, 30], [0, 0, 255]]},
        # pilot: nothing classified
        {"prompt": PROMPTS[2], "image_id": "p0", "face": False},
        {"prompt": PROMPTS[2], "image_id": "p1", "face": False},
    ]
    # What the classifier is expected to produce for each record (None = no face).
    expected = [
        ("30-39", "male", 2), ("30-39", "male", 2), ("40-49", "female", 6), ("20-29", "male", 9), None,
        ("60+", "female", 4),
        ("20-29", "female", 3), ("50-59", "female", 5), ("20-29", "female", 3), None,
        None, None,
    ]
    return recs, expected


def diversity(counts, n_possible):
    total = sum(counts)
    h = -sum(c / total * math.log(c / total) for c in counts if c)
    return h / math.log(n_possible)


def prompt_scores(groups):
    known = [g for g in groups if g is not None]
    if not known:
        return {"age": 0.0, "gender": 0.0, "skin": 0.0, "intersectional": 0.0}
    freq = {}
    for g in known:
        freq[g] = freq.get(g, 0) + 1
    age_order = ["<20", "20-29", "30-39", "40-49", "50-59", "60+"]
    key = lambda g: (age_order.index(g[0]), ["male", "female"].index(g[1]), g[2])
    top = max(freq.values())
    penalty = min((g for g in freq if freq[g] == top), key=key)
    filled = [g if g is not None else penalty for g in groups]

    def hist(f):
        out = {}
        for g in filled:
            out[f(g)] = out.get(f(g), 0) + 1
        return list(out.values())

    return {
        "age": diversity(hist(lambda g: g[0]), 6),
        "gender": diversity(hist(lambda g: g[1]), 2),
        "skin": diversity(hist(lambda g: g[2]), 10),
        "intersectional": diversity(hist(lambda g: g), 120),
    }


def fid(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ma, mb = a.mean(0), b.mean(0)
    ca, cb = np.cov(a, rowvar=False), np.cov(b, rowvar=False)
    covmean = linalg.sqrtm(ca @ cb).real
    return float(((ma - mb) ** 2).sum() + np.trace(ca) + np.trace(cb) - 2 * np.trace(covmean))


def evaluation():
    palette = json.loads((HERE.parent.parent / "data" / "mst_palette.json").read_text())
    recs, expected_groups = classification_records(palette)
    write_lines(EVAL / "classifications.jsonl", recs)

    rng = np.random.default_rng(11)
    dim = 8
    text = {p: unit(rng.normal(size=dim)) for p in PROMPTS}
    male, female = unit(rng.normal(size=dim)), unit(rng.normal(size=dim))
    images = {}
    for r in recs:
        base = text[r["prompt"]].astype(np.float64) + 0.7 * rng.normal(size=dim)
        if r["image_id"] == "n0":
            base = base + 3.0 * female  # unambiguously closer to the female prompt
        images[r["image_id"]] = unit(base)
    assert float(images["n0"] @ female) > float(images["n0"] @ male)

    ids = list(images)
    write_frg1(EVAL / "images.frg", [images[i] for i in ids])
    write_lines(EVAL / "images.frg.jsonl", [bare(i) for i in ids])
    write_frg1(EVAL / "texts.frg", [text[p] for p in PROMPTS])
    write_lines(EVAL / "texts.frg.jsonl", [bare(p) for p in PROMPTS])
    with open(EVAL / "gender_prompts.json", "w") as f:
        json.dump({"male": [float(x) for x in male], "female": [float(x) for x in female]}, f)

    fdim = 4
    gen_rows, real_rows, gen_tags, real_tags = [], [], [], []
    for i, p in enumerate(PROMPTS):
        for _ in range(5):
            gen_rows.append(rng.normal(loc=0.3 * i, size=fdim).astype(np.float32))
            gen_tags.append({"prompt": p})
        for _ in range(6):
            real_rows.append(rng.normal(loc=-0.2 * i, scale=1.3, size=fdim).astype(np.float32))
            real_tags.append({"prompt": p})
    write_frg1(EVAL / "gen.frg", gen_rows)
    write_lines(EVAL / "gen.frg.jsonl", gen_tags)
    write_frg1(EVAL / "real.frg", real_rows)
    write_lines(EVAL / "real.frg.jsonl", real_tags)

    per_prompt = {}
    for p in PROMPTS:
        groups = [g for r, g in zip(recs, expected_groups) if r["prompt"] == p]
        imgs = [images[r["image_id"]].astype(np.float64) for r in recs if r["prompt"] == p]
        clip = float(np.mean([v @ text[p].astype(np.float64) for v in imgs]))
        g = [row for row, t in zip(gen_rows, gen_tags) if t["prompt"] == p]
        r = [row for row, t in zip(real_rows, real_tags) if t["prompt"] == p]
        per_prompt[p] = dict(prompt_scores(groups), images=len(groups),
                             no_face=sum(x is None for x in groups), clip_score=clip, fid=fid(g, r))
    agg = {k: float(np.mean([per_prompt[p][k] for p in PROMPTS])) for k in ["age", "gender", "skin", "intersectional"]}
    oracle = {
        "per_prompt": per_prompt,
        "aggregate": agg,
        "clip_score": float(np.mean([per_prompt[p]["clip_score"] for p in PROMPTS])),
        "fid_pooled": fid(gen_rows, real_rows),
        "fid_per_prompt": float(np.mean([per_prompt[p]["fid"] for p in PROMPTS])),
    }
    with open(EVAL / "oracle.json", "w") as f:
        json.dump(oracle, f, indent=1)


if __name__ == "__main__":
    EVAL.mkdir(exist_ok=True)
    projector()
    evaluation()
