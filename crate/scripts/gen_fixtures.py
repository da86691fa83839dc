#!/usr/bin/env python3
"""Generate the deterministic demo fixture set under fixtures/demo.

Outputs detections/<image>.json, embeddings.json, captions.json, truths.json,
catalog.ndjson and relevance.json. Every planted product shares at least four
caption body tokens with its detection; distractors share at most one. The
script re-checks both properties, plus classifier margins and top-3 placement
under a direct BM25 evaluation, before writing anything.
"""

import json
import math
import random
import re
import sys
from pathlib import Path

SEED = 20240611
DIM = 16
ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures" / "demo"
TAXONOMY = json.loads((ROOT / "crates" / "core" / "data" / "taxonomy.json").read_text())

FITS = ["slim", "relaxed", "oversized", "tapered", "boxy", "cropped", "straight", "loose", "tailored", "wide"]
COLOURS = ["indigo", "charcoal", "olive", "burgundy", "ivory", "navy", "mustard", "sage", "rust", "cobalt",
           "taupe", "coral", "khaki", "plum", "teal", "sand", "crimson", "slate"]
MATERIALS = ["denim", "cotton", "linen", "wool", "leather", "fleece", "corduroy", "twill", "jersey", "nylon",
             "suede", "cashmere", "poplin", "canvas", "satin", "chambray"]
DETAILS = ["whiskered", "pleated", "ribbed", "quilted", "distressed", "embroidered", "striped", "checked",
           "washed", "brushed", "zippered", "drawstring", "buttoned", "belted", "hooded", "raglan",
           "patched", "frayed", "pintucked", "waffle", "herringbone", "paisley", "houndstooth", "tiedye"]
FILLER = ["everyday", "essential", "classic", "modern", "signature", "heritage", "studio", "weekend",
          "urban", "coastal", "summit", "harbor", "meadow", "atlas", "vintage", "premium", "core", "city"]
RETAILERS = ["northwind", "lumen apparel", "tidewater", "kestrel co", "fieldhouse"]

# image -> (width, height, [(class, label)])
OUTFITS = [
    ("img_001", 640, 960, [("trousers", "jeans"), ("short_sleeve_top", "t-shirt")]),
    ("img_002", 640, 960, [("long_sleeve_outerwear", "denim jacket"), ("trousers", "chinos")]),
    ("img_003", 720, 960, [("long_sleeve_top", "hoodie"), ("shorts", "cargo shorts")]),
    ("img_004", 640, 960, [("short_sleeve_top", "polo shirt"), ("shorts", "chino shorts")]),
    ("img_005", 800, 1200, [("long_sleeve_outerwear", "leather jacket"), ("long_sleeve_top", "turtleneck"),
                            ("trousers", "dress trousers")]),
    ("img_006", 640, 960, [("long_sleeve_top", "sweater"), ("trousers", "cargo pants")]),
    ("img_007", 640, 960, [("short_sleeve_top", "tank top"), ("shorts", "athletic shorts")]),
    ("img_008", 720, 1080, [("long_sleeve_outerwear", "trench coat"), ("trousers", "joggers")]),
    ("img_009", 640, 960, [("long_sleeve_top", "blouse"), ("shorts", "denim shorts")]),
    ("img_010", 800, 1200, [("long_sleeve_outerwear", "blazer"), ("long_sleeve_top", "dress shirt"),
                            ("shorts", None)]),
]


def tokens(text):
    return [t.lower() for t in re.findall(r"[^\W_]+", text)]


def unit(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    return dot / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))


def bm25_rank(docs, query, k1=1.2, b=0.75):
    n = len(docs)
    avgdl = sum(len(d) for d in docs.values()) / n
    q = list(dict.fromkeys(query))
    scores = {}
    for doc_id, toks in docs.items():
        s = 0.0
        for t in q:
            tf = toks.count(t)
            if tf == 0:
                continue
            df = sum(1 for d in docs.values() if t in d)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avgdl))
        if s > 0:
            scores[doc_id] = s
    return sorted(scores, key=lambda d: (-scores[d], d))


def main():
    rng = random.Random(SEED)
    labels = [lab for cls in TAXONOMY.values() for lab in cls]
    label_vecs = {lab: unit([rng.gauss(0, 1) for _ in range(DIM)]) for lab in labels}

    used_labels = {lab for _, _, _, dets in OUTFITS for _, lab in dets if lab}
    spare = {cls: [l for l in labs if l not in used_labels] for cls, labs in TAXONOMY.items()}

    detection_docs, truths, captions, vectors, relevance = [], [], {}, {}, {}
    products = []
    planted_by_cluster = {}
    next_id = iter(range(1, 10_000))

    def new_id():
        return f"p{next(next_id):04d}"

    for image, width, height, dets in OUTFITS:
        doc = {"image": image, "width": width, "height": height, "detections": []}
        truth = {"image": image, "truths": []}
        band = height / (len(dets) + 1)
        # crop keys index the post-processed order, which is confidence descending
        confs = sorted((round(rng.uniform(0.55, 0.97), 3) for _ in dets), reverse=True)
        for i, (cls, label) in enumerate(dets):
            if label is None:
                label = spare[cls].pop(0)
            x1 = round(rng.uniform(0.1, 0.25) * width, 1)
            x2 = round(rng.uniform(0.75, 0.9) * width, 1)
            y1 = round(band * i + rng.uniform(0.05, 0.2) * band, 1)
            y2 = round(band * (i + 2) - rng.uniform(0.05, 0.2) * band, 1)
            conf = confs[i]
            doc["detections"].append({"class": cls, "confidence": conf, "box": [x1, y1, x2, y2]})
            jitter = lambda v, lim: round(min(max(v + rng.uniform(-4, 4), 0.0), lim), 1)
            truth["truths"].append({"class": cls, "box": [jitter(x1, width), jitter(y1, height),
                                                          jitter(x2, width), jitter(y2, height)]})

            key = f"{image}_crop{i}"
            noise = [rng.gauss(0, 0.12) for _ in range(DIM)]
            vectors[key] = [round(a + e, 6) for a, e in zip(label_vecs[label], noise)]

            own = set(tokens(label))
            fit = rng.choice([w for w in FITS if w not in own])
            colour = rng.choice(COLOURS)
            material = rng.choice([w for w in MATERIALS if w not in own])
            d1, d2 = rng.sample([w for w in DETAILS if w not in own], 2)
            body = f"a {fit} fit in {colour} {material} with {d1} {d2} finish"
            content = [fit, colour, material, d1, d2]
            prompt = f"this {label} features"
            style = i % 3
            if style == 0:
                captions[key] = f"{prompt} {body}"
            elif style == 1:
                captions[key] = f"  This {label.title()} Features  {body.capitalize()} "
            else:
                captions[key] = body

            cluster = "_".join(tokens(label))
            ids = []
            for variant in range(3):
                pick = rng.sample(content, 4 + (variant == 0))
                title = f"{rng.choice(FILLER).title()} {label.title()}"
                desc = f"{' '.join(pick)} {label}"
                pid = new_id()
                ids.append(pid)
                products.append(dict(id=pid, label=label, title=title, description=desc,
                                     image_uri=f"https://img.example.com/{pid}.jpg",
                                     retailer=rng.choice(RETAILERS),
                                     price=round(rng.uniform(19, 240), 2)))
            relevance[key] = ids
            planted_by_cluster[cluster] = (label, body, content)
        detection_docs.append(doc)
        truths.append(truth)

    # below-threshold and duplicate boxes exercise detection post-processing
    extra = detection_docs[1]["detections"]
    b = extra[0]["box"]
    extra.append({"class": extra[0]["class"], "confidence": round(extra[0]["confidence"] - 0.2, 3),
                  "box": [b[0] + 3, b[1] + 2, b[2] - 2, b[3] - 3]})
    detection_docs[3]["detections"].append({"class": "long_sleeve_top", "confidence": 0.12,
                                            "box": [10.0, 10.0, 90.0, 120.0]})

    # distractors: two per label, sharing at most one caption body token
    vocab = FITS + COLOURS + MATERIALS + DETAILS
    for label in labels:
        cluster = "_".join(tokens(label))
        avoid = set()
        if cluster in planted_by_cluster:
            _, body, _ = planted_by_cluster[cluster]
            avoid = set(tokens(body))
        for _ in range(2 if cluster in planted_by_cluster else 3):
            pool = [w for w in vocab if w not in avoid]
            words = rng.sample(pool, 4)
            if avoid:
                words[0] = rng.choice(sorted(avoid - {"a", "in", "with", "fit", "finish"}))
            pid = new_id()
            products.append(dict(id=pid, label=label,
                                 title=f"{rng.choice(FILLER).title()} {label.title()}",
                                 description=f"{' '.join(words)} {label}",
                                 image_uri=f"https://img.example.com/{pid}.jpg",
                                 retailer=rng.choice(RETAILERS),
                                 price=round(rng.uniform(19, 240), 2)))

    rng.shuffle(products)
    check(products, planted_by_cluster, relevance, vectors, label_vecs, detection_docs)

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "detections").mkdir(exist_ok=True)
    for doc in detection_docs:
        (OUT / "detections" / f"{doc['image']}.json").write_text(json.dumps(doc, indent=2) + "\n")
    all_vecs = dict(vectors)
    all_vecs.update({lab: [round(x, 6) for x in v] for lab, v in label_vecs.items()})
    (OUT / "embeddings.json").write_text(json.dumps({"dim": DIM, "vectors": dict(sorted(all_vecs.items()))}) + "\n")
    (OUT / "captions.json").write_text(json.dumps(dict(sorted(captions.items())), indent=2) + "\n")
    (OUT / "truths.json").write_text(json.dumps(truths, indent=2) + "\n")
    (OUT / "relevance.json").write_text(json.dumps(dict(sorted(relevance.items())), indent=2) + "\n")
    with open(OUT / "catalog.ndjson", "w") as f:
        for p in products:
            f.write(json.dumps(p) + "\n")
    n_det = sum(len(d["detections"]) for d in detection_docs)
    print(f"{len(detection_docs)} images, {n_det} raw detections, {len(products)} products", file=sys.stderr)


def check(products, planted_by_cluster, relevance, vectors, label_vecs, detection_docs):
    by_cluster = {}
    for p in products:
        by_cluster.setdefault("_".join(tokens(p["label"])), {})[p["id"]] = tokens(p["title"] + " " + p["description"])
    planted = {pid for ids in relevance.values() for pid in ids}
    for cluster, (label, body, content) in planted_by_cluster.items():
        docs = by_cluster[cluster]
        body_toks = set(tokens(body))
        query = tokens(label) + tokens(body)
        top = bm25_rank(docs, query)[:3]
        for pid, toks in docs.items():
            shared = len(body_toks & set(toks))
            if pid in planted:
                assert shared >= 4, (pid, shared)
                assert pid in top, (cluster, pid, top)
            else:
                assert shared <= 1, (pid, shared)
    for doc in detection_docs:
        for i, det in enumerate(doc["detections"]):
            key = f"{doc['image']}_crop{i}"
            if key not in vectors:
                continue
            cands = TAXONOMY[det["class"]]
            scores = sorted((cosine(vectors[key], label_vecs[l]), l) for l in cands)
            assert scores[-1][0] - scores[-2][0] > 0.05, (key, scores[-2:])


if __name__ == "__main__":
    main()
