#!/usr/bin/env python3
"""Writes the JSON Schemas in schemas/. Shared definitions are copied into
each file's $defs so every schema is self-contained."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "schemas"
DRAFT = "https://json-schema.org/draft/2020-12/schema"

NUM = {"type": "number"}
STR = {"type": "string"}
NONEMPTY = {"type": "string", "minLength": 1}
POS_INT = {"type": "integer", "minimum": 1}
COUNT = {"type": "integer", "minimum": 0}
B64 = {"type": "string", "contentEncoding": "base64", "minLength": 1}
VEC = {"type": "array", "items": NUM, "minItems": 1}
DIMS = {"width": POS_INT, "height": POS_INT}


def obj(props, required=None, extra=False):
    return {
        "type": "object",
        "required": list(props) if required is None else required,
        "additionalProperties": extra,
        "properties": props,
    }


def ref(name):
    return {"$ref": f"#/$defs/{name}"}


DEFS = {
    "box": {"type": "array", "items": NUM, "minItems": 4, "maxItems": 4,
            "description": "[x1, y1, x2, y2] in pixels"},
    "garment_class": {"enum": ["long_sleeve_top", "short_sleeve_top", "long_sleeve_outerwear",
                               "trousers", "shorts"]},
    "detection": obj({"class": ref("garment_class"),
                      "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                      "box": ref("box")}),
    "product": obj({"id": NONEMPTY, "label": NONEMPTY, "title": STR, "description": STR,
                    "image_uri": STR, "retailer": STR, "price": NUM},
                   ["id", "label", "title", "description", "image_uri"]),
    "term": obj({"term": NONEMPTY, "tf": POS_INT, "idf": NUM, "tf_component": NUM,
                 "contribution": NUM}),
    "explanation": obj({"terms": {"type": "array", "items": ref("term")},
                        "proximity_bonus": {"type": "number", "minimum": 0}}),
    "hit": obj({"score": {"type": "number", "exclusiveMinimum": 0},
                "explanation": ref("explanation"), "product": ref("product")}),
    "label_score": obj({"label": NONEMPTY, "score": {"type": "number", "minimum": -1, "maximum": 1}}),
    "classification": obj({"label": NONEMPTY,
                           "score": {"type": "number", "minimum": -1, "maximum": 1},
                           "ranked": {"type": "array", "items": ref("label_score"), "minItems": 1}}),
    "caption": obj({"label": NONEMPTY, "prompt": NONEMPTY, "body": NONEMPTY, "full_text": NONEMPTY}),
    "group_ok": obj({"status": {"const": "ok"}, "detection": ref("detection"), "crop_key": NONEMPTY,
                     "crop_box": ref("box"), "assigned_label": NONEMPTY,
                     "classification": ref("classification"), "caption": ref("caption"),
                     "cluster": NONEMPTY, "query_text": NONEMPTY, "fallback": {"type": "boolean"},
                     "hits": {"type": "array", "items": ref("hit")}}),
    "group_error": obj({"status": {"const": "error"}, "detection": ref("detection"),
                        "crop_key": NONEMPTY,
                        "error": obj({"code": NONEMPTY, "message": STR})}),
    "cluster_info": obj({"name": NONEMPTY, "doc_count": COUNT}),
    "rejection": obj({"line": POS_INT, "code": NONEMPTY, "reason": STR}),
}

CROP = {"image": B64, **DIMS, "box": ref("box"), "key": NONEMPTY}

SCHEMAS = {
    # inference sidecar
    "detect.request": ("POST /detect request", obj({"image": B64, **DIMS})),
    "detect.response": ("POST /detect response",
                        obj({"detections": {"type": "array", "items": ref("detection")}})),
    "embed_image.request": ("POST /embed_image request", obj(CROP)),
    "embed_image.response": ("POST /embed_image response", obj({"dim": POS_INT, "values": VEC})),
    "embed_text.request": ("POST /embed_text request",
                           obj({"texts": {"type": "array", "items": STR, "minItems": 1}})),
    "embed_text.response": ("POST /embed_text response",
                            obj({"dim": POS_INT, "vectors": {"type": "array", "items": VEC}})),
    "caption.request": ("POST /caption request", obj({**CROP, "prompt": NONEMPTY})),
    "caption.response": ("POST /caption response", obj({"text": STR})),
    # fixture files
    "fixture.detections": ("Fixture detections file",
                           obj({"image": NONEMPTY, **DIMS,
                                "detections": {"type": "array", "items": ref("detection")}},
                               ["image", "width", "height"])),
    "fixture.embeddings": ("Fixture embeddings file",
                           obj({"dim": POS_INT, "vectors": {"type": "object", "additionalProperties": VEC}})),
    "fixture.captions": ("Fixture captions file", {"type": "object", "additionalProperties": STR}),
    # HTTP API
    "api.error": ("Error body of every /v1 endpoint",
                  obj({"status": {"enum": [400, 404, 422, 500, 502]}, "code": NONEMPTY, "message": STR})),
    "api.ingest_report": ("POST /v1/catalog/bulk response",
                          obj({"accepted": COUNT,
                               "rejected": {"type": "array", "items": ref("rejection")},
                               "clusters_touched": {"type": "array", "items": NONEMPTY}})),
    "api.search.response": ("GET /v1/search response",
                            obj({"cluster": {"type": ["string", "null"]}, "fallback": {"type": "boolean"},
                                 "hits": {"type": "array", "items": ref("hit")}})),
    "api.recommend.request": ("POST /v1/recommend request",
                              obj({"image": NONEMPTY, **DIMS, "data": B64, "top_k": POS_INT}, ["image"])),
    "api.recommend.response": ("POST /v1/recommend response",
                               obj({"image": NONEMPTY, "status": {"enum": ["ok", "no_detections"]},
                                    "groups": {"type": "array",
                                               "items": {"oneOf": [ref("group_ok"), ref("group_error")]}}})),
    "api.product": ("GET /v1/products/{id} response", ref("product")),
    "api.clusters": ("GET /v1/clusters response",
                     obj({"clusters": {"type": "array", "items": ref("cluster_info")}})),
    "api.health": ("GET /v1/health response",
                   obj({"status": {"const": "ok"}, "mode": {"enum": ["fixtures", "remote", "catalog_only"]},
                        "records": COUNT, "clusters": COUNT})),
}


def used_defs(node, found):
    if isinstance(node, dict):
        r = node.get("$ref")
        if r and r.startswith("#/$defs/"):
            name = r.split("/")[-1]
            if name not in found:
                found.add(name)
                used_defs(DEFS[name], found)
        for v in node.values():
            used_defs(v, found)
    elif isinstance(node, list):
        for v in node:
            used_defs(v, found)
    return found


def main():
    OUT.mkdir(exist_ok=True)
    for name, (title, body) in SCHEMAS.items():
        doc = {"$schema": DRAFT, "title": title, **body}
        defs = sorted(used_defs(body, set()))
        if defs:
            doc["$defs"] = {d: DEFS[d] for d in defs}
        (OUT / f"{name}.schema.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(SCHEMAS)} schemas to {OUT}")


if __name__ == "__main__":
    main()
