#!/usr/bin/env python3
"""Regenerates the committed mini fixture dataset under fixtures/mini/.

The output is deterministic (fixed numpy seed); rerunning it must not change
any committed file. Region features and word vectors are synthetic stand-ins
for detector output and GloVe vectors.
"""

import json
import os
import sys

import numpy as np

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures", "mini")
FEATURE_DIM = 2048
EMBED_DIM = 300

IMAGES = {
    81721: [("person", 0.95), ("skis", 0.91), ("snow", 0.88), ("mountain", 0.74), ("tree", 0.52)],
    100002: [("cake", 0.96), ("plate", 0.89), ("table", 0.81), ("fork", 0.63)],
    100003: [("knife", 0.93), ("table", 0.90), ("bread", 0.77), ("cup", 0.55)],
    100004: [("flower", 0.97), ("vase", 0.86), ("table", 0.61)],
    100005: [("dog", 0.95), ("cat", 0.91), ("dog", 0.82), ("horse", 0.71), ("grass", 0.60)],
    100006: [("umbrella", 0.94), ("beach", 0.88), ("person", 0.80), ("sand", 0.72)],
    100007: [("dog", 0.93), ("ball", 0.84), ("grass", 0.70)],
    100008: [("lemon", 0.92), ("bowl", 0.80), ("table", 0.66)],
    100009: [("donut", 0.95), ("plate", 0.83), ("cup", 0.60)],
    100010: [("snow", 0.90), ("tree", 0.85), ("person", 0.76), ("house", 0.58)],
    100011: [("cow", 0.94), ("sheep", 0.90), ("grass", 0.81), ("fence", 0.64)],
    100012: [("orange", 0.91), ("knife", 0.84), ("table", 0.70)],
    100013: [("banana", 0.93), ("lemon", 0.87), ("bowl", 0.75)],
    100014: [("skis", 0.92), ("person", 0.90), ("mountain", 0.83), ("snow", 0.78)],
    100015: [("cat", 0.95), ("sofa", 0.85), ("pillow", 0.62)],
    100016: [("flower", 0.94), ("grass", 0.80), ("tree", 0.66)],
    100017: [("chocolate", 0.93), ("cup", 0.81), ("table", 0.70)],
    100018: [("umbrella", 0.91), ("rain", 0.82), ("person", 0.77), ("street", 0.60)],
    100019: [("horse", 0.94), ("person", 0.88), ("fence", 0.72)],
    100020: [("scissors", 0.92), ("paper", 0.86), ("table", 0.68)],
}

# (question_id, image_id, question, answers)
QA = [
    (817215, 81721, "How old do you have to be in Canada to do this?", ["16", "16", "18"]),
    (817216, 81721, "What sport is this?", ["skiing", "skiing", "skiing"]),
    (1000021, 100002, "How this taste?", ["sweet", "sweet", "sweet"]),
    (1000022, 100002, "What is the use of object on table?", ["eating", "eating", "food"]),
    (1000031, 100003, "What is the use of object on table?", ["cutting", "cutting", "cutting"]),
    (1000041, 100004, "Which flower is this?", ["daffodil", "daffodil", "narcissus"]),
    (1000042, 100004, "What color is this flower?", ["yellow", "yellow", "yellow"]),
    (1000051, 100005, "How many mammals in the image?", ["4", "4", "4"]),
    (1000052, 100005, "What is the dog capable of?", ["barking", "barking", "running"]),
    (1000061, 100006, "What is the use of this umbrella?", ["shading", "shading", "shade"]),
    (1000071, 100007, "What is the dog capable of?", ["barking", "barking", "barking"]),
    (1000072, 100007, "What part of the dog is this?", ["tail", "tail", "tail"]),
    (1000081, 100008, "How this taste?", ["sour", "sour", "sour"]),
    (1000091, 100009, "How this taste?", ["sweet", "sweet", "sweet"]),
    (1000092, 100009, "What is the use of object on plate?", ["eating", "eating", "eating"]),
    (1000101, 100010, "What season of the year is this?", ["winter", "winter", "winter"]),
    (1000111, 100011, "What kind of animal is this cow?", ["mammal", "mammal", "mammal"]),
    (1000112, 100011, "How many animals in the image?", ["2", "2", "2"]),
    (1000121, 100012, "What is the use of this knife?", ["cutting", "cutting", "cutting"]),
    (1000122, 100012, "How this taste?", ["sour", "sour", "sweet"]),
    (1000131, 100013, "What color is this banana?", ["yellow", "yellow", "yellow"]),
    (1000141, 100014, "What sport is this?", ["skiing", "skiing", "skiing"]),
    (1000142, 100014, "In which season was this photo taken?", ["winter", "winter", "winter"]),
    (1000151, 100015, "What kind of animal is this?", ["mammal", "mammal", "mammal"]),
    (1000152, 100015, "What part of the cat is this?", ["tail", "tail", "tail"]),
    (1000161, 100016, "Which flower is this?", ["daffodil", "daffodil", "daffodil"]),
    (1000171, 100017, "How this taste?", ["sweet", "sweet", "sweet"]),
    (1000181, 100018, "What is the use of this umbrella?", ["shading", "shading", "dry"]),
    (1000191, 100019, "How many mammals can you see?", ["2", "2", "2"]),
    (1000201, 100020, "What is the use of object on table?", ["cutting", "cutting", "cutting"]),
]

# (head, relation, tail, surface)
KNOWLEDGE = [
    ("Skiing", "RelatedTo", "Mountains", None),
    ("Tajmahal", "AtLocation", "Agra", None),
    ("Dog", "IsA", "Mammal", None),
    ("Dog", "CapableOf", "barking", None),
    ("Umbrella", "UsedFor", "shading", "[Umbrella] is used for shading in [sunny] place."),
    ("Dog", "Desires", "Playing", None),
    ("Donuts", "HasProperties", "sweet", None),
    ("Dog", "HasA", "tail", None),
    ("Dog", "PartOf", "canines", None),
    ("Dog", "ReceivesAction", "Fed by human", None),
    ("Chocolate", "CreatedBy", "Coco", None),
    ("Dog", "RelatedTo", "cat", None),
    ("Dog", "RelatedTo", "bone", None),
    ("Dog", "AtLocation", "kennel", None),
    ("Dog", "AtLocation", "park", None),
    ("Dog", "CapableOf", "running", None),
    ("Dog", "CapableOf", "fetch", None),
    ("Dog", "HasA", "fur", None),
    ("Dog", "HasA", "paws", None),
    ("Dog", "IsA", "pet", None),
    ("Dog", "IsA", "animal", None),
    ("Dog", "UsedFor", "guarding", None),
    ("Dog", "Desires", "food", None),
    ("Dog", "RelatedTo", "leash", None),
    ("Dog", "UsedFor", "companionship", None),
    ("Umbrella", "UsedFor", "rain", "[Umbrella] is used for [rain]."),
    ("Umbrella", "AtLocation", "beach", None),
    ("Cake", "HasProperties", "sweet", "[Cake] is [sweet]."),
    ("Cake", "IsA", "dessert", None),
    ("Cake", "AtLocation", "bakery", None),
    ("Donut", "HasProperties", "sweet", None),
    ("Donut", "IsA", "pastry", None),
    ("Chocolate", "HasProperties", "sweet", None),
    ("Lemon", "HasProperties", "sour", "[Lemon] tastes [sour]."),
    ("Lemon", "HasProperties", "yellow", None),
    ("Orange", "HasProperties", "sour", None),
    ("Banana", "HasProperties", "yellow", None),
    ("Banana", "IsA", "fruit", None),
    ("Knife", "UsedFor", "cutting", "You can use [a knife] for [cutting]."),
    ("Scissors", "UsedFor", "cutting", None),
    ("Fork", "UsedFor", "eating", None),
    ("Plate", "UsedFor", "eating", None),
    ("Flower", "RelatedTo", "daffodil", None),
    ("Flower", "HasProperties", "yellow", None),
    ("Cat", "IsA", "mammal", None),
    ("Cat", "HasA", "tail", None),
    ("Cow", "IsA", "mammal", None),
    ("Horse", "IsA", "mammal", None),
    ("Sheep", "IsA", "mammal", None),
    ("Skis", "UsedFor", "skiing", None),
    ("Snow", "AtLocation", "winter", None),
    ("Snow", "HasProperties", "cold", None),
    ("Mountain", "UsedFor", "skiing", None),
    ("Table", "UsedFor", "eating", None),
    ("Table", "IsA", "furniture", None),
]

TAXONOMY = [
    ("abstraction", "entity"), ("attribute", "abstraction"), ("taste", "attribute"),
    ("sweet", "taste"), ("sour", "taste"), ("color", "attribute"), ("yellow", "color"),
    ("number", "abstraction"), ("2", "number"), ("4", "number"), ("16", "number"),
    ("18", "number"), ("time", "abstraction"), ("season", "time"), ("winter", "season"),
    ("act", "entity"), ("sport", "act"), ("skiing", "sport"), ("action", "act"),
    ("cutting", "action"), ("eating", "action"), ("barking", "action"),
    ("running", "action"), ("shading", "action"), ("shade", "shading"), ("dry", "action"),
    ("food", "entity"), ("organism", "entity"), ("animal", "organism"),
    ("mammal", "animal"), ("plant", "organism"), ("flower", "plant"),
    ("daffodil", "flower"), ("narcissus", "flower"), ("body_part", "organism"),
    ("tail", "body_part"),
]


def tokens(text):
    out = []
    for raw in text.lower().split():
        tok = raw.strip("?.,!;:\"'()[]")
        if tok:
            out.append(tok[:20])
    return out


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(20211)

    questions = [{"image_id": img, "Question": q, "question_id": qid} for qid, img, q, _ in QA]
    annotations = [
        {
            "image_id": img,
            "question_id": qid,
            "answers": [{"answer": a, "answer_id": i + 1} for i, a in enumerate(ans)],
        }
        for qid, img, _, ans in QA
    ]
    with open(os.path.join(OUT, "questions.json"), "w") as f:
        json.dump(questions, f, indent=2)
        f.write("\n")
    with open(os.path.join(OUT, "annotations.json"), "w") as f:
        json.dump(annotations, f, indent=2)
        f.write("\n")

    labels = sorted({label for objs in IMAGES.values() for label, _ in objs})
    base = {}
    for label in labels:
        vec = np.zeros(FEATURE_DIM)
        active = rng.choice(FEATURE_DIM, size=FEATURE_DIM // 10, replace=False)
        vec[active] = np.abs(rng.normal(0.0, 0.05, size=active.size))
        base[label] = vec

    attributes = []
    for image_id in sorted(IMAGES):
        objs = []
        for k, (label, score) in enumerate(IMAGES[image_id]):
            feat = base[label] * (0.5 + score / 2.0)
            noisy = rng.choice(FEATURE_DIM, size=16, replace=False)
            feat[noisy] += np.abs(rng.normal(0.0, 0.02, size=noisy.size))
            bbox = [float(8 * k + 4), float(6 * k + 2), float(40 + 10 * k), float(30 + 8 * k)]
            objs.append({
                "label": label,
                "score": score,
                "bbox": bbox,
                "feature": [0 if v == 0 else round(float(v), 4) for v in feat],
            })
        attributes.append({"image_id": image_id, "objects": objs})
    with open(os.path.join(OUT, "attributes.json"), "w") as f:
        json.dump(attributes, f, separators=(",", ":"))
        f.write("\n")

    store = []
    for head, rel, tail, surface in KNOWLEDGE:
        rec = {"head": head, "relation": rel, "tail": tail}
        if surface is not None:
            rec["surface"] = surface
        rec["weight"] = 1.0
        store.append(rec)
    with open(os.path.join(OUT, "knowledge_store.json"), "w") as f:
        json.dump(store, f, indent=2)
        f.write("\n")

    words = set(labels)
    for _, _, q, ans in QA:
        words.update(tokens(q))
        for a in ans:
            words.update(tokens(a))
    for head, rel, tail, _ in KNOWLEDGE:
        words.update(tokens(head))
        words.update(tokens(tail))
    with open(os.path.join(OUT, "embeddings.txt"), "w") as f:
        for word in sorted(words):
            vec = rng.normal(0.0, 0.4, size=EMBED_DIM)
            f.write(word + " " + " ".join(f"{v:.5f}" for v in vec) + "\n")

    with open(os.path.join(OUT, "taxonomy.tsv"), "w") as f:
        for child, parent in TAXONOMY:
            f.write(f"{child}\t{parent}\n")

    # 8-question subset used by the overfit preset.
    sub = os.path.join(OUT, "overfit")
    os.makedirs(sub, exist_ok=True)
    with open(os.path.join(OUT, "questions.json")) as f:
        sub_q = json.load(f)[:8]
    with open(os.path.join(OUT, "annotations.json")) as f:
        sub_a = json.load(f)[:8]
    for name, doc in (("questions.json", sub_q), ("annotations.json", sub_a)):
        with open(os.path.join(sub, name), "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")

    return 0


if __name__ == "__main__":
    sys.exit(main())
