#!/usr/bin/env python3
"""Generates the bundled fixture corpus under crates/core/fixtures.

Scenes are laid out on a grid so that no object's center falls inside
another object's box; that keeps the expected answers easy to compute here
without running the Rust interpreter. Everything is derived from a fixed
seed, so rerunning the script reproduces the committed files.
"""

import json
import random
from pathlib import Path

SEED = 1729
ROOT = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"

WIDTH, HEIGHT = 640, 480
COLS, ROWS = 5, 4
CELL_W, CELL_H = WIDTH // COLS, HEIGHT // ROWS

OBJECTS = {
    "cup": ["mug"],
    "bottle": [],
    "dog": ["puppy"],
    "cat": ["kitten"],
    "car": ["vehicle"],
    "chair": [],
    "bird": [],
    "book": [],
    "apple": [],
    "umbrella": [],
    "bench": [],
    "person": ["man"],
}
COLORS = ["red", "blue", "green", "white", "black", "yellow"]
SIGNATURE = "def execute_command(image) -> str:"
GROUNDING_SIGNATURE = "def execute_command(image) -> ImagePatch:"


def make_scene(rng, image_id, faulty):
    cells = rng.sample(range(COLS * ROWS), rng.randint(6, 11))
    names = rng.sample(sorted(OBJECTS), 5)
    objects = []
    for cell in cells:
        col, row = cell % COLS, cell // COLS
        name = rng.choice(names)
        w = rng.randint(30, CELL_W - 10)
        h = rng.randint(30, CELL_H - 10)
        left = col * CELL_W + rng.randint(2, CELL_W - w - 2)
        lower = row * CELL_H + rng.randint(2, CELL_H - h - 2)
        color = rng.choice(COLORS)
        attributes = {c: c == color for c in COLORS}
        attributes["large"] = w * h > 4000
        objects.append({
            "name": name,
            "synonyms": OBJECTS[name],
            "box": [left, lower, left + w, lower + h],
            "attributes": attributes,
            "depth": round(rng.uniform(1.0, 20.0), 2),
            "qa": {f"What color is the {name}?": color},
        })
    scene = {
        "image_id": image_id,
        "width": WIDTH,
        "height": HEIGHT,
        "default_answer": "unknown",
        "image_qa": {"Is it indoors?": rng.choice(["yes", "no"])},
        "objects": objects,
    }
    if faulty:
        # The fixture answers every color question wrongly.
        for o in objects:
            q = f"What color is the {o['name']}?"
            true = o["qa"][q]
            o["qa"][q] = next(c for c in COLORS if c != true)
        scene["faulty_qa"] = sorted({f"What color is the {o['name']}?" for o in objects})
    return scene


def found(scene, name):
    hits = [o for o in scene["objects"] if o["name"] == name or name in o["synonyms"]]
    return sorted(hits, key=lambda o: (o["box"][0], o["box"][1]))


def center_x(o):
    return (o["box"][0] + o["box"][2]) / 2


def color_of(o):
    return next(c for c in COLORS if o["attributes"][c])


def body(lines):
    return "\n".join("    " + l for l in lines)


def var(name):
    return name


# Each template returns (question, program, ground truth) or None when the
# scene cannot support it. `bug` selects a natural mistake.
def t_count(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    v = var(name)
    n = len(found(scene, name))
    ret = f"str(len({v}_patches) + 1)" if bug else f"str(len({v}_patches))"
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"return {ret}",
    ])
    return f"How many {name}s are there?", prog, str(n)


def t_exists(rng, scene, bug=False):
    name = rng.choice(sorted(OBJECTS))
    present = bool(found(scene, name))
    call = f"image_patch.exists('{name}')"
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"return bool_to_yesno(not {call})" if bug else f"return bool_to_yesno({call})",
    ])
    return f"Is there a {name} in the image?", prog, "yes" if present else "no"


def t_property(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    color = rng.choice(COLORS)
    first = found(scene, name)[0]
    v = var(name)
    check = f"{v}_patch.verify_property('{name}', '{color}')"
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"if len({v}_patches) == 0:",
        "    return 'no'",
        f"{v}_patch = {v}_patches[0]",
        f"return bool_to_yesno(not {check})" if bug else f"return bool_to_yesno({check})",
    ])
    return f"Is the {name} {color}?", prog, "yes" if first["attributes"][color] else "no"


def two_names(rng, scene):
    names = sorted({o["name"] for o in scene["objects"]})
    if len(names) < 2:
        return None
    return rng.sample(names, 2)


def t_left_of(rng, scene, bug=False):
    pair = two_names(rng, scene)
    if pair is None:
        return None
    a, b = pair
    oa, ob = found(scene, a)[0], found(scene, b)[0]
    if center_x(oa) == center_x(ob):
        return None
    op = ">" if bug else "<"
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{a}_patches = image_patch.find('{a}')",
        f"{b}_patches = image_patch.find('{b}')",
        f"if len({a}_patches) == 0 or len({b}_patches) == 0:",
        "    return 'no'",
        f"{a}_patch = {a}_patches[0]",
        f"{b}_patch = {b}_patches[0]",
        f"if {a}_patch.horizontal_center {op} {b}_patch.horizontal_center:",
        "    return 'yes'",
        "return 'no'",
    ])
    return f"Is the {a} to the left of the {b}?", prog, "yes" if center_x(oa) < center_x(ob) else "no"


def t_color(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    first = found(scene, name)[0]
    v = var(name)
    q = f"What color is the {name}?"
    idx = "-1" if bug else "0"
    if bug and len(found(scene, name)) < 2:
        return None
    if bug and color_of(found(scene, name)[-1]) == color_of(first):
        return None
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"if len({v}_patches) == 0:",
        f"    return image_patch.simple_query('{q}')",
        f"{v}_patch = {v}_patches[{idx}]",
        f"return {v}_patch.simple_query('{q}')",
    ])
    return q, prog, color_of(first)


def t_leftmost(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    objs = found(scene, name)
    if len(objs) < 2 and bug:
        return None
    target = min(objs, key=center_x)
    if bug and max(objs, key=center_x) is target:
        return None
    v = var(name)
    prog = GROUNDING_SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"{v}_patches.sort(key=lambda p: p.horizontal_center{', reverse=True' if bug else ''})",
        f"return {v}_patches[0]",
    ])
    return f"the leftmost {name}", prog, target["box"]


def area(o):
    b = o["box"]
    return (b[2] - b[0]) * (b[3] - b[1])


def t_largest(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    objs = found(scene, name)
    areas = [area(o) for o in objs]
    if len(set(areas)) != len(areas):
        return None
    target = max(objs, key=area)
    if bug and (len(objs) < 2 or min(objs, key=area) is target):
        return None
    v = var(name)
    fn = "min" if bug else "max"
    prog = GROUNDING_SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"{v}_patch = {fn}({v}_patches, key=lambda p: p.width * p.height)",
        f"return {v}_patch",
    ])
    return f"the biggest {name}", prog, target["box"]


def t_closer(rng, scene, bug=False):
    pair = two_names(rng, scene)
    if pair is None:
        return None
    a, b = pair
    da, db = found(scene, a)[0]["depth"], found(scene, b)[0]["depth"]
    if da == db:
        return None
    op = ">" if bug else "<"
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{a}_patch = image_patch.find('{a}')[0]",
        f"{b}_patch = image_patch.find('{b}')[0]",
        f"if {a}_patch.compute_depth() {op} {b}_patch.compute_depth():",
        f"    return '{a}'",
        f"return '{b}'",
    ])
    return f"Which is closer, the {a} or the {b}?", prog, a if da < db else b


def t_count_color(rng, scene, bug=False):
    name = rng.choice(sorted({o["name"] for o in scene["objects"]}))
    color = rng.choice(COLORS)
    n = sum(o["attributes"][color] for o in found(scene, name))
    v = var(name)
    cond = f"not p.verify_property('{name}', '{color}')" if bug else f"p.verify_property('{name}', '{color}')"
    if bug and n * 2 == len(found(scene, name)):
        return None
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"{v}_patches = image_patch.find('{name}')",
        f"{color}_{v}s = [p for p in {v}_patches if {cond}]",
        f"return f'{{len({color}_{v}s)}}'",
    ])
    return f"How many {color} {name}s are there?", prog, str(n)


def t_more(rng, scene, bug=False):
    pair = two_names(rng, scene)
    if pair is None:
        return None
    a, b = pair
    na, nb = len(found(scene, a)), len(found(scene, b))
    op = ">=" if bug else ">"
    if bug and na != nb:
        return None
    prog = SIGNATURE + "\n" + body([
        "image_patch = ImagePatch(image)",
        f"num_{a}s = len(image_patch.find('{a}'))",
        f"num_{b}s = len(image_patch.find('{b}'))",
        f"return bool_to_yesno(num_{a}s {op} num_{b}s)",
    ])
    return f"Are there more {a}s than {b}s?", prog, "yes" if na > nb else "no"


TEMPLATES = [
    t_count, t_exists, t_property, t_left_of, t_color,
    t_leftmost, t_largest, t_closer, t_count_color, t_more,
]


FIGURE_PROGRAM = (
    "def execute_command(image) -> str:\n"
    "    image_patch = ImagePatch(image)\n"
    "    image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)\n"
    "    return image_patch.simple_query('What item of furniture is not large?')"
)

FIGURE_FEEDBACK = (
    "-> None\n\n"
    "call         1 def execute_command(image) -> str:\n"
    "line         2     image_patch = ImagePatch(image)\n"
    "New var:....... image_patch = ImagePatch(left=0, right=500, upper=375, lower=0, height=375, width=500, horizontal_center=250.0, vertical_center=187.5)\n"
    "line         3     image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)\n"
    "Modified var:.. image_patch = 0\n"
    "line         4     return image_patch.simple_query('What item of furniture is not large?')\n"
    "exception    4     return image_patch.simple_query('What item of furniture is not large?')\n"
    "Exception:..... AttributeError: 'int' object has no attribute 'simple_query'\n"
    "Call ended by exception\n"
)

ROOM = {
    "image_id": "room",
    "width": 500,
    "height": 375,
    "default_answer": "unknown",
    "image_qa": {"What item of furniture is not large?": "lamp"},
    "objects": [
        {"name": "sofa", "synonyms": ["couch", "furniture"], "box": [40, 20, 300, 160],
         "attributes": {"large": True}, "depth": 3.0, "qa": {}},
        {"name": "lamp", "synonyms": ["furniture"], "box": [380, 30, 430, 250],
         "attributes": {"large": False}, "depth": 4.0, "qa": {}},
    ],
}


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def main():
    rng = random.Random(SEED)
    scenes_dir = ROOT / "scenes"
    golden_dir = ROOT / "golden"
    scenes_dir.mkdir(parents=True, exist_ok=True)
    golden_dir.mkdir(parents=True, exist_ok=True)

    clean = [make_scene(rng, f"s{i:03d}", faulty=False) for i in range(40)]
    faulty = [make_scene(rng, f"f{i:03d}", faulty=True) for i in range(6)]
    for scene in clean + faulty + [ROOM]:
        (scenes_dir / f"{scene['image_id']}.json").write_text(json.dumps(scene, indent=1) + "\n")

    pool, seen = [], set()
    while len(pool) < 200:
        template = TEMPLATES[len(pool) % len(TEMPLATES)]
        scene = rng.choice(clean)
        made = template(rng, scene)
        if made is None:
            continue
        question, program, gt = made
        key = (scene["image_id"], program)
        if key in seen:
            continue
        seen.add(key)
        pool.append({
            "id": f"p{len(pool):03d}",
            "question": question,
            "scene_ids": [scene["image_id"]],
            "ground_truth": gt,
            "program": program,
        })
    write_jsonl(ROOT / "pool.jsonl", pool)

    natural = []
    while len(natural) < 32:
        template = TEMPLATES[len(natural) % len(TEMPLATES)]
        scene = rng.choice(clean)
        made = template(rng, scene, bug=True)
        if made is None:
            continue
        question, program, gt = made
        natural.append({
            "id": f"n{len(natural):03d}",
            "question": question,
            "scene_ids": [scene["image_id"]],
            "ground_truth": gt,
            "program": program,
        })
    # Correct programs whose perception answers are wrong by construction.
    for scene in faulty:
        for _ in range(2):
            question, program, gt = t_color(rng, scene)
            natural.append({
                "id": f"n{len(natural):03d}",
                "question": question,
                "scene_ids": [scene["image_id"]],
                "ground_truth": gt,
                "program": program,
            })
    write_jsonl(ROOT / "natural_incorrect.jsonl", natural)

    (golden_dir / "figure_program.py").write_text(FIGURE_PROGRAM + "\n")
    (golden_dir / "figure_feedback.txt").write_text(FIGURE_FEEDBACK)


if __name__ == "__main__":
    main()
