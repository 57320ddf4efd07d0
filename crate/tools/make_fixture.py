#!/usr/bin/env python3
"""Generates the 50-screen test dataset under crates/uisum/tests/fixtures/mini.

The script also computes the dataset statistics the Rust tests expect, using
its own tokenizer, stop-phrase removal and box geometry, and writes them to
expected.json next to the data. Re-running it reproduces identical files.
"""

import csv
import json
import random
import re
import shutil
from itertools import combinations
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent / "crates" / "uisum" / "tests" / "fixtures" / "mini"
FRAME = (1440, 2560)
SHOT = (90, 160)
SCALE = FRAME[0] // SHOT[0]
DIM = 16

APPS = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet"]
SPLITS = {"train": APPS[:6], "val": APPS[6:8], "test": APPS[8:]}

TOPICS = {
    "login": (["Sign in", "Username", "Password", "Forgot password"],
              ["login page of {app}", "sign in screen in the app", "page to log in with username and password",
               "login screen with password field", "user login page of the app"]),
    "settings": (["Settings", "Notifications", "Privacy", "About"],
                 ["settings page of {app}", "settings screen with notification options",
                  "page showing privacy settings in this app", "settings menu", "options page for notifications"]),
    "search": (["Search", "Recent searches", "Clear history"],
               ["search page of {app}", "search screen with recent searches", "page to search items in the app",
                "search bar with history", "screen to search"]),
    "profile": (["Profile", "Edit profile", "Followers", "Following"],
                ["profile page of {app}", "user profile with followers", "page to edit profile",
                 "profile screen of a user on the app", "account profile page"]),
    "map": (["Map", "Directions", "Nearby places"],
            ["map page of {app}", "map showing nearby places", "screen with directions on a map",
             "map view in this app", "page displaying a map"]),
    "cart": (["Cart", "Checkout", "Total", "Remove item"],
             ["cart page of {app}", "shopping cart with checkout button", "page showing items in the cart",
              "checkout screen of the app", "cart with total price"]),
    "chat": (["Messages", "Type a message", "Send"],
             ["chat page of {app}", "chat screen to send messages", "page with a message box",
              "messaging screen in the app", "conversation page"]),
    "news": (["Top stories", "Headlines", "Read more"],
             ["news page of {app}", "list of top news stories", "page showing headlines in this app",
              "news feed screen", "screen with news headlines"]),
    "music": (["Now playing", "Play", "Next", "Playlist"],
              ["music page of {app}", "music player with play button", "now playing screen of the app",
               "page to play songs", "music playlist screen"]),
    "calendar": (["Calendar", "Today", "Add event"],
                 ["calendar page of {app}", "calendar showing events today", "page to add an event",
                  "calendar screen in this app", "monthly calendar view"]),
}
TOPIC_NAMES = list(TOPICS)
COLORS = {t: ((37 * i + 60) % 256, (91 * i + 120) % 256, (53 * i + 200) % 256) for i, t in enumerate(TOPIC_NAMES)}

STOP_PHRASES = ["in the app", "in this app", "in an app", "in a app",
                "of the app", "of this app", "on the app", "on this app"]

MISSING_SCREENSHOT = "1050"
MISSING_HIERARCHY = "1051"
SIX_SUMMARIES = "1003"
FOUR_SUMMARIES = "1011"
BLANK_ROW = "1020"
CLIPPED_SFA = "1030"


def package(app):
    return f"com.fixture.{app}"


def screen_plan():
    """(screen_id, app, topic) for the 50 loadable screens."""
    plan = []
    for a, app in enumerate(APPS):
        for j in range(5):
            topic = TOPIC_NAMES[(a * 5 + j) % 10 if a % 2 == 0 else (a * 5 + j + 3) % 10]
            plan.append((str(1000 + a * 5 + j), app, topic))
    return plan


def node(cls, box, text=None, clickable=False, visible=True, children=()):
    n = {"class": cls, "bounds": list(box), "clickable": clickable, "visible-to-user": visible,
         "children": list(children)}
    if text is not None:
        n["text"] = text
    return n


def hierarchy(app, topic, rng):
    labels = TOPICS[topic][0]
    rows = []
    y = 200
    rows.append(node("android.widget.TextView", (80, y, 1360, y + 160), f"{labels[0]} {app.capitalize()}"))
    y += 220
    for k, label in enumerate(labels[1:]):
        cls = "android.widget.Button" if k % 2 == 0 else "android.widget.EditText"
        h = 140 + 20 * rng.randrange(3)
        rows.append(node(cls, (120, y, 1320, y + h), label, clickable=cls.endswith("Button")))
        y += h + 60
    rows.append(node("android.widget.ImageView", (200, y, 1240, min(y + 600, 2400))))
    rows.append(node("android.view.View", (0, 0, 10, 10), visible=False))
    content = node("android.widget.LinearLayout", (0, 96, 1440, 2560), children=rows)
    toolbar = node("android.widget.FrameLayout", (0, 0, 1440, 96), children=[
        node("android.widget.ImageButton", (0, 0, 96, 96), clickable=True),
    ])
    root = node("com.android.internal.policy.PhoneWindow$DecorView", (0, 0) + FRAME,
                children=[toolbar, None, content])
    return {"activity_name": f"{package(app)}/{package(app)}.{topic.capitalize()}Activity",
            "activity": {"root": root}}


def count_nodes(n):
    if not isinstance(n, dict):
        return 0
    return 1 + sum(count_nodes(c) for c in n.get("children", []))


def draw(h, topic, path):
    img = Image.new("RGB", SHOT, COLORS[topic])
    d = ImageDraw.Draw(img)

    def walk(n, depth):
        if not isinstance(n, dict):
            return
        l, t, r, b = (v // SCALE for v in n["bounds"])
        if depth > 0 and n.get("visible-to-user", True) and r > l and b > t:
            shade = tuple((c + 40 * depth) % 256 for c in COLORS[topic])
            d.rectangle([l, t, r - 1, b - 1], fill=shade)
        for c in n.get("children", []):
            walk(c, depth + 1)

    walk(h["activity"]["root"], 0)
    img.save(path)


def sfa_boxes(sid, rng):
    n = int(sid) % 6
    boxes = []
    for k in range(n):
        l = rng.randrange(0, 40)
        t = rng.randrange(0, 80)
        boxes.append([k, l, t, l + rng.randrange(20, 50), t + rng.randrange(30, 80)])
    if sid == CLIPPED_SFA:
        boxes.append([len(boxes), 60, 120, 130, 200])
    return boxes


def words(text):
    return re.findall(r"[^\W_]+", text.lower())


def strip(text):
    out = " ".join(text.split())
    while True:
        before = out
        for p in STOP_PHRASES:
            out = " ".join(re.sub(r"(?<![^\W_])" + re.escape(p) + r"(?![^\W_])", " ", out,
                                  flags=re.IGNORECASE).split())
        if out == before:
            break
    return out if out else " ".join(text.split())


def clip(box):
    l, t, r, b = box
    l, r = max(0, min(l, SHOT[0])), max(0, min(r, SHOT[0]))
    t, b = max(0, min(t, SHOT[1])), max(0, min(b, SHOT[1]))
    return [l, t, r, b]


def area(b):
    return max(0, b[2] - b[0]) * max(0, b[3] - b[1])


def iou(a, b):
    inter = area([max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3])]) \
        if min(a[2], b[2]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[1], b[1]) else 0
    union = area(a) + area(b) - inter
    return inter / union if union > 0 else 0.0


def main():
    rng = random.Random(20240601)
    if ROOT.exists():
        shutil.rmtree(ROOT)
    (ROOT / "hierarchies").mkdir(parents=True)
    (ROOT / "screenshots").mkdir()

    plan = screen_plan()
    rows, sfa_rows, node_counts, vocab_words = [], [], {}, set()
    kept = {}
    for sid, app, topic in plan:
        h = hierarchy(app, topic, rng)
        (ROOT / "hierarchies" / f"{sid}.json").write_text(json.dumps(h, indent=1))
        node_counts[sid] = count_nodes(h["activity"]["root"])
        draw(h, topic, ROOT / "screenshots" / f"{sid}.png")
        summaries = [s.format(app=app) for s in TOPICS[topic][1]]
        if sid == SIX_SUMMARIES:
            summaries.append(f"another {topic} page")
        if sid == FOUR_SUMMARIES:
            summaries = summaries[:4]
        for s in summaries:
            rows.append((sid, s))
        if sid == BLANK_ROW:
            rows.append((sid, "   "))
        kept[sid] = summaries[:5]
        for b in sfa_boxes(sid, rng):
            sfa_rows.append([sid] + b)
        for lbl in TOPICS[topic][0]:
            vocab_words.update(words(lbl))
        vocab_words.update(words(app))
        for s in summaries:
            vocab_words.update(words(s))

    # a hierarchy without a screenshot and a screenshot without a hierarchy
    h = hierarchy("alpha", "login", rng)
    (ROOT / "hierarchies" / f"{MISSING_SCREENSHOT}.json").write_text(json.dumps(h))
    draw(h, "login", ROOT / "screenshots" / f"{MISSING_HIERARCHY}.png")
    for sid in (MISSING_SCREENSHOT, MISSING_HIERARCHY):
        for s in TOPICS["login"][1]:
            rows.append((sid, s.format(app="alpha")))

    with open(ROOT / "summaries.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["screenId", "summary"])
        w.writerows(rows)
    with open(ROOT / "sfa.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["screenId", "labelerIndex", "left", "top", "right", "bottom"])
        w.writerows(sfa_rows)
    with open(ROOT / "app_details.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["appId", "description"])
        for app in APPS[:-1]:
            desc = f"{app.capitalize()} is an app for daily tasks and news"
            w.writerow([package(app), desc])
            vocab_words.update(words(desc))
    for name, apps in SPLITS.items():
        (ROOT / f"{name}_apps.txt").write_text("".join(package(a) + "\n" for a in apps))

    # word vectors: every fixture word except a few left out on purpose
    missing = {"privacy", "headlines", "playlist"}
    vrng = random.Random(7)
    with open(ROOT / "glove.txt", "w") as f:
        for wd in sorted(vocab_words - missing):
            f.write(wd + " " + " ".join(f"{vrng.uniform(-1, 1):.5f}" for _ in range(DIM)) + "\n")

    # expected statistics
    app_of = {sid: app for sid, app, _ in plan}
    split_of = {package(a): name for name, apps in SPLITS.items() for a in apps}
    per_split = {}
    for name in SPLITS:
        sids = [s for s in kept if split_of[package(app_of[s])] == name]
        per_split[name] = {"apps": len({app_of[s] for s in sids}), "screens": len(sids),
                           "summaries": sum(len(kept[s]) for s in sids)}
    lengths = [len(words(strip(s))) for ss in kept.values() for s in ss]
    boxes = {}
    clipped = 0
    for r in sfa_rows:
        b = clip(r[2:])
        clipped += b != r[2:]
        boxes.setdefault(r[0], []).append(b)
    coverage = [area(b) / (SHOT[0] * SHOT[1]) for bs in boxes.values() for b in bs]
    ious = [sum(iou(a, b) for a, b in combinations(bs, 2)) / (len(bs) * (len(bs) - 1) / 2)
            for bs in boxes.values() if len(bs) >= 2]
    expected = {
        "screens": len(kept),
        "summaries": sum(len(v) for v in kept.values()),
        "apps": len(APPS),
        "splits": per_split,
        "skipped": [MISSING_SCREENSHOT, MISSING_HIERARCHY],
        "dropped_summaries": 1,
        "blank_summaries": 1,
        "clipped_sfa_boxes": clipped,
        "mean_length": sum(lengths) / len(lengths),
        "sfa_boxes": len(coverage),
        "sfa_coverage": sum(coverage) / len(coverage),
        "sfa_iou": sum(ious) / len(ious),
        "sfa_screens_with_pairs": len(ious),
        "node_counts": node_counts,
    }
    (ROOT / "expected.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n")
    print(json.dumps({k: v for k, v in expected.items() if k != "node_counts"}, indent=1))


if __name__ == "__main__":
    main()
