#!/usr/bin/env python3
"""Regenerates tests/fixtures: tiny synthetic videos, a gaze heatmap,
scripted model responses, references and golden frame checksums.

Usage: python3 tools/make_fixtures.py [output_dir]
"""

import json
import os
import sys

import cv2
import numpy as np

STAGE1_K = 10
MODELS = ["GLM-4.5V", "Qwen3-VL-235B-A22B-Thinking"]
GRID = [(k, t) for k in (2, 6) for t in (1, 2)]

VIDEOS = {
    # video_id: (frame_count, fps, width, height)
    "v01": (40, 30.0, 48, 32),
    "v02": (57, 30.0, 48, 32),
    "v03": (23, 10.0, 40, 24),
}


CIDER_DESK = [
    {"item_id": "d1", "candidate": "a small dog crosses the road",
     "references": ["a small dog crosses the road from left to right",
                    "a dog runs across the road"]},
    {"item_id": "d2", "candidate": "the white car stops at the crossing",
     "references": ["a white car brakes before the pedestrian crossing"]},
    {"item_id": "d3", "candidate": "a truck merges into the right lane",
     "references": ["a truck cuts into the lane on the right",
                    "the truck merges and the cyclist swerves",
                    "a merging truck squeezes a cyclist"]},
]


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def frame_pixels(idx, w, h, seed):
    """BGR frame with a square moving left to right over a gradient."""
    img = np.zeros((h, w, 3), np.uint8)
    img[:, :, 0] = np.linspace(0, 255, w, dtype=np.uint8)[None, :]
    img[:, :, 1] = (seed * 40) % 256
    img[:, :, 2] = np.linspace(255, 0, h, dtype=np.uint8)[:, None]
    x = (idx * 2) % max(1, w - 8)
    img[h // 2 - 4 : h // 2 + 4, x : x + 8] = (255, 255, 255)
    return img


def write_video(path, frames, fps, w, h):
    writer = cv2.VideoWriter(path, cv2.VideoWriter_fourcc(*"FFV1"), fps, (w, h))
    if not writer.isOpened():
        sys.exit("FFV1 writer unavailable")
    for f in frames:
        writer.write(f)
    writer.release()


def reference_frames(n, k):
    refs = list(range(k - 1, n, k))
    if n % k:
        refs.append(n - 1)
    return refs


def report_doc(event, severity, ego, counts, tti, before, after):
    return {
        "event_type": event,
        "crash_severity": severity,
        "ego_involved": ego,
        "entity_counts": dict(
            zip(["vehicles", "pedestrians", "cyclists_or_scooters", "animals"], counts)
        ),
        "time_to_incident_frames": tti,
        "caption_before": before,
        "caption_after": after,
    }


def scripted_entries():
    out = []
    captions = {
        "v01": [
            ("a white car drives ahead on a straight road", []),
            ("the white car slows down near an intersection", [("vehicle", "car braking ahead")]),
            ("a pedestrian steps onto the crossing", [("pedestrian", "person entering the road")]),
            ("the ego car stops before the crossing", []),
        ],
        "v02": [
            ("a quiet suburban street with parked cars", []),
            ("a dog appears from the left sidewalk", [("animal", "dog near the curb")]),
            ("the dog crosses the road in front of the ego car", [("animal", "dog crossing")]),
            ("the ego car brakes hard", []),
            ("the dog reaches the right sidewalk", []),
            ("traffic resumes", []),
        ],
        "v03": [
            ("a cyclist rides along the right edge", [("cyclist_or_scooter", "cyclist close to lane")]),
            ("a truck merges while the cyclist swerves", [
                ("vehicle", "truck merging"), ("cyclist_or_scooter", "cyclist swerving")]),
            ("the cyclist recovers and continues", []),
        ],
    }
    incident = {}
    for vid, (n, _, _, _) in VIDEOS.items():
        refs = reference_frames(n, STAGE1_K)
        assert len(refs) == len(captions[vid]), vid
        for frame, (caption, hazards) in zip(refs, captions[vid]):
            body = {"caption": caption,
                    "hazards": [{"category": c, "description": d} for c, d in hazards]}
            entry = {"stage": "stage1", "video": vid, "frame": frame}
            if vid == "v01" and frame == refs[0]:
                entry["text"] = "Observation:\n```json\n" + json.dumps(body) + "\n```"
            else:
                entry["response"] = body
            out.append(entry)

    # v01: in range; v02: out of range (clamped); v03: prose only (fallback).
    out.append({"stage": "stage2", "video": "v01",
                "response": {"incident_frame": 25, "rationale": "pedestrian enters"}})
    incident["v01"] = 25
    out.append({"stage": "stage2", "video": "v02",
                "text": 'The key moment is {"incident_frame": 80, "rationale": "dog"}'})
    incident["v02"] = VIDEOS["v02"][0] - 1
    out.append({"stage": "stage2", "video": "v03",
                "text": "I am unable to identify a single frame."})
    incident["v03"] = reference_frames(VIDEOS["v03"][0], STAGE1_K)[1]

    stage3 = {
        "v01": report_doc("hazard", 1, True, [1, 1, 0, 0], 12,
                          "A white car slows down as a pedestrian approaches the crossing.",
                          "The ego car stops and the pedestrian crosses safely."),
        "v02": report_doc("hazard", 2, True, [2, 0, 0, 1], 20,
                          "A dog runs from the left sidewalk toward the road.",
                          "The dog crosses the road from left to right in front of the ego car."),
        "v03": report_doc("hazard", 1, False, [1, 0, 1, 0], 5,
                          "A cyclist rides along the right edge as a truck merges.",
                          "The cyclist swerves and then continues safely."),
    }
    for vid, doc in stage3.items():
        out.append({"stage": "stage3", "video": vid, "frame": incident[vid], "response": doc})
    # Model-specific variants so candidates differ.
    alt = dict(stage3["v02"], crash_severity=3,
               caption_after="The ego car brakes hard while the dog crosses to the right.")
    out.append({"stage": "stage3", "video": "v02", "frame": incident["v02"],
                "variant": f"({MODELS[1]},k=6,t=2)", "response": alt})
    alt = dict(stage3["v01"], event_type="accident", crash_severity=2)
    out.append({"stage": "stage3", "video": "v01", "frame": incident["v01"],
                "variant": f"({MODELS[0]},k=2,t=1)",
                "text": "Report follows. " + json.dumps(alt) + " End."})

    ensemble = {
        "v01": report_doc("hazard", 1, True, [1, 1, 0, 0], 12,
                          "A white car slows as a pedestrian approaches the crossing ahead.",
                          "The ego car stops before the crossing and the pedestrian crosses."),
        "v02": report_doc("hazard", 2, True, [2, 0, 0, 1], 20,
                          "A small dog runs from the left sidewalk toward the road.",
                          "The dog crosses the road from left to right in front of the ego car."),
        "v03": report_doc("hazard", 1, False, [1, 0, 1, 0], 5,
                          "A cyclist rides along the right edge while a truck merges.",
                          "The cyclist swerves briefly and then continues."),
    }
    for vid, doc in ensemble.items():
        out.append({"stage": "ensemble", "video": vid, "response": doc})
    return out, incident


def references():
    return [
        report_doc("hazard", 1, True, [1, 1, 0, 0], 10,
                   "A car ahead slows down as a pedestrian walks toward the crossing.",
                   "The ego car stops and the pedestrian crosses the road."),
        report_doc("hazard", 2, True, [2, 0, 0, 1], 18,
                   "A small dog runs out from the left side of the road.",
                   "The dog crosses the road from left to right in front of the ego car."),
        report_doc("hazard", 1, False, [1, 0, 1, 0], 6,
                   "A cyclist on the right is squeezed by a merging truck.",
                   "The cyclist swerves and continues riding."),
    ]


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "tests", "fixtures")
    root = os.path.abspath(root)
    for sub in ("videos", "scripted", "gaze/v01", "decode"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)

    golden = {}
    for seed, (vid, (n, fps, w, h)) in enumerate(VIDEOS.items()):
        path = os.path.join(root, "videos", vid + ".avi")
        write_video(path, [frame_pixels(i, w, h, seed) for i in range(n)], fps, w, h)
        # Read back independently of the decoder tool.
        cap = cv2.VideoCapture(path)
        frames = []
        while True:
            ok, f = cap.read()
            if not ok:
                break
            frames.append(f)
        cap.release()
        assert len(frames) == n, (vid, len(frames))
        picks = sorted({0, n // 2, n - 1})
        golden[vid] = {
            "frame_count": n, "fps": fps, "width": w, "height": h,
            "frames": {str(i): f"{fnv1a64(cv2.cvtColor(frames[i], cv2.COLOR_BGR2RGB).tobytes()):016x}"
                       for i in picks},
        }
    # Stand-alone 10-frame clip for decoder tests.
    path = os.path.join(root, "decode", "ten_frames.avi")
    write_video(path, [frame_pixels(i, 32, 16, 9) for i in range(10)], 30.0, 32, 16)
    cap = cv2.VideoCapture(path)
    frames = []
    while True:
        ok, f = cap.read()
        if not ok:
            break
        frames.append(f)
    cap.release()
    assert len(frames) == 10
    golden["ten_frames"] = {
        "frame_count": 10, "fps": 30.0, "width": 32, "height": 16,
        "frames": {str(i): f"{fnv1a64(cv2.cvtColor(frames[i], cv2.COLOR_BGR2RGB).tobytes()):016x}"
                   for i in (0, 9)},
    }

    with open(os.path.join(root, "golden_frames.json"), "w") as f:
        json.dump(golden, f, indent=2)
        f.write("\n")

    # Heatmap for the first v01 reference frame: a bright blob on dark red.
    w, h = VIDEOS["v01"][2], VIDEOS["v01"][3]
    yy, xx = np.mgrid[0:h, 0:w]
    blob = np.exp(-(((xx - w * 0.6) ** 2) + ((yy - h * 0.5) ** 2)) / (2 * 6.0 ** 2))
    heat = np.zeros((h, w, 3), np.uint8)
    heat[:, :, 2] = (60 + 195 * blob).astype(np.uint8)
    heat[:, :, 1] = (200 * blob).astype(np.uint8)
    cv2.imwrite(os.path.join(root, "gaze", "v01", f"{STAGE1_K - 1}.png"), heat)

    entries, incident = scripted_entries()
    with open(os.path.join(root, "scripted", "responses.json"), "w") as f:
        json.dump(entries, f, indent=2)
        f.write("\n")

    with open(os.path.join(root, "references.jsonl"), "w") as f:
        for vid, doc in zip(VIDEOS, references()):
            f.write(json.dumps(dict(doc, video_id=vid)) + "\n")

    expected = {
        vid: {"reference_frames": len(reference_frames(n, STAGE1_K)),
              "incident_frame": incident[vid]}
        for vid, (n, _, _, _) in VIDEOS.items()
    }
    expected["grid_points"] = len(MODELS) * len(GRID)
    with open(os.path.join(root, "expected.json"), "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")

    with open(os.path.join(root, "config.toml"), "w") as f:
        f.write(
            "# Fixture experiment: two stage-3 models over a 2 x 2 sampling grid.\n"
            'name = "fixture"\n\n'
            "[run]\n"
            f"stage1_k = {STAGE1_K}\n"
            "max_parallel_requests = 2\n\n"
            "[stage3]\n"
            "k = [2, 6]\n"
            "t = [1, 2]\n\n"
            "[endpoint.stage1]\n"
            'model = "GLM-4.5V"\n\n'
            "[endpoint.stage2]\n"
            'model = "GPT-OSS-120B"\n\n'
            "[endpoint.stage3]\n"
            f"models = {json.dumps(MODELS)}\n"
            "temperature = 0.7\n\n"
            "[endpoint.ensemble]\n"
            'model = "Qwen3-Next-80B-A3B-Instruct"\n'
        )

    # Published ablation row III triple, injected as corpus-level scores.
    with open(os.path.join(root, "spice_row3.json"), "w") as f:
        json.dump({"spice": {vid: 0.1822 for vid in VIDEOS},
                   "corpus_overrides": {"spice": 0.1822, "meteor": 0.2605,
                                        "cider_d": 0.0067}}, f, indent=2)
        f.write("\n")

    with open(os.path.join(root, "cider_desk.jsonl"), "w") as f:
        for item in CIDER_DESK:
            f.write(json.dumps(item) + "\n")

    with open(os.path.join(root, "roster.json"), "w") as f:
        json.dump({"admin_token": "admin-secret",
                   "evaluators": {"alice": "tok-alice", "bob": "tok-bob",
                                  "carol": "tok-carol"}}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
