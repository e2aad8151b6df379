#!/usr/bin/env python3
"""Frame decoder used by dashreport as an external subprocess.

  frame_decoder.py probe <video>             -> JSON {frame_count, fps, width, height}
  frame_decoder.py extract <video> <i,j,...> -> concatenated binary PPM (RGB) on stdout

Exit codes: 0 ok, 2 cannot open/decode, 3 frame index out of range.
"""
import json
import sys

import cv2


def open_capture(path):
    cap = cv2.VideoCapture(path)
    if not cap.isOpened():
        sys.stderr.write(f"cannot open video: {path}\n")
        sys.exit(2)
    return cap


def probe(path):
    cap = open_capture(path)
    fps = cap.get(cv2.CAP_PROP_FPS) or 30.0
    width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
    height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
    count = 0
    while cap.grab():
        count += 1
    if count == 0:
        sys.stderr.write(f"no decodable frames in {path}\n")
        sys.exit(2)
    json.dump({"frame_count": count, "fps": fps, "width": width, "height": height},
              sys.stdout)


def extract(path, index_list):
    wanted = [int(x) for x in index_list.split(",") if x != ""]
    if any(i < 0 for i in wanted):
        sys.stderr.write("negative frame index\n")
        sys.exit(3)
    targets = set(wanted)
    last = max(wanted) if wanted else -1
    cap = open_capture(path)
    frames = {}
    idx = 0
    while idx <= last:
        ok = cap.grab()
        if not ok:
            break
        if idx in targets:
            ok, bgr = cap.retrieve()
            if not ok:
                sys.stderr.write(f"decode failed at frame {idx}\n")
                sys.exit(2)
            frames[idx] = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
        idx += 1
    missing = [i for i in wanted if i not in frames]
    if missing:
        sys.stderr.write(f"frame index {missing[0]} out of range ({idx} frames)\n")
        sys.exit(3)
    out = sys.stdout.buffer
    for i in wanted:
        rgb = frames[i]
        h, w = rgb.shape[:2]
        out.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        out.write(rgb.tobytes())
    out.flush()


def main(argv):
    if len(argv) < 3 or argv[1] not in ("probe", "extract"):
        sys.stderr.write(__doc__)
        return 64
    if argv[1] == "probe":
        probe(argv[2])
    else:
        extract(argv[2], argv[3] if len(argv) > 3 else "")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
