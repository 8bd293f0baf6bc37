"""End-to-end command-line pipeline on an NGSIM-style CSV.

Builds a small CSV in the public NGSIM column layout (feet, 10 Hz),
then drives the CLI: ingest -> split -> fit -> predict -> eval -> ablate.
Everything lands in a temporary directory; the same commands work on a
real NGSIM export.
"""

import tempfile
from pathlib import Path

import numpy as np

from trajrefine import read_jsonl, split_dataset, write_jsonl
from trajrefine.cli import main as cli

work = Path(tempfile.mkdtemp(prefix="trajrefine-demo-"))
print("working in", work)

# --- fabricate a raw CSV: 12 vehicles, 16 s each at 10 Hz, coordinates in feet
rng = np.random.default_rng(3)
csv_path = work / "highway.csv"
with open(csv_path, "w") as fh:
    fh.write("Vehicle_ID,Frame_ID,Global_Time,Local_X,Local_Y,v_Vel\n")
    for vid in range(1, 13):
        speed_fps = rng.uniform(35.0, 70.0)  # ~10-21 m/s
        lane = 12.0 * rng.integers(1, 5)
        drift = rng.uniform(-0.02, 0.02)
        for frame in range(160):
            x = speed_fps * 0.1 * frame
            y = lane + drift * frame + rng.normal(0.0, 0.15)
            fh.write(f"{vid},{frame},0,{x:.4f},{y:.4f},{speed_fps:.2f}\n")

# --- ingest: feet -> meters, downsample 10 Hz -> 5 Hz, slice 41-point windows
full = work / "full.jsonl"
cli(["ingest-ngsim", "--csv", str(csv_path), "--out", str(full), "--stride", "5"])

# --- split by vehicle so no vehicle leaks between train and test
ds = read_jsonl(str(full))
train, val, test = split_dataset(ds, (0.7, 0.1, 0.2), seed=42)
for name, part in (("train", train), ("val", val), ("test", test)):
    write_jsonl(part, str(work / f"{name}.jsonl"))
    vehicles = {seg.agent_id for seg in part.segments}
    print(f"{name}: {len(part)} segments from vehicles {sorted(vehicles)}")

# --- fit, predict, evaluate
model = work / "model.json"
cli(["fit", "--train", str(work / "train.jsonl"), "--val", str(work / "val.jsonl"),
     "--out", str(model), "--predictor", "ar", "--lag", "3"])

preds = work / "preds.jsonl"
cli(["predict", "--model", str(model), "--data", str(work / "test.jsonl"),
     "--out", str(preds), "--refine", "on"])

cli(["eval", "--predictions", str(preds), "--data", str(work / "test.jsonl"),
     "--out", str(work / "metrics.csv"), "--backbone", "ar"])
print((work / "metrics.csv").read_text().strip())

# --- the ablation harness does vanilla-vs-refined in one shot
cli(["ablate", "--train", str(work / "train.jsonl"), "--val", str(work / "val.jsonl"),
     "--test", str(work / "test.jsonl"), "--out", str(work / "report.csv"),
     "--predictors", "cv,ar"])
print()
print((work / "report.csv").read_text().strip())
