"""Regenerate the data files shipped inside the package.

Run from the repository root:  python tools/make_shipped_data.py
"""

from pathlib import Path

import numpy as np

from transit2sls.ingest import write_dataset
from transit2sls.synth import CALIBRATED, generate

DATA = Path(__file__).resolve().parents[1] / "src" / "transit2sls" / "data"

seeds = np.random.SeedSequence(7420).generate_state(200, dtype=np.uint32)
(DATA / "acceptance_seeds.txt").write_text("".join(f"{int(s)}\n" for s in seeds))

records, truth = generate(CALIBRATED)
write_dataset(records, DATA / "calibrated_synthetic.csv")
(DATA / "calibrated_synthetic.truth").write_text(truth.to_text())
print(f"wrote {len(seeds)} seeds and {len(records)} records to {DATA}")
