# %% [markdown]
# # Loading agency-year records and yearly averages
#
# Parse a delimited file of agency-year rows, derive service area density and
# the per-trip cost and fare, then compute the cross-agency yearly means that
# the time-series charts are drawn from.

# %%
import io

from transit2sls.descriptive import FIGURE_METRICS, summary_table, yearly_mean
from transit2sls.ingest import build_model_frame, load_dataset
from transit2sls.synth import calibrated_dataset_path

# %% [markdown]
# Headers in real exports vary by vintage.  A schema map says which header
# holds which field; here a tiny semicolon-delimited extract with its own
# naming.

# %%
raw = """NTD ID;FY;VRH;UPT;Opex;Fares;SA Pop;SA SqMi
1001;2015;120000;2500000;14000000;3100000;850000;410
1001;2016;123500;N/A;14500000;3000000;860000;410
2040;2016;56000;700000;5100000;;200000;0
"""
schema = {
    "agency_id": "NTD ID",
    "year": "FY",
    "vrh": "VRH",
    "tupt": "UPT",
    "total_operating_cost": "Opex",
    "total_fares": "Fares",
    "service_area_population": "SA Pop",
    "service_area_sq_miles": "SA SqMi",
}
records, report = load_dataset(io.StringIO(raw), schema=schema, delimiter=";")
for r in records:
    print(r.agency_id, r.year, "sad", r.sad, "acpt", r.acpt, "afpt", r.afpt)
print("missing cells:", dict(report.missing_cells))

# %% [markdown]
# Missing or undefined values propagate; building a model frame drops those
# rows and says why.

# %%
frame, frame_report = build_model_frame(records, "vrh", ["acpt", "sad"], log=True)
print(frame.labels)
print(frame_report.to_csv())

# %% [markdown]
# ## Yearly means on the shipped synthetic panel

# %%
panel, _ = load_dataset(calibrated_dataset_path())
print(len(panel), "agency-years")
for metric in FIGURE_METRICS[:3]:
    print(yearly_mean(panel, metric).to_csv())

# %%
for row in summary_table(panel, ["vrh", "tupt", "sad"]):
    print(row)
