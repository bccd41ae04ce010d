# %% [markdown]
# # Why two stages
#
# When the supply and demand disturbances are correlated, observed VRH is
# correlated with the demand error and a direct OLS regression of TUPT on VRH
# is biased.  Replacing VRH by its stage-one fitted value removes the bias.

# %%
from transit2sls.synth import SynthConfig, acceptance_seeds, bias_experiment, format_bias_table

seeds = acceptance_seeds()
for rho in (0.0, 0.8):
    rows = bias_experiment(SynthConfig(rho=rho), replications=100,
                           sample_sizes=(500, 2000, 10000), seeds=seeds)
    print(f"rho = {rho}")
    print(format_bias_table(rows))

# %% [markdown]
# The same check with pass/fail thresholds is what `transit2sls validate`
# runs.

# %%
from transit2sls.validation import run_validation

print(run_validation(replications=50).report())
