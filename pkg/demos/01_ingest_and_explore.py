# %% [markdown]
# Ingest a policy table and a claim table, then look at where claims come from.
#
# The real pricing-game files are not redistributable, so this walkthrough
# writes a synthetic pair in the same layout first. Point POLICY and CLAIMS at
# real files to run it on those instead.

# %%
import json
import sys
from pathlib import Path

from claimclass import ingest, synthetic
from claimclass.explore import stats, svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "explore"
out.mkdir(parents=True, exist_ok=True)
POLICY, CLAIMS = synthetic.write_tables(out / "data", n_policies=5000, seed=1)

# %% [markdown]
# Claims are keyed by client and vehicle. They are summed per policy and
# left-joined onto the policy table; a policy with no claims gets zeros and
# label 0.

# %%
data = ingest.load_dataset(POLICY, CLAIMS)
data = ingest.impute_vh_age(data, "median")
print(f"{len(data):,} policies, {int(data['claim_nb'].sum()):,} claims")
print("claims per policy:", ingest.claim_frequency_histogram(data))
print("label balance:", ingest.label_balance(data))

# %% [markdown]
# Claim proportion per coverage level, with a 95% Wald interval. Continuous
# features need a bin width.

# %%
for feature, binning in [("pol_coverage", None), ("drv_age1", 5), ("pol_bonus", "levels")]:
    rows = stats.claim_proportion_by_level(data, feature, binning)
    for r in rows[:6]:
        print(f"  {feature:<12} {str(r.level):<10} n={r.policy_count:<5} p={r.proportion:.3f} [{r.ci_low:.3f}, {r.ci_high:.3f}]")
    svg.save(svg.render_bar_with_ci(rows, f"Claim proportion by {feature}", feature), out / f"proportion_{feature}.svg")

# %% [markdown]
# Correlations between the continuous features, then department totals on a
# toy tile map (any department GeoJSON with a ``code`` property works).

# %%
corr = stats.pearson_correlation_matrix(data, stats.CONTINUOUS_FEATURES)
svg.save(svg.render_heatmap(corr), out / "heatmap.svg")

aggregates = stats.aggregate_by_department(data)
print(stats.department_table(aggregates).round(2).to_string(index=False))
geo = synthetic.toy_geojson([a.code for a in aggregates])
(out / "tiles.geojson").write_text(json.dumps(geo))
svg.save(svg.render_choropleth(geo, aggregates, "claim_count", title="Claims per department"), out / "choropleth.svg")
print(f"figures written to {out}")
