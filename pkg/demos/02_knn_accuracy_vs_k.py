# %% [markdown]
# k-nearest neighbours on one-hot encoded, standardised policies, and how
# accuracy moves with k.

# %%
import sys
from pathlib import Path

from claimclass import evaluation, ingest, knn, synthetic
from claimclass.explore import svg
from claimclass.pipeline import prepare

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "knn"
out.mkdir(parents=True, exist_ok=True)
data = ingest.impute_vh_age(ingest.load_dataset(*synthetic.write_tables(out / "data", n_policies=4000, seed=2)))

# %% [markdown]
# Eight categorical features become dummy columns; fifteen numeric ones are
# z-scored. A seeded split keeps a quarter of the rows for testing.

# %%
prep = prepare(data, test_fraction=0.25, seed=0)
print("design matrix:", prep.train.values.shape, "train /", prep.test.values.shape, "test")

# %%
model = knn.fit(prep.train.values, prep.train.labels, k=20, weighting=knn.INVERSE_DISTANCE)
report = evaluation.evaluate(model, prep.test.values, prep.test.labels, "no-claims")
print(report.format_table())

# %% [markdown]
# With inverse-distance weights every training row is its own nearest
# neighbour, so training accuracy is 1 for every k. Test accuracy settles
# near the share of policies without claims.

# %%
rows = knn.accuracy_vs_k_sweep(
    (prep.train.values, prep.train.labels), (prep.test.values, prep.test.labels), range(1, 31), weighting=knn.INVERSE_DISTANCE
)
for r in rows[::5]:
    print(f"k={r.k:<3} train={r.train_accuracy:.3f} test={r.test_accuracy:.3f}")
ks = [r.k for r in rows]
svg.save(
    svg.render_line(
        {"train": (ks, [r.train_accuracy for r in rows]), "test": (ks, [r.test_accuracy for r in rows])},
        "Accuracy against k",
        "k",
        "accuracy",
    ),
    out / "accuracy_vs_k.svg",
)
