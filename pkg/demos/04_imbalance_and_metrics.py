# %% [markdown]
# Why headline accuracy misleads on an 87:13 portfolio.
#
# When features carry no signal, both classifiers fall back on the majority
# class. Accuracy then equals the majority share, while the confusion matrix
# shows that not a single claim was caught.

# %%
import numpy as np

from claimclass import evaluation, knn, logreg

rng = np.random.default_rng(0)
X = rng.normal(size=(5000, 20))
y = np.zeros(5000, dtype=int)
y[rng.permutation(5000)[:650]] = 1
train, test = slice(0, 4000), slice(4000, None)

models = {
    "knn k=20": knn.fit(X[train], y[train], 20),
    "ridge logistic": logreg.fit(X[train], y[train], "ridge", 1e3),
}

# %% [markdown]
# Reading the same predictions with either class as positive changes
# precision and recall; accuracy stays put.

# %%
for name, model in models.items():
    for positive in ("no-claims", "claims"):
        rep = evaluation.evaluate(model, X[test], y[test], positive)
        print(rep.format_table().replace("model: ", f"model: {name} / "))
        print()
