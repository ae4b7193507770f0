# %% [markdown]
# Penalised logistic regression and its coefficient paths over C = 1/lambda.

# %%
import sys
from pathlib import Path

import numpy as np

from claimclass import evaluation, ingest, logreg, synthetic
from claimclass.explore import svg
from claimclass.pipeline import prepare

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "logreg"
out.mkdir(parents=True, exist_ok=True)
data = ingest.impute_vh_age(ingest.load_dataset(*synthetic.write_tables(out / "data", n_policies=3000, seed=3, signal=2.0)))
prep = prepare(data, seed=0)
names = prep.schema.names

# %% [markdown]
# A single ridge fit. Gradient descent starts from zero and backtracks until
# each step lowers the objective enough.

# %%
model = logreg.fit(prep.train.values, prep.train.labels, "ridge", lam=1.0)
print(f"{model.iterations} iterations, converged={model.converged}")
top = np.argsort(-np.abs(model.weights))[:5]
for j in top:
    print(f"  {names[j]:<24} {model.weights[j]:+.3f}")
print(evaluation.evaluate(model, prep.test.values, prep.test.labels, "no-claims").format_table())

# %% [markdown]
# Lasso sets coefficients exactly to zero once C is small enough; ridge only
# shrinks them.

# %%
C_values = list(np.logspace(-3, 1, 12))
for penalty in ("lasso", "ridge"):
    path = logreg.regularization_path(prep.train.values, prep.train.labels, penalty, C_values)
    print(penalty, "non-zero coefficients per C:", [int(np.count_nonzero(p.weights)) for p in path])
    series = {names[j]: (C_values, [p.weights[j] for p in path]) for j in top}
    svg.save(svg.render_line(series, f"{penalty} coefficient paths", "C", "coefficient", log_x=True), out / f"path_{penalty}.svg")
    logreg.write_path_csv(path, names, out / f"path_{penalty}.csv")
