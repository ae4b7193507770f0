"""Claim / no-claim classification of motor third-party-liability policies.

Modules
-------
ingest      parse the policy and claim tables, aggregate, merge, label
preprocess  dummy encoding, scaling, seeded train/test split
knn         exact k-nearest-neighbour classifier
logreg      penalised logistic regression and regularisation paths
evaluation  confusion matrices, precision / recall / accuracy
explore     claim proportions, correlations, department maps (SVG)
"""
from . import evaluation, explore, ingest, knn, logreg, preprocess

__version__ = "0.1.0"
