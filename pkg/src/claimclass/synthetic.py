"""Synthetic policy/claim tables in the pricing-game file layout.

The real tables are not redistributable, so demos and tests run on data drawn
here. Claim occurrence follows a weak logistic signal on a few features and
the overall claim rate defaults to 12.7%, the share in the real portfolio.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .ingest import POLICY_COLUMNS

# a handful of departments, including the two Corsican codes
_DEPARTMENTS = ["01", "13", "2A", "2B", "31", "33", "45", "59", "69", "75", "83", "92"]
_MAKES = {"RENAULT": ["CLIO", "MEGANE"], "PEUGEOT": ["208", "308"], "CITROEN": ["C3", "C4"]}


def make_tables(n_policies: int = 1000, claim_rate: float = 0.127, seed: int = 0, signal: float = 1.0):
    """Return ``(policy_rows, claim_rows)`` as lists of dicts of strings."""
    rng = np.random.default_rng(seed)
    policies, claims = [], []
    n_clients = max(1, int(n_policies * 0.8))
    client_of = np.sort(rng.integers(0, n_clients, size=n_policies))
    vehicle_no = {}

    age1 = rng.integers(18, 85, size=n_policies)
    bonus = np.round(np.clip(rng.choice([0.5, 0.5, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5], size=n_policies), 0.5, 3.5), 2)
    coverage = rng.choice(["Mini", "Median1", "Median2", "Maxi"], size=n_policies, p=[0.15, 0.2, 0.15, 0.5])
    drv2 = rng.random(n_policies) < 0.3
    vh_age = rng.integers(0, 25, size=n_policies)
    speed = rng.choice([150.0, 175.0, 200.0, 225.0, 250.0], size=n_policies, p=[0.2, 0.3, 0.3, 0.15, 0.05])

    z = signal * (-0.03 * (age1 - 45) + 1.5 * (bonus - 0.7) + 0.4 * (coverage == "Maxi") - 0.03 * (vh_age - 10))
    # shift the intercept so the mean claim probability hits claim_rate
    lo, hi = -10.0, 10.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if np.mean(1 / (1 + np.exp(-(z + mid)))) < claim_rate:
            lo = mid
        else:
            hi = mid
    p_claim = 1 / (1 + np.exp(-(z + lo)))

    for i in range(n_policies):
        client = f"A{client_of[i]:08d}"
        vehicle_no[client] = vehicle_no.get(client, 0) + 1
        vehicle = f"V{vehicle_no[client]:02d}"
        make = rng.choice(list(_MAKES))
        has2 = bool(drv2[i])
        row = {
            "id_client": client,
            "id_vehicle": vehicle,
            "id_policy": f"{client}-{vehicle}",
            "pol_bonus": f"{bonus[i]:.2f}",
            "pol_coverage": coverage[i],
            "pol_duration": str(rng.integers(0, 30)),
            "pol_sit_duration": str(rng.integers(1, 10)),
            "pol_pay_freq": rng.choice(["Yearly", "Biannual", "Quarterly", "Monthly"], p=[0.4, 0.3, 0.05, 0.25]),
            "pol_payd": rng.choice(["No", "Yes"], p=[0.95, 0.05]),
            "pol_usage": rng.choice(["WorkPrivate", "Retired", "Professional", "AllTrips"], p=[0.6, 0.25, 0.1, 0.05]),
            "pol_insee_code": rng.choice(_DEPARTMENTS) + f"{rng.integers(1, 999):03d}",
            "drv_drv2": "Yes" if has2 else "No",
            "drv_age1": str(age1[i]),
            "drv_age2": str(rng.integers(18, 85)) if has2 else "",
            "drv_sex1": rng.choice(["M", "F"]),
            "drv_sex2": rng.choice(["M", "F"]) if has2 else "",
            "drv_age_lic1": str(max(0, age1[i] - 18 - rng.integers(0, 5))),
            "drv_age_lic2": str(rng.integers(0, 40)) if has2 else "",
            "vh_age": str(vh_age[i]),
            "vh_cyl": str(rng.choice([998, 1199, 1360, 1560, 1997])),
            "vh_din": str(rng.integers(60, 180)),
            "vh_fuel": rng.choice(["Diesel", "Gasoline", "Hybrid"], p=[0.6, 0.38, 0.02]),
            "vh_make": make,
            "vh_model": rng.choice(_MAKES[make]),
            "vh_sale_begin": str(vh_age[i] + rng.integers(1, 5)),
            "vh_sale_end": str(max(0, vh_age[i] - rng.integers(0, 3))),
            "vh_speed": f"{speed[i]:.0f}",
            "vh_type": rng.choice(["Tourism", "Commercial"], p=[0.9, 0.1]),
            "vh_value": f"{rng.uniform(5000, 40000):.0f}",
            "vh_weight": f"{rng.uniform(800, 2000):.0f}",
        }
        policies.append(row)
        if rng.random() < p_claim[i]:
            for _ in range(1 + rng.poisson(0.12)):
                amount = rng.lognormal(6.5, 1.2)
                if rng.random() < 0.02:
                    amount = -rng.uniform(0, 500)
                claims.append(
                    {"id_client": client, "id_vehicle": vehicle, "claim_nb": "1", "claim_amount": f"{min(amount, 300000):.2f}"}
                )
    return policies, claims


def write_tables(directory, n_policies: int = 1000, claim_rate: float = 0.127, seed: int = 0, signal: float = 1.0):
    """Write ``policies.csv`` and ``claims.csv`` into ``directory``; return both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    policies, claims = make_tables(n_policies, claim_rate, seed, signal)
    policy_path = directory / "policies.csv"
    claim_path = directory / "claims.csv"
    policy_header = ["id_client", "id_vehicle"] + POLICY_COLUMNS
    with policy_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=policy_header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(policies)
    with claim_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id_client", "id_vehicle", "claim_nb", "claim_amount"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(claims)
    return policy_path, claim_path


def toy_geojson(codes=None, columns: int = 4) -> dict:
    """Square tiles on a grid, one per department code, as a FeatureCollection."""
    codes = list(codes or _DEPARTMENTS)
    features = []
    for i, code in enumerate(codes):
        x0, y0 = 2.0 + (i % columns), 48.0 - (i // columns)
        ring = [[x0, y0], [x0 + 0.9, y0], [x0 + 0.9, y0 + 0.9], [x0, y0 + 0.9], [x0, y0]]
        features.append(
            {"type": "Feature", "properties": {"code": code, "nom": f"dept {code}"}, "geometry": {"type": "Polygon", "coordinates": [ring]}}
        )
    return {"type": "FeatureCollection", "features": features}
