import csv

import numpy as np
import pytest

from claimclass import synthetic
from claimclass.ingest import POLICY_COLUMNS

BASE_POLICY = {
    "pol_bonus": "0.5",
    "pol_coverage": "Maxi",
    "pol_duration": "5",
    "pol_sit_duration": "2",
    "pol_pay_freq": "Yearly",
    "pol_payd": "No",
    "pol_usage": "WorkPrivate",
    "pol_insee_code": "75056",
    "drv_drv2": "No",
    "drv_age1": "40",
    "drv_age2": "",
    "drv_sex1": "M",
    "drv_sex2": "",
    "drv_age_lic1": "20",
    "drv_age_lic2": "",
    "vh_age": "5",
    "vh_cyl": "1400",
    "vh_din": "90",
    "vh_fuel": "Diesel",
    "vh_make": "RENAULT",
    "vh_model": "CLIO",
    "vh_sale_begin": "6",
    "vh_sale_end": "4",
    "vh_speed": "180",
    "vh_type": "Tourism",
    "vh_value": "15000",
    "vh_weight": "1100",
}


def policy_row(id_policy, **overrides):
    row = dict(BASE_POLICY, id_policy=id_policy)
    row.update({k: str(v) for k, v in overrides.items()})
    return row


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_policies(path, rows):
    return write_csv(path, POLICY_COLUMNS, rows)


def write_claims(path, rows):
    return write_csv(path, ["id_client", "id_vehicle", "claim_nb", "claim_amount"], rows)


@pytest.fixture
def five_policy_files(tmp_path):
    """Five policies; P1-V1 and P2-V1 have claims (P1-V1 twice)."""
    ids = ["P1-V1", "P2-V1", "P3-V1", "P4-V1", "P5-V1"]
    policies = write_policies(tmp_path / "pol.csv", [policy_row(i) for i in ids])
    claims = write_claims(
        tmp_path / "claims.csv",
        [
            {"id_client": "P1", "id_vehicle": "V1", "claim_nb": "1", "claim_amount": "100.0"},
            {"id_client": "P2", "id_vehicle": "V1", "claim_nb": "1", "claim_amount": "250.5"},
            {"id_client": "P1", "id_vehicle": "V1", "claim_nb": "1", "claim_amount": "-50.0"},
        ],
    )
    return policies, claims


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    directory = tmp_path_factory.mktemp("synthetic")
    return synthetic.write_tables(directory, n_policies=1200, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance summary ---------------------------------------------------------
#
# Tests marked ``criterion(n, title)`` are collected into one status line per
# criterion at the end of the run. A criterion passes only if every test
# carrying its number passed.

_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.skipped:
        status, detail = "SKIP", report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
    elif report.failed:
        status, detail = "FAIL", item.name
    elif report.when == "call":
        status, detail = "PASS", ""
    else:
        return
    old = _criteria.get(number)
    if old is None or _RANK[status] > _RANK[old[1]]:
        _criteria[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, detail = _criteria[number]
        line = f"criterion {number:>2}: {status}  {title}"
        if detail and status != "PASS":
            line += f"  ({detail})"
        terminalreporter.write_line(line)
