#!/usr/bin/env python3
"""Convert the public raw files of the benchmark datasets into CSVs that
match the schemas in ../schemas.

Usage:
    python3 scripts/prepare_datasets.py --raw-dir RAW --out-dir data

RAW is searched recursively for any of:
    german.data                         (UCI Statlog German Credit)
    adult.data                          (UCI Adult, training file)
    compas-scores-two-years.csv         (ProPublica COMPAS analysis)
    bank.csv                            (UCI Bank Marketing, small version)
    twin_pairs_X_3years_samesex.csv,
    twin_pairs_T_3years_samesex.csv,
    twin_pairs_Y_3years_samesex.csv     (twins benchmark)

Only datasets whose files are found are written. Missing values are written
as "?" so that the loader drops those rows.
"""

import argparse
import csv
import os
import sys


def find(raw_dir, name):
    for root, _dirs, files in os.walk(raw_dir):
        if name in files:
            return os.path.join(root, name)
    return None


def write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "sex", "other_debtors",
    "residence_since", "property", "age", "installment_plans", "housing",
    "existing_credits", "job", "people_liable", "telephone", "foreign_worker",
    "credit",
]
GERMAN_SEX = {"A91": "male", "A93": "male", "A94": "male", "A92": "female", "A95": "female"}


def german(src, out_dir):
    rows = []
    with open(src, encoding="utf-8") as f:
        for line in f:
            cells = line.split()
            if len(cells) != 21:
                continue
            # attribute 9 mixes personal status and sex; only sex is kept
            cells[8] = GERMAN_SEX[cells[8]]
            cells[20] = {"1": "good", "2": "bad"}[cells[20]]
            rows.append(cells)
    write(os.path.join(out_dir, "german.csv"), GERMAN_COLUMNS, rows)


ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]


def adult(src, out_dir):
    rows = []
    with open(src, encoding="utf-8") as f:
        for record in csv.reader(f, skipinitialspace=True):
            if len(record) != 15:
                continue
            record = [c.strip().rstrip(".") for c in record]
            record[9] = record[9].lower()
            rows.append(record)
    write(os.path.join(out_dir, "adult.csv"), ADULT_COLUMNS, rows)


COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree",
    "days_b_screening_arrest", "rearrested",
]


def compas(src, out_dir):
    rows = []
    with open(src, encoding="utf-8") as f:
        for r in csv.DictReader(f):
            # the usual ProPublica screening filter
            try:
                days = int(r["days_b_screening_arrest"])
            except ValueError:
                continue
            if abs(days) > 30 or r["is_recid"] == "-1" or r["c_charge_degree"] == "O":
                continue
            if r["score_text"] == "N/A":
                continue
            row = [r[c] for c in COMPAS_COLUMNS[:-1]]
            row[0] = row[0].lower()
            row.append("yes" if r["two_year_recid"] == "1" else "no")
            rows.append(row)
    write(os.path.join(out_dir, "compas.csv"), COMPAS_COLUMNS, rows)


BANK_COLUMNS = [
    "age", "job", "marital", "education", "default", "balance", "housing",
    "loan", "contact", "duration", "campaign", "pdays", "previous",
    "poutcome", "y",
]


def bank(src, out_dir):
    rows = []
    with open(src, encoding="utf-8") as f:
        for r in csv.DictReader(f, delimiter=";"):
            r = {k.strip('"'): v for k, v in r.items()}
            # divorced/widowed count as not married
            r["marital"] = "married" if r["marital"] == "married" else "single"
            rows.append([r[c] for c in BANK_COLUMNS])
    write(os.path.join(out_dir, "bank.csv"), BANK_COLUMNS, rows)


TWINS_DROP = {"", "Unnamed: 0", "Unnamed: 0.1", "infant_id_0", "infant_id_1", "bord_0", "bord_1"}


def twins(x_src, t_src, y_src, out_dir):
    with open(x_src, encoding="utf-8") as f:
        xs = list(csv.DictReader(f))
    with open(t_src, encoding="utf-8") as f:
        ts = list(csv.DictReader(f))
    with open(y_src, encoding="utf-8") as f:
        ys = list(csv.DictReader(f))
    covariates = [c for c in xs[0].keys() if c not in TWINS_DROP]
    header = covariates + ["bord", "weight", "mortality"]
    rows = []
    for x, t, y in zip(xs, ts, ys):
        for twin in ("0", "1"):
            cells = [x[c] if x[c] not in ("", "nan", "NaN") else "?" for c in covariates]
            cells.append(x.get(f"bord_{twin}") or "?")
            # twin 1 is the heavier one
            cells.append("heavier" if twin == "1" else "lighter")
            mort = y.get(f"mort_{twin}", "")
            cells.append({"1": "death", "0": "alive"}.get(mort.split(".")[0], "?"))
            rows.append(cells)
    write(os.path.join(out_dir, "twins.csv"), header, rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--raw-dir", required=True)
    ap.add_argument("--out-dir", default="data")
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    found = 0
    for name, fn in [("german.data", german), ("adult.data", adult),
                     ("compas-scores-two-years.csv", compas), ("bank.csv", bank)]:
        src = find(args.raw_dir, name)
        if src:
            fn(src, args.out_dir)
            found += 1
    parts = [find(args.raw_dir, f"twin_pairs_{k}_3years_samesex.csv") for k in "XTY"]
    if all(parts):
        twins(*parts, args.out_dir)
        found += 1
    if not found:
        sys.exit(f"no raw dataset files found under {args.raw_dir}")


if __name__ == "__main__":
    main()
