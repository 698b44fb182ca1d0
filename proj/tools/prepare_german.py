#!/usr/bin/env python3
"""Convert the UCI German Credit file (german.data) into a CSV matching data/german_spec.json.

usage: prepare_german.py german.data german.csv
"""

import csv
import sys

COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "personal_status", "other_debtors",
    "residence_since", "property", "age", "other_installment_plans", "housing",
    "existing_credits", "job", "num_dependents", "telephone", "foreign_worker", "class",
]

# personal_status codes: A91, A93, A94 male; A92, A95 female.
SEX = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}


def main(argv):
    if len(argv) != 3:
        sys.exit(__doc__)
    with open(argv[1]) as src, open(argv[2], "w", newline="") as dst:
        out = csv.writer(dst, lineterminator="\n")
        header = [c for c in COLUMNS if c != "personal_status"] + ["sex"]
        out.writerow(header)
        rows = 0
        for line in src:
            fields = line.split()
            if not fields:
                continue
            if len(fields) != len(COLUMNS):
                sys.exit(f"line {rows + 1}: expected {len(COLUMNS)} fields, got {len(fields)}")
            rec = dict(zip(COLUMNS, fields))
            rec["sex"] = SEX[rec.pop("personal_status")]
            out.writerow([rec[c] for c in header])
            rows += 1
    print(f"wrote {rows} rows to {argv[2]}")


if __name__ == "__main__":
    main(sys.argv)
