"""Extract one row of the Maddison (2010) GDP sheet as a long growthlens table.

    pip install pandas xlrd
    python scripts/extract_maddison.py horizontal-file_02-2010.xls \
        --row "Total Asia excl. Japan" \
        --out data/maddison_2010_asia_excl_japan.csv

The GDP sheet reports millions of 1990 International Geary-Khamis dollars.
The output keeps the raw numbers and declares that unit in a `# unit:`
comment; growthlens converts to billions on ingestion.
"""

import argparse
import sys

import pandas as pd

UNIT = "million 1990 International Geary-Khamis dollars"


def year_of(cell):
    try:
        y = float(cell)
    except (TypeError, ValueError):
        return None
    return int(y) if y.is_integer() and y >= 1 else None


def find_header(sheet):
    for i, row in sheet.iterrows():
        years = [year_of(c) for c in row.iloc[1:]]
        if 1 in years and 1000 in years:
            return i
    sys.exit("no header row with years 1 and 1000 found")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("xls")
    ap.add_argument("--sheet", default="GDP")
    ap.add_argument("--row", required=True, help="label in the first column")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    sheet = pd.read_excel(args.xls, sheet_name=args.sheet, header=None)
    header = find_header(sheet)
    labels = sheet.iloc[:, 0].astype(str).str.strip()
    hits = sheet[labels.str.casefold() == args.row.strip().casefold()]
    if len(hits) != 1:
        near = sorted(set(l for l in labels if "asia" in l.casefold()))
        sys.exit(f"{len(hits)} rows labelled {args.row!r}; rows mentioning Asia: {near}")
    row = hits.iloc[0]

    lines = [f"# entity: {args.row.strip()}", f"# unit: {UNIT}",
             f"# source: {args.xls}, sheet {args.sheet}", "year,gdp"]
    for col in range(1, sheet.shape[1]):
        year = year_of(sheet.iat[header, col])
        value = row.iloc[col]
        if year is None or pd.isna(value):
            continue
        lines.append(f"{year},{float(value)!r}")
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 4} observations to {args.out}")


if __name__ == "__main__":
    main()
