"""Rebuild data/ames_kaggle_subset.{csv,schema} from the Kaggle-format Ames extract.

The extract (1460 sales, 74 columns, descriptive category labels, residual
gaps pre-filled) ships inside the ``shapash`` wheel as
``data/house_prices_dataset.csv``. Column names are mapped onto the canonical
82-column Ames names; every text column is declared categorical because the
extract relabels ordinal codes with free-text descriptions.

    python3 scripts/make_kaggle_subset.py path/to/house_prices_dataset.csv
"""

import argparse
import csv
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from amesbench.schema import load_schema  # noqa: E402


def canonical_names():
    specs = load_schema(ROOT / "src" / "amesbench" / "assets" / "ames.schema")
    return {s.name.replace(" ", "").replace("/", ""): s.name for s in specs}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source")
    ap.add_argument("--out-dir", default=str(ROOT / "data"))
    args = ap.parse_args(argv)

    mapping = canonical_names()
    mapping["Id"] = "Order"
    with open(args.source, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    names = [mapping[h] for h in header]

    kinds = {}
    for j, name in enumerate(names):
        if name == "Order":
            kinds[name] = "identifier"
        elif name == "SalePrice":
            kinds[name] = "target"
        else:
            try:
                [float(r[j]) for r in body if r[j] not in ("", "NA")]
                kinds[name] = "numeric"
            except ValueError:
                kinds[name] = "categorical"

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ames_kaggle_subset.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(body)
    with open(out / "ames_kaggle_subset.schema", "w", encoding="utf-8") as fh:
        fh.write("# Generated by scripts/make_kaggle_subset.py\n")
        fh.write("[schema]\nformat = 1\nname = ames_kaggle_subset\n\n[columns]\n")
        for name in names:
            fh.write(f"{name} = {kinds[name]}\n")
    print(f"wrote {len(body)} rows x {len(names)} columns to {out}")


if __name__ == "__main__":
    main()
