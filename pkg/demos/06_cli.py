"""The command-line tool, driven from Python. Same as running `kselect ...` in a shell."""

import json
import tempfile
from pathlib import Path

import numpy as np
from sklearn.datasets import load_wine

from kselect.cli import main

tmp = Path(tempfile.mkdtemp())
wine = load_wine()
csv_path = tmp / "wine.csv"
np.savetxt(csv_path, np.column_stack([wine.data, wine.target + 1]), delimiter=",", fmt="%.17g")

# select: JSON report with ARI against the label column.
main(["select", str(csv_path), "--labels", "last", "--gap-B", "20", "--out", str(tmp / "r.json")])
report = json.loads((tmp / "r.json").read_text())
print(report["schema"], {r["method"]: r["k_hat"] for r in report["results"]}, report["ideal"])

# df-curve: long-format CSV of df_hat(k, k'), ready for plotting.
main(["df-curve", str(csv_path), "--labels", "last", "--k-list", "5", "--kprime", "3:8"])

# oracle: direct-sampling df next to the averaged estimate and kd.
main(["oracle", "--k", "3", "--d", "2", "--n", "150", "--kmax", "4", "--reps", "10", "--inits", "3"])

# simulate: one CSV row per scenario; --save-data keeps the generated files.
main(["simulate", "--k", "3", "--d", "2", "--n", "150", "--reps", "2", "--kmax", "6",
      "--inits", "3", "--methods", "bic_edf,bic_naive", "--save-data", str(tmp / "sim")])
print(sorted(p.name for p in (tmp / "sim").iterdir()))

# A malformed file: exit code 2 and the row/column on stderr.
(tmp / "bad.csv").write_text("1,2\n3,oops\n")
print("exit code", main(["select", str(tmp / "bad.csv")]))
