"""Regenerate the committed finite-difference eigenvalue oracle.

    python tools/make_fd_oracle.py

Writes src/transitlab/data/fd_oracle.json.  The values come from two
tridiagonal grids (h and h/2) combined by Richardson extrapolation; the
shooting solver is not involved.
"""

from __future__ import annotations

import json
from pathlib import Path

from transitlab.oracles import fd_eigenvalues
from transitlab.potentials import ModelSpec

MODELS = ((3, 0.0), (4, 0.0), (3, 1.0), (4, -1.0))
H = 0.01


def main() -> None:
    rows = []
    for d, mu in MODELS:
        etas = fd_eigenvalues(ModelSpec(d, mu), k=3, h=H)
        rows.append({"d": d, "mu": mu, "eta": [float(e) for e in etas]})
    payload = {"method": "tridiagonal finite differences, grids h and h/2, Richardson", "h": H, "models": rows}
    out = Path(__file__).resolve().parents[1] / "src" / "transitlab" / "data" / "fd_oracle.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
