"""Write figure data for all three figures and render them with the emitted plot scripts.

    python3 scripts/reproduce_figures.py [out_dir] [--skip-plots]

Figure 1 runs 10^3 trajectories per panel and takes about a minute.
"""

import runpy
import sys
from pathlib import Path

from tbcreset.cli import main

out = Path(next((a for a in sys.argv[1:] if not a.startswith("--")), "figures"))
status = main(["figures", "all", "--out", str(out), "--t-end", "30", "--grid-points", "60"])
if status:
    sys.exit(status)
if "--skip-plots" not in sys.argv:
    for name in ("fig1", "fig2", "fig3"):
        runpy.run_path(str(out / f"plot_{name}.py"), run_name="__main__")
        print(f"wrote {out / (name + '.png')}")
