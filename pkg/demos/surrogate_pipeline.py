"""Forest Fires preprocessing on a synthetic file with the same schema.

The real UCI file is not bundled, so this writes a surrogate (see
``qglm.surrogate``) and pushes it through ingestion, standardization, t-SNE,
outcome scaling and a baseline-only benchmark. The numbers describe the
surrogate, not the published benchmark. Run with
``python3 demos/surrogate_pipeline.py [path/to/forestfires.csv]`` to use a
real copy instead.
"""

import sys
import tempfile
from pathlib import Path

from qglm.cli import main
from qglm.surrogate import write_surrogate_forest_fires


def run(*argv):
    print("$ qglm", " ".join(argv), file=sys.stderr)
    code = main(list(argv))
    if code:
        raise SystemExit(code)


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        if len(sys.argv) > 1:
            raw = sys.argv[1]
        else:
            raw = str(Path(tmp) / "surrogate_forestfires.csv")
            write_surrogate_forest_fires(raw, seed=0)
        out = str(Path(tmp) / "ff_embedded.csv")
        run("preprocess", "--data", raw, "--out", out, "--seed", "0")
        print(Path(out).with_name("ff_embedded.provenance.txt").read_text(), file=sys.stderr)
        # a surrogate must not be compared with the published rows
        label = "forestfires" if len(sys.argv) > 1 else "none"
        run("bench", "--data", out, "--label", label, "--models", "glm,boost,mean")
