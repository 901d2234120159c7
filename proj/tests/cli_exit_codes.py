"""Exit codes of the command line tool."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

cli, configs = sys.argv[1], Path(sys.argv[2])
levels = str(configs / "landau_levels.json")
failures = 0


def expect(code, args, needle=None):
    global failures
    r = subprocess.run([cli] + args, capture_output=True, text=True)
    good = r.returncode == code and (needle is None or needle in r.stdout)
    print(("ok  " if good else "BAD ") + str(r.returncode) + " " + " ".join(args))
    if not good:
        print(r.stdout, r.stderr)
        failures += 1


with tempfile.TemporaryDirectory() as tmp:
    bad = Path(tmp) / "bad.json"
    doc = json.loads(Path(levels).read_text())
    doc["colour"] = "blue"
    bad.write_text(json.dumps(doc))

    expect(2, [])
    expect(2, ["count", "-c", str(Path(tmp) / "missing.json")])
    expect(2, ["count", "-c", str(bad)])
    expect(2, ["count", "-c", levels, "-p", "4", "--grid", "32", "32", "-o", tmp])
    expect(0, ["count", "-c", levels, "-p", "4", "-o", tmp], "N[0.5, 1.5] = 4")
    expect(0, ["predict", "-c", levels, "-o", tmp], "p=4 N_pred[0.5, 1.5] = 4")
    expect(0, ["assemble", "-c", levels, "-p", "2", "--grid", "32", "32", "-o", tmp])
    mtx = str(next(Path(tmp).glob("*_p2.mtx")))
    expect(0, ["count", "--matrix", mtx, "--interval", "0.5:1.5"], "= 2")
    expect(2, ["eigs", "--matrix", mtx, "--interval", "0:10", "--max-m", "1"])
    expect(2, ["count", "--matrix", mtx, "--interval", "1.5"])
    expect(3, ["sweep", "-c", levels, "-p", "2", "-p", "4", "--grid", "32", "32", "-o", tmp])

sys.exit(1 if failures else 0)
