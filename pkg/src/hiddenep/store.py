"""
Result persistence: CSV payloads, result records, the hash-keyed cache and
plot-script emission.

Every run lands in ``<root>/<command>-<hash12>/`` where the hash covers the
full physical parameter set.  A directory holding ``record.json`` and all of
its payloads is a cache hit.  Files are written to a temporary name in the
same directory and renamed, so an interrupted run never leaves a truncated
payload behind.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

FORMAT_VERSION = 1
OUTPUT_ENV = "HIDDENEP_OUTPUT"
DEFAULT_ROOT = "hiddenep-out"

SCHEMAS = {
    "spectrum": ("index", "eigenvalue"),
    "vacuum-profile": ("l", "re", "im"),
    "mipr-sweep": ("mu", "trunc", "m", "mipr"),
    "dicke-quench": ("t", "n_p"),
    "dmu-scan": ("mu", "avg_np", "d_mu", "bounded_flag"),
}


def output_root(explicit: Optional[str] = None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_ENV) or DEFAULT_ROOT)


def fmt(x) -> str:
    """Canonical text for one CSV cell; floats at 17 significant digits."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def param_hash(params: dict) -> str:
    """sha256 of the canonical JSON form of ``params``.

    Floats go through :func:`fmt` so that 2 and 2.0 hash alike.
    """
    def canon(v):
        if isinstance(v, (list, tuple)):
            return [canon(x) for x in v]
        if isinstance(v, float):
            return fmt(v)
        return v
    blob = json.dumps({k: canon(v) for k, v in params.items()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def atomic_write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(command: str, rows: Iterable[Sequence], meta: Optional[dict] = None,
             columns: Optional[Sequence[str]] = None) -> str:
    """CSV body: a '#'-prefixed version line, a header row, then the data.

    The version line is ``# hiddenep-csv v<N> <command> key=value ...``.
    """
    columns = SCHEMAS[command] if columns is None else columns
    head = f"# hiddenep-csv v{FORMAT_VERSION} {command}"
    for k, v in sorted((meta or {}).items()):
        head += f" {k}={fmt(v)}"
    lines = [head, ",".join(columns)]
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"row {r!r} does not match columns {columns}")
        lines.append(",".join(fmt(x) for x in r))
    return "\n".join(lines) + "\n"


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of :func:`csv_text`; returns (meta, columns, raw rows)."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        toks = lines[0][1:].split()
        meta["format"], meta["version"], meta["command"] = toks[0], toks[1], toks[2]
        for t in toks[3:]:
            k, _, v = t.partition("=")
            meta[k] = v
        lines = lines[1:]
    cols = lines[0].split(",")
    return meta, cols, [ln.split(",") for ln in lines[1:]]


@dataclass
class ResultRecord:
    command: str
    params_hash: str
    params: dict
    created: str
    payloads: list = field(default_factory=list)  # file names relative to the run dir
    format_version: int = FORMAT_VERSION
    status: str = "ok"
    summary: dict = field(default_factory=dict)
    run_dir: Optional[str] = None

    @classmethod
    def new(cls, command: str, params: dict) -> "ResultRecord":
        now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return cls(command, param_hash({"command": command, **params}), dict(params), now)

    def payload_paths(self) -> list[Path]:
        return [Path(self.run_dir) / p for p in self.payloads]

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("run_dir")
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, run_dir) -> "ResultRecord":
        with open(Path(run_dir) / "record.json", encoding="utf-8") as f:
            d = json.load(f)
        return cls(run_dir=str(run_dir), **d)


def run_dir_for(root: Path, record: ResultRecord) -> Path:
    return Path(root) / f"{record.command}-{record.params_hash[:12]}"


def cache_lookup(root: Path, command: str, params: dict) -> Optional[ResultRecord]:
    """Completed record with the same parameter hash, or None."""
    probe = ResultRecord.new(command, params)
    d = run_dir_for(root, probe)
    if not (d / "record.json").exists():
        return None
    try:
        rec = ResultRecord.load(d)
    except (OSError, ValueError, TypeError):
        return None
    if rec.status != "ok" or rec.format_version != FORMAT_VERSION:
        return None
    if not all(p.exists() for p in rec.payload_paths()):
        return None
    return rec


def commit(record: ResultRecord, payloads: dict[str, str], root: Path) -> ResultRecord:
    """Write payload texts then the record; the record goes last."""
    d = run_dir_for(root, record)
    record.run_dir = str(d)
    record.payloads = sorted(payloads)
    for name, text in payloads.items():
        atomic_write_text(d / name, text)
    atomic_write_text(d / "record.json", record.to_json())
    return record


# ---------------------------------------------------------------------------
# plot scripts

_PLOT_HEAD = '''\
"""Generated by hiddenep; renders {command} payloads from this directory."""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent


def load(name):
    # line 1 is the version comment, line 2 the header
    return np.genfromtxt(HERE / name, delimiter=",", skip_header=1, names=True)


def meta(name):
    first = (HERE / name).read_text(encoding="utf-8").splitlines()[0]
    return dict(t.split("=", 1) for t in first[1:].split() if "=" in t)

'''

_PLOT_BODY = {
    "spectrum": '''
d = load("spectrum.csv")
fig, ax = plt.subplots(figsize=(4, 5))
ax.hlines(d["eigenvalue"], 0, 1)
ax.set_xticks([])
ax.set_ylabel("E")
ax.set_title("lowest eigenvalues")
''',
    "vacuum-profile": '''
d = load("profile.csv")
fig, ax = plt.subplots(figsize=(7, 4))
w = 0.4
ax.bar(d["l"] - w / 2, d["re"], width=w, color="red", label="Re c_l")
ax.bar(d["l"] + w / 2, d["im"], width=w, color="black", label="Im c_l")
ax.set_xlabel("l")
ax.set_ylabel("c_l")
ax.legend()
''',
    "mipr-sweep": '''
d = load("mipr.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for n in np.unique(d["trunc"]):
    sel = d["trunc"] == n
    ax.plot(d["mu"][sel], d["mipr"][sel], marker=".", label=f"L = {int(n)}")
ax.set_xlabel("mu")
ax.set_ylabel("MIPR")
ax.legend()
''',
    "dicke-quench": '''
files = sorted(HERE.glob("quench*.csv"))
mus = np.array([float(meta(f.name)["mu"]) for f in files])
order = np.argsort(mus)
runs = [load(files[i].name) for i in order]
fig, ax = plt.subplots(figsize=(7, 4))
if len(runs) == 1:
    ax.plot(runs[0]["t"], runs[0]["n_p"])
    ax.set_xlabel("t")
    ax.set_ylabel("N_P")
else:
    t = runs[0]["t"]
    grid = np.array([np.interp(t, r["t"], r["n_p"]) for r in runs])
    m = ax.pcolormesh(t, mus[order], grid, shading="nearest")
    fig.colorbar(m, ax=ax, label="N_P")
    ax.set_xlabel("t")
    ax.set_ylabel("mu")
''',
    "dmu-scan": '''
d = load("dmu.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(d["mu"], d["d_mu"], marker=".")
bad = d["bounded_flag"] == 0
ax.plot(d["mu"][bad], d["d_mu"][bad], "x", color="red", label="cutoff cap reached")
ax.set_xlabel("mu")
ax.set_ylabel("D_mu")
if bad.any():
    ax.legend()
''',
}

_PLOT_TAIL = '''
fig.tight_layout()
out = HERE / "{stem}.png"
fig.savefig(out, dpi=150)
print(out)
'''


def emit_plot_script(record: ResultRecord) -> Path:
    """Write ``plot_<command>.py`` next to the payloads and return its path."""
    if record.command not in _PLOT_BODY:
        raise ValueError(f"no plot template for command {record.command!r}")
    if record.run_dir is None or not record.payloads:
        raise FileNotFoundError("record has no payload")
    missing = [str(p) for p in record.payload_paths() if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing payload(s): {', '.join(missing)}")
    stem = f"plot_{record.command.replace('-', '_')}"
    text = _PLOT_HEAD.format(command=record.command) + _PLOT_BODY[record.command] + _PLOT_TAIL.format(stem=stem)
    path = Path(record.run_dir) / f"{stem}.py"
    atomic_write_text(path, text)
    return path
