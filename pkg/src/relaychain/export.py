"""Graphviz DOT rendering of genomes and snapshot file helpers."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from . import neat
from .neat import BIAS, HIDDEN, INPUT, OUTPUT, Genome
from .simulation import TopologySnapshot

SNAPSHOT_FILE = "snapshots.jsonl"

_SHAPES = {INPUT: "box", BIAS: "box", HIDDEN: "ellipse", OUTPUT: "doublecircle"}


def to_dot(genome: Genome, disabled: str = "dashed", name: str = "genome") -> str:
    """Render ``genome`` as a DOT digraph.

    Inputs (and bias) share the top rank, outputs the bottom one; hidden nodes
    fall in between. Disabled connections are drawn dashed, or left out with
    ``disabled="omit"``. Nodes are emitted by id and edges by innovation, so
    equal genomes give identical text.
    """
    if disabled not in ("dashed", "omit"):
        raise ValueError("disabled must be 'dashed' or 'omit'")
    lines = [f'digraph "{name}" {{', "  rankdir=TB;", '  node [fontname="Helvetica"];']
    for node in genome.nodes:
        label = f"{node.id}\\n{node.kind}"
        lines.append(f'  n{node.id} [label="{label}", shape={_SHAPES[node.kind]}];')
    sources = [n.id for n in genome.nodes if n.kind in (INPUT, BIAS)]
    outputs = [n.id for n in genome.nodes if n.kind == OUTPUT]
    lines.append("  { rank=source; " + " ".join(f"n{i};" for i in sources) + " }")
    lines.append("  { rank=sink; " + " ".join(f"n{i};" for i in outputs) + " }")
    for c in genome.connections:
        if not c.enabled and disabled == "omit":
            continue
        style = "" if c.enabled else ", style=dashed"
        lines.append(f'  n{c.src} -> n{c.dst} [label="{c.weight:.3f}", tooltip="innovation {c.innovation}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_snapshots(snapshots: Iterable[TopologySnapshot], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for snap in snapshots:
            fh.write(json.dumps(snap.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


def read_snapshots(path: str | Path) -> list[TopologySnapshot]:
    snaps = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                data = json.loads(line)
                neat.loads(data["genome"])  # must decode to a valid genome
                snaps.append(TopologySnapshot(int(data["robot"]), int(data["step"]), data["genome"]))
    return snaps


def export_run(run_dir: str | Path, robot: int | None = None, disabled: str = "dashed") -> list[Path]:
    """Write ``<run>/<robot>_<step>.dot`` for each stored snapshot.

    Raises FileNotFoundError when the run holds no snapshots (e.g. a
    non-evolutionary controller) and KeyError for an unknown robot id.
    """
    run_dir = Path(run_dir)
    snaps = read_snapshots(run_dir / SNAPSHOT_FILE)
    if robot is not None:
        snaps = [s for s in snaps if s.robot == robot]
        if not snaps:
            raise KeyError(f"no snapshots for robot {robot}")
    written = []
    for snap in snaps:
        path = run_dir / f"{snap.robot}_{snap.step}.dot"
        path.write_text(to_dot(neat.loads(snap.genome), disabled, name=f"robot{snap.robot}_step{snap.step}"),
                        encoding="utf-8")
        written.append(path)
    return written
