"""Line-oriented JSON for dags and histories.

One JSON object per line, keys sorted, compact separators: identical inputs
serialize to identical bytes, which the determinism checks rely on. A dag
file holds one block per line; a history file starts with a config line,
then blocks, then per-miner arrival records and faults.

Dag files must contain exactly one parentless block with id 0 (the genesis).
"""

from __future__ import annotations

import json

from .dag import GENESIS_ID, BlockDag, DagError
from .sim import History, MinerConfig, Schedule, SchedulerConfig


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _block_record(block) -> dict:
    rec = {
        "id": block.id,
        "parents": sorted(block.parents),
        "miner": block.miner,
        "color": block.color,
        "round_created": block.round_created,
        "round_published": block.round_published,
    }
    if block.payload:
        rec["payload"] = block.payload.hex()
    return rec


def dag_to_jsonl(dag) -> str:
    lines = [_dumps(_block_record(dag.get(bid))) for bid in dag]
    return "\n".join(lines) + "\n"


def minor_to_jsonl(minor) -> str:
    """Debug export of a closed minor: one node per line with its minor
    parents and depth. Virtual endpoints use their negative sentinel ids."""
    lines = []
    for b in minor.topo():
        lines.append(
            _dumps(
                {
                    "id": b,
                    "color": minor.color,
                    "parents": sorted(minor.parents.get(b, ())),
                    "depth": minor.depth[b],
                }
            )
        )
    return "\n".join(lines) + "\n"


def _insert_records(dag: BlockDag, records: list[dict]) -> None:
    pending = {rec["id"]: rec for rec in records}
    ready = [rid for rid, rec in pending.items() if all(p in dag for p in rec["parents"])]
    while ready:
        ready.sort(reverse=True)
        rid = ready.pop()
        rec = pending.pop(rid)
        dag.add_block(
            parents=frozenset(rec["parents"]),
            miner=rec["miner"],
            color=rec["color"],
            round_created=rec["round_created"],
            round_published=rec["round_published"],
            payload=bytes.fromhex(rec.get("payload", "")),
            bid=rec["id"],
        )
        ready.extend(
            rid2
            for rid2, rec2 in pending.items()
            if all(p in dag for p in rec2["parents"]) and rid2 not in ready
        )
    if pending:
        raise DagError(f"unresolvable parent references for blocks {sorted(pending)}")


def dag_from_jsonl(text: str) -> BlockDag:
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    roots = [rec for rec in records if not rec["parents"]]
    if len(roots) != 1:
        raise DagError(f"expected exactly one parentless block, found {len(roots)}")
    root = roots[0]
    if root["id"] != GENESIS_ID:
        raise DagError(f"the genesis must have id {GENESIS_ID}, found {root['id']}")
    dag = BlockDag(
        genesis_color=root["color"],
        genesis_miner=root["miner"],
        genesis_round=root["round_created"],
        genesis_payload=bytes.fromhex(root.get("payload", "")),
    )
    _insert_records(dag, [rec for rec in records if rec["id"] != GENESIS_ID])
    return dag


def history_to_jsonl(history: History) -> str:
    cfg = history.config
    lines = [
        _dumps(
            {
                "type": "config",
                "t_max": cfg.t_max,
                "delta": cfg.delta,
                "n_colors": cfg.n_colors,
                "delivery": cfg.delivery,
                "fixed_delay": cfg.fixed_delay,
                "seed": cfg.seed,
                "miners": [
                    {"power": m.power, "t_start": m.t_start, "t_end": m.t_end}
                    for m in cfg.miners
                ],
                "strategies": list(history.strategy_names),
            }
        )
    ]
    for bid in history.dag:
        lines.append(_dumps({"type": "block"} | _block_record(history.dag.get(bid))))
    for miner, arrivals in enumerate(history.arrivals):
        for r, bid in sorted(arrivals):
            lines.append(_dumps({"type": "arrival", "miner": miner, "round": r, "block": bid}))
    for fault in history.faults:
        lines.append(_dumps({"type": "fault"} | fault))
    return "\n".join(lines) + "\n"


def history_from_jsonl(text: str) -> History:
    """Rebuild a history from its event log.

    The pre-drawn schedule is not stored (it is reproducible from the seed),
    so the loaded history carries schedule=None; every checker works from the
    dag and the arrival timelines.
    """
    config = None
    blocks: list[dict] = []
    arrivals_raw: list[dict] = []
    faults: list[dict] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec.get("type")
        if kind == "config":
            config = rec
        elif kind == "block":
            blocks.append(rec)
        elif kind == "arrival":
            arrivals_raw.append(rec)
        elif kind == "fault":
            faults.append({k: v for k, v in rec.items() if k != "type"})
        else:
            raise DagError(f"unknown history record type {kind!r}")
    if config is None:
        raise DagError("history file has no config line")

    cfg = SchedulerConfig(
        t_max=config["t_max"],
        delta=config["delta"],
        n_colors=config["n_colors"],
        miners=tuple(
            MinerConfig(power=m["power"], t_start=m["t_start"], t_end=m["t_end"])
            for m in config["miners"]
        ),
        delivery=config["delivery"],
        fixed_delay=config["fixed_delay"],
        seed=config["seed"],
    ).validated()

    roots = [rec for rec in blocks if not rec["parents"]]
    if len(roots) != 1 or roots[0]["id"] != GENESIS_ID:
        raise DagError("history blocks must contain exactly one genesis with id 0")
    root = roots[0]
    dag = BlockDag(
        genesis_color=root["color"],
        genesis_miner=root["miner"],
        genesis_round=root["round_created"],
    )
    _insert_records(dag, [rec for rec in blocks if rec["id"] != GENESIS_ID])

    arrivals: list[list[tuple[int, int]]] = [[] for _ in cfg.miners]
    for rec in arrivals_raw:
        arrivals[rec["miner"]].append((rec["round"], rec["block"]))
    for lst in arrivals:
        lst.sort()

    return History(
        config=cfg,
        schedule=None,
        dag=dag,
        arrivals=arrivals,
        faults=faults,
        strategy_names=tuple(config["strategies"]),
    )
