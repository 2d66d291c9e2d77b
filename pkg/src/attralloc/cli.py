"""Command line interface: generate instances, run experiments, report.

The three subcommands form a pipeline. ``generate`` writes instance
files and a manifest. ``run`` executes the policy grid on those
instances, one trace CSV per (instance, policy) unit, updating its own
manifest after every unit so an interrupted run can be resumed; a
rerun with the same seed and config skips completed units and
reproduces everything except the timing column. ``report`` turns a
run directory into summary tables and per-stage curves.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor, as_completed
import csv
from dataclasses import dataclass, fields, replace
import json
from pathlib import Path
import sys

import numpy as np

from .instances import (
    PROBLEM_SETS,
    Instance,
    generate_instance,
    load_instance,
    problem_set,
    save_instance,
    true_utility_ranks,
    ukind_code,
)
from .policies import PolicyConfig
from .preference import UTILITY_KINDS, VALUE_KINDS
from .sim import compare, read_trace_csv, run_unit, write_trace_csv
from .trace import RunTrace

# canonical orderings; instance identity is seeded by position in these
CANON_SETS = PROBLEM_SETS
CANON_VALUE_KINDS = VALUE_KINDS
CANON_UTILITY_KINDS = UTILITY_KINDS

INSTANCE_MANIFEST = "manifest.json"
RUN_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that defines an experiment besides the seed.

    Serialized as a flat JSON object with exactly these keys; a config
    file may set any subset and inherits defaults for the rest.
    """

    sets: tuple[str, ...] = CANON_SETS
    value_kinds: tuple[str, ...] = CANON_VALUE_KINDS
    utility_kinds: tuple[str, ...] = CANON_UTILITY_KINDS
    instances_per_cell: int = 20
    replications: int = 10
    budget: int = 180
    uniform_phases: tuple[int, ...] = (0, 36, 72, 108, 144, 180)
    rules: tuple[str, ...] = ("I", "II")

    def __post_init__(self):
        for name in ("sets", "value_kinds", "utility_kinds", "uniform_phases", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for s in self.sets:
            if s not in CANON_SETS:
                raise ValueError(f"unknown problem set {s!r}")
        for v in self.value_kinds:
            if v not in CANON_VALUE_KINDS:
                raise ValueError(f"unknown value kind {v!r}")
        for u in self.utility_kinds:
            if u not in CANON_UTILITY_KINDS:
                raise ValueError(f"unknown utility kind {u!r}")
        if self.instances_per_cell < 1 or self.replications < 1:
            raise ValueError("instance and replication counts must be positive")
        self.policies()

    def policies(self) -> list[PolicyConfig]:
        return [
            PolicyConfig(self.budget, h, r)
            for h in self.uniform_phases
            for r in self.rules
        ]

    def to_dict(self) -> dict:
        return {
            "sets": list(self.sets),
            "value_kinds": list(self.value_kinds),
            "utility_kinds": list(self.utility_kinds),
            "instances_per_cell": self.instances_per_cell,
            "replications": self.replications,
            "budget": self.budget,
            "uniform_phases": list(self.uniform_phases),
            "rules": list(self.rules),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_config(args) -> ExperimentConfig:
    config = (
        ExperimentConfig.from_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    if getattr(args, "set", None):
        config = replace(config, sets=tuple(args.set))
    if getattr(args, "smoke", False):
        config = replace(config, instances_per_cell=2, replications=2)
    return config


def _cells(config: ExperimentConfig):
    for set_name in config.sets:
        for vkind in config.value_kinds:
            for ukind in config.utility_kinds:
                yield set_name, vkind, ukind


def cmd_generate(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed
    files = []
    for set_name, vkind, ukind in _cells(config):
        spec = problem_set(set_name)
        for n in range(config.instances_per_cell):
            # canonical indices, so the same (seed, cell, n) always
            # yields the same instance no matter what else the config asks for
            entropy = (
                seed,
                CANON_SETS.index(set_name),
                CANON_VALUE_KINDS.index(vkind),
                CANON_UTILITY_KINDS.index(ukind),
                n,
            )
            rng = np.random.default_rng(np.random.SeedSequence(entropy))
            iid = f"{set_name}-{vkind}-{ukind_code(ukind)}-{n:02d}"
            instance = generate_instance(
                spec, vkind, ukind, rng, instance_id=iid, seed_entropy=entropy
            )
            fname = f"{iid}.json"
            save_instance(instance, out / fname)
            files.append(fname)
    manifest = {"kind": "instances", "seed": seed, "config": config.to_dict(), "files": files}
    (out / INSTANCE_MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(files)} instances to {out}")
    return 0


def _select_instances(
    instances_dir: Path, config: ExperimentConfig
) -> list[tuple[str, Instance]]:
    """Instance files for every configured cell, in deterministic order."""
    manifest_path = instances_dir / INSTANCE_MANIFEST
    if manifest_path.exists():
        names = json.loads(manifest_path.read_text(encoding="utf-8"))["files"]
    else:
        names = sorted(p.name for p in instances_dir.glob("*.json") if p.name != INSTANCE_MANIFEST)
    loaded = [(name, load_instance(instances_dir / name)) for name in names]
    selected: list[tuple[str, Instance]] = []
    for set_name, vkind, ukind in _cells(config):
        cell = [
            (name, inst)
            for name, inst in loaded
            if inst.set_name == set_name
            and inst.vspec.kind == vkind
            and inst.uspec.kind == ukind
        ]
        if len(cell) < config.instances_per_cell:
            raise ValueError(
                f"need {config.instances_per_cell} instances for cell "
                f"({set_name}, {vkind}, {ukind}), found {len(cell)}"
            )
        selected.extend(cell[: config.instances_per_cell])
    return selected


def _run_manifest_header(config: ExperimentConfig, seed: int, instances_dir: Path, files) -> dict:
    return {
        "kind": "runs",
        "seed": seed,
        "config": config.to_dict(),
        "instances_dir": str(instances_dir),
        "instance_files": list(files),
    }


def cmd_run(args) -> int:
    config = _load_config(args)
    instances_dir = Path(args.instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    selected = _select_instances(instances_dir, config)
    policies = config.policies()
    header = _run_manifest_header(
        config, args.seed, instances_dir, [name for name, _ in selected]
    )
    manifest_path = out / RUN_MANIFEST
    completed: dict[str, str] = {}
    if manifest_path.exists():
        stored = json.loads(manifest_path.read_text(encoding="utf-8"))
        stored_header = {key: stored.get(key) for key in header}
        if stored_header != header:
            raise ValueError(
                f"output directory {out} holds a different experiment "
                "(seed, config, or instance list differs); use a fresh directory"
            )
        completed = stored.get("completed", {})
    units = []
    for gi, (name, inst) in enumerate(selected):
        for pi, policy in enumerate(policies):
            key = f"{inst.instance_id}-{policy.label}"
            # a manifest entry only counts if its trace file survived
            if key not in completed or not (out / completed[key]).exists():
                units.append((gi, pi, key))
    total = len(selected) * len(policies)
    print(
        f"{total - len(units)} of {total} units already complete; running {len(units)}",
        file=sys.stderr,
    )

    def finish(key: str, traces: list[RunTrace], done: int) -> None:
        fname = f"trace-{key}.csv"
        tmp = out / (fname + ".tmp")
        write_trace_csv(traces, tmp)
        tmp.rename(out / fname)
        completed[key] = fname
        manifest = dict(header)
        manifest["completed"] = completed
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        print(f"[{done}/{len(units)}] {key}", file=sys.stderr)

    if args.workers <= 1:
        for n, (gi, pi, key) in enumerate(units):
            traces = run_unit(
                selected[gi][1], policies[pi], args.seed, gi, pi, config.replications
            )
            finish(key, traces, n + 1)
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = {
                pool.submit(
                    run_unit,
                    selected[gi][1],
                    policies[pi],
                    args.seed,
                    gi,
                    pi,
                    config.replications,
                ): key
                for gi, pi, key in units
            }
            done = 0
            for fut in as_completed(futures):
                done += 1
                finish(futures[fut], fut.result(), done)
    print(f"run complete: {len(completed)} trace files in {out}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.traces)
    manifest = json.loads((run_dir / RUN_MANIFEST).read_text(encoding="utf-8"))
    config = ExperimentConfig.from_dict(manifest["config"])
    instances_dir = Path(args.instances) if args.instances else Path(manifest["instances_dir"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    completed = manifest.get("completed", {})
    policies = config.policies()
    T = config.budget

    # accumulators keyed by (set, vkind, ukind, H, rule)
    oc_sum: dict[tuple, np.ndarray] = {}
    correct_sum: dict[tuple, np.ndarray] = {}
    runs_count: dict[tuple, int] = {}
    finals: dict[tuple, list[tuple[float, bool]]] = {}
    total_ms: dict[tuple, list[float]] = {}
    by_rank: dict[tuple, np.ndarray] = {}
    by_attr: dict[tuple, np.ndarray] = {}
    distinct: dict[tuple, int] = {}

    instance_by_id: dict[str, Instance] = {}
    for name in manifest["instance_files"]:
        inst = load_instance(instances_dir / name)
        instance_by_id[inst.instance_id] = inst

    for key, fname in sorted(completed.items()):
        traces = read_trace_csv(run_dir / fname)
        for tr in traces:
            inst = instance_by_id[tr.instance_id]
            group = (
                inst.set_name,
                inst.vspec.kind,
                inst.uspec.kind,
                tr.uniform_phase,
                tr.rule,
            )
            if group not in oc_sum:
                oc_sum[group] = np.zeros(T)
                correct_sum[group] = np.zeros(T, dtype=np.int64)
                runs_count[group] = 0
                finals[group] = []
                total_ms[group] = []
                by_rank[group] = np.zeros(inst.m)
                by_attr[group] = np.zeros(inst.k)
                distinct[group] = 0
            oc_sum[group] += tr.oc
            correct_sum[group] += tr.correct
            runs_count[group] += 1
            finals[group].append((float(tr.oc[-1]), bool(tr.correct[-1])))
            total_ms[group].append(tr.total_ms)
            ranks = true_utility_ranks(inst)
            alt_share = np.bincount(tr.alt, minlength=inst.m) / tr.budget
            for i, r in enumerate(ranks):
                by_rank[group][r] += alt_share[i]
            by_attr[group] += np.bincount(tr.attr, minlength=inst.k) / tr.budget
            distinct[group] += tr.distinct_pairs()

    def cell_label(vkind: str, ukind: str) -> str:
        return f"{vkind}-{ukind_code(ukind)}"

    for set_name in config.sets:
        cells = [(v, u) for v in config.value_kinds for u in config.utility_kinds]
        # final tables: one row per policy, one column per cell
        for stem, value in (
            ("final_oc", lambda g: oc_sum[g][-1] / runs_count[g]),
            ("final_correct", lambda g: int(correct_sum[g][-1])),
            ("timing_s", lambda g: float(np.mean(total_ms[g])) / 1000.0),
        ):
            path = out / f"{stem}_{set_name}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["uniform_phase", "rule", "runs"] + [cell_label(v, u) for v, u in cells])
                for policy in policies:
                    row = [policy.uniform_phase, policy.rule]
                    groups = [
                        (set_name, v, u, policy.uniform_phase, policy.rule) for v, u in cells
                    ]
                    present = [g for g in groups if g in runs_count]
                    row.append(runs_count[present[0]] if present else 0)
                    for g in groups:
                        row.append(value(g) if g in runs_count else "")
                    w.writerow(row)
        # per-stage mean cost curves, one file per cell
        for v, u in cells:
            path = out / f"curves_{set_name}-{cell_label(v, u)}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                labels = [p.label for p in policies]
                w.writerow(["stage"] + labels)
                curves = []
                for policy in policies:
                    g = (set_name, v, u, policy.uniform_phase, policy.rule)
                    curves.append(
                        oc_sum[g] / runs_count[g] if g in runs_count else np.full(T, np.nan)
                    )
                for s in range(T):
                    w.writerow([s + 1] + [f"{c[s]:.8g}" for c in curves])
        # hybrids against the pure uniform policy, per cell and rule
        uniform_h = config.budget
        path = out / f"comparisons_{set_name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                [
                    "value_kind",
                    "utility_kind",
                    "rule",
                    "uniform_phase",
                    "mean_oc",
                    "mean_oc_uniform",
                    "welch_p",
                    "oc_verdict",
                    "diff_correct_share",
                    "ci_low",
                    "ci_high",
                    "selection_verdict",
                ]
            )
            if uniform_h in config.uniform_phases:
                for v, u in cells:
                    for rule in config.rules:
                        base = (set_name, v, u, uniform_h, rule)
                        if base not in finals:
                            continue
                        for h in config.uniform_phases:
                            if h == uniform_h:
                                continue
                            g = (set_name, v, u, h, rule)
                            if g not in finals:
                                continue
                            res = compare(finals[g], finals[base])
                            w.writerow(
                                [
                                    v,
                                    u,
                                    rule,
                                    h,
                                    f"{res.mean_oc_a:.8g}",
                                    f"{res.mean_oc_b:.8g}",
                                    f"{res.p_value:.6g}",
                                    res.oc_verdict,
                                    f"{res.diff_correct:.6g}",
                                    f"{res.ci_low:.6g}",
                                    f"{res.ci_high:.6g}",
                                    res.selection_verdict,
                                ]
                            )
        # sampling behavior pooled over cells, per policy
        spec = problem_set(set_name)
        path = out / f"sampling_{set_name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                ["uniform_phase", "rule", "runs", "mean_distinct_pairs"]
                + [f"share_rank{r + 1}" for r in range(spec.m)]
                + [f"share_attr{j + 1}" for j in range(spec.k)]
            )
            for policy in policies:
                groups = [
                    (set_name, v, u, policy.uniform_phase, policy.rule)
                    for v, u in cells
                    if (set_name, v, u, policy.uniform_phase, policy.rule) in runs_count
                ]
                if not groups:
                    continue
                n = sum(runs_count[g] for g in groups)
                rank_share = sum(by_rank[g] for g in groups) / n
                attr_share = sum(by_attr[g] for g in groups) / n
                dp = sum(distinct[g] for g in groups) / n
                w.writerow(
                    [policy.uniform_phase, policy.rule, n, f"{dp:.4f}"]
                    + [f"{x:.5f}" for x in rank_share]
                    + [f"{x:.5f}" for x in attr_share]
                )
    print(f"report written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attralloc",
        description="Sample allocation experiments for multi-attribute selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate random problem instances")
    p_gen.add_argument("--config", help="JSON experiment config file")
    p_gen.add_argument("--seed", type=int, required=True, help="generation seed")
    p_gen.add_argument("--out", required=True, help="output directory for instances")
    p_gen.add_argument("--set", action="append", choices=CANON_SETS, help="restrict to one problem set (repeatable)")
    p_gen.add_argument("--smoke", action="store_true", help="tiny experiment: 2 instances, 2 replications")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run the policy grid on generated instances")
    p_run.add_argument("--config", help="JSON experiment config file")
    p_run.add_argument("--instances", required=True, help="directory written by generate")
    p_run.add_argument("--seed", type=int, required=True, help="experiment seed")
    p_run.add_argument("--out", required=True, help="output directory for traces")
    p_run.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p_run.add_argument("--set", action="append", choices=CANON_SETS, help="restrict to one problem set (repeatable)")
    p_run.add_argument("--smoke", action="store_true", help="tiny experiment: 2 instances, 2 replications")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="summarize a run directory")
    p_rep.add_argument("--traces", required=True, help="run output directory")
    p_rep.add_argument("--out", required=True, help="directory for report CSVs")
    p_rep.add_argument("--instances", help="instances directory (defaults to the one recorded by run)")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
