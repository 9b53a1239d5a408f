"""Command-line entry point: ``ftbench <group> <action> [options]``.

Every option can also come from a JSON file passed with ``--config``; flags
given on the command line win.  Tabular results are CSV with a leading
``#`` metadata line, structured results are JSON with a ``meta`` block.  Both
carry the schema version, a hash of the resolved configuration and the seed,
so identical configurations give byte-identical artifacts.

Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 budget guard.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import ancilla, circuits, decoder, experiments, frame, lasvegas, lattice
from .pauli import PauliOperator

SCHEMA_VERSION = "ftbench.cli/1"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BUDGET = 0, 2, 3, 4
# options that never change an artifact and so stay out of the config hash
_UNHASHED = {"out", "append", "config", "workers"}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class BudgetError(RuntimeError):
    """Requested work exceeds the configured budget."""


class RunFailure(RuntimeError):
    """The pipeline ran but reported a failed check; the artifact is still written."""


@dataclass(frozen=True)
class Param:
    name: str
    type: Callable | None = None
    default: object = None
    help: str = ""
    nargs: str | None = None
    flag: bool = False
    choices: tuple | None = None

    @property
    def option(self) -> str:
        return "--" + self.name.replace("_", "-")


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str | None = None
    append: bool = False

    @property
    def seed(self) -> int:
        return int(self.params.get("seed") or 0)

    def config_hash(self) -> str:
        body = {"command": self.command, **{k: v for k, v in self.params.items() if k not in _UNHASHED}}
        text = json.dumps(body, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def meta(self, **extra) -> dict:
        return {"schema_version": SCHEMA_VERSION, "command": self.command,
                "config_hash": self.config_hash(), "seed": self.seed, **extra}


@dataclass
class Artifact:
    """Output of one command: a JSON document or CSV rows."""

    json: dict | None = None
    header: list | None = None
    rows: list | None = None
    extra_meta: dict | None = None

    def render(self, cfg: RunConfig, with_header: bool = True) -> str:
        meta = cfg.meta(**(self.extra_meta or {}))
        if self.json is not None:
            return json.dumps({"meta": meta, "result": self.json}, sort_keys=True, indent=1, default=_jsonable) + "\n"
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        if with_header:
            w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, PauliOperator):
        return obj.to_json()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# shared option groups ------------------------------------------------------------

GEOMETRY = [
    Param("spec", str, help="GeometrySpec JSON file"),
    Param("layout", str, help="CodeLayout JSON file (from 'layout build')"),
    Param("preset", str, choices=("fig1", "fig2"), help="built-in small dislocation layouts"),
    Param("kind", str, choices=lattice.KINDS),
    Param("L", int, help="linear size"),
    Param("l", int, help="hole side for hole lattices"),
    Param("n_pairs", int, help="dislocation pairs on a torus"),
    Param("gauge", str, choices=("original", "uniform")),
]
SEED = Param("seed", int, 0)
WORKERS = Param("workers", int, help="worker processes (default: FTBENCH_WORKERS or CPU count)")
PLAN = [
    Param("demands", str, help="JSON file: list of {theta, n} or mapping theta -> n"),
    Param("angles", int, help="number of distinct angles (uniform demand)"),
    Param("n", int, 1, help="demand per angle with --angles"),
    Param("shrink", float, ancilla.DEFAULT_SHRINK),
    Param("eps", float, 1e-3, help="allowed exhaustion probability"),
    Param("beta", float, 1.0),
]


def _geometry_spec(p: dict) -> lattice.GeometrySpec:
    if p.get("spec"):
        spec = lattice.GeometrySpec.from_json(_read_json(p["spec"]))
    elif p.get("preset"):
        spec = lattice.figure1_spec() if p["preset"] == "fig1" else lattice.figure2_spec()
    elif p.get("kind") and p.get("L"):
        fields = {"kind": p["kind"], "L": p["L"]}
        for key in ("l", "n_pairs"):
            if p.get(key) is not None:
                fields[key] = p[key]
        spec = lattice.GeometrySpec(**fields)
    else:
        raise ConfigError("give --spec, --layout, --preset, or --kind with --L")
    return spec


def _layout(p: dict, gauge: str | None = None) -> lattice.CodeLayout:
    if p.get("layout"):
        obj = _read_json(p["layout"])
        layout = lattice.CodeLayout.from_json(obj.get("result", obj))
    else:
        layout = lattice.build_layout(_geometry_spec(p))
    gauge = p.get("gauge") or gauge
    return layout.with_gauge(gauge) if gauge else layout


def _read_json(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _positive(p: dict, *names: str) -> None:
    for name in names:
        v = p.get(name)
        if v is None or v < 1:
            raise ConfigError(f"{name} must be a positive integer (got {v})")


def _parse_error(text: str) -> PauliOperator:
    """``"X3 Z5 Y7"`` (sparse), ``"XIZ"`` (dense) or a JSON Pauli file."""
    if os.path.exists(text):
        return PauliOperator.from_json(_read_json(text))
    tokens = text.replace(",", " ").split()
    if tokens and all(t[0].upper() in "XYZ" and t[1:].isdigit() for t in tokens):
        return PauliOperator({int(t[1:]): t[0].upper() for t in tokens})
    try:
        return PauliOperator.from_string(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse error {text!r}: {exc}") from exc


# commands ------------------------------------------------------------------------


def cmd_layout_build(p: dict) -> Artifact:
    layout = _layout(p)
    body = layout.to_json()
    body["summary"] = {"n_qubits": layout.n_qubits, "n_stabilizers": layout.n_stabilizers,
                       "rank": layout.rank, "logical_qubits": layout.logical_qubit_count}
    return Artifact(json=body)


def cmd_layout_distance(p: dict) -> Artifact:
    layout = _layout(p)
    d = lattice.code_distance(layout, p["weight_cap"], p["method"])
    return Artifact(json={"geometry": layout.spec.to_json(), "n_qubits": layout.n_qubits,
                          "logical_qubits": layout.logical_qubit_count, "distance": int(d),
                          "exceeded": d.exceeded, "witness": d.witness.to_json() if d.witness else None})


def cmd_layout_density(p: dict) -> Artifact:
    specs = [lattice.GeometrySpec.from_json(s) for s in p.get("specs") or []]
    specs += [lattice.GeometrySpec.from_json(_read_json(f)) for f in p.get("spec_files") or []]
    if not specs:
        raise ConfigError("layout density needs geometries (--spec-files or 'specs' in the config)")
    rows = lattice.density_report(specs, p["weight_cap"])
    header = list(lattice.DensityRow.__dataclass_fields__)
    return Artifact(header=header, rows=[[getattr(r, h) for h in header] for r in rows])


def cmd_decode_one(p: dict) -> Artifact:
    if not p.get("error"):
        raise ConfigError("decode one needs --error")
    layout = _layout(p)
    graph = decoder.build_decoding_graph(layout, p["exclude_pentagons"])
    err = _parse_error(p["error"])
    if err.support and max(err.support) >= layout.n_qubits:
        raise ConfigError(f"error acts on qubit {max(err.support)} but the layout has {layout.n_qubits}")
    return Artifact(json=decoder.decode_report(graph, err, p["decoder"]))


def cmd_decode_sweep(p: dict) -> Artifact:
    _positive(p, "trials")
    if not p.get("p"):
        raise ConfigError("decode sweep needs a --p grid")
    sizes = p.get("sizes") or [None]
    base = None if p.get("layout") else _geometry_spec({**p, "L": p.get("L") or sizes[0]})
    records = []
    for L in sizes:
        if L is None:
            layout = _layout(p)
        else:
            if base is None:
                raise ConfigError("--sizes needs a geometry spec, not a layout file")
            layout = lattice.build_layout(lattice.GeometrySpec(**{**asdict(base), "L": int(L)}))
            if p.get("gauge"):
                layout = layout.with_gauge(p["gauge"])
        records += experiments.estimate_logical_rate(
            layout, p["decoder"], p["p"], p["trials"], p["seed"], exclude_pentagons=p["exclude_pentagons"],
            workers=p.get("workers"), observable=p["observable"])
    header = list(experiments.CSV_FIELDS)
    return Artifact(header=header, rows=[[r.row()[h] for h in header] for r in records])


def cmd_decode_enumerate(p: dict) -> Artifact:
    _positive(p, "k")
    layout = _layout(p)
    graph = decoder.build_decoding_graph(layout, p["exclude_pentagons"])
    cases = math.comb(graph.n_qubits, p["k"]) * 3 ** p["k"]
    if cases > p["budget"]:
        raise BudgetError(f"{cases} error patterns exceed the budget of {p['budget']}")
    res = experiments.enumerate_failure_probability(graph, p["decoder"], p["k"], observable=p["observable"],
                                                    budget=p["budget"])
    return Artifact(json={"geometry": layout.spec.to_json(), "decoder": p["decoder"], "weight": res.weight,
                          "cases": res.cases, "failures": res.failures, "observable": res.observable,
                          "probability": str(res.probability), "rate": float(res),
                          "by_observable": res.by_observable})


def cmd_collapse_fit(p: dict) -> Artifact:
    if not p.get("csv"):
        raise ConfigError("collapse fit needs --csv")
    if not os.path.exists(p["csv"]):
        raise ConfigError(f"file not found: {p['csv']}")
    with open(p["csv"]) as fh:
        records = experiments.read_csv(fh)
    if p.get("decoder"):
        records = [r for r in records if r.decoder == p["decoder"]]
    if not records:
        raise ConfigError("no records to fit")
    fit = experiments.fit_collapse(records, p["p_c0"], p["theta0"], n_boot=p["boot"], seed=p["seed"])
    return Artifact(json=fit.as_dict())


def cmd_circuit_gen(p: dict) -> Artifact:
    layout = _layout(p, gauge="uniform")
    return Artifact(json=circuits.generate_syndrome_circuit(layout).to_json())


def cmd_circuit_verify(p: dict) -> Artifact:
    layout = _layout(p, gauge="uniform")
    if p.get("circuit"):
        obj = _read_json(p["circuit"])
        circ = circuits.SyndromeCircuit.from_json(obj.get("result", obj))
    else:
        circ = circuits.generate_syndrome_circuit(layout)
    if p.get("mutate"):
        stab, r1, r2 = p["mutate"]
        if stab not in circ.ancilla_of:
            raise ConfigError(f"stabilizer {stab} has no ancilla in this circuit")
        circ = circ.swap_rounds(stab, r1, r2)
    report = circuits.verify_syndrome_circuit(circ, layout, p["trials"], p["seed"])
    art = Artifact(json=report.to_json())
    if not report.passed:
        raise RunFailure(art)
    return art


def cmd_frame_compile(p: dict) -> Artifact:
    if not p.get("program"):
        raise ConfigError("frame compile needs --program")
    if not os.path.exists(p["program"]):
        raise ConfigError(f"file not found: {p['program']}")
    with open(p["program"]) as fh:
        try:
            ops, n = frame.load_program(fh.read())
        except (json.JSONDecodeError, frame.FrameError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad program: {exc}") from exc
    compiled = frame.compile_program(ops, n)
    body = compiled.to_json()
    body["schedule"] = [str(r) for r in compiled.requests]
    if p["check"]:
        got = frame.compiled_distribution(compiled)
        want = frame.direct_distribution(ops, n)
        body["distribution"] = {",".join(map(str, k)): str(v) for k, v in sorted(got.items())}
        body["matches_direct"] = got == want
    return Artifact(json=body)


def _dag(p: dict) -> lasvegas.CircuitDAG:
    if p.get("dag"):
        obj = _read_json(p["dag"])
        return lasvegas.CircuitDAG.from_json(obj.get("result", obj))
    _positive(p, "N", "r_tot", "D")
    rng = np.random.default_rng(p["seed"])
    return lasvegas.random_layered_dag(p["N"], p["r_tot"], p["D"], rng)


def cmd_schedule_sim(p: dict) -> Artifact:
    _positive(p, "trials")
    dag = _dag(p)
    batch = lasvegas.simulate_schedule(dag, p["P"], p["trials"], p["seed"], p.get("A"))
    extra = {"violations": batch.violations, "mean_T": float(batch.T.mean())}
    if p["survival"]:
        t, s = lasvegas.survival_curve(batch.T)
        return Artifact(header=["t", "survival"], rows=[[int(a), float(b)] for a, b in zip(t, s)], extra_meta=extra)
    rows = [[batch.n_wires, batch.r_tot, batch.P, k, int(T)] for k, T in enumerate(batch.T)]
    return Artifact(header=["N", "r_tot", "P", "trial", "T"], rows=rows, extra_meta=extra)


def cmd_schedule_fit(p: dict) -> Artifact:
    _positive(p, "trials", "tail_trials", "drift_trials", "D")
    if not p.get("sizes") or not p.get("depths"):
        raise ConfigError("schedule fit needs --sizes and --depths")
    fit = lasvegas.fit_completion_model(p["sizes"], p["depths"], p["P"], p["trials"], p["D"], p["seed"],
                                        tail_trials=p["tail_trials"], drift_trials=p["drift_trials"], A=p.get("A"))
    return Artifact(json=fit.to_json())


def _plan(p: dict) -> ancilla.BudgetPlan:
    if p.get("demands"):
        data = _read_json(p["demands"])
        if isinstance(data, dict):
            demands = {float(k): int(v) for k, v in data.items()}
        else:
            demands = {float(d["theta"]): int(d["n"]) for d in data}
    elif p.get("angles"):
        demands = [p["n"]] * p["angles"]
    else:
        raise ConfigError("give --demands or --angles")
    return ancilla.plan_budget(demands, p["shrink"], p["eps"], p["beta"])


def cmd_ancilla_plan(p: dict) -> Artifact:
    plan = _plan(p)
    if p["format"] == "json":
        return Artifact(json=plan.to_json())
    rows = [[b.theta, b.demand, a, c] for b in plan.budgets for a, c in enumerate(b.copies)]
    return Artifact(header=["theta", "n", "level", "copies"], rows=rows,
                    extra_meta={"total": plan.total, "exhaustion_bound": plan.bound})


def cmd_ancilla_simulate(p: dict) -> Artifact:
    _positive(p, "trials")
    plan = _plan(p)
    res = ancilla.simulate_consumption(plan, p["trials"], np.random.default_rng(p["seed"]), p["success"])
    return Artifact(json={"plan": {"total": plan.total, "demand": plan.demand, "max_levels": plan.max_levels,
                                   "exhaustion_bound": plan.bound}, "simulation": res.to_json()})


def cmd_ancilla_chain(p: dict) -> Artifact:
    theta, delta = Fraction(p["theta"]), Fraction(p["delta"])
    rule = {"exact": lambda: ancilla.exact_rounding,
            "grid": lambda: ancilla.grid_rounding(Fraction(p["step"]) if p.get("step") else 2 * delta),
            "offset": lambda: ancilla.offset_rounding(delta)}[p["rounding"]]()
    chain = ancilla.build_angle_chain(theta, delta, rule, p["length"])
    rows = [[k, str(a), str(chain.net_rotation(k)), str(chain.net_rotation(k) - theta)]
            for k, a in enumerate(chain.angles)]
    return Artifact(header=["failures", "angle", "net_rotation", "error"], rows=rows,
                    extra_meta={"max_error": str(chain.max_error())})


DECODER = Param("decoder", str, "mwpm", choices=("mwpm", "greedy"))
OBSERVABLE = Param("observable", str, "any", choices=("any", "X", "Z"))
NO_PENT = Param("exclude_pentagons", flag=True, default=False, help="drop five-qubit stabilizers from matching")

COMMANDS: dict[tuple[str, str], tuple[Callable, list]] = {
    ("layout", "build"): (cmd_layout_build, GEOMETRY + [SEED]),
    ("layout", "distance"): (cmd_layout_distance, GEOMETRY + [
        Param("weight_cap", int, 12), Param("method", str, "milp", choices=("milp", "search")), SEED]),
    ("layout", "density"): (cmd_layout_density, [
        Param("spec_files", str, nargs="+", help="GeometrySpec JSON files"), Param("weight_cap", int, 12), SEED]),
    ("decode", "one"): (cmd_decode_one, GEOMETRY + [
        Param("error", str, help="'X3 Z5', dense 'XIZ', or a Pauli JSON file"), DECODER, NO_PENT, SEED]),
    ("decode", "sweep"): (cmd_decode_sweep, GEOMETRY + [
        Param("sizes", int, nargs="+", help="override L for each curve"), Param("p", float, nargs="+"),
        Param("trials", int, 10_000), DECODER, OBSERVABLE, NO_PENT, SEED, WORKERS]),
    ("decode", "enumerate"): (cmd_decode_enumerate, GEOMETRY + [
        Param("k", int, help="error weight"), DECODER, OBSERVABLE, NO_PENT,
        Param("budget", int, 10**7, help="maximum number of error patterns"), SEED]),
    ("collapse", "fit"): (cmd_collapse_fit, [
        Param("csv", str, help="sweep CSV"), Param("decoder", str, choices=("mwpm", "greedy")),
        Param("p_c0", float, 0.12), Param("theta0", float, 0.6), Param("boot", int, 200), SEED]),
    ("circuit", "gen"): (cmd_circuit_gen, GEOMETRY + [SEED]),
    ("circuit", "verify"): (cmd_circuit_verify, GEOMETRY + [
        Param("circuit", str, help="circuit JSON (default: generate)"),
        Param("mutate", int, nargs=3, help="STAB R1 R2: swap one ancilla's gates between rounds"),
        Param("trials", int, 2), SEED]),
    ("frame", "compile"): (cmd_frame_compile, [
        Param("program", str, help="program JSON"),
        Param("check", flag=True, default=False, help="compare exact outcome distributions with direct simulation"),
        SEED]),
    ("schedule", "sim"): (cmd_schedule_sim, [
        Param("dag", str, help="DAG JSON (default: random layered DAG)"), Param("N", int, 64),
        Param("r_tot", int, 20), Param("D", int, 2), Param("P", float, 0.5), Param("A", float),
        Param("trials", int, 1000), Param("survival", flag=True, default=False, help="emit Pr[T > t] instead"),
        SEED]),
    ("schedule", "fit"): (cmd_schedule_fit, [
        Param("sizes", int, nargs="+"), Param("depths", int, nargs="+"), Param("D", int, 2),
        Param("P", float, 0.5), Param("A", float), Param("trials", int, 200),
        Param("tail_trials", int, 100_000), Param("drift_trials", int, 200), SEED]),
    ("ancilla", "plan"): (cmd_ancilla_plan, PLAN + [Param("format", str, "csv", choices=("csv", "json")), SEED]),
    ("ancilla", "simulate"): (cmd_ancilla_simulate, PLAN + [
        Param("trials", int, 10_000), Param("success", float, 0.5), SEED]),
    ("ancilla", "chain"): (cmd_ancilla_chain, [
        Param("theta", str, "1/10", help="target angle (exact decimal or fraction)"),
        Param("delta", str, "1/1000", help="rounding accuracy"),
        Param("rounding", str, "grid", choices=("exact", "grid", "offset")),
        Param("step", str, help="grid step (default 2 * delta)"), Param("length", int, 21), SEED]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _report_error("config", message)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftbench", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    subs: dict[str, argparse._SubParsersAction] = {}
    for (group, action), (_, params) in COMMANDS.items():
        if group not in subs:
            subs[group] = groups.add_parser(group).add_subparsers(dest="action", required=True, parser_class=_Parser)
        sp = subs[group].add_parser(action)
        sp.add_argument("--config", help="JSON file of options (flags override it)")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--append", action="store_true", help="append to --out, writing the header only once")
        for prm in params:
            if prm.flag:
                sp.add_argument(prm.option, dest=prm.name, action="store_const", const=True, default=None, help=prm.help)
            else:
                sp.add_argument(prm.option, dest=prm.name, type=prm.type, nargs=prm.nargs, choices=prm.choices,
                                default=None, help=prm.help + (f" (default {prm.default})" if prm.default is not None else ""))
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the optional config file over built-in defaults."""
    command = (args.group, args.action)
    _, params = COMMANDS[command]
    file_values = _read_json(args.config) if args.config else {}
    if not isinstance(file_values, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {prm.name for prm in params} | {"specs"}
    unknown = set(file_values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values = {}
    for prm in params:
        v = getattr(args, prm.name)
        if v is None:
            v = file_values.get(prm.name, prm.default)
        values[prm.name] = v
    if "specs" in file_values:
        values["specs"] = file_values["specs"]
    if "workers" in values and values["workers"] is None:
        values["workers"] = experiments.default_workers()
    return RunConfig(" ".join(command), values, args.out, args.append)


def _report_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _emit(cfg: RunConfig, art: Artifact) -> None:
    if cfg.out is None:
        sys.stdout.write(art.render(cfg))
        return
    appending = cfg.append and os.path.exists(cfg.out) and os.path.getsize(cfg.out) > 0
    if appending and art.json is not None:
        raise ConfigError("--append is only supported for CSV outputs")
    with open(cfg.out, "a" if appending else "w") as fh:
        fh.write(art.render(cfg, with_header=not appending))


def dispatch(cfg: RunConfig) -> int:
    func, _ = COMMANDS[tuple(cfg.command.split())]
    try:
        art = func(cfg.params)
    except RunFailure as exc:
        _emit(cfg, exc.args[0])
        _report_error("runtime", f"{cfg.command}: check failed")
        return EXIT_RUNTIME
    _emit(cfg, art)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return dispatch(cfg)
    except ConfigError as exc:
        _report_error("config", str(exc))
        return EXIT_CONFIG
    except BudgetError as exc:
        _report_error("budget", str(exc))
        return EXIT_BUDGET
    except (lattice.LayoutError, frame.FrameError, circuits.CircuitError, lasvegas.DAGError, TypeError) as exc:
        _report_error("config", f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    except BrokenPipeError:
        sys.stdout = open(os.devnull, "w")  # reader closed the pipe early
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        _report_error("runtime", f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
