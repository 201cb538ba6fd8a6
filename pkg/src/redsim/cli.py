# -*- coding: UTF-8 -*-

from __future__ import annotations

import sys
from argparse import ArgumentParser, Namespace
from concurrent.futures import ProcessPoolExecutor
from math import sqrt
from os.path import join
from typing import List, Optional, Sequence

from logpie import get_logger, Logger

from . import __version__
from .aqm import RedVariant
from .constants import (
    DELAY_PROFILES,
    DROP_TAIL,
    FLOW_TRACE_HEADER,
    ORACLE_CSV_HEADER,
    QUEUE_TRACE_HEADER,
    VARIANTS,
)
from .analysis import (
    DropLawInput,
    GoodputModel,
    Pmf,
    closed_form_pmf,
    drop_size_shares,
    exhaustive_interdrop,
    fairness_required_p,
    goodput_bound,
    pmf_distance,
    sample_interdrop,
)
from .exceptions import (
    AnalysisError,
    ArgumentError,
    OracleToleranceError,
    RedSimError,
    ScenarioError,
)
from .metrics import (
    RunResult,
    flow_trace_rows,
    metrics_csv,
    queue_trace_rows,
    summary_table,
    to_csv,
)
from .netsim import delay_label, run_scenario, Scenario
from .scenario import ResolvedScenario, RunManifest, ScenarioFile, load_scenario
from .simkernel import RandomStream
from .utils import ensure_folder, fixed, make_dirs, mbps, stable_hash

EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_INVALID: int = 2

EXACT_TOLERANCE: float = 1e-12

# total-variation allowance for n Monte-Carlo samples is this over sqrt(n):
SAMPLING_SPREAD: float = 5.0

ORACLE_DEFAULTS: dict = {
    "variants": ["RED1", "RED4", "RED5"],
    "p_b": 0.1,
    "sizes": [1500.0, 750.0, 375.0],
    "M": 1500.0,
    "samples": 100000,
    "seed": 1,
}


def _silent() -> Logger:
    return get_logger("redsim", state="off")


def _error(error: BaseException):
    print(f"redsim: error: {error}", file=sys.stderr)


def _write(directory: str, name: str, text: str) -> str:
    with open(join(directory, name), "w", encoding="UTF-8", newline="") as handle:
        handle.write(text)
    return name


def _csv_list(text: str, convert=str) -> list:
    return [convert(item.strip()) for item in text.split(",") if item.strip()]


def write_run(resolved: ResolvedScenario, results: Sequence[RunResult], directory: str) -> List[str]:
    """Write metrics, summaries, traces and the manifest of one run."""
    make_dirs(directory)
    scenario = resolved.scenario
    table = summary_table(results)
    artifacts = [
        _write(directory, "metrics.csv", metrics_csv(results)),
        _write(directory, "summary.txt", table.as_text()),
        _write(directory, "summary.csv", table.as_csv()),
    ]
    if scenario.trace_queue:
        rows = [row for result in results for row in queue_trace_rows(result.queue_trace)]
        artifacts.append(_write(directory, "queue_trace.csv", to_csv(QUEUE_TRACE_HEADER, rows)))
    if scenario.trace_flows:
        rows = [row for result in results for row in flow_trace_rows(result.ledgers)]
        artifacts.append(_write(directory, "flow_trace.csv", to_csv(FLOW_TRACE_HEADER, rows)))
    manifest = RunManifest(resolved, artifacts + ["manifest.scn"])
    artifacts.append(_write(directory, "manifest.scn", manifest.render()))
    return artifacts


def cmd_run(scenario_path: str, overrides: Sequence[str] = (), **kwargs) -> int:
    """
    Run one scenario and write its reports.

    **Keyword arguments:**
        ``output``: str
            Output directory; beats `REDSIM_OUTPUT_DIR` and the file.
        ``seed``: int
        ``variant``: str
        ``logger``: Logger
    """
    log: Logger = kwargs.pop("logger", None) or _silent()
    output: Optional[str] = kwargs.pop("output", None)
    overrides = list(overrides)
    if kwargs.get("seed") is not None:
        overrides.append(f"run.seed={kwargs['seed']}")
    if kwargs.get("variant") is not None:
        overrides.append(f"red.variant={kwargs['variant']}")

    try:
        resolved = load_scenario(scenario_path, overrides).resolve(output)
    except (ScenarioError, ArgumentError, OSError) as error:
        _error(error)
        return EXIT_INVALID

    log.debug(f"Resolved scenario: {resolved.scenario.as_json()}")

    try:
        result = run_scenario(resolved.scenario, logger=log)
    except RedSimError as error:
        log.error(f"Scenario '{resolved.scenario.name}' failed!", exc_info=error)
        _error(error)
        return EXIT_FAILURE

    artifacts = write_run(resolved, [result], resolved.output_dir)
    print(summary_table([result]).as_text(), end="")
    print(f"wrote {', '.join(artifacts)} to {resolved.output_dir}")
    return EXIT_OK


def cell_label(variant: str, delay: float) -> str:
    return f"{variant}-{delay_label(delay)}"


def cell_seed(base_seed: int, label: str) -> int:
    return (base_seed + stable_hash(label)) % 2 ** 64


def sweep_cells(base: ScenarioFile, variants: Sequence[str], delays: Sequence[float],
                output: str = None) -> List[ResolvedScenario]:
    """Resolve the variants x delays grid in grid order (variants outer)."""
    base_resolved = base.resolve(output)
    base_seed = base_resolved.scenario.seed
    cells = []
    for variant in variants:
        for delay in delays:
            label = cell_label(variant, delay)
            cell = base.copy()
            cell.override("red.variant", variant)
            cell.override("topology.bottleneck_delay", repr(float(delay)))
            cell.override("run.seed", str(cell_seed(base_seed, label)))
            cell.override("run.name", f"{base_resolved.scenario.name}/{label}")
            cells.append(cell.resolve(join(base_resolved.output_dir, "cells", label)))
    return cells


def _run_cell(scenario: Scenario) -> RunResult:
    return run_scenario(scenario)


def cmd_sweep(scenario_path: str, variants: Sequence[str] = None, delays: Sequence[float] = None,
              overrides: Sequence[str] = (), **kwargs) -> int:
    """
    Run every variant x delay cell and write one combined report.
    Cell seeds are the base seed plus a stable hash of the cell label.

    **Keyword arguments:**
        ``workers``: int
            Process pool size; 1 runs the cells inline.
        ``output``: str
        ``logger``: Logger
    """
    log: Logger = kwargs.pop("logger", None) or _silent()
    workers: int = kwargs.pop("workers", 1)
    output: Optional[str] = kwargs.pop("output", None)
    variants = list(variants or VARIANTS)
    delays = list(delays or DELAY_PROFILES.values())

    try:
        if workers < 1:
            raise ArgumentError(f"workers must be at least 1 not {workers}!")
        base = load_scenario(scenario_path, overrides)
        directory = base.resolve(output).output_dir
        cells = sweep_cells(base, variants, delays, output)
    except (ScenarioError, ArgumentError, OSError) as error:
        _error(error)
        return EXIT_INVALID

    log.info(f"Sweeping {len(cells)} cell(s) with {workers} worker(s).")

    results: List[RunResult] = []
    failure: Optional[BaseException] = None
    failed: Optional[ResolvedScenario] = None

    if workers == 1:
        for cell in cells:
            try:
                results.append(run_scenario(cell.scenario, logger=log))
            except RedSimError as error:
                failure, failed = error, cell
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_run_cell, cell.scenario) for cell in cells]
            for cell, future in zip(cells, futures):
                try:
                    results.append(future.result())
                except RedSimError as error:
                    failure, failed = error, cell
                    for pending in futures:
                        pending.cancel()
                    break

    for cell, result in zip(cells, results):
        write_run(cell, [result], cell.output_dir)

    if failure is not None:
        log.error(f"Sweep cell '{failed.scenario.name}' failed!", exc_info=failure)
        _error(failure)
        print(
            f"redsim: sweep aborted at cell '{failed.scenario.name}'; "
            f"partial results: {len(results)} of {len(cells)} cell(s) under {join(directory, 'cells')}",
            file=sys.stderr
        )
        return EXIT_FAILURE

    make_dirs(directory)
    table = summary_table(results)
    _write(directory, "metrics.csv", metrics_csv(results))
    _write(directory, "summary.txt", table.as_text())
    _write(directory, "summary.csv", table.as_csv())
    print(table.as_text(), end="")
    print(f"wrote {len(cells)} cell(s) and the combined report to {directory}")
    return EXIT_OK


def _mass_cell(pmf: Optional[Pmf], n: int) -> str:
    return "" if pmf is None else f"{pmf.mass(n):.15e}"


def oracle_rows(variant: str, closed: Optional[Pmf], exact: Pmf, empirical: Optional[Pmf]) -> List[List[str]]:
    keys = sorted({n for pmf in (closed, exact, empirical) if pmf is not None for n, _ in pmf})
    return [
        [variant, str(n), _mass_cell(closed, n), _mass_cell(exact, n), _mass_cell(empirical, n)]
        for n in keys
    ]


def cmd_oracle(variants: Sequence[str] = None, **kwargs) -> int:
    """
    Compare closed forms, the exhaustive oracle and Monte-Carlo samples.

    **Keyword arguments:**
        ``p_b``, ``sizes``, ``M``, ``samples``, ``seed``
            Defaults in `ORACLE_DEFAULTS`; `samples=0` skips Monte-Carlo.
        ``csv_path``: str
            Also write the three laws side by side.
        ``workers``: int
            Threads drawing Monte-Carlo batches.
        ``logger``: Logger
    """
    log: Logger = kwargs.pop("logger", None) or _silent()
    p_b: float = kwargs.pop("p_b", ORACLE_DEFAULTS["p_b"])
    sizes: List[float] = list(kwargs.pop("sizes", ORACLE_DEFAULTS["sizes"]))
    M: float = kwargs.pop("M", ORACLE_DEFAULTS["M"])
    samples: int = kwargs.pop("samples", ORACLE_DEFAULTS["samples"])
    seed: int = kwargs.pop("seed", ORACLE_DEFAULTS["seed"])
    csv_path: Optional[str] = kwargs.pop("csv_path", None)
    workers: int = kwargs.pop("workers", 1)

    try:
        variants = [RedVariant.parse(variant) for variant in (variants or ORACLE_DEFAULTS["variants"])]
        if samples < 0:
            raise ArgumentError(f"samples must not be negative not {samples}!")
        law = DropLawInput(p_b, sizes, M)
    except (ScenarioError, ArgumentError, AnalysisError) as error:
        _error(error)
        return EXIT_INVALID

    root = RandomStream(seed)
    rows: List[List[str]] = []
    breaches: List[str] = []
    sizes_text = ",".join(f"{size:g}" for size in law.sizes)

    for variant in variants:
        tag = variant.value
        print(f"{tag} p_b={law.p_b:g} sizes={sizes_text} M={law.M:g}")
        try:
            exact = exhaustive_interdrop(variant, law.p_b, law.sizes, law.M)
        except AnalysisError as error:
            _error(error)
            return EXIT_INVALID

        closed: Optional[Pmf] = None
        try:
            closed = closed_form_pmf(variant, law)
        except AnalysisError:
            print("  closed form: none for this variant")
        if closed is not None:
            deviation = closed.max_abs_difference(exact)
            verdict = "ok" if deviation < EXACT_TOLERANCE else "FAILED"
            print(f"  closed form vs exhaustive: max |diff| = {deviation:.3e} (tolerance {EXACT_TOLERANCE:.0e}) {verdict}")
            if deviation >= EXACT_TOLERANCE:
                breaches.append(f"{tag} closed form deviates by {deviation:.3e}")

        empirical: Optional[Pmf] = None
        if samples > 0:
            empirical = sample_interdrop(variant, law.p_b, law.sizes, law.M, root.spawn(tag), samples, workers=workers)
            distance = pmf_distance(empirical, exact)
            tolerance = SAMPLING_SPREAD / sqrt(samples)
            verdict = "ok" if distance < tolerance else "FAILED"
            print(f"  Monte-Carlo ({samples} samples) vs exhaustive: TV = {distance:.3e} (tolerance {tolerance:.3e}) {verdict}")
            if distance >= tolerance:
                breaches.append(f"{tag} Monte-Carlo TV distance {distance:.3e}")
        else:
            print("  Monte-Carlo: skipped")

        shares = drop_size_shares(exact, law.sizes)
        print("  drop share by size: " + ", ".join(
            f"{size:g}: {fixed(share, 4)}" for size, share in sorted(shares.items(), reverse=True)
        ))
        print(f"  mean inter-drop count: {fixed(exact.mean(), 4)}")
        rows.extend(oracle_rows(tag, closed, exact, empirical))

    if csv_path is not None:
        ensure_folder(csv_path)
        with open(csv_path, "w", encoding="UTF-8", newline="") as handle:
            handle.write(to_csv(ORACLE_CSV_HEADER, rows))

    if breaches:
        error = OracleToleranceError("; ".join(breaches) + "!")
        log.error("Oracle tolerances violated!", exc_info=error)
        _error(error)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_goodput_model(**kwargs) -> int:
    """
    Print the square-root goodput bound and/or the drop probability a
    second MSS needs for equal goodput.

    **Keyword arguments:**
        ``mss``, ``rtt``, ``p``, ``C``
            Bound inputs (bytes, seconds, probability, constant).
        ``fair``: str
            `A:B` pair of segment sizes.
        ``p1``: float
            Drop probability of the `A` flows.
    """
    mss, rtt, p = kwargs.get("mss"), kwargs.get("rtt"), kwargs.get("p")
    C = kwargs.get("C")
    fair, p1 = kwargs.get("fair"), kwargs.get("p1")

    bound_args = [value for value in (mss, rtt, p) if value is not None]
    try:
        if len(bound_args) not in (0, 3):
            raise ArgumentError("--mss, --rtt and --p go together!")
        if (fair is None) != (p1 is None):
            raise ArgumentError("--fair and --p1 go together!")
        if not bound_args and fair is None:
            raise ArgumentError("nothing to evaluate; give --mss/--rtt/--p and/or --fair/--p1!")

        if bound_args:
            model = GoodputModel(mss, rtt, p, 1.0 if C is None else C)
            bound = goodput_bound(model)
            print(f"goodput bound: {fixed(bound, 3)} bytes/s ({mbps(8 * bound, 3)} Mbit/s)")

        if fair is not None:
            mss_a, sep, mss_b = fair.partition(":")
            if not sep:
                raise ArgumentError(f"--fair expects 'A:B' not '{fair}'!")
            try:
                mss_a, mss_b = float(mss_a), float(mss_b)
            except ValueError:
                raise ArgumentError(f"--fair expects numbers in 'A:B' not '{fair}'!") from None
            p2 = fairness_required_p(mss_a, mss_b, p1)
            print(f"required p2: {p2:.6g} (MSS {mss_a:g} at p1 {p1:g} vs MSS {mss_b:g})")
    except (ArgumentError, AnalysisError) as error:
        _error(error)
        return EXIT_INVALID
    return EXIT_OK


def cmd_version() -> int:
    print(f"redsim {__version__}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="redsim", description="RED variants, TCP mixes and drop-law oracles.")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging to the console")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one scenario file")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--variant", help=f"one of {', '.join(VARIANTS + [DROP_TAIL])}")
    run.add_argument("--output", help="output directory")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")

    sweep = commands.add_parser("sweep", help="run the variant x delay grid")
    sweep.add_argument("scenario")
    sweep.add_argument("--variants", type=_csv_list, help="comma separated (default: all five)")
    sweep.add_argument(
        "--delays", type=lambda text: _csv_list(text, float),
        help="comma separated bottleneck delays in seconds (default: 0.015,0.08)"
    )
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--output", help="output directory")
    sweep.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")

    oracle = commands.add_parser("oracle", help="check the inter-drop laws")
    oracle.add_argument("--variant", dest="variants", action="append", help="repeatable (default: RED1, RED4, RED5)")
    oracle.add_argument("--pb", dest="p_b", type=float, default=ORACLE_DEFAULTS["p_b"])
    oracle.add_argument(
        "--sizes", type=lambda text: _csv_list(text, float), default=ORACLE_DEFAULTS["sizes"],
        help="packet sizes following a drop, repeated periodically"
    )
    oracle.add_argument("--M", type=float, default=ORACLE_DEFAULTS["M"])
    oracle.add_argument("--samples", type=int, default=ORACLE_DEFAULTS["samples"])
    oracle.add_argument("--seed", type=int, default=ORACLE_DEFAULTS["seed"])
    oracle.add_argument("--workers", type=int, default=1)
    oracle.add_argument("--csv", dest="csv_path")

    model = commands.add_parser("goodput-model", help="evaluate the square-root goodput model")
    model.add_argument("--mss", type=float)
    model.add_argument("--rtt", type=float)
    model.add_argument("--p", type=float)
    model.add_argument("--C", type=float)
    model.add_argument("--fair", metavar="A:B")
    model.add_argument("--p1", type=float)

    commands.add_parser("version", help="print the version")
    return parser


def dispatch(args: Namespace) -> int:
    logger = get_logger(name="redsim", handler="console", debug=True) if args.verbose else None

    if args.command == "run":
        return cmd_run(
            args.scenario, args.overrides,
            seed=args.seed, variant=args.variant, output=args.output, logger=logger
        )
    if args.command == "sweep":
        try:
            variants = [RedVariant.parse(v).value if v.upper() != DROP_TAIL else DROP_TAIL for v in args.variants or ()]
        except ScenarioError as error:
            _error(error)
            return EXIT_INVALID
        return cmd_sweep(
            args.scenario, variants or None, args.delays, args.overrides,
            workers=args.workers, output=args.output, logger=logger
        )
    if args.command == "oracle":
        return cmd_oracle(
            args.variants, p_b=args.p_b, sizes=args.sizes, M=args.M, samples=args.samples,
            seed=args.seed, csv_path=args.csv_path, workers=args.workers, logger=logger
        )
    if args.command == "goodput-model":
        return cmd_goodput_model(mss=args.mss, rtt=args.rtt, p=args.p, C=args.C, fair=args.fair, p1=args.p1)
    return cmd_version()


def main(argv: Sequence[str] = None) -> int:
    return dispatch(build_parser().parse_args(argv))
