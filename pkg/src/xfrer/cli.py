"""Command line interface: ``xfrer run|analyze|compare|reproduce-paper|list-scenarios``."""

from __future__ import annotations

import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

import click

from . import report
from .enhancements import GateLog
from .errors import (
    ConfigInvalid,
    HopCountMismatch,
    ParseError,
    TooManyElements,
    UnknownBuiltin,
    ValidationError,
    XFrerError,
)
from .oracle import DEFAULT_MAX_ENUMERABLE, RelDag, per_hop_curve, series_parallel_reduce
from .dag import unfold
from .reference import REFERENCE_POINTS, TOLERANCE_PP, in_band, within_tolerance
from .scenarios import BUILTINS, hop_labels, load_scenario
from .sim import ScenarioConfig, compare_runs, run_simulation
from .topology import FailureProbs

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_REPRODUCTION = 3

_VALIDATION_ERRORS = (ValidationError, ConfigInvalid, ParseError, UnknownBuiltin, HopCountMismatch)
_PROB_KEYS = [f.name for f in dataclasses.fields(FailureProbs)]


class ReproductionFailed(click.ClickException):
    exit_code = EXIT_REPRODUCTION


def _parse_prob(values: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in values:
        key, sep, raw = item.partition("=")
        if not sep or key not in _PROB_KEYS:
            raise ValidationError([f"--prob {item!r}: expected KEY=VALUE with KEY in {', '.join(_PROB_KEYS)}"])
        try:
            out[key] = float(raw)
        except ValueError:
            raise ValidationError([f"--prob {item!r}: {raw!r} is not a number"]) from None
    return out


def apply_overrides(
    config: ScenarioConfig,
    frames: int | None = None,
    seed: int | None = None,
    probs: Sequence[str] = (),
    zero_failures: bool = False,
) -> ScenarioConfig:
    changes: dict = {}
    if frames is not None:
        changes["frame_count"] = frames
    if seed is not None:
        changes["seed"] = seed
    if zero_failures:
        topo = config.topology
        changes["topology"] = dataclasses.replace(
            topo, links=tuple(dataclasses.replace(l, failure_prob=None) for l in topo.links)
        )
        changes["segment"] = dataclasses.replace(config.segment, link_probs={}, node_probs={})
        changes["failure_probs"] = FailureProbs.zero()
    if probs:
        base = changes.get("failure_probs", config.failure_probs)
        changes["failure_probs"] = dataclasses.replace(base, **_parse_prob(probs))
    config = config.with_overrides(**changes)
    config.validate()
    return config


def _resolve(positional: str | None, option: str | None) -> str:
    name = option or positional
    if not name:
        raise click.UsageError("a scenario is required (positional argument or --scenario)")
    if option and positional and option != positional:
        raise click.UsageError("scenario given twice with different values")
    return name


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
        log.info("wrote %s", output)
    else:
        click.echo(text, nl=False)


def _oracle_curve(config: ScenarioConfig, max_enumerable: int) -> list[float]:
    graph = config.graph()
    try:
        return per_hop_curve(graph, config.failure_probs, max_enumerable=max_enumerable)
    except TooManyElements:
        log.info("%s: raw state space too large, enumerating the reduced graph", config.scenario_id)
        return per_hop_curve(graph, config.failure_probs, reduce=True, max_enumerable=max_enumerable)


# shared option sets
def _scenario_opts(f):
    f = click.option("--scenario", "scenario_opt", help="Built-in id or scenario file path.")(f)
    f = click.option("--prob", "probs", multiple=True, metavar="KEY=VALUE", help="Override a failure probability.")(f)
    f = click.option("--zero-failures", is_flag=True, help="Set every failure probability to zero.")(f)
    return f


def _run_opts(f):
    f = click.option("--frames", type=click.IntRange(min=1), help="Override run.frame_count.")(f)
    f = click.option("--seed", type=click.IntRange(min=0), help="Override run.seed.")(f)
    f = click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Worker processes for trial blocks.")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.version_option(package_name="artifact")
def cli(verbose: int) -> None:
    """FRER / 5G reliability simulator."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command("list-scenarios")
def list_scenarios() -> None:
    """List built-in scenarios."""
    rows = []
    for sid in BUILTINS:
        c = load_scenario(sid)
        rows.append([sid, c.stream.value, str(c.embodiment), report.fmt_theta(c.theta),
                     "yes" if c.resolved_enhancements().enabled else "no"])
    click.echo(report.text_table(rows, ["id", "stream", "embodiment", "theta", "enhanced"]), nl=False)


@cli.command()
@click.argument("scenario", required=False)
@_scenario_opts
@_run_opts
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), help="Write the report here instead of stdout.")
@click.option("--log-gates", type=click.Path(dir_okay=False),
              help="Write per-frame enhanced gate decisions as CSV (uses the protocol engine).")
@click.option("--engine", type=click.Choice(["vectorized", "protocol"]), default="vectorized", show_default=True)
def run(scenario, scenario_opt, probs, zero_failures, frames, seed, workers, fmt_name, output, log_gates, engine):
    """Monte Carlo run of a scenario."""
    config = apply_overrides(load_scenario(_resolve(scenario, scenario_opt)), frames, seed, probs, zero_failures)
    gate_log = GateLog() if log_gates else None
    table = run_simulation(config, engine=engine, workers=workers, gate_log=gate_log)
    labels = hop_labels(config.stream) if table.hop_count == 7 else ()
    _emit(report.render_pdr(table, fmt_name, labels, config.theta), output)
    if output:
        click.echo(report.pdr_text(table, labels), nl=False)
    if gate_log is not None:
        Path(log_gates).write_text(gate_log.to_csv(), encoding="utf-8", newline="\n")


@cli.command()
@click.argument("scenario", required=False)
@_scenario_opts
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="json", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False))
@click.option("--max-enumerable", type=click.IntRange(min=1), default=DEFAULT_MAX_ENUMERABLE, show_default=True,
              help="Largest number of free element variables enumerated exhaustively.")
def analyze(scenario, scenario_opt, probs, zero_failures, fmt_name, output, max_enumerable):
    """Exact per-hop delivery probabilities."""
    config = apply_overrides(load_scenario(_resolve(scenario, scenario_opt)), probs=probs, zero_failures=zero_failures)
    graph = config.graph()
    curve = _oracle_curve(config, max_enumerable)
    labels = hop_labels(config.stream) if len(curve) == 7 else ()
    if fmt_name == "csv":
        text = report.curve_csv(curve)
    else:
        reduced = series_parallel_reduce(graph, config.failure_probs)
        extra = {
            "embodiment": str(config.embodiment),
            "stream": config.stream.value,
            "free_variables": RelDag.from_instance(unfold(graph, config.failure_probs)).free_var_count,
            "free_variables_reduced": reduced.free_var_count,
        }
        text = report.curve_json(config.scenario_id, curve, config.theta, labels, extra)
    _emit(text, output)
    click.echo(f"theta = {report.fmt_theta(config.theta)}", err=output is None)
    if output:
        rows = [[str(h), report.fmt(p), labels[h - 1] if labels else ""] for h, p in enumerate(curve, 1)]
        click.echo(report.text_table(rows, ["hop", "pdr", "segment"]), nl=False)


@cli.command()
@click.argument("scenario_a")
@click.argument("scenario_b")
@click.option("--prob", "probs", multiple=True, metavar="KEY=VALUE")
@_run_opts
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False))
@click.option("--no-oracle", is_flag=True, help="Skip the exact deltas.")
def compare(scenario_a, scenario_b, probs, frames, seed, workers, fmt_name, output, no_oracle):
    """Per-hop deltas (B minus A, percentage points)."""
    a = apply_overrides(load_scenario(scenario_a), frames, seed, probs)
    b = apply_overrides(load_scenario(scenario_b), frames, seed, probs)
    ga, gb = a.graph(), b.graph()
    if ga.hop_count != gb.hop_count:
        raise HopCountMismatch(f"{a.scenario_id} has {ga.hop_count} hops, {b.scenario_id} has {gb.hop_count}")
    rep = compare_runs(run_simulation(a, workers=workers), run_simulation(b, workers=workers))
    oracle_delta = None
    if not no_oracle:
        ca, cb = _oracle_curve(a, DEFAULT_MAX_ENUMERABLE), _oracle_curve(b, DEFAULT_MAX_ENUMERABLE)
        oracle_delta = [100.0 * (y - x) for x, y in zip(ca, cb)]
    text = report.compare_json(rep, oracle_delta) if fmt_name == "json" else report.compare_csv(rep, oracle_delta)
    _emit(text, output)
    click.echo(f"end-to-end delta: {rep.end_to_end_delta_pp:+.{report.DECIMALS}f} pp", err=output is None)


@dataclasses.dataclass(frozen=True)
class ReproductionRow:
    scenario_id: str
    hop: int
    target: float | None
    mc: float
    oracle: float
    mc_ok: bool
    oracle_ok: bool
    band_ok: bool

    @property
    def passed(self) -> bool:
        return self.mc_ok and self.oracle_ok


def reproduce(frames: int | None = None, seed: int | None = None, probs: Sequence[str] = (),
              workers: int = 1) -> list[ReproductionRow]:
    rows: list[ReproductionRow] = []
    targets = {(r.scenario_id, r.hop): r.percent for r in REFERENCE_POINTS}
    for sid in BUILTINS:
        config = apply_overrides(load_scenario(sid), frames, seed, probs)
        table = run_simulation(config, workers=workers)
        curve = _oracle_curve(config, DEFAULT_MAX_ENUMERABLE)
        hops = [h for (s, h) in targets if s == sid] or [table.hop_count]
        for hop in hops:
            mc, ex = table.per_hop_pdr[hop - 1], curve[hop - 1]
            target = targets.get((sid, hop))
            band = in_band(table.delivered[hop - 1], ex, table.frame_count)
            if target is None:
                rows.append(ReproductionRow(sid, hop, None, mc, ex, band, True, band))
            else:
                rows.append(ReproductionRow(sid, hop, target, mc, ex, within_tolerance(mc, target),
                                            within_tolerance(ex, target), band))
    return rows


@cli.command("reproduce-paper")
@click.option("--prob", "probs", multiple=True, metavar="KEY=VALUE", help="Override a failure probability.")
@_run_opts
@click.option("--output", type=click.Path(dir_okay=False), help="Also write the table as CSV.")
def reproduce_paper(probs, frames, seed, workers, output):
    """Check every built-in against the published values (within the fixed tolerance)."""
    rows = reproduce(frames, seed, probs, workers)
    shown = [
        [r.scenario_id, str(r.hop), "-" if r.target is None else f"{r.target:.2f}",
         f"{100 * r.mc:.3f}", f"{100 * r.oracle:.3f}", "yes" if r.band_ok else "no",
         "PASS" if r.passed else "FAIL"]
        for r in rows
    ]
    click.echo(report.text_table(shown, ["scenario", "hop", "target%", "mc%", "oracle%", "mc~oracle", "verdict"]),
               nl=False)
    if output:
        lines = ["scenario,hop,target_pct,mc_pdr,oracle_pdr,verdict"]
        lines += [f"{r.scenario_id},{r.hop},{'' if r.target is None else r.target},{report.fmt(r.mc)},"
                  f"{report.fmt(r.oracle)},{'pass' if r.passed else 'fail'}" for r in rows]
        Path(output).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    failing = [r for r in rows if not r.passed]
    if failing:
        names = ", ".join(f"{r.scenario_id}@hop{r.hop}" for r in failing)
        raise ReproductionFailed(f"{len(failing)} row(s) outside +/-{TOLERANCE_PP} pp: {names}")
    click.echo(f"all {len(rows)} rows within +/-{TOLERANCE_PP} pp")


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point returning the documented exit codes."""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="xfrer", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_RUNTIME
    except click.UsageError as exc:
        exc.show()
        return EXIT_VALIDATION
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except ValidationError as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        return EXIT_VALIDATION
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except TooManyElements as exc:
        click.echo(f"error: {exc}", err=True)
        click.echo("hint: raise --max-enumerable, or use `xfrer run` for a Monte Carlo estimate", err=True)
        return EXIT_RUNTIME
    except (XFrerError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
