"""
src/main_cli.py

CLI application using Click, with rich tables for results and
auto-generated documentation (`docs show`, `docs export`).

Exit codes: 0 success, 1 validation or run failure, 2 usage error.
Option precedence: flags > --config FILE > config/settings.yaml > built-in defaults.
"""

import sys
import logging
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.markdown import Markdown
from rich.table import Table

from src.core.analytic_states import StateKind
from src.core.exceptions import DomainError, SimulationError
from src.main import (
    VERSION,
    run_distance,
    run_frontier,
    run_heatmap,
    run_logneg,
    run_verify,
)
from src.schemas.data_models import RunManifest
from src.utils.config_manager import ConfigManager, Settings, load_override_file
from src.utils.logger import setup_logging

logger = logging.getLogger("cvmdi_qkd")

# Rich console for tables and status output
console = Console()

CLI_METADATA = {
    "title": "CV-MDI-QKD Simulation CLI",
    "version": VERSION,
    "description": "Key-rate, entanglement and validation runs for extreme-asymmetric "
                   "CV-MDI-QKD with photon-added-then-subtracted and photon-replaced states.",
}

CLI_EXAMPLES = {
    "verify": [("Run the oracle and closed-form battery", "cvmdi-qkd verify")],
    "logneg": [("E_N and success probability at 1 dB", "cvmdi-qkd logneg --rdb 1 --points 200"),
               ("Same at 2 dB", "cvmdi-qkd logneg --rdb 2")],
    "distance": [("SKR vs distance at 1 dB", "cvmdi-qkd distance --rdb 1 --xi 0.004 --gamma 0.95")],
    "heatmap": [("-log10(SKR) over squeezing and distance", "cvmdi-qkd heatmap --mode distance"),
                ("-log10(SKR) over squeezing and noise at 25 km", "cvmdi-qkd heatmap --mode noise")],
    "frontier": [("Maximum distance vs squeezing", "cvmdi-qkd frontier --mode distance")],
    "info": [("Show resolved settings", "cvmdi-qkd --config my.cfg info")],
}


def generate_cli_documentation(ctx, output_format='markdown'):
    """
    Generate CLI documentation from the registered commands.

    Args:
        ctx: Click context of the root group
        output_format: 'markdown' or 'json'

    Returns:
        Formatted documentation string
    """
    docs = {"metadata": CLI_METADATA, "commands": {}}

    for cmd_name, cmd in ctx.command.commands.items():
        cmd_docs = {
            "name": cmd_name,
            "description": (cmd.help or "No description available").strip().split("\n")[0],
            "usage": f"cvmdi-qkd [--out DIR] [--config FILE] {cmd_name} [OPTIONS]",
            "options": [],
            "examples": [{"description": d, "command": c} for d, c in CLI_EXAMPLES.get(cmd_name, [])],
        }
        for param in cmd.params:
            cmd_docs["options"].append({
                "name": param.name,
                "flags": list(getattr(param, "opts", [param.name])),
                "type": param.type.name if hasattr(param.type, 'name') else str(param.type),
                "default": param.default if param.default is not None else "settings",
                "help": getattr(param, 'help', None) or "No description",
            })
        docs["commands"][cmd_name] = cmd_docs

    if output_format == 'json':
        return json.dumps(docs, indent=2, default=str)
    return _format_markdown_docs(docs)


def _format_markdown_docs(docs):
    """Format documentation as Markdown."""
    md = f"# {docs['metadata']['title']}\n\n"
    md += f"**Version:** {docs['metadata']['version']}\n\n"
    md += f"{docs['metadata']['description']}\n\n"
    md += "---\n\n## Commands\n\n"
    for cmd_name, cmd_info in docs["commands"].items():
        md += f"### `{cmd_name}`\n\n{cmd_info['description']}\n\n"
        md += f"**Usage:** `{cmd_info['usage']}`\n\n"
        if cmd_info["options"]:
            md += "| Option | Type | Default | Description |\n"
            md += "|--------|------|---------|-------------|\n"
            for opt in cmd_info["options"]:
                md += f"| `{', '.join(opt['flags'])}` | {opt['type']} | {opt['default']} | {opt['help']} |\n"
            md += "\n"
        for ex in cmd_info["examples"]:
            md += f"- {ex['description']}\n  ```bash\n  {ex['command']}\n  ```\n\n"
        md += "---\n\n"
    return md


def _parse_kinds(ctx, param, value: Optional[str]) -> List[str]:
    """Comma-separated state kinds (TMSV, PAS1/1PAS, PAS2/2PAS, PR2/2PR); empty means all."""
    if not value:
        return [k.value for k in StateKind]
    try:
        return [StateKind.parse(item).value for item in value.split(",") if item.strip()]
    except DomainError as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param)


def _settings(ctx) -> Settings:
    return ctx.obj["settings"]


def _out_dir(ctx) -> str:
    return ctx.obj["out"] or _settings(ctx).output.directory


def _pick(value, default):
    return default if value is None else value


def _require(condition: bool, message: str, param: str):
    if not condition:
        raise click.BadParameter(message, param_hint=param)


def _print_manifest(manifest: RunManifest, highlights: Dict[str, Any]):
    table = Table(title=f"{manifest.command} results", show_header=True, header_style="bold magenta")
    table.add_column("Item", style="cyan")
    table.add_column("Value", style="green")
    for key, value in highlights.items():
        table.add_row(str(key), str(value))
    for path in manifest.outputs:
        table.add_row("output", path)
    console.print(table)


def _run(command: str, action):
    """Run a command body, mapping library failures to exit code 1."""
    try:
        return action()
    except click.ClickException:
        raise
    except (SimulationError, ValueError, OSError) as e:
        console.print(f"[bold red]❌ {command} failed:[/bold red] {e}")
        logger.error(f"{command} failed: {e}", exc_info=True)
        sys.exit(1)


kinds_option = click.option('--kinds', default=None, callback=_parse_kinds,
                            help='Comma-separated kinds, e.g. "TMSV,1PAS" (default: all four).')
threads_option = click.option('--threads', type=int, default=None,
                              help='Worker threads (default: sweep.threads / CVMDI_THREADS).')
gamma_option = click.option('--gamma', type=float, default=None,
                            help='Reconciliation efficiency (default: simulation.gamma).')


@click.group()
@click.version_option(version=VERSION, prog_name="cvmdi-qkd")
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
              help='Output directory (default: output.directory).')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='YAML mapping or key=value file overriding settings.yaml.')
@click.pass_context
def cli(ctx, out: Optional[str], config_path: Optional[str]):
    """
    CV-MDI-QKD simulation CLI

    Validates the analytic non-Gaussian states against a Fock-space oracle and
    reproduces log-negativity, key-rate-vs-distance and key-rate heatmap runs.

    \b
    Quick Start:
        cvmdi-qkd info                      # Show resolved settings
        cvmdi-qkd verify                    # Run the validation battery
        cvmdi-qkd logneg --rdb 1            # E_N vs T
        cvmdi-qkd distance --rdb 1          # SKR vs distance
        cvmdi-qkd heatmap --mode distance   # -log10(SKR) heatmaps
    """
    ctx.ensure_object(dict)
    settings = ConfigManager.get_settings()
    if config_path:
        try:
            settings = ConfigManager.with_overrides(settings, load_override_file(config_path))
        except (KeyError, ValueError, ValidationError) as e:
            raise click.BadParameter(str(e), param_hint="--config")
    setup_logging(settings)
    ctx.obj["settings"] = settings
    ctx.obj["out"] = out
    logger.debug(f"CLI started with out={out}, config={config_path}")


@cli.group(name="docs")
def docs_group():
    """📚 Documentation commands for CLI reference and export."""
    pass


@docs_group.command(name="show")
@click.pass_context
def show_docs(ctx):
    """Display CLI documentation in terminal."""
    console.print(Markdown(generate_cli_documentation(ctx.parent.parent, 'markdown')))


@docs_group.command(name="export")
@click.option('--format', 'output_format', type=click.Choice(['markdown', 'json'], case_sensitive=False),
              default='markdown', help='Output format for documentation')
@click.option('-o', '--output', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Output file path (prints to stdout if not specified)')
@click.pass_context
def export_docs(ctx, output_format: str, output: Optional[str]):
    """
    Export CLI documentation to file.

    \b
    Example:
        cvmdi-qkd docs export --format markdown -o docs/CLI_REFERENCE.md
    """
    docs = generate_cli_documentation(ctx.parent.parent, output_format=output_format)
    if output:
        output_path = Path(output)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(docs, encoding='utf-8')
        console.print(f"\n[bold green]✅ Documentation exported to:[/bold green] {output}\n")
    else:
        click.echo(docs)


@cli.command(name="verify")
@click.option('--convention', type=click.Choice(['amplitude', 'intensity']), default=None,
              help='Beam-splitter reading of T (default: simulation.transmissivity_convention).')
@click.pass_context
def verify_command(ctx, convention: Optional[str]):
    """
    Check analytic states against the Fock-space oracle and audit the printed formulas.

    Exits 1 if any gating check fails.
    """
    settings = _settings(ctx)
    if convention:
        settings = ConfigManager.with_overrides(settings, {"transmissivity_convention": convention})

    with console.status("[bold green]Running validation battery..."):
        report, manifest = _run("verify", lambda: run_verify(_out_dir(ctx), settings))

    table = Table(title="Validation Results", show_header=True, header_style="bold magenta")
    table.add_column("Group", style="cyan")
    table.add_column("Checks", justify="right")
    table.add_column("Failed", justify="right", style="red")
    table.add_column("Flagged", justify="right", style="yellow")
    for group in dict.fromkeys(c.group for c in report.checks):
        rows = [c for c in report.checks if c.group == group]
        table.add_row(group, str(len(rows)), str(sum(c.failed for c in rows)),
                      str(sum(c.status == "MISMATCH (expected)" for c in rows)))
    console.print(table)
    for check in [c for c in report.checks if c.failed][:10]:
        console.print(f"  [red]•[/red] {check.name} {check.params}: {check.status} "
                      f"(value={check.value}, tol={check.tolerance}) {check.note or ''}")
    console.print(f"Report: {manifest.outputs[0]}")
    if report.passed:
        console.print("\n[bold green]✅ All gating checks passed[/bold green]\n")
        sys.exit(0)
    console.print("\n[bold red]❌ Validation failed[/bold red]\n")
    sys.exit(1)


@cli.command(name="logneg")
@click.option('--rdb', type=float, default=1.0, show_default=True, help='Squeezing in dB.')
@click.option('--t-min', type=float, default=None, help='Smallest T (default: sweep.logneg_t_min).')
@click.option('--t-max', type=float, default=None, help='Largest T (default: sweep.logneg_t_max).')
@click.option('--points', type=int, default=None, help='T grid points (default: sweep.logneg_points).')
@kinds_option
@click.pass_context
def logneg_command(ctx, rdb: float, t_min: Optional[float], t_max: Optional[float],
                   points: Optional[int], kinds: List[str]):
    """
    Logarithmic negativity (solid) and success probability (dashed) versus T.

    CSV columns: T, kind, E_N, success_prob. A single point writes no plot.
    """
    sweep_settings = _settings(ctx).sweep
    t_min = _pick(t_min, sweep_settings.logneg_t_min)
    t_max = _pick(t_max, sweep_settings.logneg_t_max)
    points = _pick(points, sweep_settings.logneg_points)
    _require(rdb >= 0, "squeezing must be nonnegative", "--rdb")
    _require(0 < t_min < 1 and 0 < t_max < 1, "T must lie in (0, 1)", "--t-min/--t-max")
    _require(points >= 1, "need at least one point", "--points")
    _require(points == 1 or t_min < t_max, "t-min must be below t-max", "--t-min/--t-max")

    with console.status("[bold green]Scanning transmissivity..."):
        manifest = _run("logneg", lambda: run_logneg(
            _out_dir(ctx), _settings(ctx), rdb, t_min, t_max, points, kinds))
    highlights = {f"max E_N {StateKind(k).label}": f"{v['max_E_N']:.6f} at T={v['T_at_max']:.4f}"
                  for k, v in manifest.extras["peaks"].items()}
    _print_manifest(manifest, highlights)


@cli.command(name="distance")
@click.option('--rdb', type=float, default=1.0, show_default=True, help='Squeezing in dB.')
@click.option('--xi', type=float, default=None, help='Total excess noise (default: simulation.xi_total).')
@gamma_option
@click.option('--l-max', type=float, default=None, help='Largest distance in km (default: sweep.l_max_km).')
@click.option('--l-points', type=int, default=None, help='Distance grid points (default: sweep.l_points).')
@kinds_option
@threads_option
@click.pass_context
def distance_command(ctx, rdb: float, xi: Optional[float], gamma: Optional[float],
                     l_max: Optional[float], l_points: Optional[int], kinds: List[str],
                     threads: Optional[int]):
    """
    Secret key rate versus Alice-Charlie distance with T optimized per point.

    CSV columns: L_km, kind, skr, T_star, P. The manifest records the bisected
    maximum distance of every kind.
    """
    settings = _settings(ctx)
    xi = _pick(xi, settings.simulation.xi_total)
    gamma = _pick(gamma, settings.simulation.gamma)
    l_max = _pick(l_max, settings.sweep.l_max_km)
    l_points = _pick(l_points, settings.sweep.l_points)
    _require(rdb >= 0, "squeezing must be nonnegative", "--rdb")
    _require(xi >= 0, "excess noise must be nonnegative", "--xi")
    _require(0 < gamma <= 1, "gamma must lie in (0, 1]", "--gamma")
    _require(l_points >= 1 and (l_points == 1 or l_max > 0), "bad distance grid", "--l-max/--l-points")
    _require(threads is None or threads >= 1, "threads must be positive", "--threads")

    manifest = _run("distance", lambda: run_distance(
        _out_dir(ctx), settings, rdb, xi, gamma, l_max, l_points, kinds, threads, show_progress=True))
    highlights = {f"max distance {StateKind(k).label} (km)": f"{v:.1f}"
                  for k, v in manifest.extras["max_distance_km"].items()}
    _print_manifest(manifest, highlights)


@cli.command(name="heatmap")
@click.option('--mode', type=click.Choice(['distance', 'noise']), default='distance', show_default=True,
              help='distance: fix xi, sweep L. noise: fix L, sweep xi.')
@click.option('--rdb-min', type=float, default=None, help='Smallest squeezing (default: sweep.r_db_min).')
@click.option('--rdb-max', type=float, default=None, help='Largest squeezing (default: sweep.r_db_max).')
@click.option('--rdb-points', type=int, default=None, help='Squeezing points (default: sweep.r_db_points).')
@click.option('--axis-max', type=float, default=None,
              help='Largest L (km) or xi on the other axis (default: sweep.l_max_km / sweep.xi_max).')
@click.option('--axis-points', type=int, default=None,
              help='Points on the other axis (default: sweep.l_points / sweep.xi_points).')
@click.option('--fixed', type=float, default=None,
              help='Held xi (distance mode) or L in km (noise mode) (default: simulation settings).')
@gamma_option
@kinds_option
@threads_option
@click.pass_context
def heatmap_command(ctx, mode: str, rdb_min, rdb_max, rdb_points, axis_max, axis_points,
                    fixed, gamma, kinds: List[str], threads: Optional[int]):
    """
    Heat maps of -log10(SKR) over squeezing and distance or excess noise.

    Cells below the key-rate floor are drawn as infeasible (grey).
    """
    settings = _settings(ctx)
    sim, grid = settings.simulation, settings.sweep
    rdb_min = _pick(rdb_min, grid.r_db_min)
    rdb_max = _pick(rdb_max, grid.r_db_max)
    rdb_points = _pick(rdb_points, grid.r_db_points)
    distance_mode = mode == "distance"
    axis_max = _pick(axis_max, grid.l_max_km if distance_mode else grid.xi_max)
    axis_points = _pick(axis_points, grid.l_points if distance_mode else grid.xi_points)
    fixed = _pick(fixed, sim.xi_total if distance_mode else sim.distance_km)
    gamma = _pick(gamma, sim.gamma)
    _require(0 <= rdb_min and (rdb_points == 1 or rdb_min < rdb_max) and rdb_points >= 1,
             "bad squeezing grid", "--rdb-min/--rdb-max/--rdb-points")
    _require(axis_points >= 1 and (axis_points == 1 or axis_max > 0), "bad axis grid",
             "--axis-max/--axis-points")
    _require(fixed >= 0, "held value must be nonnegative", "--fixed")
    _require(0 < gamma <= 1, "gamma must lie in (0, 1]", "--gamma")
    _require(threads is None or threads >= 1, "threads must be positive", "--threads")

    manifest = _run("heatmap", lambda: run_heatmap(
        _out_dir(ctx), settings, mode, rdb_min, rdb_max, rdb_points, axis_max, axis_points,
        fixed, gamma, kinds, threads, show_progress=True))
    _print_manifest(manifest, {
        "crossover 2PAS -> 1PAS (dB)": manifest.extras["crossover_PAS2_to_PAS1"],
        "failed cells": manifest.extras["stats"]["failed_cells"],
    })


@cli.command(name="frontier")
@click.option('--mode', type=click.Choice(['distance', 'noise']), default='distance', show_default=True,
              help='distance: max km at fixed xi. noise: max xi at fixed L.')
@click.option('--rdb-min', type=float, default=None, help='Smallest squeezing (default: sweep.r_db_min).')
@click.option('--rdb-max', type=float, default=None, help='Largest squeezing (default: sweep.r_db_max).')
@click.option('--rdb-points', type=int, default=None, help='Squeezing points (default: sweep.r_db_points).')
@click.option('--fixed', type=float, default=None,
              help='Held xi (distance mode) or L in km (noise mode) (default: simulation settings).')
@gamma_option
@kinds_option
@threads_option
@click.pass_context
def frontier_command(ctx, mode: str, rdb_min, rdb_max, rdb_points, fixed, gamma,
                     kinds: List[str], threads: Optional[int]):
    """
    Bisected maximum distance or maximum excess noise versus squeezing.

    The manifest records the squeezing at which 1PAS overtakes 2PAS.
    """
    settings = _settings(ctx)
    sim, grid = settings.simulation, settings.sweep
    rdb_min = _pick(rdb_min, grid.r_db_min)
    rdb_max = _pick(rdb_max, grid.r_db_max)
    rdb_points = _pick(rdb_points, grid.r_db_points)
    fixed = _pick(fixed, sim.xi_total if mode == "distance" else sim.distance_km)
    gamma = _pick(gamma, sim.gamma)
    _require(0 <= rdb_min and (rdb_points == 1 or rdb_min < rdb_max) and rdb_points >= 1,
             "bad squeezing grid", "--rdb-min/--rdb-max/--rdb-points")
    _require(fixed >= 0, "held value must be nonnegative", "--fixed")
    _require(0 < gamma <= 1, "gamma must lie in (0, 1]", "--gamma")
    _require(threads is None or threads >= 1, "threads must be positive", "--threads")

    manifest = _run("frontier", lambda: run_frontier(
        _out_dir(ctx), settings, mode, rdb_min, rdb_max, rdb_points, fixed, gamma, kinds,
        threads, show_progress=True))
    _print_manifest(manifest, {"crossover 2PAS -> 1PAS (dB)": manifest.extras["crossover_PAS2_to_PAS1"]})


@cli.command(name="info")
@click.pass_context
def info_command(ctx):
    """
    Display the resolved configuration.
    """
    settings = _settings(ctx)
    console.print("\n[bold cyan]ℹ️  Resolved settings[/bold cyan]\n")

    info_table = Table(show_header=True, header_style="bold magenta")
    info_table.add_column("Setting", style="cyan")
    info_table.add_column("Value", style="green")
    info_table.add_row("CLI Version", VERSION)
    info_table.add_row("Python Version", sys.version.split()[0])
    info_table.add_row("Output Directory", _out_dir(ctx))
    for section in ("general", "simulation", "sweep", "output"):
        for key, value in getattr(settings, section).model_dump().items():
            info_table.add_row(f"{section}.{key}", str(value))
    console.print(info_table)
    console.print()


def main():
    """
    Main function to run the CLI application.
    """
    try:
        cli()
    except Exception as e:
        console.print(f"[bold red]❌ Unexpected error:[/bold red] {str(e)}")
        logger.critical(f"CLI crashed: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()

# src/main_cli.py
