import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer
import yaml
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape
from rich.progress import Progress

from . import __version__
from .cache import ResultCache
from .config import DEFAULT_CONFIG_PATH, Settings, create_default_config, load_config
from .continuum import ContinuumParams, continuum_rta, gamma_star, lattice_plane_wave_rta
from .dynamics import WavepacketSpec, occupancy_series, scatter_once
from .errors import ExportError, NumericalError
from .experiments.localization import map_gamma_to_v
from .experiments.scattering import extract_gamma_star, scan_k, scan_rta
from .experiments.spectra import classify_ep_structure, dump_eigenstate_profiles, scan_q, spectrum_sweep
from .export import (
    CLASSIFY_SCHEMA,
    CONTINUUM_SCHEMA,
    EP_PAIRS_SCHEMA,
    GAMMA_STAR_SCHEMA,
    GAMMA_V_SCHEMA,
    PROFILE_SCHEMA,
    Q_SCAN_SCHEMA,
    RTA_SCHEMA,
    SERIES_SCHEMA,
    SWEEP_SCHEMA,
    TableSchema,
    profiles_schema,
    spectrum_schema,
    write_table,
)
from .lattice import LatticeParams
from .params import COMMAND_ARGS, CommandArgs
from .spectral import bound_state, locate_ep, order_eigenpairs, solve
from .utils import mirror_distance

console = Console(stderr=True)

app = typer.Typer(
    help="""
nhlatt: spectra and scattering of a tight-binding chain with an absorbing impurity.

Available Commands:
- spectrum, profiles, bound-state: eigenvalues and eigenstates
- ep-locate, classify-ep, scan-q: exceptional points
- scatter, scan-gamma, scan-k: wavepacket reflection, transmission and absorption
- continuum: closed-form delta-potential reference curves
- config: manage nhlatt configuration
""",
    no_args_is_help=True,
)

config_app = typer.Typer(
    help="Manage nhlatt configuration",
    no_args_is_help=True,
)
app.add_typer(config_app, name="config")


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug output to stderr"),
):
    """Route all diagnostics to the error stream."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "WARNING", format="{level: <8} | {message}")


@contextmanager
def exit_codes():
    """Exit 1 on invalid input, 2 on numerical or output failure."""
    try:
        yield
    except (NumericalError, ExportError) as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        raise typer.Exit(code=2)
    except (ValueError, ValidationError) as e:
        console.print(f"[red]Invalid input:[/red] {escape(str(e))}")
        raise typer.Exit(code=1)


class Run:
    """Everything a command needs after merging config file, flags and defaults."""

    def __init__(self, command: str, config_path: Optional[Path], cli_params: Dict[str, Any], **overrides):
        self.command = command
        settings = load_config(config_path)
        stored_run = settings.run if settings.run and settings.run.command == command else None
        file_overrides = {}
        if stored_run is not None:
            file_overrides = {
                "tol": stored_run.tol,
                "seed": stored_run.seed,
                "format": stored_run.format,
            }
        settings = settings.merge_with_cli(file_overrides)
        self.out: Optional[Path] = overrides.pop("out", None)
        if self.out is None and stored_run is not None and stored_run.output_path:
            self.out = Path(stored_run.output_path)
        self.settings: Settings = settings.merge_with_cli(overrides)

        given = {k: v for k, v in cli_params.items() if v is not None and v is not False and v != []}
        merged = {**settings.command_parameters(command), **given}
        self.args: CommandArgs = COMMAND_ARGS[command].model_validate(merged)
        logger.debug(f"{command}: {self.args.model_dump()}")

    def meta(self, **extra) -> Dict[str, Any]:
        s = self.settings
        return {
            "command": self.command,
            "nhlatt_version": __version__,
            "parameters": self.args.model_dump(mode="json"),
            "settings": {
                "tol": s.tol,
                "seed": s.seed,
                "safety": s.safety,
                "edge_overlap_max": s.edge_overlap_max,
            },
            **extra,
        }

    def emit(self, rows, schema: TableSchema, path: Optional[Path] = None, **extra):
        target = path if path is not None else self.out
        write_table(rows, schema, format=self.settings.format, path=target, meta=self.meta(**extra))
        if target is not None:
            console.print(f"[green]Wrote {schema.name} table to {target}[/green]")

    def cache(self) -> Optional[ResultCache]:
        if not self.settings.use_cache:
            return None
        self.settings.ensure_storage_dirs()
        return ResultCache(self.settings.get_cache_dir())


def _grid(args) -> np.ndarray:
    return np.linspace(args.gamma_min, args.gamma_max, args.points)


# Shared option declarations
_L = typer.Option(None, "--L", help="Number of sites")
_Q = typer.Option(None, "--q", help="Impurity site (1-based); central if omitted")
_OUT = typer.Option(None, "--out", help="Output file; stdout if omitted")
_FORMAT = typer.Option(None, "--format", help="csv or json")
_SEED = typer.Option(None, "--seed", help="Seed for inverse-iteration start vectors")
_TOL = typer.Option(None, "--tol", help="Propagation tolerance")
_CONFIG = typer.Option(None, "--config", help="YAML or JSON config file")


@app.command()
def spectrum(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Absorbing strength"),
    V: Optional[float] = typer.Option(None, "--V", help="Real impurity potential instead of -i*gamma"),
    vectors: bool = typer.Option(False, "--vectors", help="Append per-site occupancies"),
    backend: Optional[str] = typer.Option(None, "--backend", help="dense-qr or charpoly-roots"),
    sweep: bool = typer.Option(False, "--sweep", help="Track branches over a gamma grid"),
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    points: Optional[int] = typer.Option(None, "--points"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    seed: Optional[int] = _SEED,
    config: Optional[Path] = _CONFIG,
):
    """
    Eigenvalues of the chain, ordered by real then imaginary part.

    Examples:
        # Paired spectrum at the coalescence point
        nhlatt spectrum --L 14 --q 7 --gamma 2 --vectors --out spec.csv

        # Real potential instead of absorption
        nhlatt spectrum --L 42 --V -2.5

        # Branches over gamma for plotting
        nhlatt spectrum --L 14 --sweep --gamma-min 0 --gamma-max 4 --points 401
    """
    with exit_codes():
        run = Run(
            "spectrum",
            config,
            dict(L=L, q=q, gamma=gamma, V=V, vectors=vectors, backend=backend, sweep=sweep,
                 gamma_min=gamma_min, gamma_max=gamma_max, points=points),
            out=out,
            format=format,
            seed=seed,
        )
        args = run.args
        if args.sweep:
            result = spectrum_sweep(_grid(args), args.L, args.q)
            rows = [
                (g, b, z.real, z.imag, amb)
                for g, row, amb in zip(result.gammas, result.branches, result.ambiguous)
                for b, z in enumerate(row)
            ]
            run.emit(rows, SWEEP_SCHEMA)
            return

        if args.V is not None:
            params = LatticeParams.real_potential(args.L, args.q, args.V)
        else:
            params = LatticeParams.absorbing(args.L, args.q, args.gamma)
        result = order_eigenpairs(solve(params, args.backend, args.vectors, run.settings.seed))
        rows = []
        for i, z in enumerate(result.eigenvalues):
            row = [i, float(z.real), float(z.imag)]
            if result.has_vectors:
                row += result.occupancies(i).tolist()
            rows.append(row)
        run.emit(
            rows,
            spectrum_schema(args.L if result.has_vectors else None),
            backend=result.backend,
            trace_residual=abs(result.eigenvalues.sum() - params.impurity),
            mirror_distance=mirror_distance(result.eigenvalues),
        )


def _rta_row(p) -> list:
    return [p.gamma, p.k, p.R, p.T, p.A, p.t_obs, p.norm_final, p.absorbed_integral]


@app.command()
def scatter(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Packet width in sites"),
    k: Optional[float] = typer.Option(None, "--k", help="Momentum in radians"),
    k_pi: Optional[float] = typer.Option(None, "--k-pi", help="Momentum as a fraction of pi"),
    j0: Optional[int] = typer.Option(None, "--j0", help="Packet center; L/4 if omitted"),
    gamma: Optional[float] = typer.Option(None, "--gamma"),
    t_obs: Optional[float] = typer.Option(None, "--t-obs", help="Override the observation time"),
    series: Optional[Path] = typer.Option(None, "--series", help="Also write (t, j, occupancy) rows here"),
    stride: Optional[float] = typer.Option(None, "--stride", help="Time stride of the series"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    tol: Optional[float] = _TOL,
    config: Optional[Path] = _CONFIG,
):
    """
    One wavepacket scattering run.

    Examples:
        nhlatt scatter --L 500 --q 250 --sigma 40 --k-pi 0.5 --gamma 2

        # With a density time series every 2 time units
        nhlatt scatter --L 500 --sigma 40 --k-pi 0.5 --gamma 0.5 --series density.csv --stride 2
    """
    with exit_codes():
        run = Run(
            "scatter",
            config,
            dict(L=L, q=q, sigma=sigma, k=k, k_pi=k_pi, j0=j0, gamma=gamma, t_obs=t_obs,
                 series_stride=stride if series else None),
            out=out,
            format=format,
            tol=tol,
        )
        args, s = run.args, run.settings
        spec = WavepacketSpec(sigma=args.sigma, k=args.k, j0=args.j0)
        point = scatter_once(
            args.L, args.q, spec, args.gamma, tol=s.tol, t_obs=args.t_obs,
            safety=s.safety, overlap_max=s.edge_overlap_max,
        )
        run.emit([_rta_row(point)], RTA_SCHEMA)
        if series is not None:
            rows = occupancy_series(
                args.L, args.q, spec, args.gamma, point.t_obs, args.series_stride or 1.0,
                tol=s.tol, overlap_max=s.edge_overlap_max,
            )
            run.emit(rows, SERIES_SCHEMA, path=series)


@app.command("scan-gamma")
def scan_gamma(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    k: Optional[float] = typer.Option(None, "--k"),
    k_pi: Optional[float] = typer.Option(None, "--k-pi"),
    j0: Optional[int] = typer.Option(None, "--j0"),
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    points: Optional[int] = typer.Option(None, "--points"),
    t_obs: Optional[float] = typer.Option(None, "--t-obs"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    tol: Optional[float] = _TOL,
    config: Optional[Path] = _CONFIG,
):
    """
    R, T and A over a grid of absorbing strengths.

    Examples:
        nhlatt scan-gamma --L 500 --q 250 --sigma 40 --k 1.5707963 \\
            --gamma-min 0 --gamma-max 10 --points 41 --out rta.csv
    """
    with exit_codes():
        run = Run(
            "scan-gamma",
            config,
            dict(L=L, q=q, sigma=sigma, k=k, k_pi=k_pi, j0=j0, gamma_min=gamma_min,
                 gamma_max=gamma_max, points=points, t_obs=t_obs),
            out=out,
            format=format,
            tol=tol,
        )
        args, s = run.args, run.settings
        spec = WavepacketSpec(sigma=args.sigma, k=args.k, j0=args.j0)
        scan = scan_rta(
            _grid(args), args.L, args.q, spec, tol=s.tol, t_obs=args.t_obs, safety=s.safety,
            overlap_max=s.edge_overlap_max, n_jobs=s.effective_threads(), cache=run.cache(),
        )
        try:
            g_star = extract_gamma_star(scan)
        except (NumericalError, ValueError) as e:
            logger.warning(f"no absorption maximum: {e}")
            g_star = None

        for failure in scan.failures:
            console.print(f"[red]gamma={failure.gamma:g} failed: {escape(failure.error or '')}[/red]")
        run.emit(
            [_rta_row(p) for p in scan.points],
            RTA_SCHEMA,
            gamma_star=g_star,
            r_nondecreasing=scan.r_nondecreasing,
            t_nonincreasing=scan.t_nonincreasing,
            a_unimodal=scan.a_unimodal,
            failures=[f.model_dump() for f in scan.failures],
        )


@app.command("scan-k")
def scan_k_command(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    k: List[float] = typer.Option([], "--k", help="Momentum in radians (repeatable)"),
    k_pi: List[float] = typer.Option([], "--k-pi", help="Momentum as a fraction of pi (repeatable)"),
    j0: Optional[int] = typer.Option(None, "--j0"),
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    points: Optional[int] = typer.Option(None, "--points"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    tol: Optional[float] = _TOL,
    config: Optional[Path] = _CONFIG,
):
    """
    Absorption-maximizing strength for several momenta.

    Examples:
        nhlatt scan-k --L 250 --sigma 15 --k-pi 0.25 --k-pi 0.5 --k-pi 0.75 \\
            --gamma-min 0 --gamma-max 4 --points 21
    """
    with exit_codes():
        run = Run(
            "scan-k",
            config,
            dict(L=L, q=q, sigma=sigma, k_values=list(k), k_pi_values=list(k_pi), j0=j0,
                 gamma_min=gamma_min, gamma_max=gamma_max, points=points),
            out=out,
            format=format,
            tol=tol,
        )
        args, s = run.args, run.settings
        rows = scan_k(
            args.k_values, _grid(args), args.L, args.q, args.sigma, j0=args.j0, tol=s.tol,
            n_jobs=s.effective_threads(), cache=run.cache(),
        )
        run.emit(
            [(r.k, r.gamma_star, r.lattice_law, r.continuum) for r in rows],
            GAMMA_STAR_SCHEMA,
            errors={repr(r.k): r.error for r in rows if r.error},
        )


@app.command("scan-q")
def scan_q_command(
    L: Optional[int] = _L,
    q: List[int] = typer.Option([], "--q", help="Impurity site (repeatable)"),
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    config: Optional[Path] = _CONFIG,
):
    """
    Coalescence strength of the two eigenvalues nearest the imaginary axis, per impurity site.

    Examples:
        nhlatt scan-q --L 14 --q 1 --q 2 --q 3 --q 7
    """
    with exit_codes():
        run = Run(
            "scan-q",
            config,
            dict(L=L, q_values=list(q), gamma_min=gamma_min, gamma_max=gamma_max),
            out=out,
            format=format,
        )
        args = run.args
        rows = scan_q(args.L, args.q_values, window=(args.gamma_min, args.gamma_max))
        run.emit([(r.q, r.gamma_c, r.parity, r.above_two) for r in rows], Q_SCAN_SCHEMA)


@app.command("bound-state")
def bound_state_command(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    gamma: Optional[float] = typer.Option(None, "--gamma"),
    V: Optional[float] = typer.Option(None, "--V"),
    map_gamma: List[float] = typer.Option([], "--map-gamma", help="Map these gamma values to V (repeatable)"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    config: Optional[Path] = _CONFIG,
):
    """
    Localized eigenstate: energy, occupancy profile and localization length.

    Examples:
        nhlatt bound-state --L 42 --gamma 2.5
        nhlatt bound-state --L 42 --V -2.5

        # Real potential with the same localization length
        nhlatt bound-state --L 42 --map-gamma 2.5 --map-gamma 4 --map-gamma 10
    """
    with exit_codes():
        run = Run(
            "bound-state",
            config,
            dict(L=L, q=q, gamma=gamma, V=V, map_gamma=list(map_gamma)),
            out=out,
            format=format,
        )
        args = run.args
        if args.map_gamma:
            mapping = map_gamma_to_v(args.map_gamma, args.L, args.q)
            rows = [(g, v, float(np.sqrt(g * g - 4.0))) for g, v in mapping.pairs]
            run.emit(rows, GAMMA_V_SCHEMA)
            return

        if args.V is not None:
            params = LatticeParams.real_potential(args.L, args.q, args.V)
        else:
            params = LatticeParams.absorbing(args.L, args.q, args.gamma)
        info = bound_state(solve(params), min_r_squared=args.min_r_squared)
        run.emit(
            [(j + 1, p) for j, p in enumerate(info.profile)],
            PROFILE_SCHEMA,
            eigenvalue=[info.eigenvalue.real, info.eigenvalue.imag],
            alpha=info.alpha,
            r_squared=info.r_squared,
        )
        console.print(
            f"lambda = {info.eigenvalue.real:.10g} {info.eigenvalue.imag:+.10g}i, "
            f"alpha = {info.alpha:.6g} (r^2 = {info.r_squared:.6f})"
        )


@app.command("ep-locate")
def ep_locate(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    objective: Optional[str] = typer.Option(None, "--objective", help="min-gap, all-pairs or central-pair"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    seed: Optional[int] = _SEED,
    config: Optional[Path] = _CONFIG,
):
    """
    Minimize the eigenvalue gap over a gamma window and report the pairs there.

    Examples:
        nhlatt ep-locate --L 14 --q 7 --gamma-min 1.5 --gamma-max 2.5
        nhlatt ep-locate --L 8 --q 4 --gamma-min 2 --gamma-max 3
    """
    with exit_codes():
        run = Run(
            "ep-locate",
            config,
            dict(L=L, q=q, gamma_min=gamma_min, gamma_max=gamma_max, objective=objective),
            out=out,
            format=format,
            seed=seed,
        )
        args = run.args
        gamma_c, report = locate_ep(
            args.L, args.q, (args.gamma_min, args.gamma_max), objective=args.objective,
            grid_points=args.grid_points, seed=run.settings.seed,
        )
        rows = [
            (gamma_c, p.i, p.j, p.center.real, p.center.imag, p.gap, p.vector_overlap, p.is_ep)
            for p in report.pair_list
        ]
        run.emit(rows, EP_PAIRS_SCHEMA, classification=report.classification, unpaired=report.unpaired)
        console.print(f"gamma_c = {gamma_c:.12g}: {report.classification}")


@app.command("classify-ep")
def classify_ep(
    L: List[int] = typer.Option([], "--L", help="Chain length (repeatable)"),
    q: Optional[int] = typer.Option(None, "--q", help="Impurity site; central if omitted"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    config: Optional[Path] = _CONFIG,
):
    """
    Exceptional-point taxonomy for each chain length.

    Examples:
        nhlatt classify-ep --L 6 --L 7 --L 8 --L 9
    """
    with exit_codes():
        run = Run("classify-ep", config, dict(L_values=list(L), q=q), out=out, format=format)
        args = run.args
        rows = []
        with Progress(console=console) as progress:
            task = progress.add_task("Classifying...", total=len(args.L_values))
            for length in args.L_values:
                result = classify_ep_structure(length, args.q)
                rows.append(
                    (
                        result.L,
                        result.q,
                        result.classification,
                        ";".join(format_float(g) for g in result.gamma_c),
                        result.gamma_1,
                    )
                )
                progress.advance(task)
        run.emit(rows, CLASSIFY_SCHEMA)


def format_float(value: float) -> str:
    return format(value, ".17g")


@app.command()
def profiles(
    L: Optional[int] = _L,
    q: Optional[int] = _Q,
    gamma: Optional[float] = typer.Option(None, "--gamma"),
    index: List[int] = typer.Option([], "--index", help="Eigenstate index in (Re, Im) order (repeatable)"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    seed: Optional[int] = _SEED,
    config: Optional[Path] = _CONFIG,
):
    """
    Occupancy profiles of eigenstates.

    Examples:
        nhlatt profiles --L 42 --q 21 --gamma 2.5 --out profiles.csv
    """
    with exit_codes():
        run = Run(
            "profiles", config, dict(L=L, q=q, gamma=gamma, indices=list(index)),
            out=out, format=format, seed=seed,
        )
        args = run.args
        rows = dump_eigenstate_profiles(
            args.L, args.q, args.gamma, args.indices or None, seed=run.settings.seed
        )
        run.emit(
            [
                [r.index, r.eigenvalue.real, r.eigenvalue.imag, r.participation_ratio, r.nodes, *r.occupancies]
                for r in rows
            ],
            profiles_schema(args.L),
        )


@app.command()
def continuum(
    k: Optional[float] = typer.Option(None, "--k"),
    k_pi: Optional[float] = typer.Option(None, "--k-pi"),
    gamma_min: Optional[float] = typer.Option(None, "--gamma-min"),
    gamma_max: Optional[float] = typer.Option(None, "--gamma-max"),
    points: Optional[int] = typer.Option(None, "--points"),
    hbar: Optional[float] = typer.Option(None, "--hbar"),
    m: Optional[float] = typer.Option(None, "--m"),
    out: Optional[Path] = _OUT,
    format: Optional[str] = _FORMAT,
    config: Optional[Path] = _CONFIG,
):
    """
    Delta-potential R, T, A next to the exact lattice plane-wave values.

    Examples:
        nhlatt continuum --k-pi 0.5 --gamma-min 0 --gamma-max 10 --points 101
    """
    with exit_codes():
        run = Run(
            "continuum",
            config,
            dict(k=k, k_pi=k_pi, gamma_min=gamma_min, gamma_max=gamma_max, points=points, hbar=hbar, m=m),
            out=out,
            format=format,
        )
        args = run.args
        rows = []
        for g in _grid(args):
            c = continuum_rta(ContinuumParams(k=args.k, gamma=float(g), hbar=args.hbar, m=args.m))
            lat = lattice_plane_wave_rta(args.k, float(g))
            rows.append((float(g), c.R, c.T, c.A, lat.R, lat.T, lat.A))
        run.emit(rows, CONTINUUM_SCHEMA, gamma_star=gamma_star(args.k, args.hbar, args.m))


@config_app.command(name="init")
def init_config(
    config_path: Path = typer.Option(DEFAULT_CONFIG_PATH, "--path", help="Where to write the file"),
    force: bool = typer.Option(False, "--force", help="Overwrite an existing file"),
):
    """
    Write a default configuration file.

    Examples:
        nhlatt config init
        nhlatt config init --path ~/.config/nhlatt/config.yaml
    """
    if config_path.exists() and not force:
        console.print(f"[yellow]Config already exists at {config_path}; use --force to overwrite[/yellow]")
        raise typer.Exit(code=1)
    config_path.parent.mkdir(parents=True, exist_ok=True)
    create_default_config(config_path)
    console.print(f"[green]Created configuration at {config_path}[/green]")


@config_app.command(name="show")
def show_config(config: Optional[Path] = _CONFIG):
    """
    Print the effective settings.

    Examples:
        nhlatt config show
        nhlatt config show --config run.yaml
    """
    with exit_codes():
        settings = load_config(config)
        data = settings.model_dump(mode="json")
        data["effective_threads"] = settings.effective_threads()
        typer.echo(yaml.dump(data, sort_keys=False))
