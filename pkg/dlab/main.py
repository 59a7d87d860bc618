from dataclasses import dataclass
from dlab._compat import StrEnum
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Optional, Sequence
import json
import sys

import click
import pandas as pd
from pydantic import BaseModel, ValidationError
import typer

from dlab.providers.algebra_providers import AlgebraDescriptor, Element, Side, make_algebra
from dlab.providers.config_providers import TOOL_VERSION, BudgetConfiguration, get_budget_configuration
from dlab.providers.console_providers import error, warn
from dlab.providers.dset_providers import (DSet, covering_number, is_nonconcentrated, make_dset, uniform_subset,
                                           uniformity_audit)
from dlab.providers.energy_providers import (additive_energy, bsg_extract, ledger_frame, multiplicative_energy,
                                             quadruple_count_sparse, quintuple_count_tv, ruzsa_ledger)
from dlab.providers.errors_providers import AlgebraMismatch, BudgetExceeded, DlabValidationError, ExitCode
from dlab.providers.files_providers import (read_dset, read_pairs, tool_header, write_dset, write_frame, write_json,
                                            write_pairs)
from dlab.providers.lab_providers import (CounterexampleKind, audit_counterexample, build_schedule, fibre_profile,
                                          gen_arithmetic_progression, gen_circle_net, gen_counterexample,
                                          gen_full_grid, gen_planted_bsg, gen_random_dset,
                                          measure_projection_profile, probe_babyproj, records_frame, run_expansion)
from dlab.providers.setops_providers import (PairSet, apply_dual, apply_linear_map, coordinate_change,
                                             difference_set, iterated, pairset_product, product_set, project,
                                             quotient_set, sumset)
from dlab.providers.structure_providers import avoids_subalgebras, escape_basis, strongly_avoids


class OutputFormat(StrEnum):
    csv = "csv"
    json = "json"


class GeneratorKind(StrEnum):
    random = "random"
    grid = "grid"
    circle = "circle"
    ap = "ap"
    planted = "planted"


class OpKind(StrEnum):
    sum = "sum"
    diff = "diff"
    prod = "prod"
    iter = "iter"
    proj = "proj"
    quot = "quot"
    linmap = "linmap"


class RunConfig(BaseModel):
    """Everything needed to replay one run; echoed into the header of every output file."""
    subcommand: str
    algebra: dict[str, Any] | None = None
    inputs: dict[str, str] = {}
    outputs: dict[str, str] = {}
    seed: int
    points_cap: int
    count_cap: int
    output_format: OutputFormat
    options: dict[str, Any] = {}


@dataclass
class ApplicationConfiguration:
    budget: BudgetConfiguration
    seed: int
    output_format: OutputFormat


class App:
    """Shared state of one CLI invocation: budget, seed and output handling."""
    def __init__(self, app_configuration: ApplicationConfiguration) -> None:
        self.app_configuration = app_configuration

    @property
    def budget(self) -> BudgetConfiguration:
        return self.app_configuration.budget

    @property
    def seed(self) -> int:
        return self.app_configuration.seed

    def run_config(self, subcommand: str, alg: AlgebraDescriptor | None = None,
                   inputs: dict[str, Path | None] | None = None, outputs: dict[str, Path | None] | None = None,
                   **options: Any) -> RunConfig:
        algebra = None
        if alg is not None:
            algebra = {"kind": str(alg.kind), "p": alg.p, "d": alg.d, "m": alg.m,
                       "poly": list(alg.defining_poly) if alg.defining_poly else None}
        return RunConfig(subcommand=subcommand, algebra=algebra,
                         inputs={k: str(v) for k, v in (inputs or {}).items() if v is not None},
                         outputs={k: str(v) for k, v in (outputs or {}).items() if v is not None},
                         seed=self.seed, points_cap=self.budget.points_cap, count_cap=self.budget.count_cap,
                         output_format=self.app_configuration.output_format,
                         options={k: _plain(v) for k, v in options.items()})

    def emit(self, payload: pd.DataFrame | BaseModel | dict[str, Any] | int, out: Path | None,
             config: RunConfig) -> None:
        """
        Write a result to ``out`` (with the header and config lines) or print it to stdout.

        ### Arguments
        ``payload`` -- a frame for tabular results, a model or mapping for reports, an int for counts

        ### External Effects
        Creates ``out`` atomically, or prints to stdout
        """
        as_json = self.app_configuration.output_format is OutputFormat.json
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        if isinstance(payload, int) and out is None:
            typer.echo(str(payload))
            return
        if isinstance(payload, int):
            payload = {"value": payload}
        header = tool_header(config.subcommand)
        dumped_config = config.model_dump(mode="json")
        if isinstance(payload, pd.DataFrame):
            if as_json:
                records = json.loads(payload.to_json(orient="records"))
                self._write_json(records, out, header, dumped_config)
            elif out is None:
                typer.echo(payload.to_csv(index=False, lineterminator="\n"), nl=False)
            else:
                write_frame(payload, out, header, dumped_config)
            return
        if as_json:
            self._write_json(payload, out, header, dumped_config)
        elif out is None:
            typer.echo(pd.json_normalize([payload]).to_csv(index=False, lineterminator="\n"), nl=False)
        else:
            write_frame(pd.json_normalize([payload]), out, header, dumped_config)

    def _write_json(self, payload: Any, out: Path | None, header: str, config: dict[str, Any]) -> None:
        if out is None:
            typer.echo(json.dumps(payload, sort_keys=True, indent=2))
        else:
            write_json(payload, out, header, config)


def _plain(value: Any) -> Any:
    if isinstance(value, (StrEnum, Path, Fraction)):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _coords(text: str, alg: AlgebraDescriptor) -> Element:
    """Parse ``"a,b,..."`` grid coordinates of one element."""
    try:
        values = tuple(int(c) for c in text.replace(" ", "").split(",") if c != "")
    except ValueError as e:
        raise DlabValidationError(f"Element {text!r} is not a comma separated list of integers") from e
    if len(values) != alg.d:
        raise AlgebraMismatch(f"Element {text!r} does not have {alg.d} coordinates")
    return alg.reduce(values)


def _poly(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(c) for c in text.split(",")]
    except ValueError as e:
        raise DlabValidationError(f"Polynomial {text!r} is not a comma separated list of integers") from e


def _required(value: Path | None, name: str) -> Path:
    if value is None:
        raise click.UsageError(f"Missing option --{name}")
    return value


app = typer.Typer(add_completion=False, no_args_is_help=True, pretty_exceptions_enable=False,
                  help="Discretized sum-product and projection experiments.")


def _version(value: bool) -> None:
    if value:
        typer.echo(f"dlab {TOOL_VERSION}")
        raise typer.Exit()


@app.callback()
def configure(ctx: typer.Context,
              points_cap: Annotated[Optional[int], typer.Option(min=1, help="Point budget per set.")] = None,
              count_cap: Annotated[Optional[int], typer.Option(min=1, help="Tuple budget for counting.")] = None,
              progress: Annotated[bool, typer.Option("--progress", help="Progress bars on stderr.")] = False,
              seed: Annotated[int, typer.Option(help="Seed of every random draw.")] = 0,
              output_format: Annotated[OutputFormat, typer.Option("--format")] = OutputFormat.json,
              version: Annotated[bool, typer.Option("--version", callback=_version, is_eager=True)] = False) -> None:
    budget = get_budget_configuration(points_cap=points_cap, count_cap=count_cap, show_progress=progress or None)
    ctx.obj = App(ApplicationConfiguration(budget=budget, seed=seed, output_format=output_format))


AlgebraKindOption = Annotated[str, typer.Option("--algebra", help="R, C, H, Qp or Qp_ext.")]
PrimeOption = Annotated[Optional[int], typer.Option("--p")]
DimOption = Annotated[Optional[int], typer.Option("--d")]
PrecisionOption = Annotated[int, typer.Option("--m", min=1)]
PolyOption = Annotated[Optional[str], typer.Option("--poly", help="Coefficients low to high, comma separated.")]
OutOption = Annotated[Optional[Path], typer.Option("--out")]


@app.command()
def gen(ctx: typer.Context, kind: Annotated[GeneratorKind, typer.Option("--kind")] = GeneratorKind.random,
        algebra: AlgebraKindOption = "C", p: PrimeOption = None, d: DimOption = None, m: PrecisionOption = 8,
        poly: PolyOption = None, s: Annotated[float, typer.Option()] = 1.0,
        C: Annotated[float, typer.Option("--C")] = 8.0, n: Annotated[int, typer.Option(min=1)] = 16,
        step: Annotated[int, typer.Option()] = 1, noise: Annotated[int, typer.Option(min=0)] = 0,
        out: OutOption = None, pairs_out: Annotated[Optional[Path], typer.Option("--pairs-out")] = None) -> None:
    """Generate a point set (and for ``planted`` the edge set ``H``)."""
    application: App = ctx.obj
    out = _required(out, "out")
    alg = make_algebra(algebra, p=p, d=d, m=m, poly=_poly(poly))
    config = application.run_config("gen", alg=alg, outputs={"out": out, "pairs_out": pairs_out}, kind=kind, s=s,
                                    C=C, n=n, step=step, noise=noise)
    match kind:
        case GeneratorKind.random:
            A = gen_random_dset(alg, s, seed=application.seed, C=C)
        case GeneratorKind.grid:
            A = gen_full_grid(alg)
        case GeneratorKind.circle:
            A = gen_circle_net(m)
        case GeneratorKind.ap:
            A = gen_arithmetic_progression(alg, n, step=step)
        case GeneratorKind.planted:
            planted = gen_planted_bsg(alg, n, noise, seed=application.seed)
            A = planted.A
            write_pairs(planted.H, _required(pairs_out, "pairs-out"), config.model_dump(mode="json"))
    write_dset(A, out, config.model_dump(mode="json"))


@app.command()
def counterexample(ctx: typer.Context, which: Annotated[str, typer.Option("--which", help="One, Two, 1 or 2.")] = "One",
                   m: PrecisionOption = 6, literal: Annotated[bool, typer.Option("--literal")] = False,
                   out: Annotated[Optional[tuple[Path, Path]], typer.Option("--out", help="Pairs file, then directions file.")] = None,
                   audit: Annotated[Optional[Path], typer.Option("--audit")] = None) -> None:
    """Write the pair set ``G`` and the directions ``X`` of a projection counterexample."""
    application: App = ctx.obj
    if out is None:
        raise click.UsageError("Missing option --out G_PATH X_PATH")
    example = gen_counterexample(which, m, literal=literal)
    config = application.run_config("counterexample", alg=example.G.alg,
                                    outputs={"G": out[0], "X": out[1], "audit": audit}, which=which, literal=literal)
    dumped = config.model_dump(mode="json")
    write_pairs(example.G, out[0], dumped)
    write_dset(example.X, out[1], dumped)
    for name, part in example.components.items():
        write_pairs(part, out[0].with_name(f"{out[0].stem}.{name}{out[0].suffix}"), dumped)
    if audit is not None:
        application.emit(records_frame(audit_counterexample(example)), audit, config)


@app.command()
def cover(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")],
          k: Annotated[int, typer.Option("--k", min=0)]) -> None:
    """Print the covering number ``N_(radix^-k)(A)``."""
    application: App = ctx.obj
    A = read_dset(path)
    application.emit(covering_number(A, k), None, application.run_config("cover", inputs={"in": path}, k=k))


@app.command("verify-nc")
def verify_nc(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")], s: Annotated[float, typer.Option()],
              C: Annotated[float, typer.Option("--C")] = 1.0, out: OutOption = None) -> None:
    application: App = ctx.obj
    A = read_dset(path)
    report = is_nonconcentrated(A, s, C)
    application.emit(report.model_dump(mode="json", by_alias=True), out,
                     application.run_config("verify-nc", alg=A.alg, inputs={"in": path}, outputs={"out": out}, s=s, C=C))


@app.command()
def uniformize(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")],
               T: Annotated[int, typer.Option("--T", min=1)] = 1, out: OutOption = None,
               audit: Annotated[Optional[Path], typer.Option("--audit")] = None) -> None:
    """Write the uniform refinement of a set, optionally with its stage audit."""
    application: App = ctx.obj
    A = read_dset(path)
    config = application.run_config("uniformize", alg=A.alg, inputs={"in": path}, outputs={"out": out, "audit": audit},
                                    T=T)
    refined = uniform_subset(A, T)
    write_dset(refined, _required(out, "out"), config.model_dump(mode="json"))
    if audit is not None:
        application.emit(uniformity_audit(refined, T), audit, config)


@app.command()
def op(ctx: typer.Context, kind: Annotated[OpKind, typer.Option("--kind")],
       A_path: Annotated[Optional[Path], typer.Option("--A")] = None,
       B_path: Annotated[Optional[Path], typer.Option("--B")] = None,
       G_path: Annotated[Optional[Path], typer.Option("--G")] = None,
       X_path: Annotated[Optional[Path], typer.Option("--X")] = None,
       x: Annotated[Optional[str], typer.Option("--x", help="Direction, comma separated grid coordinates.")] = None,
       x2: Annotated[Optional[str], typer.Option("--x2")] = None,
       side: Annotated[Side, typer.Option("--side")] = Side.left,
       n_sum: Annotated[int, typer.Option("--n-sum", min=1)] = 2,
       n_prod: Annotated[int, typer.Option("--n-prod", min=1)] = 2,
       rho_exp: Annotated[int, typer.Option("--rho-exp", min=0)] = 1,
       out: OutOption = None, dual_out: Annotated[Optional[Path], typer.Option("--dual-out")] = None) -> None:
    """Apply one set operation and write the resulting set."""
    application: App = ctx.obj
    budget = application.budget
    out = _required(out, "out")
    inputs = {"A": A_path, "B": B_path, "G": G_path, "X": X_path}
    A = read_dset(A_path) if A_path is not None else None
    B = read_dset(B_path) if B_path is not None else A
    G = read_pairs(G_path) if G_path is not None else None
    alg = A.alg if A is not None else G.alg if G is not None else None
    if alg is None:
        raise click.UsageError("op needs --A or --G")
    config = application.run_config("op", alg=alg, inputs=inputs, outputs={"out": out, "dual_out": dual_out},
                                    kind=kind, x=x, x2=x2, side=side, n_sum=n_sum, n_prod=n_prod, rho_exp=rho_exp)
    dumped = config.model_dump(mode="json")
    result: DSet | PairSet
    match kind:
        case OpKind.sum:
            result = sumset(_need(A, "A"), B, budget)
        case OpKind.diff:
            result = difference_set(_need(A, "A"), B, budget)
        case OpKind.prod:
            result = product_set(_need(A, "A"), B, side, budget)
        case OpKind.iter:
            result = iterated(_need(A, "A"), n_sum, n_prod, budget)
        case OpKind.proj:
            pairs = G if G is not None else pairset_product(_need(A, "A"), B, budget)
            result = project(_coords(_need(x, "x"), alg), pairs, side)
        case OpKind.quot:
            result = quotient_set(_need(A, "A"), rho_exp, side, budget)
        case OpKind.linmap:
            L = coordinate_change(alg, _coords(_need(x, "x"), alg), _coords(_need(x2, "x2"), alg))
            result = apply_linear_map(L, _need(G, "G"))
            if X_path is not None:
                write_dset(apply_dual(L, read_dset(X_path)), _required(dual_out, "dual-out"), dumped)
    if isinstance(result, PairSet):
        write_pairs(result, out, dumped)
    else:
        write_dset(result, out, dumped)


def _need(value: Any, name: str) -> Any:
    if value is None:
        raise click.UsageError(f"This operation needs --{name}")
    return value


@app.command()
def escape(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")],
           floor: Annotated[float, typer.Option("--floor")] = 0.5, out: OutOption = None) -> None:
    """Search ``A^(d)`` for a basis with determinant at least ``floor``."""
    application: App = ctx.obj
    A = read_dset(path)
    certificate = escape_basis(A, floor, seed=application.seed, budget=application.budget)
    application.emit(certificate, out, application.run_config("escape", alg=A.alg, inputs={"in": path},
                                                              outputs={"out": out}, floor=floor))


@app.command()
def avoid(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")], C: Annotated[float, typer.Option("--C")] = 4.0,
          strong: Annotated[bool, typer.Option("--strong")] = False, out: OutOption = None) -> None:
    application: App = ctx.obj
    A = read_dset(path)
    report = strongly_avoids(A, C) if strong else avoids_subalgebras(A, C)
    application.emit(report, out, application.run_config("avoid", alg=A.alg, inputs={"in": path},
                                                         outputs={"out": out}, C=C, strong=strong))


@app.command()
def energy(ctx: typer.Context, A_path: Annotated[Path, typer.Option("--A")],
           B_path: Annotated[Optional[Path], typer.Option("--B")] = None,
           multiplicative: Annotated[bool, typer.Option("--multiplicative")] = False,
           side: Annotated[Side, typer.Option("--side")] = Side.left, out: OutOption = None) -> None:
    application: App = ctx.obj
    A = read_dset(A_path)
    B = read_dset(B_path) if B_path is not None else A
    value = (multiplicative_energy(A, B, side, application.budget) if multiplicative
             else additive_energy(A, B, application.budget))
    config = application.run_config("energy", alg=A.alg, inputs={"A": A_path, "B": B_path}, outputs={"out": out},
                                    multiplicative=multiplicative, side=side)
    application.emit({"energy": value, "size_A": len(A), "size_B": len(B)} if out is not None else value, out, config)


@app.command("count-tv")
def count_tv(ctx: typer.Context, A_path: Annotated[Path, typer.Option("--A")],
             X_path: Annotated[Path, typer.Option("--X")], rho_exp: Annotated[int, typer.Option("--rho-exp", min=0)],
             symmetric: Annotated[bool, typer.Option("--symmetric")] = False,
             s: Annotated[Optional[float], typer.Option()] = None,
             sigma: Annotated[Optional[float], typer.Option()] = None,
             t: Annotated[Optional[float], typer.Option()] = None,
             eps: Annotated[float, typer.Option(min=0.0)] = 0.0, out: OutOption = None) -> None:
    """Count the quintuples ``(a, b, c, d, x)`` with ``|a + x b - (c - x d)| <= delta``."""
    application: App = ctx.obj
    A, X = read_dset(A_path), read_dset(X_path)
    report = quintuple_count_tv(A, X, rho_exp, symmetric=symmetric, s=s, sigma=sigma, t=t, eps=eps,
                                budget=application.budget)
    application.emit(report, out, application.run_config("count-tv", alg=A.alg, inputs={"A": A_path, "X": X_path},
                                                         outputs={"out": out}, rho_exp=rho_exp, symmetric=symmetric,
                                                         s=s, sigma=sigma, t=t, eps=eps))


@app.command("count-sparse")
def count_sparse(ctx: typer.Context, A_path: Annotated[Path, typer.Option("--A")],
                 p: Annotated[str, typer.Option("--p")], q: Annotated[str, typer.Option("--q")],
                 rho_exp: Annotated[Optional[int], typer.Option("--rho-exp", min=0)] = None,
                 s: Annotated[Optional[float], typer.Option()] = None, out: OutOption = None) -> None:
    application: App = ctx.obj
    A = read_dset(A_path)
    report = quadruple_count_sparse(A, _coords(p, A.alg), _coords(q, A.alg), rho_exp=rho_exp, s=s,
                                    budget=application.budget)
    application.emit(report, out, application.run_config("count-sparse", alg=A.alg, inputs={"A": A_path},
                                                         outputs={"out": out}, p=p, q=q, rho_exp=rho_exp, s=s))


@app.command()
def bsg(ctx: typer.Context, H_path: Annotated[Path, typer.Option("--H")], A_path: Annotated[Path, typer.Option("--A")],
        B_path: Annotated[Optional[Path], typer.Option("--B")] = None, out: OutOption = None,
        out_a: Annotated[Optional[Path], typer.Option("--out-a")] = None,
        out_b: Annotated[Optional[Path], typer.Option("--out-b")] = None) -> None:
    """Extract dense subsets with a small sumset from the edge set ``H``."""
    application: App = ctx.obj
    H, A = read_pairs(H_path), read_dset(A_path)
    B = read_dset(B_path) if B_path is not None else A
    result = bsg_extract(H, A, B, application.budget)
    config = application.run_config("bsg", alg=A.alg, inputs={"H": H_path, "A": A_path, "B": B_path},
                                    outputs={"out": out, "out_a": out_a, "out_b": out_b})
    if out_a is not None:
        write_dset(result.A_sub, out_a, config.model_dump(mode="json"))
    if out_b is not None:
        write_dset(result.B_sub, out_b, config.model_dump(mode="json"))
    application.emit(result.summary, out, config)


@app.command()
def ledger(ctx: typer.Context, paths: Annotated[list[Path], typer.Option("--in", help="Repeat for each set.")],
           out: OutOption = None) -> None:
    """Evaluate the sumset inequality instances on the given sets."""
    application: App = ctx.obj
    sets = [read_dset(path) for path in paths]
    rows = ruzsa_ledger(sets, budget=application.budget)
    violated = [row.instance for row in rows if not row.holds]
    if violated:
        warn(f"Ledger instances violated: {', '.join(violated)}")
    application.emit(ledger_frame(rows), out, application.run_config("ledger", alg=sets[0].alg,
                                                                      inputs={f"in{i}": p for i, p in enumerate(paths)},
                                                                      outputs={"out": out}))


@app.command()
def expand(ctx: typer.Context, path: Annotated[Path, typer.Option("--in")], s: Annotated[float, typer.Option()],
           t: Annotated[Optional[float], typer.Option()] = None,
           sigma: Annotated[Optional[float], typer.Option()] = None,
           rounds: Annotated[int, typer.Option(min=1)] = 1,
           n_sum: Annotated[int, typer.Option("--n-sum", min=1)] = 2,
           n_prod: Annotated[int, typer.Option("--n-prod", min=1)] = 2,
           C: Annotated[float, typer.Option("--C")] = 4.0,
           C_nc: Annotated[float, typer.Option("--C-nc")] = 1.0,
           T: Annotated[int, typer.Option("--T", min=1)] = 1, out: OutOption = None) -> None:
    """Run rounds of ``n_sum (A^(n_prod) - A^(n_prod))`` and record the exponent after each."""
    application: App = ctx.obj
    A = read_dset(path)
    schedule = build_schedule(s, A.d, A.alg.m, sigma=sigma, t=t, C=C, C_nc=C_nc, n_sum=n_sum, n_prod=n_prod,
                              rounds=rounds, T=T)
    records = run_expansion(A, schedule, budget=application.budget)
    application.emit(records_frame(records), out, application.run_config("expand", alg=A.alg, inputs={"in": path},
                                                                          outputs={"out": out},
                                                                          **schedule.model_dump(mode="json")))


@app.command()
def babyproj(ctx: typer.Context, A_path: Annotated[Path, typer.Option("--A")],
             X_path: Annotated[Path, typer.Option("--X")], out: OutOption = None) -> None:
    """Per direction ``x`` the covering number of ``A + xA``, followed by the maximizing direction."""
    application: App = ctx.obj
    A, X = read_dset(A_path), read_dset(X_path)
    records = measure_projection_profile(pairset_product(A, A, application.budget), X, exp_id="babyproj",
                                         seed=application.seed, budget=application.budget)
    records.append(probe_babyproj(A, X, seed=application.seed, budget=application.budget))
    application.emit(records_frame(records), out, application.run_config("babyproj", alg=A.alg,
                                                                          inputs={"A": A_path, "X": X_path},
                                                                          outputs={"out": out}))


@app.command()
def fibres(ctx: typer.Context, G_path: Annotated[Path, typer.Option("--G")],
           X_path: Annotated[Path, typer.Option("--X")], rho_exp: Annotated[int, typer.Option("--rho-exp", min=0)],
           c1: Annotated[float, typer.Option("--c1")] = 0.0, out: OutOption = None) -> None:
    """Heaviest ``rho``-cell fibre of ``G`` under each projection, against the big-fibre threshold."""
    application: App = ctx.obj
    G, X = read_pairs(G_path), read_dset(X_path)
    rows = fibre_profile(G, X, c1, rho_exp)
    frame = pd.DataFrame([row.model_dump() for row in rows])
    for column in ("x", "max_cell"):
        if column in frame:
            frame[column] = frame[column].map(lambda coords: " ".join(str(c) for c in coords))
    application.emit(frame, out, application.run_config("fibres", alg=G.alg, inputs={"G": G_path, "X": X_path},
                                                        outputs={"out": out}, rho_exp=rho_exp, c1=c1))


def _one_line(e: ValidationError) -> str:
    first = e.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    return f"{e.error_count()} validation error(s); {location}: {first['msg']}" if location else first["msg"]


def dispatch(argv: Sequence[str] | None = None) -> int:
    """
    Run the CLI on ``argv`` and return the process exit code.

    ### Returns
    ``0`` on success, ``2`` for rejected input, ``3`` when a budget ran out
    """
    command = typer.main.get_command(app)
    try:
        outcome = command.main(args=list(argv) if argv is not None else None, prog_name="dlab",
                               standalone_mode=False)
    except BudgetExceeded as e:
        error(str(e))
        return ExitCode.budget
    except DlabValidationError as e:
        error(str(e))
        return ExitCode.validation
    except ValidationError as e:
        error(_one_line(e))
        return ExitCode.validation
    except click.exceptions.Abort:
        error("Aborted")
        return ExitCode.failure
    except click.ClickException as e:
        error(e.format_message())
        return ExitCode.validation
    if isinstance(outcome, int):
        return outcome
    return ExitCode.success


if __name__ == "__main__":
    sys.exit(dispatch())
