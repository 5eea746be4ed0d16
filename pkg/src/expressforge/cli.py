"""Batch-analysis command line: score tables, squares, stats, bundle checks.

Exit codes: 0 success, 1 validation failure, 2 I/O error. Output is a pure
function of the inputs (and the seed, where one applies).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bundle as bundle_mod
from . import reports
from .coding import codebook_bundle_from_dict, proposal_counts, ResponseLabeling
from .elicitation import balanced_latin_square
from .fixtures import build_demo_bundle
from .metrics import kruskal_wallis, mann_whitney_u
from .motion import clips_from_dict

EXIT_VALIDATION = 1
EXIT_IO = 2


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        click.echo(f"{path} is not valid JSON: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)


def _read_numbers(path: str) -> list[float]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    values = []
    for token in text.replace(",", "\n").split():
        try:
            values.append(float(token))
        except ValueError:
            click.echo(f"{path}: not a number: {token!r}", err=True)
            sys.exit(EXIT_VALIDATION)
    if not values:
        click.echo(f"{path}: no values", err=True)
        sys.exit(EXIT_VALIDATION)
    return values


def _fail_validation(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(EXIT_VALIDATION)


@click.group()
def main() -> None:
    """Study analysis tools for elicited robot expressions."""


@main.group()
def analyze() -> None:
    """Score tables from coded study files."""


@analyze.command("os")
@click.option("--codes", required=True, help="codes.json")
@click.option("--clips", "clips_path", required=True, help="clips.json")
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "md"]))
def analyze_os(codes: str, clips_path: str, fmt: str) -> None:
    """Occurrence-score table over the coded clips."""
    try:
        codebook, _, _ = codebook_bundle_from_dict(_read_json(codes))
        _, clips = clips_from_dict(_read_json(clips_path))
        counts = proposal_counts(codebook, clips)
        click.echo(reports.os_table(counts, fmt), nl=False)
    except ValueError as exc:
        _fail_validation(str(exc))


@analyze.command("qra")
@click.option("--codes", required=True, help="codes.json")
@click.option("--responses", "responses_path", required=True, help="responses.json")
@click.option("--format", "fmt", default="csv", type=click.Choice(["csv", "md"]))
def analyze_qra(codes: str, responses_path: str, fmt: str) -> None:
    """Response-accuracy table over labeled survey responses."""
    try:
        codebook, groups, match_table = codebook_bundle_from_dict(_read_json(codes))
        doc = _read_json(responses_path)
        by_category: dict[str, list[ResponseLabeling]] = {}
        for entry in doc.get("responses", []):
            labels = entry.get("labels")
            if labels:
                by_category.setdefault(entry["category_id"], []).append(
                    ResponseLabeling(
                        response_id=entry["participant_id"],
                        labels=tuple(labels),
                    )
                )
        cells = reports.qra_cells(codebook, by_category, groups, match_table)
        click.echo(reports.qra_table(cells, fmt), nl=False)
    except ValueError as exc:
        _fail_validation(str(exc))


@main.command()
@click.option("-n", "size", required=True, type=int, help="items to order")
@click.option("--seed", default=None, type=int, help="permutes item labels")
def square(size: int, seed: int | None) -> None:
    """Print a balanced Latin square, one row per line."""
    try:
        rows = balanced_latin_square(size, seed)
    except ValueError as exc:
        _fail_validation(str(exc))
        return
    for row in rows:
        click.echo(",".join(str(item) for item in row))


@main.group()
def stats() -> None:
    """Nonparametric tests over CSV samples."""


@stats.command("mwu")
@click.option("--a", "a_path", required=True, help="first sample, one value per line")
@click.option("--b", "b_path", required=True, help="second sample")
def stats_mwu(a_path: str, b_path: str) -> None:
    result = mann_whitney_u(_read_numbers(a_path), _read_numbers(b_path))
    click.echo(
        f"U={result.u:g} p_two_sided={result.p_two_sided:.6g} "
        f"method={result.method}"
    )


@stats.command("kw")
@click.option(
    "--groups",
    "groups_path",
    required=True,
    help="CSV with rows 'group,value'",
)
def stats_kw(groups_path: str) -> None:
    try:
        text = Path(groups_path).read_text()
    except OSError as exc:
        click.echo(f"cannot read {groups_path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    grouped: dict[str, list[float]] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        name, _, value = line.partition(",")
        try:
            grouped.setdefault(name, []).append(float(value))
        except ValueError:
            _fail_validation(f"{groups_path}:{line_no}: bad value {value!r}")
    try:
        result = kruskal_wallis([grouped[k] for k in sorted(grouped)])
    except ValueError as exc:
        _fail_validation(str(exc))
        return
    click.echo(f"H={result.h:.6g} df={result.df} p={result.p:.6g}")


@main.command()
@click.option("--bundle", "bundle_dir", required=True, help="bundle directory")
@click.option("--format", "fmt", default="md", type=click.Choice(["csv", "md"]))
def report(bundle_dir: str, fmt: str) -> None:
    """Full study report: OS, QRA, taxonomy distribution, battery medians."""
    try:
        bundle = bundle_mod.load_bundle(bundle_dir)
    except OSError as exc:
        click.echo(f"cannot read bundle: {exc}", err=True)
        sys.exit(EXIT_IO)
    except ValueError as exc:
        _fail_validation(str(exc))
        return
    counts = proposal_counts(bundle.codebook, bundle.clips)
    qra = reports.qra_cells(
        bundle.codebook,
        bundle.labelings_by_category(),
        bundle.label_groups,
        bundle.match_table,
    )
    taxonomy_labels = [c.taxonomy for c in bundle.codebook.categories]
    sections = [
        ("Occurrence scores", reports.os_table(counts, fmt)),
        ("Qualitative response accuracy", reports.qra_table(qra, fmt)),
        ("Taxonomy distribution", reports.taxonomy_table(taxonomy_labels, fmt)),
        (
            "Battery medians (reversed items transformed)",
            reports.battery_table(
                bundle.study_config.battery, bundle.responses, fmt
            ),
        ),
    ]
    for title, table in sections:
        click.echo(f"## {title}\n")
        click.echo(table)


@main.command()
@click.option("--bundle", "bundle_dir", required=True, help="bundle directory")
def validate(bundle_dir: str) -> None:
    """Schema and cross-reference check; exit 1 with findings on failure."""
    directory = Path(bundle_dir)
    if not directory.is_dir():
        click.echo(f"not a directory: {bundle_dir}", err=True)
        sys.exit(EXIT_IO)
    try:
        bundle_mod.load_bundle(directory)
    except bundle_mod.BundleError as exc:
        for finding in str(exc).split("; "):
            click.echo(finding, err=True)
        sys.exit(EXIT_VALIDATION)
    except ValueError as exc:
        _fail_validation(str(exc))
        return
    click.echo("bundle ok")


@main.command()
@click.option("--out", "out_dir", required=True, help="target directory")
def fixture(out_dir: str) -> None:
    """Write the built-in demo bundle (table-consistent study data)."""
    try:
        bundle_mod.save_bundle(build_demo_bundle(), out_dir)
    except OSError as exc:
        click.echo(f"cannot write {out_dir}: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(f"bundle written to {out_dir}")


@main.command()
@click.option("--addr", default="127.0.0.1:8000", help="bind address")
@click.option("--data", "data_dir", default=None, help="bundle directory")
def serve(addr: str, data_dir: str | None) -> None:
    """Run the HTTP API for the console UI."""
    import uvicorn

    from .server import create_app

    host, _, port = addr.partition(":")
    app = create_app(data_dir=data_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))


if __name__ == "__main__":
    main()
