#!/usr/bin/env python3
"""
Transfer Model Averaging Command Line
=====================================

Front end for real-data fits and the simulation studies. Every command
writes its tables to the output directory (CSV by default) and prints a
short console summary.

Commands:
    fit         target + source CSVs: full-data coefficients and the 70/30
                split protocol with scaled MSPE
    scaledmspe  rotate every domain CSV through the target role
    simulate    simulation experiments over a config grid
    weightconv  non-informative weight convergence study
    normality   normality study of the standardized estimation error

Usage:
    transma simulate --config exp1.json --out output/exp1
    transma fit --target target.csv --sources s1.csv s2.csv --out output/fit
"""

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from candidate_domains import candidates_from_summaries
from exceptions import (
    ConfigInvalid,
    HeaderMismatch,
    ParseError,
    PrivacyViolation,
    TransMAError,
)
from model_averaging import CriterionConfig, FitResult, fit_trans_mac, fit_trans_macs, fit_trans_mai
from regression_cube import DomainData, aggregate_cube, summarize_domains
from settings import EXIT_CODES, METHODS, OUTPUT, SPLIT, WEIGHT_CONVERGENCE, configure_logging, get_thread_count
from simulation_lab import (
    ExperimentConfig,
    domain_rng,
    expand_config_grid,
    normality_study,
    run_replications,
    scaled_mspe,
    weight_convergence_study,
)

logger = logging.getLogger(__name__)

COMMANDS = ('fit', 'simulate', 'weightconv', 'normality', 'scaledmspe')
FORMATS = ('csv', 'json')


# =============================================================================
# MANIFEST
# =============================================================================

@dataclass(frozen=True)
class RunManifest:
    """Everything one command invocation needs."""

    command: str
    output_dir: Path = Path('output')
    config_path: Optional[Path] = None
    methods: Tuple[str, ...] = tuple(METHODS)
    format: str = 'csv'
    seed: Optional[int] = None
    threads: int = 1
    summaries_only: bool = False
    target_path: Optional[Path] = None
    source_paths: Tuple[Path, ...] = ()
    domain_paths: Tuple[Path, ...] = ()
    repeats: int = SPLIT['repeats']
    train_fraction: float = SPLIT['train_fraction']
    standardize: bool = False
    v: float = 0.5
    phi: Optional[float] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigInvalid(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if self.format not in FORMATS:
            raise ConfigInvalid(f"format must be one of {FORMATS}")
        if self.command in ('fit', 'simulate', 'scaledmspe') and not self.methods:
            raise ConfigInvalid("no methods requested")
        unknown = [method for method in self.methods if method not in METHODS]
        if unknown:
            raise ConfigInvalid(f"unknown methods {unknown}; choose from {METHODS}")
        if self.seed is not None and self.seed < 0:
            raise ConfigInvalid(f"seed must be nonnegative, got {self.seed}")
        if self.repeats < 1:
            raise ConfigInvalid(f"repeats must be positive, got {self.repeats}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigInvalid(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        if self.command == 'fit' and (self.target_path is None or not self.source_paths):
            raise ConfigInvalid("fit needs --target and at least one --sources file")
        if self.command == 'scaledmspe' and len(self.domain_paths) < 2:
            raise ConfigInvalid("scaledmspe needs at least two --domains files")
        # validates v and phi
        CriterionConfig(v=self.v, phi=self.phi)


# =============================================================================
# DATA FILES
# =============================================================================

_TOKENIZER_LINE = re.compile(r"line (\d+)")
_TOKENIZER_FIELDS = re.compile(r"Expected (\d+) fields")


def ingest_csv(path: Path, domain_id: int = 0) -> DomainData:
    """
    Read one domain from a CSV with header y,x1,...,xp.

    Args:
        path: UTF-8 file, comma separated, decimal dot, no missing cells
        domain_id: Id given to the domain

    Returns:
        DomainData

    Raises:
        HeaderMismatch: header is not y,x1,...,xp
        ParseError: a cell is missing or not a finite number (1-based line/column)
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.ParserError as exc:
        message = str(exc)
        line = _TOKENIZER_LINE.search(message)
        expected = _TOKENIZER_FIELDS.search(message)
        raise ParseError(str(path), int(line.group(1)) if line else 0,
                         int(expected.group(1)) + 1 if expected else 0, "too many fields")
    except pd.errors.EmptyDataError:
        raise HeaderMismatch(f"{path}: file is empty")
    except UnicodeDecodeError as exc:
        raise ParseError(str(path), 1, 1, f"not UTF-8: {exc.reason}")

    header = [str(column).strip() for column in raw.columns]
    expected = ['y'] + [f'x{j}' for j in range(1, len(header))]
    if len(header) < 2 or header != expected:
        raise HeaderMismatch(f"{path}: header {','.join(header)} should read {','.join(expected[:max(2, len(header))])}")

    values = np.empty(raw.shape, dtype=float)
    for column_index, column in enumerate(raw.columns):
        for row_index, cell in enumerate(raw[column].tolist()):
            # header is line 1
            line = row_index + 2
            if not isinstance(cell, str) or cell.strip() == '':
                raise ParseError(str(path), line, column_index + 1, "missing value")
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(str(path), line, column_index + 1, f"not a number: {cell!r}")
            if not np.isfinite(value):
                raise ParseError(str(path), line, column_index + 1, f"not finite: {cell!r}")
            values[row_index, column_index] = value
    return DomainData(id=domain_id, X=values[:, 1:], y=values[:, 0])


def write_domain_csv(data: DomainData, path: Path) -> Path:
    """Write a domain in the format ingest_csv reads back."""
    frame = pd.DataFrame(data.X, columns=[f'x{j}' for j in range(1, data.p + 1)])
    frame.insert(0, 'y', data.y)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=OUTPUT['float_format'],
                 lineterminator=OUTPUT['line_terminator'])
    return path


def load_config(path: Optional[Path]) -> Dict:
    """Flat JSON object, or an empty dict when no path is given."""
    if path is None:
        return {}
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.colno, exc.msg)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: config must be a JSON object")
    return raw


def write_table(frame: pd.DataFrame, output_dir: Path, name: str, fmt: str) -> Path:
    """Write one result table as CSV (17 significant digits) or JSON records."""
    stem = Path(name).stem
    if fmt == 'json':
        path = output_dir / f'{stem}.json'
        frame.to_json(path, orient='records', double_precision=15, indent=2)
    else:
        path = output_dir / f'{stem}.csv'
        frame.to_csv(path, index=False, float_format=OUTPUT['float_format'],
                     lineterminator=OUTPUT['line_terminator'])
    return path


# =============================================================================
# REAL-DATA PROTOCOL
# =============================================================================

@dataclass
class MethodFits:
    """Coefficients per method plus the averaging fits and their failures."""

    k: int
    betas: Dict[str, np.ndarray] = field(default_factory=dict)
    fits: Dict[str, FitResult] = field(default_factory=dict)
    errors: Dict[str, TransMAError] = field(default_factory=dict)


def fit_all_methods(domains: Sequence[DomainData],
                    methods: Sequence[str],
                    criterion: CriterionConfig,
                    summaries_only: bool = False) -> MethodFits:
    """
    Fit every requested method on a target (id 0) and its sources.

    Estimator failures are collected per method; candidate construction
    failures propagate.
    """
    summaries = summarize_domains(domains)
    candidates = candidates_from_summaries(summaries)
    raw = {d.id: (d if d.id == 0 or not summaries_only else None) for d in domains}
    sigma2 = {summary.id: summary.sigma2_hat for summary in summaries}
    outcome = MethodFits(k=len(candidates))

    mai: Optional[FitResult] = None
    mai_error: Optional[TransMAError] = None
    if any(method.startswith('trans-') for method in methods):
        try:
            mai = fit_trans_mai(raw[0], candidates, criterion, sigma2_target=sigma2[0])
        except TransMAError as exc:
            mai_error = exc

    for method in methods:
        try:
            if method == 'ols-tar':
                outcome.betas[method] = np.array(summaries[0].beta_hat)
                continue
            if method == 'ols-pool':
                outcome.betas[method] = aggregate_cube(summaries, [s.id for s in summaries])[1]
                continue
            if mai is None:
                raise mai_error
            if method == 'trans-mai':
                fit = mai
            elif method == 'trans-macs':
                fit = fit_trans_macs(raw, candidates, m_s=mai.m_s_hat, sigma2_by_source=sigma2)
            else:
                fit = fit_trans_mac(raw, candidates, m_s=mai.m_s_hat, sigma2_by_source=sigma2)
            outcome.betas[method] = fit.beta
            outcome.fits[method] = fit
        except TransMAError as exc:
            outcome.errors[method] = exc
    return outcome


def standardize_domains(train: Sequence[DomainData],
                        X_test: np.ndarray) -> Tuple[List[DomainData], np.ndarray]:
    """
    z-score covariates with the pooled training mean and standard deviation.
    Constant columns are centered only.
    """
    stacked = np.vstack([domain.X for domain in train])
    mean = stacked.mean(axis=0)
    scale = stacked.std(axis=0)
    scale[scale == 0] = 1.0
    scaled = [DomainData(id=domain.id, X=(domain.X - mean) / scale, y=domain.y) for domain in train]
    return scaled, (X_test - mean) / scale


def _split_repeat(target: DomainData,
                  sources: Sequence[DomainData],
                  manifest: RunManifest,
                  seed: int,
                  repeat: int) -> Tuple[List[Dict], List[Dict], List[PrivacyViolation]]:
    rng = domain_rng(seed, repeat, 0, 'split')
    order = rng.permutation(target.n)
    n_train = int(round(manifest.train_fraction * target.n))
    if not 0 < n_train < target.n:
        raise ConfigInvalid(f"a {manifest.train_fraction} split of {target.n} target rows leaves an empty side")
    train_rows, test_rows = np.sort(order[:n_train]), np.sort(order[n_train:])
    train = [DomainData(id=0, X=target.X[train_rows], y=target.y[train_rows])] + list(sources)
    X_test, y_test = target.X[test_rows], target.y[test_rows]
    if manifest.standardize:
        train, X_test = standardize_domains(train, X_test)

    criterion = CriterionConfig(v=manifest.v, phi=manifest.phi)
    rows, weight_rows, violations = [], [], []
    try:
        outcome = fit_all_methods(train, manifest.methods, criterion, manifest.summaries_only)
    except TransMAError as exc:
        logger.warning("repeat %d failed: %s", repeat, exc)
        return [{'replicate': repeat, 'method': m, 'mspe': np.nan} for m in manifest.methods], [], []

    for method in manifest.methods:
        error = outcome.errors.get(method)
        if isinstance(error, PrivacyViolation):
            violations.append(error)
        elif error is not None:
            logger.debug("repeat %d, %s failed: %s", repeat, method, error)
        mspe = np.nan
        if method in outcome.betas:
            residuals = y_test - X_test @ outcome.betas[method]
            mspe = float(residuals @ residuals / residuals.size)
        rows.append({'replicate': repeat, 'method': method, 'mspe': mspe})
        if method in outcome.fits:
            fit = outcome.fits[method]
            row = {'replicate': repeat, 'method': method}
            row.update({f'w_{m}': float(w) for m, w in enumerate(fit.full_weights(outcome.k))})
            row['m_s_hat'] = fit.m_s_hat
            weight_rows.append(row)
    return rows, weight_rows, violations


def split_protocol(target: DomainData,
                   sources: Sequence[DomainData],
                   manifest: RunManifest,
                   seed: int) -> Tuple[pd.DataFrame, pd.DataFrame, List[PrivacyViolation]]:
    """
    Repeated random train/test split of the target; sources stay whole.

    Returns:
        (mspe table with scaled_mspe, weights table, privacy violations)
    """
    threads = manifest.threads
    if threads == 1:
        results = [_split_repeat(target, sources, manifest, seed, b) for b in range(manifest.repeats)]
    else:
        results = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_split_repeat)(target, sources, manifest, seed, b) for b in range(manifest.repeats))
    rows = [row for result in results for row in result[0]]
    weight_rows = [row for result in results for row in result[1]]
    violations = [violation for result in results for violation in result[2]]
    k = 1 + len(sources)
    weight_columns = ['replicate', 'method'] + [f'w_{m}' for m in range(k)] + ['m_s_hat']
    table = scaled_mspe(pd.DataFrame(rows, columns=['replicate', 'method', 'mspe']))
    return table, pd.DataFrame(weight_rows, columns=weight_columns), violations


# =============================================================================
# COMMANDS
# =============================================================================

def _resolve_seed(manifest: RunManifest, raw: Dict) -> int:
    if manifest.seed is not None:
        return manifest.seed
    return int(raw.get('seed', ExperimentConfig().seed))


def _report_privacy(violations: Sequence[PrivacyViolation]) -> bool:
    if not violations:
        return False
    methods = sorted({violation.method for violation in violations if violation.method})
    print(f"error: {violations[0]} ({len(violations)} violations in {', '.join(methods) or 'fits'})",
          file=sys.stderr)
    return True


def print_method_table(title: str, frame: pd.DataFrame, value: str, spread: Optional[str] = None) -> None:
    """Console table of one value per method."""
    print("\n" + "=" * 50)
    print(title)
    print("=" * 50)
    for _, row in frame.iterrows():
        text = f"{row['method']:12}: {row[value]:12.6g}"
        if spread is not None:
            text += f"  (sd {row[spread]:.4g})"
        print(text)
    print("=" * 50)


def command_fit(manifest: RunManifest) -> int:
    """Full-data coefficients plus the split protocol on one target."""
    raw = load_config(manifest.config_path)
    seed = _resolve_seed(manifest, raw)
    target = ingest_csv(manifest.target_path, 0)
    sources = [ingest_csv(path, j) for j, path in enumerate(manifest.source_paths, start=1)]

    domains = [target] + sources
    if manifest.standardize:
        domains, _ = standardize_domains(domains, target.X)
    criterion = CriterionConfig(v=manifest.v, phi=manifest.phi)
    outcome = fit_all_methods(domains, manifest.methods, criterion, manifest.summaries_only)
    violations = [e for e in outcome.errors.values() if isinstance(e, PrivacyViolation)]
    for method, error in outcome.errors.items():
        if not isinstance(error, PrivacyViolation):
            raise error

    coefficient_rows = []
    for method in manifest.methods:
        if method not in outcome.betas:
            continue
        row = {'method': method, 'm_s_hat': outcome.fits[method].m_s_hat if method in outcome.fits else None}
        row.update({f'beta_{j}': float(b) for j, b in enumerate(outcome.betas[method], start=1)})
        coefficient_rows.append(row)

    table, weights, split_violations = split_protocol(target, sources, manifest, seed)
    out = manifest.output_dir
    write_table(pd.DataFrame(coefficient_rows), out, 'coefficients.csv', manifest.format)
    write_table(table.rename(columns={'replicate': 'repeat'}), out, 'mspe.csv', manifest.format)
    write_table(weights.rename(columns={'replicate': 'repeat'}), out, OUTPUT['weights_file'], manifest.format)

    means = table.groupby('method', sort=False)[['mspe', 'scaled_mspe']].agg(['mean', 'std'])
    means.columns = ['mspe', 'mspe_sd', 'scaled_mspe', 'scaled_sd']
    print_method_table(f"SCALED MSPE ({manifest.repeats} splits)", means.reset_index(), 'scaled_mspe', 'scaled_sd')
    if _report_privacy(violations + split_violations):
        return EXIT_CODES['config']
    return EXIT_CODES['ok']


def command_scaledmspe(manifest: RunManifest) -> int:
    """Every domain takes the target role once; the rest act as sources."""
    raw = load_config(manifest.config_path)
    seed = _resolve_seed(manifest, raw)
    files = list(manifest.domain_paths)
    loaded = [ingest_csv(path, 0) for path in files]

    tables, weight_tables, violations = [], [], []
    for t, path in enumerate(files):
        target = loaded[t]
        others = [loaded[j] for j in range(len(files)) if j != t]
        sources = [DomainData(id=j, X=d.X, y=d.y) for j, d in enumerate(others, start=1)]
        table, weights, found = split_protocol(target, sources, manifest, seed)
        table.insert(0, 'target', Path(path).stem)
        weights.insert(0, 'target', Path(path).stem)
        tables.append(table)
        weight_tables.append(weights)
        violations.extend(found)
        print(f"✅ target {Path(path).stem}: {manifest.repeats} splits")

    table = pd.concat(tables, ignore_index=True)
    out = manifest.output_dir
    write_table(table.rename(columns={'replicate': 'repeat'}), out, 'mspe.csv', manifest.format)
    write_table(pd.concat(weight_tables, ignore_index=True).rename(columns={'replicate': 'repeat'}),
                out, OUTPUT['weights_file'], manifest.format)

    means = table.groupby('method', sort=False)['scaled_mspe'].agg(['mean', 'std']).reset_index()
    print_method_table("SCALED MSPE (all targets)", means, 'mean', 'std')
    if _report_privacy(violations):
        return EXIT_CODES['config']
    return EXIT_CODES['ok']


def command_simulate(manifest: RunManifest) -> int:
    """Replications over every point of the config grid."""
    raw = load_config(manifest.config_path)
    raw.setdefault('experiment', 'Exp1')
    if manifest.seed is not None:
        raw['seed'] = manifest.seed
    configs = expand_config_grid(raw)

    summaries, weights, violations = [], [], 0
    for cfg in configs:
        run = run_replications(cfg, manifest.methods, manifest.threads, manifest.summaries_only)
        summaries.append(run.summary)
        weights.append(run.weights)
        violations += run.privacy_violations
        failed = int(run.summary['failed'].max())
        marker = "✅" if failed == 0 else "❌"
        print(f"{marker} {cfg.experiment} h={cfg.h:g} |A|={cfg.A_size} n0={cfg.n0} n_m={cfg.n_m} p={cfg.p}: "
              f"{cfg.B - failed}/{cfg.B} replications")

    summary = pd.concat(summaries, ignore_index=True)
    out = manifest.output_dir
    write_table(summary, out, OUTPUT['summary_file'], manifest.format)
    write_table(pd.concat(weights, ignore_index=True), out, OUTPUT['weights_file'], manifest.format)
    print(f"\n{len(configs)} config points x {len(manifest.methods)} methods written to {out}/")
    if violations:
        print(f"error: {violations} Trans-MACs/Trans-MAC fits needed withheld source rows", file=sys.stderr)
        return EXIT_CODES['config']
    return EXIT_CODES['ok']


def command_weightconv(manifest: RunManifest) -> int:
    """Non-informative weight sums over (v, n0) and their power-law fits."""
    raw = load_config(manifest.config_path)
    raw.setdefault('experiment', 'WeightConv')
    v_grid = raw.pop('v_grid', WEIGHT_CONVERGENCE['v_grid'])
    n0_grid = raw.pop('n0_grid', WEIGHT_CONVERGENCE['n0_grid'])
    if manifest.seed is not None:
        raw['seed'] = manifest.seed
    cfg = ExperimentConfig.from_dict(raw)

    study = weight_convergence_study(cfg, v_grid, n0_grid, manifest.threads)
    out = manifest.output_dir
    write_table(study.table, out, 'weightconv.csv', manifest.format)
    write_table(study.fit, out, 'weightconv_fit.csv', manifest.format)

    print("\n" + "=" * 50)
    print("NON-INFORMATIVE WEIGHT DECAY  c * n0^(-a)")
    print("=" * 50)
    for _, row in study.fit.iterrows():
        print(f"v = {row['v']:4.2f}: c = {row['c_v']:8.4f}, a = {row['a_v']:7.4f}")
    print("=" * 50)
    return EXIT_CODES['ok']


def command_normality(manifest: RunManifest) -> int:
    """Distribution of the standardized Trans-MAI error."""
    raw = load_config(manifest.config_path)
    raw.setdefault('experiment', 'Normality')
    if manifest.seed is not None:
        raw['seed'] = manifest.seed
    cfg = ExperimentConfig.from_dict(raw)

    study = normality_study(cfg, manifest.threads)
    out = manifest.output_dir
    write_table(study.values, out, OUTPUT['normality_file'], manifest.format)
    write_table(pd.DataFrame([study.summary]), out, 'normality_summary.csv', manifest.format)
    write_table(study.histogram, out, 'normality_histogram.csv', manifest.format)

    print("\n" + "=" * 50)
    print("NORMALITY OF THE STANDARDIZED ERROR")
    print("=" * 50)
    print(f"{'mean':10}: {study.summary['mean']: .4f}")
    print(f"{'std':10}: {study.summary['std']: .4f}")
    print(f"{'completed':10}: {study.summary['completed']:d}/{cfg.B}")
    print("=" * 50)
    return EXIT_CODES['ok']


COMMAND_HANDLERS = {
    'fit': command_fit,
    'scaledmspe': command_scaledmspe,
    'simulate': command_simulate,
    'weightconv': command_weightconv,
    'normality': command_normality,
}


def run(manifest: RunManifest) -> int:
    """
    Execute one command.

    Returns:
        0 on success, 2 on configuration or input errors, 3 on numerical failures
    """
    try:
        manifest.validate()
        try:
            manifest.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigInvalid(f"cannot create output directory {manifest.output_dir}: {exc}")
        return COMMAND_HANDLERS[manifest.command](manifest)
    except TransMAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


# =============================================================================
# ARGUMENTS
# =============================================================================

def _parse_methods(text: str) -> Tuple[str, ...]:
    return tuple(item.strip() for item in text.split(',') if item.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='transma',
        description="Transfer learning by sufficiency-principled model averaging")
    parser.add_argument('command', choices=COMMANDS, help="What to run")
    parser.add_argument('--config', type=Path, help="Flat JSON config (ExperimentConfig fields)")
    parser.add_argument('--out', type=Path, default=Path('output'), help="Output directory")
    parser.add_argument('--seed', type=int, help="Seed overriding the config")
    parser.add_argument('--methods', type=_parse_methods, default=tuple(METHODS),
                        help=f"Comma-separated subset of {','.join(METHODS)}")
    parser.add_argument('--format', choices=FORMATS, default='csv', help="Result file format")
    parser.add_argument('--threads', type=int, help="Worker threads (default: $TRANSMA_THREADS or 1)")
    parser.add_argument('--summaries-only', action='store_true',
                        help="Withhold source raw rows; Trans-MACs/Trans-MAC then fail")
    parser.add_argument('--target', type=Path, help="Target CSV for fit")
    parser.add_argument('--sources', type=Path, nargs='+', default=(), help="Source CSVs for fit")
    parser.add_argument('--domains', type=Path, nargs='+', default=(), help="Domain CSVs for scaledmspe")
    parser.add_argument('--repeats', type=int, default=SPLIT['repeats'], help="Random splits")
    parser.add_argument('--train-fraction', type=float, default=SPLIT['train_fraction'],
                        help="Target share used for training")
    parser.add_argument('--standardize', action='store_true',
                        help="z-score covariates with pooled training moments")
    parser.add_argument('--v', type=float, default=0.5, help="Trans-MAI loss mix for fit/scaledmspe")
    parser.add_argument('--phi', type=float, help="Sufficiency penalty (default log n0)")
    parser.add_argument('--verbose', action='store_true', help="Debug logging")
    return parser


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    return RunManifest(
        command=args.command,
        output_dir=args.out,
        config_path=args.config,
        methods=tuple(args.methods),
        format=args.format,
        seed=args.seed,
        threads=get_thread_count(args.threads),
        summaries_only=args.summaries_only,
        target_path=args.target,
        source_paths=tuple(args.sources),
        domain_paths=tuple(args.domains),
        repeats=args.repeats,
        train_fraction=args.train_fraction,
        standardize=args.standardize,
        v=args.v,
        phi=args.phi,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and return its exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    return run(manifest_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
