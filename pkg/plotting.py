"""
Plotting and export module
Result rows to CSV, metadata to JSON and clustering panels to SVG
"""

import csv
import json
import logging
import math

import matplotlib
matplotlib.use('Agg')  # headless rendering
import matplotlib.pyplot as plt

from errors import OutputError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('model', 'nu', 'r', 'df', 'threshold', 'threshold_se', 'repetitions', 'n_positive',
               'n_multiple', 'clustering_proportion', 'fwer', 'dispersion_index', 'mean_cluster_size')

# self-contained, reproducible SVG output
matplotlib.rcParams['svg.fonttype'] = 'path'
matplotlib.rcParams['svg.hashsalt'] = 'mtlab'


def format_value(value):
    """Fixed text form: NA for undefined, inf for infinite df, '.' decimal point"""
    if value is None:
        return 'NA'
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'NA'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f'{value:.10g}'
    return str(value)


def write_rows_csv(rows, path):
    """UTF-8 CSV with a header row and the fixed column order"""
    try:
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([format_value(getattr(row, name)) for name in CSV_COLUMNS])
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info('wrote %d rows to %s', len(rows), path)
    return path


def read_rows_csv(path):
    with open(path, encoding='utf-8', newline='') as fh:
        return list(csv.DictReader(fh))


def write_json(data, path):
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=str)
            fh.write('\n')
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return path


def df_positions(dfs):
    """Log-axis positions; infinite df sits one doubling past the largest finite df"""
    finite = [v for v in dfs if not math.isinf(v)]
    top = 2.0 * max(finite) if finite else 1.0
    return {v: (top if math.isinf(v) else v) for v in dfs}


def panel_svg(rows, path, title):
    """Clustering proportion against df (log scale), one polyline per nu"""
    dfs = sorted({row.df for row in rows})
    positions = df_positions(dfs)
    fig, ax = plt.subplots(figsize=(6, 4))
    for nu in sorted({row.nu for row in rows}):
        points = sorted((positions[row.df], row.clustering_proportion) for row in rows
                        if row.nu == nu and row.clustering_proportion is not None)
        if points:
            ax.plot([p[0] for p in points], [p[1] for p in points], marker='o', label=f'ν = {nu}')
    ax.set_xscale('log')
    if dfs:
        ax.set_xticks([positions[v] for v in dfs])
        ax.set_xticklabels(['∞' if math.isinf(v) else f'{v:g}' for v in dfs])
        ax.minorticks_off()
    ax.set_xlabel('degrees of freedom (log scale)')
    ax.set_ylabel('clustering proportion')
    ax.set_title(title, fontsize=10)
    if rows:
        ax.legend(fontsize=8)
    fig.tight_layout()
    try:
        fig.savefig(path, format='svg', metadata={'Date': None})
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    finally:
        plt.close(fig)
    return path
