import os

import click
import pandas as pd
from scipy.stats import ttest_ind

from estimators import CSV_FIELDS
from experiments import read_report_json
from utils import confidence_interval

METRICS = ["c_ab_projected", "c_ab_full", "s_a", "e_a"]


def collect_reports(json_location):
    """Every report JSON under a dir (or the one file given), one row each."""
    if os.path.isdir(json_location):
        paths = []
        for root, dirs, files in os.walk(json_location):
            paths += [os.path.join(root, f) for f in files if f.endswith(".json")]
    else:
        paths = [json_location]
    rows = []
    for path in sorted(paths):
        try:
            report = read_report_json(path)
        except (ValueError, TypeError, KeyError):
            # sweeps, tables and histograms share the directory
            continue
        row = report.csv_row()
        row["label"] = f"{report.method} (T={report.T})" if report.method == "grover" else report.method
        row["path"] = path
        rows.append(row)
    return pd.DataFrame(rows, columns=["label", "path"] + CSV_FIELDS)


def summarize(df, metrics=METRICS):
    """mean and 95% half-width per label; undefined e_a rows are dropped per metric"""
    out = []
    for label, group in df.groupby("label", sort=True):
        row = {"label": label, "count": len(group)}
        for m in metrics:
            values = pd.to_numeric(group[m], errors="coerce").dropna()
            row[f"{m}_mean"] = values.mean() if len(values) else None
            row[f"{m}_ci"] = confidence_interval(values) if len(values) else None
        out.append(row)
    return pd.DataFrame(out)


def welch_test(df, label_a, label_b, metric="c_ab_projected", alternative="greater"):
    a = pd.to_numeric(df[df["label"] == label_a][metric], errors="coerce").dropna()
    b = pd.to_numeric(df[df["label"] == label_b][metric], errors="coerce").dropna()
    if len(a) < 2 or len(b) < 2:
        raise ValueError(f"need at least two reports per label, got {len(a)} and {len(b)}")
    return ttest_ind(a, b, equal_var=False, alternative=alternative)


@click.command()
@click.option("--json_location", required=True, help="report JSON file or a dir of them, as written by main.py run")
@click.option("--metric", default="c_ab_projected", show_default=True, type=click.Choice(METRICS))
@click.option("--test", "test_labels", nargs=2, default=None, help="two labels to compare with a one-sided Welch t-test")
def main(json_location, metric, test_labels):
    df = collect_reports(json_location)
    if df.empty:
        print(f"no reports found in {json_location}")
        return
    summary = summarize(df)
    print(summary.to_string(index=False))
    if test_labels:
        t_stat, p_value = welch_test(df, test_labels[0], test_labels[1], metric)
        print(f"{test_labels[0]} > {test_labels[1]} on {metric}: t_stat: {t_stat}, p_value: {p_value}")


if __name__ == "__main__":
    main()
