"""CSV and markdown rendering of scenario reports and timing tables."""

from __future__ import annotations

import csv
import io

from .scenarios import ScenarioReport

REPORT_COLUMNS = ("scenario", "condition", "model", "target", "mode", "value", "std_error", "M", "seed")
TIMING_COLUMNS = ("width", "mode", "value", "std_error", "M", "seed", "median_s", "spread_s")


def _fmt(x: float) -> str:
    return repr(float(x))


def report_to_csv(report: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        w.writerow([report.scenario, r.condition, r.model, r.target, r.mode,
                    _fmt(r.value), _fmt(r.std_error), r.M, r.seed])
    return buf.getvalue()


def report_from_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def report_to_markdown(report: ScenarioReport) -> str:
    lines = [f"## {report.scenario}", ""]
    meta = ", ".join(f"{k}={v}" for k, v in report.metadata.items())
    lines += [f"_{meta}_", "", "std_error is the within-run Monte-Carlo standard error.", ""]

    columns = []
    for r in report.rows:
        key = (r.condition, r.mode, r.target)
        if key not in columns:
            columns.append(key)
    models = list(dict.fromkeys(r.model for r in report.rows))
    header = ["Model"] + [f"{c} {m.upper()}-SV of {t}" for c, m, t in columns]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for model in models:
        cells = [model]
        for c, m, t in columns:
            try:
                r = report.find(condition=c, model=model, target=t, mode=m)
                cells.append(f"{r.value:.4g} ± {r.std_error:.2g}")
            except KeyError:
                cells.append("")
        lines.append("| " + " | ".join(cells) + " |")

    if report.ratios:
        lines += ["", "| Model | Ratio | Value | Numerator | Denominator |", "|---|---|---|---|---|"]
        for q in report.ratios:
            num, den = report.rows[q.numerator], report.rows[q.denominator]
            lines.append(
                f"| {q.model} | {q.name} | {q.value:.4f} | "
                f"{num.condition}/{num.target}/{num.mode} | {den.condition}/{den.target}/{den.mode} |"
            )
    if report.checks:
        lines += ["", "| Model | Check | Observed | Expected | Result | Why |", "|---|---|---|---|---|---|"]
        for c in report.checks:
            lines.append(f"| {c.model} | {c.name} | {c.observed:.4f} | {c.expected} | "
                         f"{'pass' if c.passed else 'FAIL'} | {c.note} |")
    return "\n".join(lines) + "\n"


def timing_to_csv(rows, estimates) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMING_COLUMNS)
    for row in rows:
        for mode, med, spr in (("nmcc", row.nmcc_median, row.nmcc_spread),
                               ("mcc", row.mcc_median, row.mcc_spread)):
            e = estimates[row.width, mode]
            w.writerow([row.width, mode, _fmt(e.value), _fmt(e.std_error), e.iterations, e.seed,
                        f"{med:.6f}", f"{spr:.6f}"])
    return buf.getvalue()


def timing_to_markdown(rows) -> str:
    lines = ["## timing", "", "| Feature Size | NMCC-SV (sec) | MCC-SV (sec) | MCC/NMCC |", "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.width} | {r.nmcc_median:.3f} ± {r.nmcc_spread:.3f} | "
                     f"{r.mcc_median:.3f} ± {r.mcc_spread:.3f} | {r.ratio:.3f} |")
    return "\n".join(lines) + "\n"
