"""Report emission: JSON aggregates, per-sample CSV, and a markdown grid."""

from __future__ import annotations

import json
import math

from ..soundness import SoundnessReport


def report_json(report: SoundnessReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n"


def report_csv(report: SoundnessReport) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append("nan" if math.isnan(v) else repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _cell(block: dict, power: int | None = None) -> str:
    if power is None:
        mean, std = block["mean"], block["std"]
    else:
        mean, std = block["mean"][power - 1], block["std"][power - 1]
    if math.isnan(mean):
        return "n/a"
    return f"{mean:.2f} ({std:.2f})"


def report_markdown(report: SoundnessReport | dict) -> str:
    doc = report.to_dict() if isinstance(report, SoundnessReport) else report
    metrics = doc["metrics"]
    m = doc["config"]["m"]
    headers = ["model", "composition l1(1)", f"composition l1({m})"]
    cells = [doc["model"], _cell(metrics["composition"], 1),
             _cell(metrics["composition"], m)]
    for target, block in metrics["effectiveness"].items():
        label = "acc" if block["kind"] == "discrete" else "ae"
        headers.append(f"{target} intervention: effectiveness {label}")
        cells.append(_cell(block))
        for other, oblock in metrics["preservation"].get(target, {}).items():
            olabel = "acc" if oblock["kind"] == "discrete" else "ae"
            headers.append(f"{target} intervention: {other} {olabel}")
            cells.append(_cell(oblock))
    for target, block in metrics["reversibility"].items():
        headers.append(f"{target} intervention: reversibility l1(1)")
        cells.append(_cell(block, 1))
    for pair, block in metrics["commutativity"].items():
        headers.append(f"commutativity {pair}")
        cells.append(_cell(block))
    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
        "| " + " | ".join(cells) + " |",
    ]
    quality = doc.get("oracle_quality", {})
    if quality:
        lines.append("")
        parts = [
            f"{name}: {q['value']:.2f} ({'accuracy %' if q['kind'] == 'classifier' else 'MAE pp'})"
            for name, q in quality.items()
        ]
        lines.append("oracle quality — " + "; ".join(parts))
    fails = doc.get("failures", {})
    total_failed = sum(fails.values())
    if total_failed:
        lines.append("")
        lines.append(f"failed samples: {fails}")
    return "\n".join(lines) + "\n"


def emit_report(report: SoundnessReport, json_path=None, csv_path=None,
                markdown_path=None) -> None:
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(report_json(report))
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write(report_csv(report))
    if markdown_path is not None:
        with open(markdown_path, "w", encoding="utf-8") as f:
            f.write(report_markdown(report))
