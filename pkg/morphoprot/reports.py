"""Serialization of signatures, profiles and comparison reports."""
import csv
import io
import json
from typing import Iterable, Optional

from rich.table import Table

from . import __version__
from .pipelines import ComparisonReport, FractalSignature, GeodesicProfile

REPORT_COLUMNS = ["id_1", "d_p_1", "id_2", "d_p_2", "rho", "delta_p", "verdict"]
SIGNATURE_COLUMNS = ["pdb_id", "d_p", "r_squared", "slice_count", "capped_slices"]


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def _csv(header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def report_to_dict(report: ComparisonReport) -> dict:
    return {
        "ids": list(report.ids),
        "d_p": list(report.d_p),
        "rho": report.rho,
        "faces": [face.to_dict() for face in report.profile.faces],
        "delta_p": report.delta_p,
        "verdict": report.verdict.value,
        "thresholds": report.thresholds.to_dict(),
        "params": {"method1": report.method1.to_dict(), "method2": report.method2.to_dict()},
        "version": __version__,
    }


def report_to_json(report: ComparisonReport) -> str:
    return _dumps(report_to_dict(report))


def reports_to_json(reports: Iterable[ComparisonReport]) -> str:
    return json.dumps([report_to_dict(r) for r in reports], sort_keys=True, indent=2)


def report_csv_header() -> list[str]:
    return list(REPORT_COLUMNS)


def report_to_csv_row(report: ComparisonReport) -> list:
    return [
        report.ids[0],
        repr(report.d_p[0]),
        report.ids[1],
        repr(report.d_p[1]),
        repr(report.rho),
        report.delta_p,
        report.verdict.value,
    ]


def reports_to_csv(reports: Iterable[ComparisonReport]) -> str:
    return _csv(report_csv_header(), (report_to_csv_row(r) for r in reports))


def signature_to_json(signature: FractalSignature, slices: Optional[list[dict]] = None) -> str:
    payload = signature.to_dict()
    payload["version"] = __version__
    if slices is not None:
        payload["slices"] = slices
    return _dumps(payload)


def signature_to_csv(signature: FractalSignature) -> str:
    return _csv(SIGNATURE_COLUMNS, [[
        signature.pdb_id,
        repr(signature.d_p),
        repr(signature.r_squared),
        signature.slice_count,
        signature.capped_slices,
    ]])


def profile_to_json(ids: tuple[str, str], profile: GeodesicProfile, params: dict) -> str:
    payload = profile.to_dict()
    payload.update({"ids": list(ids), "params": params, "version": __version__})
    return _dumps(payload)


def profile_to_csv(ids: tuple[str, str], profile: GeodesicProfile) -> str:
    header = ["id_1", "id_2"]
    row = list(ids)
    for face in profile.faces:
        header += [f"{face.name}_1", f"{face.name}_2"]
        row += [face.count_s, face.count_t]
    return _csv(header + ["delta_p"], [row + [profile.delta_p]])


def render_table(reports: Iterable[ComparisonReport]) -> Table:
    table = Table(title="Structure comparison")
    for column in ("Protein 1", "D_p 1", "Protein 2", "D_p 2", "rho", "delta_p", "verdict"):
        table.add_column(column)
    for r in reports:
        style = "green" if r.verdict.value == "similar" else "red"
        table.add_row(
            r.ids[0], f"{r.d_p[0]:.6f}", r.ids[1], f"{r.d_p[1]:.6f}",
            f"{r.rho:.6f}", str(r.delta_p), f"[{style}]{r.verdict.value}[/{style}]",
        )
    return table


def signature_table(signature: FractalSignature) -> Table:
    table = Table(title=f"Fractal signature of {signature.pdb_id}")
    table.add_column("field")
    table.add_column("value")
    table.add_row("D_p", f"{signature.d_p:.6f}")
    table.add_row("R²", f"{signature.r_squared:.6f}")
    table.add_row("slices", str(signature.slice_count))
    table.add_row("capped slices", str(signature.capped_slices))
    return table


def profile_table(ids: tuple[str, str], profile: GeodesicProfile) -> Table:
    table = Table(title=f"Geodesic profile {ids[0]} / {ids[1]}")
    for column in ("face", ids[0], ids[1], "|diff|"):
        table.add_column(column)
    for face in profile.faces:
        marker = " (empty marker)" if face.empty_marker else ""
        table.add_row(face.name + marker, str(face.count_s), str(face.count_t), str(face.difference))
    table.add_row("delta_p", "", "", str(profile.delta_p))
    return table
