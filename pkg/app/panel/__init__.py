"""Panel data model, validation and CSV ingestion."""

from app.panel.dataset import PanelDataset, UnitSide, ValidationReport, require_valid, validate
from app.panel.io import ColumnSpec, load_csv, write_csv

__all__ = [
    "ColumnSpec",
    "PanelDataset",
    "UnitSide",
    "ValidationReport",
    "load_csv",
    "require_valid",
    "validate",
    "write_csv",
]
