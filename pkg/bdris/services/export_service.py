"""
Export service for experiment results.

This module writes experiment results as CSV (rows only, so reruns with
the same seed are byte-identical), as JSON (rows plus a metadata block) and
as plain-text tables for the terminal.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from bdris.config import settings
from bdris.errors import InvalidInputError
from bdris.models.experiment import ExperimentResult

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")


class ExportError(InvalidInputError):
    """Exception raised for export-related errors."""
    pass


class ExportService:
    """
    Service for exporting experiment results.

    Supports:
    - CSV export, one row per sweep point
    - JSON export mirroring the rows with metadata
    - Plain-text tables

    Attributes:
        output_dir: Directory relative output paths are resolved against
    """

    def __init__(self, output_dir: Optional[str] = None):
        """
        Initialize ExportService.

        Args:
            output_dir: Directory for exported files
        """
        self.output_dir = Path(output_dir or settings.output_dir)

    @staticmethod
    def to_frame(result: ExperimentResult) -> pd.DataFrame:
        """Rows of a result as a DataFrame with stable column order."""
        return pd.DataFrame(result.rows, columns=result.columns)

    def generate_csv(self, result: ExperimentResult) -> str:
        """
        Generate CSV content.

        Columns are ``sweep_value`` then ``<solver>_mean``,
        ``<solver>_stderr`` and ``<solver>_theory`` per solver; a missing
        closed form is an empty field.

        Returns:
            CSV content as string
        """
        return self.to_frame(result).to_csv(index=False, na_rep="", lineterminator="\n")

    def generate_json_export(self, result: ExperimentResult, pretty: bool = True) -> str:
        """
        Generate JSON export of an experiment.

        Args:
            result: Experiment result
            pretty: Whether to format JSON with indentation

        Returns:
            JSON string
        """
        export_data = {
            "metadata": result.metadata,
            "rows": [{key: _json_value(value) for key, value in row.items()} for row in result.rows],
        }
        if pretty:
            return json.dumps(export_data, indent=2, ensure_ascii=False)
        return json.dumps(export_data, ensure_ascii=False)

    @staticmethod
    def generate_txt_export(rows: List[Dict[str, Any]], title: Optional[str] = None) -> str:
        """
        Generate a plain-text table.

        Args:
            rows: Records sharing the same keys
            title: Optional heading

        Returns:
            Plain text string
        """
        lines = []
        if title:
            lines.append("=" * 60)
            lines.append(title)
            lines.append("=" * 60)
        frame = pd.DataFrame(rows)
        lines.append(frame.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.6g}"))
        return "\n".join(lines)

    def resolve(self, path: Union[str, Path]) -> Path:
        """Absolute output path; relative paths land in ``output_dir``."""
        path = Path(path)
        return path if path.is_absolute() else self.output_dir / path

    def write(self, result: ExperimentResult, path: Union[str, Path], fmt: str = "csv") -> Path:
        """
        Write a result to disk.

        Raises:
            ExportError: If the format is unknown or the file cannot be written
        """
        if fmt not in FORMATS:
            raise ExportError(f"Unknown export format '{fmt}'; expected one of {FORMATS}")
        target = self.resolve(path)
        content = self.generate_csv(result) if fmt == "csv" else self.generate_json_export(result)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="") as f:
                f.write(content)
        except OSError as e:
            logger.error(f"Export to {target} failed: {str(e)}")
            raise ExportError(f"Failed to write {target}: {str(e)}")
        logger.info(f"Wrote {len(result.rows)} rows to {target}")
        return target


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# Singleton instance
_export_service: Optional[ExportService] = None


def get_export_service() -> ExportService:
    """
    Get the singleton ExportService instance.

    Returns:
        ExportService instance
    """
    global _export_service
    if _export_service is None:
        _export_service = ExportService()
    return _export_service
