"""
Tests for result export.
"""

import json

import pytest

from bdris.models.experiment import ExperimentResult
from bdris.services.export_service import ExportError, ExportService


@pytest.fixture
def result():
    return ExperimentResult(
        rows=[
            {"sweep_value": 4.0, "dris_mean": 11.5, "dris_stderr": 0.25, "dris_theory": None},
            {"sweep_value": 8.0, "dris_mean": 42.0, "dris_stderr": float("nan"), "dris_theory": 42.5},
        ],
        metadata={"name": "demo", "seed": 1, "trials": 10},
    )


@pytest.fixture
def exporter(tmp_path):
    return ExportService(output_dir=str(tmp_path))


class TestCsv:
    def test_header_and_empty_fields(self, exporter, result):
        lines = exporter.generate_csv(result).splitlines()
        assert lines[0] == "sweep_value,dris_mean,dris_stderr,dris_theory"
        assert lines[1] == "4.0,11.5,0.25,"
        assert lines[2] == "8.0,42.0,,42.5"

    def test_empty_result(self, exporter):
        assert exporter.generate_csv(ExperimentResult(rows=[])).strip() == "sweep_value"


class TestJson:
    def test_metadata_and_null_values(self, exporter, result):
        doc = json.loads(exporter.generate_json_export(result))
        assert doc["metadata"]["name"] == "demo"
        assert doc["rows"][0]["dris_theory"] is None
        assert doc["rows"][1]["dris_stderr"] is None
        assert doc["rows"][1]["dris_theory"] == 42.5

    def test_compact(self, exporter, result):
        assert "\n" not in exporter.generate_json_export(result, pretty=False)


class TestWrite:
    def test_relative_path_lands_in_output_dir(self, exporter, result, tmp_path):
        target = exporter.write(result, "runs/demo.csv")
        assert target == tmp_path / "runs" / "demo.csv"
        assert target.read_text(encoding="utf-8").startswith("sweep_value,")

    def test_absolute_path(self, exporter, result, tmp_path):
        target = exporter.write(result, tmp_path / "elsewhere" / "demo.json", fmt="json")
        assert json.loads(target.read_text(encoding="utf-8"))["metadata"]["seed"] == 1

    def test_unknown_format(self, exporter, result):
        with pytest.raises(ExportError):
            exporter.write(result, "demo.xlsx", fmt="xlsx")


def test_text_table():
    text = ExportService.generate_txt_export([{"m": 8, "ratio": 1.5}], title="Scaling")
    assert text.splitlines()[1] == "Scaling"
    assert "1.5" in text
