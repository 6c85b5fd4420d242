"""End-to-end CLI behaviour: flows, formats, exit codes, determinism."""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from datetime import timedelta

import pytest

from defectlab import (
    ArrivalSeries,
    ProcessParams,
    ValidationError,
    revision_table,
    revisions_to_signoff,
)
from defectlab.cli import (
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_VALIDATION,
    emit_chart,
    emit_table,
    run,
)
from defectlab.ledger import format_timestamp
from defectlab.rayleigh import expected_bucket_counts, fit_arrival
from defectlab.sizing import SizePoint

from conftest import EPOCH

DEFECT_HEADER = (
    "id,product_id,phase_injected,phase_found,found_at,fixed_at,severity,status,fix_changes"
)


def _defect_csv(rows: list[str]) -> str:
    return DEFECT_HEADER + "\n" + "\n".join(rows) + "\n"


def _sample_inputs(tmp_path):
    """A registry plus a fortnight of defects for one product."""
    defect_rows = []
    day = 24
    offsets = [0, 2, 30, 50, 52, 5 * day, 6 * day, 8 * day, 9 * day, 13 * day]
    for i, hours in enumerate(offsets):
        found = format_timestamp(EPOCH + timedelta(hours=hours))
        fixed = format_timestamp(EPOCH + timedelta(hours=hours + 48))
        defect_rows.append(f"d{i},m1,build,test,{found},{fixed},2,fixed,1")
    defects = tmp_path / "defects.csv"
    defects.write_text(_defect_csv(defect_rows), encoding="utf-8")
    products = tmp_path / "products.json"
    products.write_text(
        '[{"product_id":"m1","unique_formulas":2182,"kloc":1.2}]', encoding="utf-8"
    )
    return defects, products


class TestIngest:
    def test_builds_a_ledger_and_reports_counts(self, tmp_path, capsys):
        defects, products = _sample_inputs(tmp_path)
        out = tmp_path / "ledger.json"
        code = run([
            "ingest", "--defects", str(defects), "--products", str(products),
            "--out", str(out),
        ])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary == {"products": 1, "defects": 10, "out": str(out)}
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert set(payload) == {"products", "defects"}

    def test_invalid_csv_leaves_no_output_file(self, tmp_path, capsys):
        defects = tmp_path / "defects.csv"
        defects.write_text(_defect_csv(["d1,m1,build,test,not-a-time,,2,open,"]))
        products = tmp_path / "products.json"
        products.write_text('[{"product_id":"m1","unique_formulas":10}]')
        out = tmp_path / "ledger.json"
        code = run([
            "ingest", "--defects", str(defects), "--products", str(products),
            "--out", str(out),
        ])
        assert code == EXIT_VALIDATION
        assert not out.exists()
        assert "row 1" in capsys.readouterr().err

    def test_missing_input_is_an_io_error(self, tmp_path, capsys):
        code = run([
            "ingest", "--defects", str(tmp_path / "nope.csv"),
            "--products", str(tmp_path / "nope.json"),
            "--out", str(tmp_path / "ledger.json"),
        ])
        assert code == EXIT_IO
        assert "error:" in capsys.readouterr().err


@pytest.fixture()
def sample_ledger(tmp_path):
    defects, products = _sample_inputs(tmp_path)
    out = tmp_path / "ledger.json"
    assert run([
        "ingest", "--defects", str(defects), "--products", str(products),
        "--out", str(out),
    ]) == EXIT_OK
    return out


class TestMetrics:
    def test_json_summary(self, sample_ledger, capsys):
        capsys.readouterr()
        assert run(["metrics", "--ledger", str(sample_ledger)]) == EXIT_OK
        (entry,) = json.loads(capsys.readouterr().out)
        assert entry["product_id"] == "m1"
        assert entry["defect_count"] == 10
        assert entry["removal_efficiency"] == 1.0
        assert entry["density_per_kloc"] == pytest.approx(10 / 1.2)
        assert entry["injection_rate_basis"].startswith("recorded defects")

    def test_csv_summary(self, sample_ledger, capsys):
        capsys.readouterr()
        assert run(["metrics", "--ledger", str(sample_ledger), "--format", "csv"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0].startswith("product_id,defect_count")
        assert len(lines) == 2

    def test_unknown_product_rejected(self, sample_ledger, capsys):
        code = run(["metrics", "--ledger", str(sample_ledger), "--product", "ghost"])
        assert code == EXIT_VALIDATION
        assert "ghost" in capsys.readouterr().err

    def test_byte_determinism(self, sample_ledger, capsys):
        capsys.readouterr()
        run(["metrics", "--ledger", str(sample_ledger)])
        first = capsys.readouterr().out
        run(["metrics", "--ledger", str(sample_ledger)])
        second = capsys.readouterr().out
        assert first == second


class TestForecast:
    def test_audited_consultancy_forecast(self, capsys):
        code = run(["forecast", "--units", "2182", "--dir", "0.07", "--dre", "0.75"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["revisions"] == 6
        assert payload["expected_defects"][0] == pytest.approx(152.74)
        assert payload["injection_rate_pct"] == pytest.approx(7.0)

    def test_no_net_removal_is_a_numeric_error(self, capsys):
        code = run(["forecast", "--units", "2000", "--dir", "0.07", "--dre", "0"])
        assert code == EXIT_NUMERIC
        assert "no net defect removal" in capsys.readouterr().err

    def test_missing_rates_rejected(self, capsys):
        assert run(["forecast", "--units", "2000"]) == EXIT_VALIDATION
        assert "--dir and --dre" in capsys.readouterr().err

    def test_table_json_has_all_cells(self, capsys):
        assert run(["forecast", "--units", "2000", "--table"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["cells"]) == 72
        assert payload["published_reference_units"] == 2000

    def test_table_csv_layout(self, capsys):
        code = run(["forecast", "--units", "2000", "--table", "--format", "csv"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 10
        assert lines[0].startswith("dre_pct\\dir_pct,3,4")

    def test_table_excludes_monte_carlo(self, capsys):
        code = run([
            "forecast", "--units", "2000", "--table", "--monte-carlo",
            "--trials", "10", "--seed", "1",
        ])
        assert code == EXIT_VALIDATION
        assert "mutually exclusive" in capsys.readouterr().err

    def test_csv_format_needs_table(self, capsys):
        code = run([
            "forecast", "--units", "2000", "--dir", "0.07", "--dre", "0.75",
            "--format", "csv",
        ])
        assert code == EXIT_VALIDATION
        assert "--table" in capsys.readouterr().err

    def test_monte_carlo_needs_trials_and_seed(self, capsys):
        code = run([
            "forecast", "--units", "2000", "--dir", "0.07", "--dre", "0.75",
            "--monte-carlo", "--trials", "50",
        ])
        assert code == EXIT_VALIDATION
        assert "--seed" in capsys.readouterr().err

    def test_monte_carlo_is_seed_deterministic(self, capsys):
        argv = [
            "forecast", "--units", "2182", "--dir", "0.07", "--dre", "0.75",
            "--monte-carlo", "--trials", "100", "--seed", "9",
        ]
        assert run(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert run(argv) == EXIT_OK
        assert capsys.readouterr().out == first
        payload = json.loads(first)
        assert payload["trials"] == 100
        assert sum(payload["histogram"].values()) == 100

    def test_non_integer_units_rejected_by_the_grammar(self, capsys):
        assert run(["forecast", "--units", "lots", "--table"]) == EXIT_VALIDATION
        assert "invalid int value" in capsys.readouterr().err


class TestEstimate:
    def test_both_models_for_the_audit_size(self, capsys):
        assert run(["estimate", "--uf", "2182"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["linear"]["estimate"] == pytest.approx(151.0256)
        assert payload["sqrt"]["estimate"] == pytest.approx(121.45, abs=0.01)

    def test_single_model_selection(self, capsys):
        assert run(["estimate", "--uf", "400", "--model", "sqrt"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert "linear" not in payload
        assert payload["sqrt"]["estimate"] == pytest.approx(52.0)

    def test_uf_and_fit_are_mutually_exclusive(self, capsys):
        code = run(["estimate", "--uf", "100", "--fit", "whatever.csv"])
        assert code == EXIT_VALIDATION
        assert "exactly one" in capsys.readouterr().err
        assert run(["estimate"]) == EXIT_VALIDATION

    def test_fit_flow_reports_rss(self, tmp_path, capsys):
        scatter = tmp_path / "scatter.csv"
        scatter.write_text("uf,issues\n100,70\n900,98\n2500,160\n4900,260\n")
        assert run(["estimate", "--fit", str(scatter)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["points"] == 4
        assert payload["linear"]["rss"] >= 0.0
        assert payload["sqrt"]["rss"] >= 0.0

    def test_negative_intercept_warning_goes_to_stderr(self, tmp_path, capsys):
        scatter = tmp_path / "scatter.csv"
        scatter.write_text("uf,issues\n100,10\n200,30\n")
        assert run(["estimate", "--fit", str(scatter), "--model", "linear"]) == EXIT_OK
        captured = capsys.readouterr()
        assert "warning:" in captured.err
        assert "negative" in captured.err
        assert json.loads(captured.out)["linear"]["intercept"] == pytest.approx(-10.0)


class TestFitArrival:
    def _series_file(self, tmp_path, starts, counts):
        path = tmp_path / "series.csv"
        rows = "\n".join(f"{s},{c}" for s, c in zip(starts, counts))
        path.write_text(f"bucket_start,count\n{rows}\n", encoding="utf-8")
        return path

    def test_numeric_day_offsets(self, tmp_path, capsys):
        counts = [round(c) for c in expected_bucket_counts(200.0, 4.0, 12)]
        path = self._series_file(tmp_path, [float(i) for i in range(12)], counts)
        assert run(["fit-arrival", "--series", str(path)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["k_total"] == pytest.approx(200.0, rel=0.05)
        assert payload["bucket_days"] == 1.0
        assert payload["sigma_days"] == pytest.approx(payload["sigma"])
        assert payload["cumulative_at_peak"] == pytest.approx(
            payload["k_total"] * 0.3934693402873666
        )

    def test_timestamp_starts_infer_weekly_spacing(self, tmp_path, capsys):
        counts = [round(c) for c in expected_bucket_counts(120.0, 3.0, 9)]
        starts = [format_timestamp(EPOCH + timedelta(days=7 * i)) for i in range(9)]
        path = self._series_file(tmp_path, starts, counts)
        assert run(["fit-arrival", "--series", str(path)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["bucket_days"] == pytest.approx(7.0)
        assert payload["sigma_days"] == pytest.approx(7.0 * payload["sigma"])

    def test_bucket_days_must_match_the_file(self, tmp_path, capsys):
        counts = [round(c) for c in expected_bucket_counts(120.0, 3.0, 9)]
        path = self._series_file(tmp_path, [float(i) for i in range(9)], counts)
        code = run(["fit-arrival", "--series", str(path), "--bucket-days", "7"])
        assert code == EXIT_VALIDATION
        assert "does not match" in capsys.readouterr().err

    def test_out_writes_the_payload_to_disk(self, tmp_path, capsys):
        counts = [round(c) for c in expected_bucket_counts(200.0, 4.0, 12)]
        path = self._series_file(tmp_path, [float(i) for i in range(12)], counts)
        out = tmp_path / "fit.json"
        assert run(["fit-arrival", "--series", str(path), "--out", str(out)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == {"out": str(out)}
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert payload["buckets_used"] == 12

    def test_non_uniform_spacing_rejected(self, tmp_path, capsys):
        path = self._series_file(tmp_path, [0.0, 1.0, 3.0], [5, 9, 4])
        assert run(["fit-arrival", "--series", str(path)]) == EXIT_VALIDATION
        assert "not uniform" in capsys.readouterr().err

    def test_front_loaded_series_is_a_numeric_error(self, tmp_path, capsys):
        path = self._series_file(tmp_path, [0.0, 1.0, 2.0], [100, 0, 0])
        assert run(["fit-arrival", "--series", str(path)]) == EXIT_NUMERIC
        assert "boundary" in capsys.readouterr().err

    def test_bad_counts_rejected_with_rows(self, tmp_path, capsys):
        path = self._series_file(tmp_path, [0.0, 1.0, 2.0], [5, "many", 4])
        assert run(["fit-arrival", "--series", str(path)]) == EXIT_VALIDATION
        assert "row 2" in capsys.readouterr().err


class TestReport:
    def test_chart_fit_and_summary(self, tmp_path, capsys):
        # Rayleigh-shaped arrivals across 8 weekly buckets.
        counts = [round(c) for c in expected_bucket_counts(60.0, 3.0, 8)]
        rows, k = [], 0
        for bucket, count in enumerate(counts):
            for _ in range(count):
                found = format_timestamp(EPOCH + timedelta(days=7 * bucket, hours=k % 24))
                rows.append(f"d{k},m1,build,test,{found},,2,open,")
                k += 1
        defects = tmp_path / "defects.csv"
        defects.write_text(_defect_csv(rows), encoding="utf-8")
        products = tmp_path / "products.json"
        products.write_text('[{"product_id":"m1","unique_formulas":500}]')
        ledger_path = tmp_path / "ledger.json"
        assert run([
            "ingest", "--defects", str(defects), "--products", str(products),
            "--out", str(ledger_path),
        ]) == EXIT_OK
        capsys.readouterr()

        svg_path = tmp_path / "arrivals.svg"
        assert run(["report", "--ledger", str(ledger_path), "--svg", str(svg_path)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["defects"] == sum(counts)
        assert payload["buckets"] == len(counts)
        assert payload["fit_note"] is None
        assert payload["fit"]["sigma_days"] == pytest.approx(21.0, rel=0.15)

        root = ET.fromstring(svg_path.read_text(encoding="utf-8"))
        svg_ns = "{http://www.w3.org/2000/svg}"
        bars = [e for e in root.iter(f"{svg_ns}rect") if e.get("class") == "bar"]
        assert len(bars) == len(counts)
        overlays = [e for e in root.iter(f"{svg_ns}polyline") if e.get("class") == "fit"]
        assert len(overlays) == 1

    def test_unfittable_series_still_ships_the_chart(self, tmp_path, capsys):
        rows = [
            f"d{i},m1,build,test,{format_timestamp(EPOCH + timedelta(days=i))},,2,open,"
            for i in range(2)
        ]
        defects = tmp_path / "defects.csv"
        defects.write_text(_defect_csv(rows), encoding="utf-8")
        products = tmp_path / "products.json"
        products.write_text('[{"product_id":"m1","unique_formulas":500}]')
        ledger_path = tmp_path / "ledger.json"
        run([
            "ingest", "--defects", str(defects), "--products", str(products),
            "--out", str(ledger_path),
        ])
        capsys.readouterr()
        svg_path = tmp_path / "arrivals.svg"
        assert run([
            "report", "--ledger", str(ledger_path), "--svg", str(svg_path),
            "--bucket-days", "2",
        ]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["fit"] is None
        assert "too few buckets" in payload["fit_note"]
        assert svg_path.exists()

    def test_empty_scope_rejected(self, sample_ledger, tmp_path, capsys):
        svg_path = tmp_path / "arrivals.svg"
        code = run([
            "report", "--ledger", str(sample_ledger), "--svg", str(svg_path),
            "--product", "ghost",
        ])
        assert code == EXIT_VALIDATION
        assert not svg_path.exists()


class TestGrammar:
    def test_help_exits_clean(self, capsys):
        assert run(["--help"]) == EXIT_OK
        assert "defectlab" in capsys.readouterr().out

    def test_no_command_is_a_usage_error(self, capsys):
        assert run([]) == EXIT_VALIDATION

    def test_unknown_flag_is_a_usage_error(self, capsys):
        assert run(["forecast", "--units", "10", "--sideways"]) == EXIT_VALIDATION


class TestEmitters:
    def test_emit_table_matches_grid_csv(self):
        grid = revision_table(2000)
        assert emit_table(grid).startswith("dre_pct\\dir_pct")

    def test_emit_chart_dispatches_by_type(self):
        series = ArrivalSeries(
            origin=EPOCH, bucket_width=timedelta(days=7), counts=(2, 5, 3)
        )
        assert '<rect class="bar"' in emit_chart(series)

        trajectory = revisions_to_signoff(
            ProcessParams(units=2182, injection_rate=0.07, removal_efficiency=0.75)
        )
        assert '<polyline class="series"' in emit_chart(trajectory)

        fit = fit_arrival(expected_bucket_counts(200.0, 4.0, 12))
        assert '<polyline class="series"' in emit_chart(fit)

        points = [SizePoint(uf=100, issues=12), SizePoint(uf=900, issues=90)]
        assert '<circle class="point"' in emit_chart(points)

    def test_emit_chart_rejects_unknown_shapes(self):
        with pytest.raises(ValidationError, match="no chart form"):
            emit_chart({"not": "chartable"})
