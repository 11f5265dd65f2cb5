"""plotkit tests against hand-written schema fixtures (the CSV file format
is the only interface to the benchmark runner)."""

import csv
import math

import pytest

from plotkit import EmptySeries, MissingColumn, parse_figspec, read_trace, render
from plotkit.cli import main
from plotkit.reader import TRACE_FIELDS


def write_trace(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        writer.writerows(rows)


def demo_rows(sweep_value, solver, seeds=3, iters=20, rate=0.5):
    rows = []
    for seed in range(seeds):
        for it in range(iters):
            err = math.exp(-rate * it * (1 + 0.05 * seed)) + 1e-14
            rows.append(
                [
                    f"demo-{solver}-{sweep_value:g}-{seed}",
                    "central",
                    solver,
                    seed,
                    format(sweep_value, ".17g"),
                    it,
                    format(err, ".17g"),
                    "",
                    "",
                    "",
                    0,
                    0,
                    0,
                    "",
                ]
            )
    return rows


@pytest.fixture
def demo_dir(tmp_path):
    for value in (100.0, 1000.0):
        for solver, rate in (("eagle", 0.9), ("gd", 0.05)):
            write_trace(
                tmp_path / f"demo_kappa_{value:g}_{solver}.csv", demo_rows(value, solver, rate=rate)
            )
    spec = tmp_path / "fig.ini"
    spec.write_text(
        "[figure]\n"
        "name = demo\n"
        "inputs = demo_kappa_*.csv\n"
        "panel_by = sweep_value\n"
        "series_by = solver\n"
        "x = iter\n"
        "y = rel_err\n"
        "xscale = linear\n"
        "yscale = log\n"
    )
    return tmp_path


class TestReader:
    def test_reads_columns(self, demo_dir):
        table = read_trace(demo_dir / "demo_kappa_100_eagle.csv")
        assert table["solver"][0] == "eagle"
        assert table["rel_err"].shape == (60,)

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(MissingColumn):
            read_trace(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(TRACE_FIELDS) + "\n")
        with pytest.raises(EmptySeries):
            read_trace(path)


class TestRender:
    def test_one_file_per_panel_with_all_series_in_legend(self, demo_dir, tmp_path):
        spec = parse_figspec(demo_dir / "fig.ini")
        out = tmp_path / "figs"
        written = render(spec, out)
        assert len(written) == 2  # one per sweep value
        for path in written:
            body = open(path).read()
            assert "eagle" in body and "gd" in body  # legend entries present

    def test_byte_identical_rerun(self, demo_dir, tmp_path):
        spec = parse_figspec(demo_dir / "fig.ini")
        first = render(spec, tmp_path / "f1")
        second = render(spec, tmp_path / "f2")
        for p1, p2 in zip(first, second):
            assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_inputs_do_not_change(self, demo_dir, tmp_path):
        target = demo_dir / "demo_kappa_100_eagle.csv"
        before = target.read_bytes()
        render(parse_figspec(demo_dir / "fig.ini"), tmp_path / "figs")
        assert target.read_bytes() == before

    def test_mean_stat_differs_from_median(self, demo_dir, tmp_path):
        import dataclasses

        spec = parse_figspec(demo_dir / "fig.ini")
        med = render(spec, tmp_path / "med")
        mean = render(dataclasses.replace(spec, stat="mean", name="demo_mean"), tmp_path / "mean")
        assert open(med[0], "rb").read() != open(mean[0], "rb").read()

    def test_condition_number_panel(self, demo_dir, tmp_path):
        rows = []
        for seed in range(2):
            for it in range(10):
                rows.append(
                    ["r", "central", "eagle", seed, "100", it, "1", "", format(10.0 / (it + 1), ".17g"), "", 0, 0, 0, ""]
                )
        write_trace(demo_dir / "cond_kappa_100_eagle.csv", rows)
        spec_path = demo_dir / "cond.ini"
        spec_path.write_text(
            "[figure]\nname = cond\ninputs = cond_kappa_100_eagle.csv\n"
            "panel_by = sweep_value\nseries_by = solver\nx = iter\ny = kappa_l\n"
            "xscale = linear\nyscale = log\n"
        )
        written = render(parse_figspec(spec_path), tmp_path / "cond")
        assert len(written) == 1


class TestCliErrors:
    def test_empty_csv_gives_nonzero_exit(self, tmp_path, capsys):
        empty = tmp_path / "empty_kappa_1_eagle.csv"
        empty.write_text(",".join(TRACE_FIELDS) + "\n")
        spec = tmp_path / "fig.ini"
        spec.write_text(f"[figure]\nname = x\ninputs = {empty.name}\n")
        assert main(["plot", str(spec), "--out", str(tmp_path / "o")]) == 1

    def test_unknown_column_rejected(self, demo_dir, tmp_path):
        spec = demo_dir / "bad.ini"
        spec.write_text("[figure]\nname = x\ninputs = demo_kappa_*.csv\ny = nosuch\n")
        assert main(["plot", str(spec), "--out", str(tmp_path / "o")]) == 1

    def test_cli_happy_path(self, demo_dir, tmp_path, capsys):
        assert main(["plot", str(demo_dir / "fig.ini"), "--out", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 2
