"""Figure functions against logs produced by the shipped scenarios."""

from pathlib import Path

import numpy as np
import pytest

from redmux_plots import LogFormatError, plot_margins, plot_path, plot_weights


def _data_lines(ax):
    return [ln for ln in ax.lines if ln.get_label() != "limit"]


class TestWeights:
    def test_merged_drink_layout(self, drink_merged_csv, tmp_path):
        out = tmp_path / "w.png"
        fig = plot_weights(drink_merged_csv, out)
        assert out.exists()
        assert len(fig.axes) == 3
        for ax in fig.axes:
            assert len(ax.lines) == 6

    def test_parent_grouping_styles(self, drink_merged_csv, tmp_path):
        fig = plot_weights(drink_merged_csv, tmp_path / "w.png")
        styles = [ln.get_linestyle() for ln in fig.axes[0].lines]
        # two parent subtasks, three columns each
        assert len(set(styles[:3])) == 1
        assert len(set(styles[3:])) == 1
        assert styles[0] != styles[3]

    def test_traditional_lines_flat(self, drink_traditional_csv, tmp_path):
        fig = plot_weights(drink_traditional_csv, tmp_path / "w.png")
        for ax in fig.axes:
            for ln in ax.lines:
                assert float(np.ptp(ln.get_ydata())) == 0.0

    def test_empty_window_is_an_error(self, drink_merged_csv, tmp_path):
        out = tmp_path / "w.png"
        with pytest.raises(ValueError, match="selects no records"):
            plot_weights(drink_merged_csv, out, window=(1e6, 2e6))
        assert not out.exists()

    def test_missing_allocation_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,q_0,fbar_0,qd_0\n0.0,0.0,0.0,0.0\n")
        with pytest.raises(LogFormatError, match="A_"):
            plot_weights(bad, tmp_path / "w.png")


class TestMargins:
    def test_merged_drink_safe_side(self, drink_merged_csv, tmp_path):
        out = tmp_path / "m.png"
        fig = plot_margins(drink_merged_csv, out)
        assert out.exists()
        assert len(fig.axes) == 2  # clearance panel and joint-margin panel
        for ax in fig.axes:
            for ln in _data_lines(ax):
                assert float(np.min(ln.get_ydata())) > 0.0

    def test_limit_line_present(self, drink_merged_csv, tmp_path):
        fig = plot_margins(drink_merged_csv, tmp_path / "m.png")
        for ax in fig.axes:
            limits = [ln for ln in ax.lines if ln.get_label() == "limit"]
            assert len(limits) == 1
            assert set(limits[0].get_ydata()) == {0.0}

    def test_no_metrics_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,q_0,qd_0\n0.0,0.0,0.0\n")
        with pytest.raises(LogFormatError, match="aux_"):
            plot_margins(bad, tmp_path / "m.png")


class TestPath:
    def test_circle_overlay(self, circle_merged_csv, tmp_path):
        out = tmp_path / "p.png"
        fig = plot_path(circle_merged_csv, out)
        assert out.exists()
        ax = fig.axes[0]
        assert len(ax.lines) == 2  # reference and actual for the one target
        notes = [t.get_text() for t in ax.texts]
        assert any("max deviation" in n for n in notes)

    def test_single_record_uses_markers(self, circle_merged_csv, tmp_path):
        head = circle_merged_csv.read_text().splitlines()[:2]
        single = tmp_path / "single.csv"
        single.write_text("\n".join(head) + "\n")
        fig = plot_path(single, tmp_path / "p.png")
        for ln in fig.axes[0].lines:
            assert ln.get_linestyle().lower() == "none"
            assert ln.get_marker() == "o"

    def test_missing_traces_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,q_0,aux_margin_i0,qd_0\n0.0,0.0,0.0,0.0\n")
        with pytest.raises(LogFormatError, match="aux_ref"):
            plot_path(bad, tmp_path / "p.png")


class TestDeterminism:
    @pytest.mark.parametrize("kind", [plot_weights, plot_margins, plot_path])
    def test_repeated_bytes_identical(self, kind, drink_merged_csv, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        kind(drink_merged_csv, a)
        kind(drink_merged_csv, b)
        assert a.read_bytes() == b.read_bytes()
