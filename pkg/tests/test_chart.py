# third party
import numpy as np

# first party
from chart import create_intensity_chart, create_sym_index_chart, write_chart_html
from schema import ClusteringConfig, ReportRow, SymIndexReport
from symclust.selection import select_k


def _rows():
    return [
        ReportRow(label="normal", red=134394, green=141086, blue=136832, red_ratio=1.0, green_ratio=1.0, blue_ratio=1.0),
        ReportRow(
            label="seizure",
            red=195426,
            green=192427,
            blue=193832,
            red_ratio=195426 / 134394,
            green_ratio=192427 / 141086,
            blue_ratio=193832 / 136832,
        ),
    ]


def test_intensity_chart_has_a_trace_per_channel():
    fig = create_intensity_chart(_rows())
    assert [trace.name for trace in fig.data] == ["red", "green", "blue"]
    assert list(fig.data[0].x) == ["normal", "seizure"]
    assert list(fig.data[0].y) == [134394, 195426]


def test_sym_index_chart_marks_the_selected_k():
    rng = np.random.default_rng(0)
    points = np.vstack([rng.normal(size=(20, 3)) * 0.1, rng.normal(size=(20, 3)) * 0.1 + 5.0])
    report: SymIndexReport = select_k(points, 2, 4, ClusteringConfig())
    fig = create_sym_index_chart(report)
    assert len(fig.data) == 2
    assert list(fig.data[1].x) == [report.k_star]


def test_write_html(tmp_path):
    path = write_chart_html(create_intensity_chart(_rows()), tmp_path / "charts" / "report.html")
    html = path.read_text(encoding="utf-8")
    assert "cdn.plot.ly" in html
    assert "seizure" in html
