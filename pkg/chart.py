# stdlib
from pathlib import Path
from typing import Sequence, Union

# third party
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

# first party
from helpers import atomic_write_bytes
from schema import ReportRow, SymIndexReport

CHANNEL_COLORS = {"red": "#d62728", "green": "#2ca02c", "blue": "#1f77b4"}


def _long_frame(rows: Sequence[ReportRow]) -> pd.DataFrame:
    df = pd.DataFrame([row.model_dump() for row in rows])
    sums = df.melt(id_vars="label", value_vars=list(CHANNEL_COLORS), var_name="channel", value_name="sum")
    ratios = df.melt(
        id_vars="label",
        value_vars=[f"{c}_ratio" for c in CHANNEL_COLORS],
        var_name="channel",
        value_name="ratio",
    )
    ratios["channel"] = ratios["channel"].str.replace("_ratio", "", regex=False)
    return sums.merge(ratios, on=["label", "channel"])


def create_intensity_chart(rows: Sequence[ReportRow]) -> go.Figure:
    """Grouped bars of per-channel sums for each scan, ratios in the hover text."""
    df = _long_frame(rows)
    fig = px.bar(
        df,
        x="label",
        y="sum",
        color="channel",
        barmode="group",
        color_discrete_map=CHANNEL_COLORS,
        hover_data={"ratio": ":.4f"},
        title="Pixel intensity comparison",
    )
    fig.update_layout(xaxis_title=None, yaxis_title="Channel sum", legend_title=None)
    return fig


def create_sym_index_chart(report: SymIndexReport) -> go.Figure:
    """Sym(K) against K with the selected K highlighted."""
    df = report.to_frame()
    fig = px.line(df, x="k", y="sym_index", markers=True, title="Sym(K) by number of clusters")
    selected = df[df["selected"]]
    fig.add_trace(
        go.Scatter(
            x=selected["k"],
            y=selected["sym_index"],
            mode="markers",
            marker={"size": 14, "symbol": "star"},
            name="k_star",
        )
    )
    fig.update_layout(xaxis_title="K", yaxis_title="Sym(K)")
    return fig


def write_chart_html(fig: go.Figure, path: Union[str, Path]) -> Path:
    html = fig.to_html(include_plotlyjs="cdn", full_html=True)
    return atomic_write_bytes(path, html.encode("utf-8"))
