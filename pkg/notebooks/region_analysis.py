import marimo

__generated_with = "0.19.11"
app = marimo.App(width="medium")


@app.cell
def _():
    import marimo as mo
    return (mo,)


@app.cell
def _(mo):
    mo.md(
        r"""
        # Synchronization Regions

        Empirical (gamma, tau) synchronization regions of delay-coupled
        Hindmarsh-Rose networks, next to the closed-form delay bound.
        Run `python scripts/export_data.py` after a stored sweep, or point
        `REGION_CSV` at a `sweep --out` file.
        """
    )
    return


@app.cell
def _():
    import os
    from pathlib import Path

    import numpy as np
    import pandas as pd
    import plotly.express as px
    import plotly.graph_objects as go
    return Path, go, np, os, pd, px


@app.cell
def _(Path, os):
    DATA_DIR = Path(__file__).resolve().parent.parent / "data"
    REGION_CSV = os.getenv("REGION_CSV")
    return DATA_DIR, REGION_CSV


@app.cell
def _(mo):
    mo.md(r"## Load Sweep Cells")
    return


@app.cell
def _(DATA_DIR, REGION_CSV, pd):
    if REGION_CSV:
        cells_df = pd.read_csv(REGION_CSV)
        cells_df["graph"] = "custom"
    else:
        cells_df = pd.read_parquet(DATA_DIR / "sweep_cells.parquet")

    cells_df
    return (cells_df,)


@app.cell
def _(cells_df, mo):
    graph_picker = mo.ui.dropdown(
        options=sorted(cells_df["graph"].unique()),
        value=sorted(cells_df["graph"].unique())[0],
        label="Topology",
    )
    graph_picker
    return (graph_picker,)


@app.cell
def _(cells_df, graph_picker, mo):
    selected = cells_df[cells_df["graph"] == graph_picker.value]
    mo.md(
        f"""
        ## Overview

        - **Cells:** {len(selected):,}
        - **Synchronized:** {int(selected["synchronized"].sum()):,}
        - **Diverged:** {int(selected["diverged"].sum()):,}
        """
    )
    return (selected,)


@app.cell
def _(mo):
    mo.md(r"## Region Map")
    return


@app.cell
def _(px, selected):
    _table = selected.pivot_table(index="tau", columns="gamma", values="synchronized", aggfunc="min")
    fig_region = px.imshow(
        _table.astype(int),
        origin="lower",
        aspect="auto",
        color_continuous_scale=["#f4f4f4", "#2a6f97"],
        labels={"x": "gamma", "y": "tau [ms]", "color": "synchronized"},
        title="Synchronized cells",
    )
    fig_region
    return


@app.cell
def _(mo):
    mo.md(r"## Boundary and Closed-Form Bound")
    return


@app.cell
def _(np, selected):
    from src.sweep import RegionMap, boundary_curve

    region = RegionMap.from_frame(selected[["gamma", "tau", "synchronized", "diverged", "max_error"]])
    boundary_df = boundary_curve(region).to_frame()
    gammas = np.array(region.grid.gamma_values)
    return boundary_df, gammas, region


@app.cell
def _(gammas, graph_picker):
    from src.graph import builtin_graph, graph_spectrum
    from src.theory import SemipassiveConstants, SpectralPair, derived_constants, phi_curve

    _constants = derived_constants(SemipassiveConstants(1.0, 1.0, 1.0, 1.0))
    try:
        _pair = SpectralPair.from_spectrum(graph_spectrum(builtin_graph(graph_picker.value)))
    except ValueError:
        _pair = SpectralPair(1.0, 1.0)
    phi_df = phi_curve(gammas[gammas > 0], _constants, _pair)
    return (phi_df,)


@app.cell
def _(boundary_df, go, phi_df):
    fig_boundary = go.Figure()
    fig_boundary.add_trace(go.Scatter(
        x=boundary_df["gamma"], y=boundary_df["tau_max"], mode="lines+markers", name="empirical tau_max",
    ))
    fig_boundary.add_trace(go.Scatter(
        x=phi_df["gamma"], y=phi_df["phi"].clip(lower=0), mode="lines", name="phi (unit constants)",
        yaxis="y2",
    ))
    fig_boundary.update_layout(
        title="Delay boundary",
        xaxis_title="gamma",
        yaxis_title="tau_max [ms]",
        yaxis2=dict(title="phi", overlaying="y", side="right"),
    )
    fig_boundary
    return


if __name__ == "__main__":
    app.run()
