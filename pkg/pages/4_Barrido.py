import plotly.graph_objects as go
import streamlit as st

from Frontend.utils.data_loader import GRID_FILE, load_csv, select_run

st.set_page_config(
    page_title="Barrido α / β – CrossModal Lab",
    page_icon="📈",
    layout="wide",
)


def render_sweep(points, axis: str) -> go.Figure:
    points = points.sort_values(axis)
    fixed = "beta" if axis == "alpha" else "alpha"
    fig = go.Figure()
    for column, name in (("img2txt", "Img2Txt"), ("txt2img", "Txt2Img"), ("avg", "Avg")):
        fig.add_trace(go.Scatter(x=points[axis], y=points[column], mode="lines+markers", name=name))
    fig.update_layout(
        title=f"MAP vs {axis} ({fixed} = {points[fixed].iloc[0]:g})",
        xaxis={"title": axis, "type": "category"},
        yaxis={"range": [0, 1], "title": "MAP"},
        height=400,
        margin={"t": 50, "b": 30},
        legend={"orientation": "h", "y": 1.08},
    )
    return fig


def main():
    st.title("📈 Barrido α / β")
    run_dir = select_run()
    if run_dir is None:
        return

    grid = load_csv(str(run_dir / GRID_FILE))
    if grid is None:
        st.info(f"`{run_dir.name}` no tiene `{GRID_FILE}`. Ejecuta `grid-search` para generarlo.")
        return

    axes = [axis for axis in ("alpha", "beta") if (grid["axis"] == axis).any()]
    cols = st.columns(len(axes), gap="large")
    for col, axis in zip(cols, axes):
        with col:
            st.plotly_chart(render_sweep(grid[grid["axis"] == axis], axis), use_container_width=True)

    st.dataframe(grid, hide_index=True, use_container_width=True)


main()
