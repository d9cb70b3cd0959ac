import plotly.graph_objects as go
import streamlit as st

from Frontend.utils.data_loader import ABLATION_FILE, load_csv, select_run

st.set_page_config(
    page_title="Ablación – CrossModal Lab",
    page_icon="🧩",
    layout="wide",
)


def render_ablation_bars(table) -> go.Figure:
    fig = go.Figure()
    for column, name, color in (
        ("img2txt", "Img2Txt", "#2196F3"),
        ("txt2img", "Txt2Img", "#FF9800"),
        ("avg", "Avg", "#4CAF50"),
    ):
        fig.add_trace(
            go.Bar(
                x=table["method"],
                y=table[column],
                name=name,
                marker_color=color,
                text=[f"{v:.3f}" for v in table[column]],
                textposition="auto",
            )
        )
    fig.update_layout(
        title="MAP por variante de componentes",
        barmode="group",
        yaxis={"range": [0, 1], "title": "MAP"},
        xaxis_title="Variante",
        height=420,
        margin={"t": 50, "b": 30},
        legend={"orientation": "h", "y": 1.08},
    )
    return fig


def main():
    st.title("🧩 Ablación")
    run_dir = select_run()
    if run_dir is None:
        return

    table = load_csv(str(run_dir / ABLATION_FILE))
    if table is None:
        st.info(f"`{run_dir.name}` no tiene `{ABLATION_FILE}`. Ejecuta `ablate` para generarla.")
        return

    st.plotly_chart(render_ablation_bars(table), use_container_width=True)
    st.dataframe(table, hide_index=True, use_container_width=True)


main()
