import plotly.graph_objects as go
import streamlit as st

from Frontend.utils.data_loader import METRICS_FILE, PER_QUERY_FILE, load_csv, select_run

st.set_page_config(
    page_title="Evaluación – CrossModal Lab",
    page_icon="🎯",
    layout="wide",
)

TASK_COLORS = {"Img2Txt": "#2196F3", "Txt2Img": "#FF9800", "Avg": "#4CAF50"}


def render_map_bar(metrics) -> go.Figure:
    fig = go.Figure(
        go.Bar(
            x=metrics["task"],
            y=metrics["MAP"],
            marker_color=[TASK_COLORS.get(task, "#9E9E9E") for task in metrics["task"]],
            text=[f"{v:.3f}" for v in metrics["MAP"]],
            textposition="auto",
        )
    )
    k = int(metrics["k"].iloc[0])
    fig.update_layout(
        title=f"MAP@{k} por dirección",
        yaxis={"range": [0, 1], "title": "MAP"},
        height=380,
        margin={"t": 50, "b": 30},
    )
    return fig


def render_ap_histogram(per_query) -> go.Figure:
    fig = go.Figure()
    for task, group in per_query.dropna(subset=["AP"]).groupby("task"):
        fig.add_trace(
            go.Histogram(x=group["AP"], name=task, opacity=0.6, marker_color=TASK_COLORS.get(task), nbinsx=20)
        )
    fig.update_layout(
        title="Distribución de AP por consulta",
        barmode="overlay",
        xaxis_title="AP",
        yaxis_title="Consultas",
        height=380,
        margin={"t": 50, "b": 30},
    )
    return fig


def main():
    st.title("🎯 Evaluación")
    run_dir = select_run()
    if run_dir is None:
        return

    metrics = load_csv(str(run_dir / METRICS_FILE))
    if metrics is None:
        st.info(f"`{run_dir.name}` no tiene `{METRICS_FILE}`. Ejecuta `evaluate` sobre esta corrida.")
        return

    col1, col2 = st.columns(2, gap="large")
    with col1:
        st.plotly_chart(render_map_bar(metrics), use_container_width=True)
    with col2:
        st.dataframe(metrics, hide_index=True, use_container_width=True)
        excluded = int(metrics.loc[metrics["task"] != "Avg", "n_excluded"].sum())
        if excluded:
            st.caption(f"{excluded} consultas sin candidatos relevantes excluidas del promedio.")

    per_query = load_csv(str(run_dir / PER_QUERY_FILE))
    if per_query is not None:
        st.plotly_chart(render_ap_histogram(per_query), use_container_width=True)


main()
