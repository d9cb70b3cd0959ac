import plotly.graph_objects as go
import streamlit as st

from Frontend.utils.data_loader import (
    LOSS_COLUMNS,
    TRAIN_LOG_FILE,
    epoch_means,
    load_config_echo,
    load_csv,
    select_run,
)

st.set_page_config(
    page_title="Entrenamiento – CrossModal Lab",
    page_icon="📉",
    layout="wide",
)

LOSS_LABELS = {
    "l_pdl": "L_pdl (pares)",
    "l_udp": "L_udp (no emparejados)",
    "l_mdp": "L_mdp (mutuo)",
    "l_gpl": "L_gpl (grafo)",
    "l_D": "L_D (clasificador)",
    "l_G": "L_G (generador)",
}


def render_loss_curves(means, columns: list[str], title: str) -> go.Figure:
    fig = go.Figure()
    for column in columns:
        fig.add_trace(go.Scatter(x=means["epoch"], y=means[column], mode="lines", name=LOSS_LABELS[column]))
    fig.update_layout(
        title=title,
        xaxis_title="Época",
        yaxis_title="Pérdida media",
        height=400,
        margin={"t": 50, "b": 30},
        legend={"orientation": "h", "y": 1.08},
    )
    return fig


def main():
    st.title("📉 Entrenamiento")
    run_dir = select_run()
    if run_dir is None:
        return

    log = load_csv(str(run_dir / TRAIN_LOG_FILE))
    if log is None or log.empty:
        st.info(f"`{run_dir.name}` no tiene `{TRAIN_LOG_FILE}`.")
        return

    means = epoch_means(log)
    last = means.iloc[-1]
    cols = st.columns(len(LOSS_COLUMNS))
    for col, column in zip(cols, LOSS_COLUMNS):
        col.metric(LOSS_LABELS[column], f"{last[column]:.4f}")
    if "skipped_batches" in log.columns and log["skipped_batches"].max() > 0:
        st.warning(f"{int(log['skipped_batches'].max())} batches degenerados omitidos durante el entrenamiento.")

    col1, col2 = st.columns(2, gap="large")
    with col1:
        st.plotly_chart(
            render_loss_curves(means, ["l_pdl", "l_udp", "l_mdp", "l_gpl"], "Pérdida de grafo por término"),
            use_container_width=True,
        )
    with col2:
        st.plotly_chart(
            render_loss_curves(means, ["l_D", "l_G"], "Juego adversarial"),
            use_container_width=True,
        )

    with st.expander("Configuración de la corrida"):
        st.json(load_config_echo(run_dir))


main()
