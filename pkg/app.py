import streamlit as st

st.set_page_config(
    page_title="CrossModal Lab",
    page_icon="🔎",
    layout="wide",
    initial_sidebar_state="expanded",
)


def main():
    # ── Header ────────────────────────────────────────────────────────────────
    st.title("🔎 CrossModal Lab")
    st.subheader("Recuperación imagen ↔ texto en un espacio común")
    st.markdown("---")

    st.markdown(
        """
        Visor local de los resultados que escribe la CLI (`python main.py ...`).
        Cada corrida vive en un directorio con su `config.json` y los CSV generados.
        """
    )

    # ── Tarjetas de navegación ────────────────────────────────────────────────
    col1, col2 = st.columns(2, gap="large")

    with col1:
        st.markdown("### 📉 Entrenamiento")
        st.markdown("Curvas por época de L_pdl, L_udp, L_mdp, L_gpl, L_D y L_G.")
        st.page_link("pages/1_Entrenamiento.py", label="Ver entrenamiento →", icon="📉")

        st.markdown("### 🧩 Ablación")
        st.markdown("Las seis variantes de componentes, de Baseline al modelo completo.")
        st.page_link("pages/3_Ablacion.py", label="Ver ablación →", icon="🧩")

    with col2:
        st.markdown("### 🎯 Evaluación")
        st.markdown("MAP@k para Img2Txt, Txt2Img y su promedio; AP por consulta si se guardó.")
        st.page_link("pages/2_Evaluacion.py", label="Ver evaluación →", icon="🎯")

        st.markdown("### 📈 Barrido α / β")
        st.markdown("MAP en función de α (β fijo) y de β (α fijo).")
        st.page_link("pages/4_Barrido.py", label="Ver barrido →", icon="📈")

    st.markdown("---")
    st.markdown("### 📂 Flujo típico")
    st.code(
        "python main.py gen-synthetic --clusters 10 --per-cluster 100 --seed 7 --output-dir Data/runs/demo\n"
        "python main.py train --manifest Data/runs/demo/manifest.txt --output-dir Data/runs/demo\n"
        "python main.py evaluate --manifest Data/runs/demo/manifest.txt --output-dir Data/runs/demo",
        language="bash",
    )


if __name__ == "__main__":
    main()
