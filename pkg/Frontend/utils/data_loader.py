import json
from pathlib import Path

import pandas as pd
import streamlit as st

from Backend.Cli.cli import (  # noqa: F401
    ABLATION_FILE,
    CONFIG_ECHO_FILE,
    GRID_FILE,
    METRICS_FILE,
    PER_QUERY_FILE,
    TRAIN_LOG_FILE,
)
from Backend.Trainer.config import DEFAULT_OUTPUT_DIR

LOSS_COLUMNS = ["l_pdl", "l_udp", "l_mdp", "l_gpl", "l_D", "l_G"]


def list_runs(root: Path = DEFAULT_OUTPUT_DIR) -> list[Path]:
    """Directorios que contienen al menos un artefacto de corrida."""
    root = Path(root)
    if not root.exists():
        return []
    candidates = [root, *sorted(p for p in root.iterdir() if p.is_dir())]
    return [p for p in candidates if (p / CONFIG_ECHO_FILE).exists()]


@st.cache_data(show_spinner=False)
def load_csv(path: str) -> pd.DataFrame | None:
    """Lee un CSV de resultados; None si todavía no existe."""
    path = Path(path)
    if not path.exists():
        return None
    return pd.read_csv(path)


def load_config_echo(run_dir: Path) -> dict:
    path = Path(run_dir) / CONFIG_ECHO_FILE
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def epoch_means(log: pd.DataFrame) -> pd.DataFrame:
    """Promedio por época de cada término de pérdida."""
    return log.groupby("epoch", as_index=False)[LOSS_COLUMNS].mean()


def select_run(label: str = "Corrida") -> Path | None:
    runs = list_runs()
    if not runs:
        st.warning(
            f"No hay corridas en `{DEFAULT_OUTPUT_DIR}`. Ejecuta primero la CLI, por ejemplo "
            "`python main.py train --manifest <manifest.txt>`."
        )
        return None
    return st.sidebar.selectbox(label, runs, format_func=lambda p: p.name or str(p))
