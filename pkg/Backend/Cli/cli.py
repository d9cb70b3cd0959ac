from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from dotenv import load_dotenv

from Backend.DataIO.feature_files import load, write_dataset
from Backend.DataIO.synthetic import generate_synthetic
from Backend.errors import CrossModalError, DimensionError
from Backend.Retrieval.retrieval_eval import evaluate
from Backend.Trainer.checkpoint import load_checkpoint, save_checkpoint
from Backend.Trainer.config import AP_NORMS, D_MEAN_SCOPES, DEFAULT_OUTPUT_DIR, TrainConfig
from Backend.Trainer.experiments import ablate, grid_search
from Backend.Trainer.trainer import train

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"

CHECKPOINT_FILE = "model.gpld"
TRAIN_LOG_FILE = "train_log.csv"
METRICS_FILE = "metrics.csv"
PER_QUERY_FILE = "per_query_ap.csv"
ABLATION_FILE = "ablation.csv"
GRID_FILE = "grid_search.csv"
CONFIG_ECHO_FILE = "config.json"

# flag → campo de TrainConfig
_VALUE_FLAGS = {
    "alpha": "alpha",
    "beta": "beta",
    "lam": "lam",
    "k": "k",
    "common_dim": "common_dim",
    "hidden_dim": "hidden_dim",
    "lr_g": "lr_g",
    "lr_d": "lr_d",
    "weight_decay_g": "weight_decay_g",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "denoise_rate": "denoise_rate",
    "seed": "seed",
    "d_mean_scope": "d_mean_scope",
    "ap_norm": "ap_norm",
    "map_k": "map_k",
}
_DISABLE_FLAGS = {"no_udp": "use_udp", "no_mdp": "use_mdp", "no_mc": "use_mc", "no_da": "use_da"}
_ENABLE_FLAGS = {"udp_signed": "udp_signed", "symmetric_udp": "symmetric_udp"}


def _configure_logging() -> None:
    if not logging.getLogger().handlers:
        level = os.getenv("CROSSMODAL_LOG_LEVEL", "INFO").upper()
        logging.basicConfig(level=level, format=LOG_FORMAT)


def _float_list(raw: str) -> list[float]:
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"lista de números inválida: {raw!r}") from exc


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("configuración de entrenamiento")
    group.add_argument("--alpha", type=float)
    group.add_argument("--beta", type=float)
    group.add_argument("--lambda", dest="lam", type=float)
    group.add_argument("--k", type=int)
    group.add_argument("--common-dim", type=int, help="dimensión L del espacio común")
    group.add_argument("--hidden-dim", type=int, help="dimensión E de la capa específica de modalidad")
    group.add_argument("--lr-g", type=float)
    group.add_argument("--lr-d", type=float)
    group.add_argument("--weight-decay-g", type=float)
    group.add_argument("--batch-size", type=int)
    group.add_argument("--epochs", type=int)
    group.add_argument("--denoise-rate", type=float)
    group.add_argument("--seed", type=int)
    group.add_argument("--d-mean-scope", choices=D_MEAN_SCOPES)
    group.add_argument("--no-udp", action="store_true")
    group.add_argument("--no-mdp", action="store_true")
    group.add_argument("--no-mc", action="store_true")
    group.add_argument("--no-da", action="store_true")
    group.add_argument("--udp-signed", action="store_true")
    group.add_argument("--symmetric-udp", action="store_true")
    group.add_argument("--ap-norm", choices=AP_NORMS)
    group.add_argument("--map-k", type=int)
    return parent


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--output-dir", type=Path, help="directorio de salida (por defecto CROSSMODAL_OUTPUT_DIR)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_parent()
    config = _config_parent()
    parser = argparse.ArgumentParser(
        prog="crossmodal",
        description="Recuperación cross-modal con proyector de atención diversificada y pérdida de patrones de grafo.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[common, config], help="entrena y guarda el modelo")
    p_train.add_argument("--manifest", type=Path, required=True)

    p_eval = sub.add_parser("evaluate", parents=[common], help="MAP@k en ambas direcciones")
    p_eval.add_argument("--manifest", type=Path, required=True)
    p_eval.add_argument("--checkpoint", type=Path, help=f"por defecto <output-dir>/{CHECKPOINT_FILE}")
    p_eval.add_argument("--map-k", type=int)
    p_eval.add_argument("--ap-norm", choices=AP_NORMS)
    p_eval.add_argument("--dump-ap", action="store_true", help=f"escribe {PER_QUERY_FILE}")

    p_ablate = sub.add_parser("ablate", parents=[common, config], help="tabla de componentes de seis filas")
    p_ablate.add_argument("--manifest", type=Path, required=True)

    p_grid = sub.add_parser("grid-search", parents=[common, config], help="barrido de alpha y beta")
    p_grid.add_argument("--manifest", type=Path, required=True)
    p_grid.add_argument("--alphas", type=_float_list, required=True, help="p. ej. 0,0.1,1,10")
    p_grid.add_argument("--betas", type=_float_list, required=True, help="p. ej. 0.1")
    p_grid.add_argument("--workers", type=int, default=1)

    p_gen = sub.add_parser("gen-synthetic", parents=[common], help="dataset sintético por clusters")
    p_gen.add_argument("--clusters", type=int, default=10)
    p_gen.add_argument("--per-cluster", type=int, default=100)
    p_gen.add_argument("--dim-img", type=int, default=64)
    p_gen.add_argument("--dim-txt", type=int, default=48)
    p_gen.add_argument("--noise", type=float, default=0.3)
    p_gen.add_argument("--test-fraction", type=float, default=0.2)
    p_gen.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args: argparse.Namespace) -> TrainConfig:
    overrides = {}
    for flag, field in _VALUE_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    for flag, field in _DISABLE_FLAGS.items():
        if getattr(args, flag, False):
            overrides[field] = False
    for flag, field in _ENABLE_FLAGS.items():
        if getattr(args, flag, False):
            overrides[field] = True
    return TrainConfig(**overrides)


def _write_echo(out_dir: Path, command: str, argv: Sequence[str], payload: dict) -> None:
    echo = {"command": command, "argv": list(argv), **payload}
    (out_dir / CONFIG_ECHO_FILE).write_text(json.dumps(echo, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _cmd_train(args: argparse.Namespace, out_dir: Path, argv: Sequence[str]) -> None:
    config = config_from_args(args)
    _write_echo(out_dir, "train", argv, {"config": config.to_dict(), "manifest": str(args.manifest)})
    result = train(load(args.manifest), config)
    save_checkpoint(result.model, out_dir / CHECKPOINT_FILE)
    result.log.to_csv(out_dir / TRAIN_LOG_FILE, index=False)
    if result.skipped_batches:
        logger.warning("[cli] %s batches degenerados omitidos durante el entrenamiento", result.skipped_batches)


def _cmd_evaluate(args: argparse.Namespace, out_dir: Path, argv: Sequence[str]) -> None:
    checkpoint = args.checkpoint or out_dir / CHECKPOINT_FILE
    model = load_checkpoint(checkpoint)
    overrides = {}
    if args.map_k is not None:
        overrides["map_k"] = args.map_k
    if args.ap_norm is not None:
        overrides["ap_norm"] = args.ap_norm
    config = model.config.replace(**overrides)
    _write_echo(
        out_dir,
        "evaluate",
        argv,
        {"config": config.to_dict(), "manifest": str(args.manifest), "checkpoint": str(checkpoint)},
    )

    dataset = load(args.manifest)
    if (dataset.dim_img, dataset.dim_txt) != (model.dim_img, model.dim_txt):
        raise DimensionError(
            f"el dataset tiene dims {dataset.dim_img}/{dataset.dim_txt}, "
            f"el modelo espera {model.dim_img}/{model.dim_txt}"
        )
    test = dataset.test()
    metrics, per_query = evaluate(model.projector, test.image, test.text, test.labels, config.map_k, config.ap_norm)
    metrics.to_csv(out_dir / METRICS_FILE, index=False)
    if args.dump_ap:
        per_query.to_csv(out_dir / PER_QUERY_FILE, index=False)


def _cmd_ablate(args: argparse.Namespace, out_dir: Path, argv: Sequence[str]) -> None:
    config = config_from_args(args)
    _write_echo(out_dir, "ablate", argv, {"config": config.to_dict(), "manifest": str(args.manifest)})
    ablate(load(args.manifest), config).to_csv(out_dir / ABLATION_FILE, index=False)


def _cmd_grid_search(args: argparse.Namespace, out_dir: Path, argv: Sequence[str]) -> None:
    config = config_from_args(args)
    _write_echo(
        out_dir,
        "grid-search",
        argv,
        {"config": config.to_dict(), "manifest": str(args.manifest), "alphas": args.alphas, "betas": args.betas},
    )
    table = grid_search(load(args.manifest), args.alphas, args.betas, config, workers=args.workers)
    table.to_csv(out_dir / GRID_FILE, index=False)


def _cmd_gen_synthetic(args: argparse.Namespace, out_dir: Path, argv: Sequence[str]) -> None:
    params = {
        "n_clusters": args.clusters,
        "n_per_cluster": args.per_cluster,
        "dim_img": args.dim_img,
        "dim_txt": args.dim_txt,
        "noise_sigma": args.noise,
        "seed": args.seed,
        "test_fraction": args.test_fraction,
    }
    _write_echo(out_dir, "gen-synthetic", argv, {"synthetic": params})
    manifest = write_dataset(generate_synthetic(**params), out_dir)
    print(manifest)


_COMMANDS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "grid-search": _cmd_grid_search,
    "gen-synthetic": _cmd_gen_synthetic,
}


def _provenance(exc: BaseException) -> str:
    """Módulo del frame que lanzó la excepción."""
    tb = exc.__traceback__
    if tb is None:
        return "?"
    while tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?")


def run(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    t0 = time.perf_counter()
    try:
        out_dir = Path(args.output_dir or DEFAULT_OUTPUT_DIR)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info("[cli] Comando %s | salida=%s", args.command, out_dir)
        _COMMANDS[args.command](args, out_dir, argv)
    except CrossModalError as exc:
        logger.error("[cli] %s en %s: %s", type(exc).__name__, _provenance(exc), exc)
        return 2
    except Exception:
        logger.exception("[cli] Error inesperado en %s", args.command)
        return 1
    logger.info("[cli] %s completado en %.2fs", args.command, time.perf_counter() - t0)
    return 0
