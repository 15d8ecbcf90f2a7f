# core/bench/cli.py
import argparse
import sys
from typing import List, Optional

from core.bench.runner import COMMANDS
from core.config import Config
from core.errors import ConfigError, StageError
from core.normalizers import apply_overrides, load_experiment_config, parse_experiment
from core.utils import setup_logging

EXIT_STAGE_FAILED = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog='bench', description="Benchmark de calibração de scores de ranking (MLPlatt)")
    sub = p.add_subparsers(dest='command', required=True)
    helps = {
        'bench': 'roster completo de calibradores',
        'theta-sweep': 'fração de listagens desordenadas por θ',
        'ablation': 'Platt, MLPlatt sem contexto, MLPlatt sem MonoMLP, MLPlatt',
        'rcr': 'rankers RCR x LambdaLoss + MLPlatt',
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument('--config', type=str, default=None, help='YAML do experimento (ver configs/desk.yaml)')
        sp.add_argument('--seed', type=int, default=None, help='roda uma única seed (sobrepõe seeds do YAML)')
        sp.add_argument('--out', type=str, default=None, help='diretório de saída')
        sp.add_argument('--dataset', type=str, default=None, help="caminho do dataset, 'aliexpress:<csv>' ou 'synthetic'")
        sp.add_argument('--bins', type=int, default=None, help='M, número de bins do ECE (padrão 20)')
    return p


def resolve_config(args: argparse.Namespace):
    config = load_experiment_config(args.config) if args.config else parse_experiment({})
    return apply_overrides(config, seed=args.seed, out=args.out, dataset=args.dataset, bins=args.bins)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger = setup_logging(Config, 'core')
    try:
        config = resolve_config(args)
    except ConfigError as e:
        logger.error("config inválida: %s", e)
        print(f"stage config failed: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILED

    try:
        result = COMMANDS[args.command](config)
    except StageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_STAGE_FAILED

    sys.stdout.write(result.text)
    print(f"\nartefatos em {result.run_dir}")
    return 0
