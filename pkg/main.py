import argparse
import logging
import sys

from src.cli.commands import cmd_build, cmd_eval, cmd_generate, cmd_ingest, cmd_report, cmd_synthesize, cmd_train
from src.cli.config import RunConfig
from src.exceptions import SiftError

logger = logging.getLogger('main')

COMMANDS = {
    'synthesize': cmd_synthesize,
    'ingest': cmd_ingest,
    'build': cmd_build,
    'train': cmd_train,
    'generate': cmd_generate,
    'eval': cmd_eval,
    'report': cmd_report,
}


def parse_seeds(value: str):
    return [int(seed) for seed in value.split(',') if seed.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()

    parser.add_argument('command', choices=list(COMMANDS))

    parser.add_argument('--config', type=str, default=None)
    parser.add_argument('--seed-override', type=parse_seeds, default=None)
    parser.add_argument('--greedy', action='store_true')
    parser.add_argument('--strategy', type=str, choices=['vanilla', 'src', 'mrc'], default=None)
    parser.add_argument('--shots', type=int, default=None)
    parser.add_argument('--eval-shots', type=int, default=None)
    parser.add_argument('--eval-instruction', type=str, choices=['vanilla', 'permuted', 'nonsense', 'none'], default=None)
    parser.add_argument('--outdir', type=str, default=None)
    parser.add_argument('--log-level', type=str, default='INFO')

    args = parser.parse_args(argv)

    logging.basicConfig(
        level=args.log_level.upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )

    try:
        cfg = RunConfig.load(args.config) if args.config is not None else RunConfig()
        cfg = cfg.with_overrides(
            seeds=args.seed_override,
            greedy=True if args.greedy else None,
            strategy=args.strategy,
            n_shots=args.shots,
            eval_n_shots=args.eval_shots,
            eval_instruction=args.eval_instruction,
            outdir=args.outdir
        )

        logger.info('%s with config %s under %s', args.command, cfg.config_hash, cfg.run_dir)
        COMMANDS[args.command](cfg)
    except (SiftError, ValueError) as e:
        notes = getattr(e, '__notes__', [])
        logger.error('%s: %s%s', type(e).__name__, e, ''.join(f' ({note})' for note in notes))
        return 1

    return 0


if __name__ == '__main__':
    sys.exit(main())
