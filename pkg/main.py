import sys

import yaml

from src.cli import main
from src.dataclass import Context
from src.utils import environment_seed, setup_torch

if __name__ == '__main__':
    argv = sys.argv[1:]
    ctx = Context()
    if argv and argv[0].endswith('.yaml'):
        argv = argv[1:]
    setup_torch(environment_seed(ctx.protocol.seed))
    if ctx.log.verbose:
        print(yaml.dump(ctx.serialize(), indent=4))
    sys.exit(main(argv, ctx))
