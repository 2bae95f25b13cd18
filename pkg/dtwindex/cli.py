import argparse
import logging
import sys
import time

import numpy as np

from dtwindex import __version__
from dtwindex.auxiliary import cpu_type, filepath_type
from dtwindex.bench import BOUNDS, SWEEP_KINDS, SweepConfig, emit_results, run_bench, run_sweep
from dtwindex.errors import DataError, InvariantError, UsageError
from dtwindex.index import IndexConfig, build_index, linear_scan, range_search
from dtwindex.index_file import load_index, save_index
from dtwindex.ingest import TruncationSpec, default_band_radius, load_ucr, read_query, truncate_random
from dtwindex.parallel import create_dask_client

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3

# command line option -> SweepConfig field
BENCH_FIELDS = {'input': 'dataset',
                'queries': 'query_count',
                'seed': 'seed',
                'r': 'band_radius',
                'r_frac': 'r_frac',
                'paa': 'n_paa',
                'lmax': 'lmax',
                'pad': 'pad_value',
                'bounds': 'bounds',
                'epsilon': 'epsilon_grid',
                'paa_grid': 'n_paa_grid',
                'r_grid': 'r_frac_grid',
                'lmax_grid': 'lmax_grid',
                'no_truncate': 'truncate'}


class RawTextArgumentDefaultsHelpFormatter(argparse.RawTextHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    pass


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def get_supplied_args(parser, argv):
    # create a dict {'-c': '--ncpu', '--paa': '--paa', ...} and keep full (long) names of those args
    # which are available in input command line string
    all_args = [sorted(i.option_strings, reverse=True) for i in parser._actions if i.option_strings]
    all_args = [i + i if len(i) == 1 else i for i in all_args]
    all_args = dict(all_args)
    supplied_args = []
    for item in argv:
        item = item.split('=', 1)[0]
        if item in all_args:
            supplied_args.append(all_args[item])
        elif item in all_args.values():
            supplied_args.append(item)
    supplied_args = [item.lstrip('-').replace('-', '_') for item in supplied_args]
    return tuple(supplied_args)


def lmax_type(x):
    if x == 'auto':
        return None
    return int(x)


def _list_type(item_type):
    def parse(x):
        return tuple(item_type(i) for i in x.split(',') if i.strip())
    parse.__name__ = f'{item_type.__name__} list'
    return parse


def bounds_type(x):
    names = tuple(i.strip() for i in x.split(',') if i.strip())
    unknown = [i for i in names if i not in BOUNDS]
    if unknown:
        raise argparse.ArgumentTypeError(f'unknown bound(s) {", ".join(unknown)}, choose from {", ".join(BOUNDS)}')
    return names


def add_band_args(parser, r_frac_default):
    group = parser.add_mutually_exclusive_group()
    group.add_argument('--r', metavar='INTEGER', type=int, default=None,
                       help='radius of the Sakoe-Chiba band. If omitted, it is derived from --r-frac.')
    group.add_argument('--r-frac', metavar='FLOAT', type=float, default=r_frac_default,
                       help='band radius as a fraction of the longest sequence length (before truncation), '
                            'rounded half up, at least 1.')


def create_parser():
    parser = ArgumentParser(prog='dtwindex',
                            description='Exact epsilon-range search of time series under the DTW distance with a '
                                        'Sakoe-Chiba band. Candidates of unequal length are extended to a common '
                                        'length, reduced by PAA and indexed by an R-tree; LB_MBR, LB_PAA and '
                                        'LB_Keogh+ prune the candidates without false dismissals.\n'
                                        'Examples:\n'
                                        '  dtwindex build -i GunPoint_TRAIN.tsv -o gunpoint.dtwi --paa 8\n'
                                        '  dtwindex query --index gunpoint.dtwi --query q.txt --epsilon 5 --verify\n'
                                        '  dtwindex bench tightness -i GunPoint_TRAIN.tsv --seed 42 -o t.csv\n'
                                        '  dtwindex bench sweep --kind n_paa --config sweep.yml -o paa.jsonl '
                                        '--format jsonl -c 4',
                            formatter_class=RawTextArgumentDefaultsHelpFormatter)
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    build = sub.add_parser('build', help='build an index file from a UCR dataset',
                           formatter_class=RawTextArgumentDefaultsHelpFormatter)
    build.add_argument('-i', '--input', metavar='FILENAME', required=True, type=filepath_type,
                       help='UCR text file: a class label followed by samples on every line, tab, comma or blank '
                            'separated.')
    build.add_argument('-o', '--out', metavar='FILENAME', required=True, type=filepath_type,
                       help='output index file.')
    add_band_args(build, 0.10)
    build.add_argument('--paa', metavar='INTEGER', type=int, default=16,
                       help='number of PAA segments (dimensionality of the R-tree).')
    build.add_argument('--lmax', metavar='INTEGER', type=lmax_type, default=None,
                       help='length sequences are extended to, "auto" picks the smallest multiple of --paa above '
                            'the longest sequence.')
    build.add_argument('--pad', metavar='FLOAT', type=float, default=0.0,
                       help='value used to extend sequences.')
    build.add_argument('--node-cap', metavar='INTEGER', type=int, default=16,
                       help='maximum number of children of an R-tree node.')
    build.add_argument('--truncate-seed', metavar='INTEGER', type=int, default=None,
                       help='truncate a random tail of at most r samples off every sequence before indexing.')
    build.add_argument('--keogh-plus', action='store_true', default=False,
                       help='check full-resolution LB_Keogh+ between LB_PAA and DTW during searches.')
    build.add_argument('-v', '--verbose', action='store_true', default=False,
                       help='print debug messages to STDERR.')

    query = sub.add_parser('query', help='epsilon-range search against an index file',
                           formatter_class=RawTextArgumentDefaultsHelpFormatter)
    query.add_argument('--index', metavar='FILENAME', required=True, type=filepath_type,
                       help='index file created by the build command.')
    query.add_argument('--query', metavar='FILENAME', required=True, type=filepath_type,
                       help='query sequence: a single UCR line (label TAB samples) or comma-separated samples.')
    query.add_argument('--epsilon', metavar='FLOAT', type=float, required=True,
                       help='search radius, matches have a DTW distance not greater than it.')
    query.add_argument('--verify', action='store_true', default=False,
                       help='compare the answer with a sequential scan and fail with exit code 3 on a mismatch.')
    query.add_argument('-v', '--verbose', action='store_true', default=False,
                       help='print debug messages to STDERR.')

    bench = sub.add_parser('bench', help='tightness, pruning power and parameter sweeps',
                           formatter_class=RawTextArgumentDefaultsHelpFormatter)
    bench.add_argument('experiment', choices=['tightness', 'pruning', 'sweep', 'extension'],
                       help='tightness: mean tightness of every bound\n'
                            'pruning: pruning power and retrieved ratio over the epsilon grid\n'
                            'sweep: one of the parameter sweeps selected by --kind\n'
                            'extension: original and extended DTW of one query against every candidate')
    bench.add_argument('--kind', choices=SWEEP_KINDS, default='epsilon',
                       help='parameter swept by the sweep experiment.')
    bench.add_argument('-i', '--input', metavar='FILENAME', required=False, type=filepath_type,
                       help='UCR dataset. May be omitted if the config file names it as "dataset".')
    bench.add_argument('-o', '--out', metavar='FILENAME', required=True, type=filepath_type,
                       help='output file with results.')
    bench.add_argument('--format', choices=['csv', 'jsonl'], default='csv',
                       help='format of the output file.')
    bench.add_argument('--config', metavar='FILENAME', required=False, type=filepath_type,
                       help='YAML file with benchmark parameters, keys are named as SweepConfig fields:\n'
                            'dataset: GunPoint_TRAIN.tsv\n'
                            'query_count: 100\n'
                            'seed: 42\n'
                            'r_frac: 0.1\n'
                            'n_paa_grid: [2, 4, 8, 16]\n'
                            'Options given in the command line take precedence over values from the file.')
    bench.add_argument('--seed', metavar='INTEGER', type=int, default=None,
                       help='seed of the truncation and of the query selection. If omitted, a random seed is '
                            'generated, logged and written to the output.')
    bench.add_argument('--queries', metavar='INTEGER', type=int, default=100,
                       help='number of queries drawn from the dataset.')
    add_band_args(bench, 0.10)
    bench.add_argument('--paa', metavar='INTEGER', type=int, default=16,
                       help='number of PAA segments.')
    bench.add_argument('--lmax', metavar='INTEGER', type=lmax_type, default=None,
                       help='length sequences are extended to, "auto" picks the smallest admissible one.')
    bench.add_argument('--pad', metavar='FLOAT', type=float, default=0.0,
                       help='value used to extend sequences.')
    bench.add_argument('--bounds', metavar='NAMES', type=bounds_type, default='keogh_plus,yi,kim',
                       help=f'comma-separated lower bounds out of {", ".join(BOUNDS)}.')
    bench.add_argument('--epsilon', metavar='FLOATS', type=_list_type(float), default='1,2,5,10,20,50',
                       help='comma-separated epsilon grid.')
    bench.add_argument('--paa-grid', metavar='INTEGERS', type=_list_type(int), default='2,4,8,16',
                       help='comma-separated grid of PAA segment numbers.')
    bench.add_argument('--r-grid', metavar='FLOATS', type=_list_type(float), default='0.1,0.15,0.2',
                       help='comma-separated grid of band radius fractions.')
    bench.add_argument('--lmax-grid', metavar='INTEGERS', type=_list_type(int), default=None,
                       help='comma-separated grid of extension lengths. If omitted, four steps of --paa starting '
                            'from the smallest admissible length.')
    bench.add_argument('--no-truncate', action='store_true', default=False,
                       help='use the sequences as they are instead of truncating random tails.')
    bench.add_argument('-c', '--ncpu', default=1, type=cpu_type,
                       help='number of cpus. This affects only calculations on a single server.')
    bench.add_argument('--hostfile', metavar='FILENAME', required=False, type=filepath_type, default=None,
                       help='text file with addresses of nodes of dask SSH cluster. The first line in this file '
                            'will be the address of the scheduler running on the standard port 8786. If omitted, '
                            'calculations will run on a single machine as usual.')
    bench.add_argument('-v', '--verbose', action='store_true', default=False,
                       help='print debug messages to STDERR.')
    return parser, {'build': build, 'query': query, 'bench': bench}


def cmd_build(args):
    ds = load_ucr(args.input)
    r = args.r if args.r is not None else default_band_radius(ds, args.r_frac)
    if args.truncate_seed is not None:
        ds = truncate_random(ds, TruncationSpec(args.truncate_seed, r))
    config = IndexConfig(band_radius=r, n_paa=args.paa, pad_value=args.pad, node_capacity=args.node_cap,
                         lmax=args.lmax, keogh_plus_filter=args.keogh_plus).resolve(ds.lengths)
    logger.info(f'resolved parameters: r={config.band_radius}, n_paa={config.n_paa}, lmax={config.lmax}, '
                f'e={config.pad_value}, seed={args.truncate_seed}')
    index = build_index(ds, config)
    save_index(index, args.out)
    logger.info(f'index with {len(index)} entries saved to {args.out}')
    return EXIT_OK


def cmd_query(args):
    if not args.epsilon >= 0:
        raise UsageError(f'epsilon must be a non-negative number, got {args.epsilon}')
    index = load_index(args.index)
    Q = read_query(args.query)
    config = index.config
    logger.info(f'resolved parameters: r={config.band_radius}, n_paa={config.n_paa}, lmax={config.lmax}, '
                f'e={config.pad_value}, seed=None')
    start = time.time()
    res = range_search(index, Q, args.epsilon)
    logger.info(f'range search done in {(time.time() - start):.2f}s: {len(res.matches)} matches, '
                f'{res.stats.dtw_evaluations} DTW evaluations, {res.stats.pruned_mbr} pruned by LB_MBR, '
                f'{res.stats.pruned_paa} pruned by LB_PAA, {res.stats.pruned_keogh} pruned by LB_Keogh+')
    if args.verify:
        scan = linear_scan(index.sequences(), Q, args.epsilon, config.band_radius)
        if scan.as_set() != res.as_set():
            raise InvariantError(f'index search returned {len(res.matches)} matches, sequential scan '
                                 f'{len(scan.matches)}; the answers differ')
        logger.info('index answer verified against a sequential scan')
    for m in res.matches:
        sys.stdout.write(f'{m.id}\t{m.distance!r}\n')
    sys.stdout.flush()
    return EXIT_OK


def sweep_config(args, parser, argv):
    """
    SweepConfig from the YAML config (if any) updated with options explicitly given in the command line
    """
    params = {}
    if args.config:
        params.update(SweepConfig.from_yaml(args.config).to_params())
        supplied = get_supplied_args(parser, argv)
    else:
        supplied = tuple(BENCH_FIELDS)
    for arg in supplied:
        if arg in BENCH_FIELDS:
            value = getattr(args, arg)
            if arg == 'no_truncate':
                value = not value
            elif arg == 'input' and value is None:
                continue
            params[BENCH_FIELDS[arg]] = value
    if params.get('seed') is None:
        params['seed'] = int(np.random.default_rng().integers(2 ** 63))
        logger.info(f'no seed given, generated seed {params["seed"]}')
    if 'r_frac' in supplied and 'r' not in supplied:
        params['band_radius'] = None
    return SweepConfig.from_dict(params)


def cmd_bench(args, parser, argv):
    cfg = sweep_config(args, parser, argv)
    if not cfg.dataset:
        raise UsageError('no dataset given, use --input or the dataset key of the config file')
    logger.info(f'resolved parameters: r={cfg.band_radius if cfg.band_radius is not None else f"{cfg.r_frac:g}*L"}, '
                f'n_paa={cfg.n_paa}, lmax={cfg.lmax if cfg.lmax is not None else "auto"}, e={cfg.pad_value}, '
                f'seed={cfg.seed}')
    dask_client = create_dask_client(args.hostfile)
    ds = load_ucr(cfg.dataset)
    if args.experiment == 'sweep':
        table = run_sweep(args.kind, cfg, ds, ncpu=args.ncpu, dask_client=dask_client)
    else:
        table = run_bench(args.experiment, cfg, ds, ncpu=args.ncpu, dask_client=dask_client)
    emit_results(table, args.out, args.format)
    logger.info(f'{len(table)} result rows written to {args.out}')
    return EXIT_OK


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser, subparsers = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        if args.command == 'build':
            return cmd_build(args)
        if args.command == 'query':
            return cmd_query(args)
        return cmd_bench(args, subparsers['bench'], argv)
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (DataError, OSError) as e:
        logger.error(str(e))
        return EXIT_DATA
    except InvariantError as e:
        logger.error(str(e))
        return EXIT_INVARIANT


if __name__ == '__main__':
    sys.exit(main())
