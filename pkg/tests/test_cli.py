import pytest

from dtwindex import cli
from dtwindex.bench import read_results
from dtwindex.index import RangeResult, SearchStats
from dtwindex.index_file import load_index
from dtwindex.ingest import make_synthetic, save_ucr


@pytest.fixture
def toy_index(tmp_path, toy_ucr):
    out = str(tmp_path / 'toy.dtwi')
    assert cli.main(['build', '-i', toy_ucr, '-o', out]) == cli.EXIT_OK
    return out


@pytest.fixture
def synthetic_ucr(tmp_path):
    fname = str(tmp_path / 'cbf.tsv')
    save_ucr(make_synthetic(per_shape=10, length=64, seed=3), fname)
    return fname


def _query_file(tmp_path, text):
    fname = tmp_path / 'q.txt'
    fname.write_text(text)
    return str(fname)


def test_build(toy_index):
    index = load_index(toy_index)
    assert len(index) == 3
    assert index.config.band_radius == 1
    assert index.config.n_paa == 16
    assert index.config.lmax == 16


def test_build_with_options(tmp_path, toy_ucr):
    out = str(tmp_path / 'opt.dtwi')
    argv = ['build', '-i', toy_ucr, '-o', out, '--r', '2', '--paa', '2', '--lmax', '8', '--pad', '0.5',
            '--node-cap', '2', '--keogh-plus']
    assert cli.main(argv) == cli.EXIT_OK
    config = load_index(out).config
    assert (config.band_radius, config.n_paa, config.lmax, config.pad_value) == (2, 2, 8, 0.5)
    assert config.node_capacity == 2
    assert config.keogh_plus_filter


def test_build_usage_errors(tmp_path, toy_ucr):
    out = str(tmp_path / 'bad.dtwi')
    assert cli.main(['build', '-i', toy_ucr, '-o', out, '--paa', '7', '--lmax', '100']) == cli.EXIT_USAGE
    assert cli.main(['build', '-i', toy_ucr]) == cli.EXIT_USAGE
    assert cli.main(['build', '-i', toy_ucr, '-o', out, '--r', '1', '--r-frac', '0.2']) == cli.EXIT_USAGE
    assert cli.main(['frobnicate']) == cli.EXIT_USAGE


def test_build_data_errors(tmp_path):
    bad = tmp_path / 'bad.tsv'
    bad.write_text('1\t0.5\tabc\n')
    out = str(tmp_path / 'bad.dtwi')
    assert cli.main(['build', '-i', str(bad), '-o', out]) == cli.EXIT_DATA
    assert cli.main(['build', '-i', str(tmp_path / 'missing.tsv'), '-o', out]) == cli.EXIT_DATA


def test_query_exact_match(tmp_path, toy_index, capsys):
    q = _query_file(tmp_path, '0.5,0.7,1.5,2.0\n')
    capsys.readouterr()
    assert cli.main(['query', '--index', toy_index, '--query', q, '--epsilon', '0']) == cli.EXIT_OK
    assert capsys.readouterr().out == '0\t0.0\n'


def test_query_ucr_line(tmp_path, toy_index, capsys):
    q = _query_file(tmp_path, '9\t1.0\t1.0\t1.2\n')
    capsys.readouterr()
    assert cli.main(['query', '--index', toy_index, '--query', q, '--epsilon', '0.0', '--verify']) == cli.EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == '1\t0.0'


def test_query_nothing_found(tmp_path, toy_index, capsys):
    q = _query_file(tmp_path, '100,100,100,100\n')
    capsys.readouterr()
    assert cli.main(['query', '--index', toy_index, '--query', q, '--epsilon', '1']) == cli.EXIT_OK
    assert capsys.readouterr().out == ''


def test_query_verify_mismatch(tmp_path, toy_index, monkeypatch):
    q = _query_file(tmp_path, '0.5,0.7,1.5,2.0\n')
    monkeypatch.setattr(cli, 'linear_scan', lambda *args, **kwargs: RangeResult((), SearchStats()))
    argv = ['query', '--index', toy_index, '--query', q, '--epsilon', '0', '--verify']
    assert cli.main(argv) == cli.EXIT_INVARIANT


def test_query_errors(tmp_path, toy_index):
    q = _query_file(tmp_path, '0.5,0.7,1.5,2.0\n')
    assert cli.main(['query', '--index', toy_index, '--query', q, '--epsilon', '-1']) == cli.EXIT_USAGE
    assert cli.main(['query', '--index', toy_index, '--query', q]) == cli.EXIT_USAGE
    with open(toy_index, 'r+b') as f:
        f.seek(20)
        f.write(b'\xff\xff\xff\xff')
    assert cli.main(['query', '--index', toy_index, '--query', q, '--epsilon', '1']) == cli.EXIT_DATA


def test_bench_tightness(tmp_path, synthetic_ucr):
    outputs = []
    for k in range(2):
        out = str(tmp_path / f'tightness_{k}.csv')
        argv = ['bench', 'tightness', '-i', synthetic_ucr, '-o', out, '--seed', '42', '--queries', '5']
        assert cli.main(argv) == cli.EXIT_OK
        with open(out, 'rb') as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]
    table = read_results(str(tmp_path / 'tightness_0.csv'))
    assert [row['bound'] for row in table.rows] == ['keogh_plus', 'yi', 'kim']
    assert table.metadata['seed'] == 42
    assert table.metadata['dataset_size'] == 30


def test_bench_generated_seed_is_recorded(tmp_path, synthetic_ucr):
    out = str(tmp_path / 't.jsonl')
    argv = ['bench', 'tightness', '-i', synthetic_ucr, '-o', out, '--format', 'jsonl', '--queries', '2',
            '--bounds', 'kim']
    assert cli.main(argv) == cli.EXIT_OK
    table = read_results(out)
    assert isinstance(table.metadata['seed'], int)
    assert table.rows[0]['seed'] == table.metadata['seed']


def test_bench_config_precedence(tmp_path, synthetic_ucr):
    config = tmp_path / 'bench.yml'
    config.write_text(f'dataset: {synthetic_ucr}\nseed: 5\nquery_count: 3\nbounds: [kim, yi]\n')
    out = str(tmp_path / 'p.csv')
    argv = ['bench', 'pruning', '--config', str(config), '-o', out, '--seed', '7', '--epsilon', '1,10']
    assert cli.main(argv) == cli.EXIT_OK
    table = read_results(out)
    assert table.metadata['seed'] == 7
    assert sorted({row['bound'] for row in table.rows}) == ['kim', 'yi']
    assert sorted({row['epsilon'] for row in table.rows}) == [1.0, 10.0]


def test_bench_lmax_sweep(tmp_path, synthetic_ucr):
    out = str(tmp_path / 'lmax.csv')
    argv = ['bench', 'sweep', '--kind', 'lmax', '-i', synthetic_ucr, '-o', out, '--seed', '1', '--queries', '2',
            '--paa', '4']
    assert cli.main(argv) == cli.EXIT_OK
    table = read_results(out)
    assert len(table.rows) == 12
    assert table.metadata['kind'] == 'sweep_lmax'


def test_bench_errors(tmp_path, synthetic_ucr):
    out = str(tmp_path / 'x.csv')
    assert cli.main(['bench', 'tightness', '-o', out, '--seed', '1']) == cli.EXIT_USAGE
    assert cli.main(['bench', 'tightness', '-i', synthetic_ucr, '-o', out, '--bounds', 'lb_x']) == cli.EXIT_USAGE
    assert cli.main(['bench', 'tightness', '-i', synthetic_ucr, '-o', out, '--r', '64']) == cli.EXIT_USAGE


def test_get_supplied_args():
    parser, subparsers = cli.create_parser()
    argv = ['bench', 'pruning', '-i', 'a.tsv', '--seed=3', '--r-frac', '0.2', '-c', '2']
    assert cli.get_supplied_args(subparsers['bench'], argv) == ('input', 'seed', 'r_frac', 'ncpu')
