import json
import typing

import numpy as np
import pytest

import cli
import coeffs
import mls
import pairing
import verify


def run(*argv):
    return cli.main(cli.parse_args(['cli.py'] + [str(a) for a in argv]))


@pytest.fixture
def single_term_files(tmp_path):
    table = str(tmp_path / 'table.json')
    f1 = str(tmp_path / 'f1.json')
    f2 = str(tmp_path / 'f2.json')
    coeffs.save_table(table, coeffs.table_from_dict({(1, 2): 1}))
    mls.save_series(f1, mls.identity_series(2))
    mls.save_series(f2, mls.identity_series(2, power=1))
    return table, f1, f2


def test_coeffs_sphere(tmp_path):
    out = str(tmp_path / 't.json')
    assert run('coeffs', '--kernel', 'sphere', '--nmax', 16, '--out', out) == 0
    table = coeffs.load_table(out)
    assert table.a.shape == (17, 17)
    assert np.max(np.abs(table.a)) <= 1e-10


def test_coeffs_torus(tmp_path, capsys):
    out = str(tmp_path / 't.json')
    assert run('coeffs', '--kernel', 'torus', '--tau', '0,1', '--nmax', 4, '--samples', 64, '--out', out) == 0
    assert coeffs.load_table(out).entry(0, 0) == pytest.approx(np.pi / 2, rel=1e-6)
    assert 'a_00: 1.5707963' in capsys.readouterr().out


def test_coeffs_synthetic_roundtrip(tmp_path, single_term_files):
    table, _, _ = single_term_files
    out = str(tmp_path / 'back.json')
    assert run('coeffs', '--kernel', 'synthetic', '--table', table, '--nmax', 2, '--samples', 64, '--out', out) == 0
    got = coeffs.load_table(out)
    assert got.entry(1, 2) == pytest.approx(1, abs=1e-12)


def test_coeffs_default_output_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run('coeffs', '--kernel', 'sphere', '--nmax', 2, '--samples', 16) == 0
    assert (tmp_path / 'coeffs-kernel=sphere-nmax=2-radius=0.35.json').exists()


def test_coeffs_kernel_descriptor(tmp_path):
    desc = tmp_path / 'square.json'
    desc.write_text(json.dumps({'kind': 'torus', 'tau': [0, 1]}))
    out = str(tmp_path / 't.json')
    assert run('coeffs', '--kernel', str(desc), '--nmax', 2, '--samples', 16, '--out', out) == 0
    assert coeffs.load_table(out).entry(0, 0) == pytest.approx(np.pi / 2, rel=1e-6)


def test_pair_series(tmp_path, single_term_files):
    table, f1, f2 = single_term_files
    out = str(tmp_path / 'res.json')
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2', f2, '--out', out) == 0
    res = pairing.result_from_json(json.loads(open(out).read()))
    assert res.value == pytest.approx(78.9568, abs=1e-4)
    assert res.method == 'series'


def test_pair_both(tmp_path, single_term_files):
    table, f1, f2 = single_term_files
    out = str(tmp_path / 'res.json')
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2', f2, '--method', 'both',
               '--nodes', 64, '--out', out) == 0
    with open(out) as f:
        obj = json.load(f)
    assert set(obj) == {'series', 'quadrature', 'deviation'}
    assert obj['deviation'] <= 1e-10


def test_pair_random_case(tmp_path, rng):
    table, f1, f2 = pairing.random_synthetic_case(rng)
    paths = [str(tmp_path / name) for name in ('t.json', 'f1.json', 'f2.json', 'res.json')]
    coeffs.save_table(paths[0], table)
    mls.save_series(paths[1], f1)
    mls.save_series(paths[2], f2)
    assert run('pair', '--kernel', 'synthetic', '--table', paths[0], '--f1', paths[1], '--f2', paths[2],
               '--method', 'both', '--out', paths[3]) == 0
    with open(paths[3]) as f:
        assert json.load(f)['deviation'] <= 1e-8


def test_pair_torus_extracts_table(tmp_path):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    out = str(tmp_path / 'res.json')
    assert run('pair', '--kernel', 'torus', '--f1', f, '--f2', f, '--nmax', 2, '--samples', 64, '--out', out) == 0
    with open(out) as fh:
        assert pairing.result_from_json(json.load(fh)).value == pytest.approx(2 * np.pi ** 3, abs=1e-5)


def test_pair_is_deterministic(tmp_path, single_term_files):
    table, f1, f2 = single_term_files
    outs = [str(tmp_path / 'a.json'), str(tmp_path / 'b.json')]
    for out in outs:
        assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2', f2, '--method', 'both',
                   '--nodes', 64, '--out', out) == 0
    with open(outs[0], 'rb') as a, open(outs[1], 'rb') as b:
        assert a.read() == b.read()


def test_pair_malformed_series(tmp_path, capsys, single_term_files):
    table, f1, _ = single_term_files
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'rank': 2, 'lead': 0, 'coeffs': [[[[1, 0], [0, 0]], [[0, 0], 'x']]]}))
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2', str(bad),
               '--out', str(tmp_path / 'res.json')) == 2
    assert 'coeffs[0][1][1]' in capsys.readouterr().err


def test_pair_missing_file(tmp_path, single_term_files):
    table, f1, _ = single_term_files
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2',
               str(tmp_path / 'nope.json')) == 2


def test_pair_rank_mismatch(tmp_path, single_term_files):
    table, f1, _ = single_term_files
    f3 = str(tmp_path / 'f3.json')
    mls.save_series(f3, mls.identity_series(3))
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1, '--f2', f3) == 2


def test_pair_needs_inputs(single_term_files):
    table, f1, _ = single_term_files
    assert run('pair', '--kernel', 'synthetic', '--table', table, '--f1', f1) == 2


@pytest.mark.parametrize('argv', [
    ['coeffs', '--kernel', 'hyperbolic'],
    ['coeffs', '--radius', 1.2],
    ['coeffs', '--tau', 'i'],
    ['coeffs', '--kernel', 'torus', '--tau', '0,-1', '--nmax', 2, '--samples', 16],
    ['coeffs', '--nmax', 16, '--samples', 20],
])
def test_config_errors(argv, tmp_path):
    assert run(*(argv + ['--out', str(tmp_path / 'x.json')])) == 2


def test_reduce(tmp_path, capsys):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    out = str(tmp_path / 'phi.json')
    assert run('reduce', '--kernel', 'torus', '--f1', f, '--bump', '0.3,0.6', '--bump2', '0.2,0.8',
               '--grid', 4, '--extent', 0.1, '--out', out) == 0
    form = pairing.load_form(out)
    assert form.values.shape == (4, 4, 1, 1)
    np.testing.assert_allclose(form.values, -1j * np.pi ** 2, atol=1e-10)
    assert 'bump difference' in capsys.readouterr().out


def test_reduce_targets_in_annulus(tmp_path):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    assert run('reduce', '--kernel', 'torus', '--f1', f, '--extent', 0.5, '--out', str(tmp_path / 'phi.json')) == 2


def test_reduce_two_bumps_default_extent(tmp_path, capsys):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    out = str(tmp_path / 'phi.json')
    assert run('reduce', '--kernel', 'torus', '--f1', f, '--bump', '0.3,0.6', '--bump2', '0.2,0.8',
               '--grid', 4, '--out', out) == 0
    np.testing.assert_allclose(pairing.load_form(out).values, -1j * np.pi ** 2, atol=1e-10)
    assert 'bump difference' in capsys.readouterr().out


def test_reduce_second_bump_checked_before_writing(tmp_path):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    out = tmp_path / 'phi.json'
    assert run('reduce', '--kernel', 'torus', '--f1', f, '--bump2', '0.05,0.8', '--grid', 4, '--out', str(out)) == 2
    assert not out.exists()


def test_reduce_bad_bump(tmp_path):
    f = str(tmp_path / 'f.json')
    mls.save_series(f, mls.scalar_series(-1, [1.]))
    assert run('reduce', '--kernel', 'torus', '--f1', f, '--bump', '0.6,0.3') == 2


@pytest.mark.parametrize('cls', [cli.RunConfig, verify.VerifyOptions])
def test_config_annotations_allow_none_defaults(cls):
    hints = typing.get_type_hints(cls)
    for name, default in cls._field_defaults.items():
        if default is None:
            assert type(None) in typing.get_args(hints[name]), name


def test_verify_moments(tmp_path, capsys):
    out = str(tmp_path / 'checks.json')
    assert run('verify', 'moments', '--out', out) == 0
    assert 'checks passed' in capsys.readouterr().out
    with open(out) as f:
        checks = json.load(f)
    assert checks and all(c['passed'] for c in checks)


def test_verify_failing_tolerance():
    assert run('verify', 'moments', '--tol', 1e-300) == 1


def test_verify_unknown_suite():
    assert run('verify', 'spectral') == 2


@pytest.mark.slow
def test_verify_oracle():
    assert run('verify', 'oracle', '--cases', 100, '--seed', 7) == 0


@pytest.mark.slow
@pytest.mark.parametrize('suite', ['roundtrip', 'sphere-null', 'torus-const', 'reduce-consistency', 'bilinearity'])
def test_verify_suite(suite):
    assert run('verify', suite) == 0


@pytest.mark.slow
def test_verify_all(tmp_path):
    out = str(tmp_path / 'checks.json')
    assert run('verify', 'all', '--out', out) == 0
    with open(out) as f:
        suites = {c['suite'] for c in json.load(f)}
    assert len(suites) == len(verify.SUITES)
