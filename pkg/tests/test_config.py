"""Config parsing, validation diagnostics, and the emit round trip."""

import numpy as np
import pytest

from tmep.config import (
    AlphaGrid,
    ConfigError,
    ExperimentConfig,
    build_model,
    emit_config,
    initial_state,
    load_config,
    parse_config,
    scan_alphas,
)
from tmep.models import OpenSystemModel

TWO_LEVEL = """
schema_version = 1

[model]
kind = "two-level"
omega_diag = [0.75, 0.25]
hamiltonian = [[0.0, 1.0], [1.0, 0.0]]
"""

OPEN = """
schema_version = 1
out_dir = "run"

[model]
kind = "open-system"
dim_s = 2
level_splitting = 1.0
coupling_strength = 0.5

[[model.reservoirs]]
chain_length = 1
beta = 1.0

[[model.reservoirs]]
chain_length = 1
beta = 2.0

[state]
tag = "product"
weights = [0.9, 0.1]

[grids]
times = [0.25, 1.0]

[grids.alpha_im]
min = -2.0
max = 2.0
points = 5

[scan]
routes = ["direct", "trace"]

[scaling]
chain_lengths = [1, 2]
time = 0.5
"""


def test_two_level_defaults():
    cfg = parse_config(TWO_LEVEL)
    assert cfg.model.kind == "two-level"
    assert cfg.model.omega_diag == (0.75, 0.25)
    assert cfg.state.tag == "reference"
    assert cfg.grids.times == (0.25, 0.5, 1.0, 2.0)
    assert cfg.grids.alpha_re == AlphaGrid(0.0, 1.0, 9)
    assert cfg.grids.alpha_im == AlphaGrid(-10.0, 10.0, 41)
    assert cfg.scan.routes == ("direct", "trace", "spectral", "cocycle-product")
    assert cfg.scaling.chain_lengths == (1, 2, 3)
    assert cfg.out_dir is None
    assert cfg.schema_version == 1


def test_open_system_parse():
    cfg = parse_config(OPEN)
    assert cfg.model.kind == "open-system"
    assert len(cfg.model.reservoirs) == 2
    assert cfg.model.reservoirs[1].beta == 2.0
    assert cfg.state.tag == "product"
    assert cfg.state.weights == (0.9, 0.1)
    assert cfg.out_dir == "run"
    assert cfg.scan.routes == ("direct", "trace")
    assert cfg.scaling.time == 0.5


def test_emit_round_trip():
    for text in (TWO_LEVEL, OPEN):
        cfg = parse_config(text)
        emitted = emit_config(cfg)
        again = parse_config(emitted)
        assert again == cfg
        # emission is a fixed point
        assert emit_config(again) == emitted


def test_invalid_toml_diagnostic():
    with pytest.raises(ConfigError, match="not valid TOML"):
        parse_config("[model\nkind =")


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="unknown key 'frobnicate'"):
        parse_config(TWO_LEVEL + "\nfrobnicate = 1\n")


def test_unknown_nested_key_named():
    with pytest.raises(ConfigError, match="model: unknown key"):
        parse_config(TWO_LEVEL.replace('kind = "two-level"', 'kind = "two-level"\nextra = 3'))


def test_omega_diag_validation():
    with pytest.raises(ConfigError, match="sum to 1"):
        parse_config(TWO_LEVEL.replace("[0.75, 0.25]", "[0.75, 0.35]"))
    with pytest.raises(ConfigError, match="positive"):
        parse_config(TWO_LEVEL.replace("[0.75, 0.25]", "[1.25, -0.25]"))
    with pytest.raises(ConfigError, match="at least two"):
        parse_config(TWO_LEVEL.replace("[0.75, 0.25]", "[1.0]"))


def test_hamiltonian_validation():
    with pytest.raises(ConfigError, match="2x2"):
        parse_config(TWO_LEVEL.replace("[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 1.0, 2.0], [1.0, 0.0, 3.0]]"))
    with pytest.raises(ConfigError, match="row of numbers"):
        parse_config(TWO_LEVEL.replace("[1.0, 0.0]]", '[1.0, "x"]]'))


def test_model_kind_validation():
    with pytest.raises(ConfigError, match="unknown model kind"):
        parse_config(TWO_LEVEL.replace('"two-level"', '"three-level"'))


def test_state_tag_validation():
    with pytest.raises(ConfigError, match="unknown tag"):
        parse_config(TWO_LEVEL + '\n[state]\ntag = "bogus"\n')
    with pytest.raises(ConfigError, match="open-system"):
        parse_config(TWO_LEVEL + '\n[state]\ntag = "product"\n')


def test_state_field_validation():
    base = OPEN.replace('weights = [0.9, 0.1]', 'weights = [0.9, 0.2]')
    with pytest.raises(ConfigError, match="sum to 1"):
        parse_config(base)
    with pytest.raises(ConfigError, match="out of range"):
        parse_config(OPEN.replace('tag = "product"', 'tag = "perturbed-gibbs"\nreservoir = 7'))
    with pytest.raises(ConfigError, match="beta_prime"):
        parse_config(OPEN.replace('tag = "product"', 'tag = "perturbed-gibbs"\nbeta_prime = -1.0'))


def test_alpha_grid_validation():
    with pytest.raises(ConfigError, match="points"):
        parse_config(TWO_LEVEL + "\n[grids.alpha_re]\nmin = 0.0\nmax = 1.0\npoints = 0\n")
    with pytest.raises(ConfigError, match="below min"):
        parse_config(TWO_LEVEL + "\n[grids.alpha_re]\nmin = 1.0\nmax = 0.0\npoints = 3\n")


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(TWO_LEVEL.replace("schema_version = 1", "schema_version = 99"))
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(TWO_LEVEL.replace("schema_version = 1\n", ""))


def test_scan_routes_validation():
    with pytest.raises(ConfigError, match="unknown route"):
        parse_config(TWO_LEVEL + '\n[scan]\nroutes = ["direct", "psychic"]\n')


def test_scaling_validation():
    with pytest.raises(ConfigError, match="positive integer"):
        parse_config(TWO_LEVEL + "\n[scaling]\nchain_lengths = [0]\n")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(str(tmp_path / "nope.toml"))
    p = tmp_path / "ok.toml"
    p.write_text(TWO_LEVEL)
    assert load_config(str(p)) == parse_config(TWO_LEVEL)


def test_build_model_dispatch():
    two = build_model(parse_config(TWO_LEVEL))
    assert two.dim == 2
    assert np.allclose(two.reference.entries, np.diag([0.75, 0.25]))
    opened = build_model(parse_config(OPEN))
    assert isinstance(opened, OpenSystemModel)
    assert opened.dim == 8
    assert opened.betas == (1.0, 2.0)


def test_initial_state_tags():
    cfg = parse_config(OPEN)
    model = build_model(cfg)
    nu = initial_state(cfg, model)
    sys_block = nu.entries[:4, :4]
    assert np.trace(sys_block).real == pytest.approx(0.9, abs=1e-12)

    pure_cfg = parse_config(OPEN.replace('tag = "product"\nweights = [0.9, 0.1]', 'tag = "pure-random"\nseed = 5'))
    a = initial_state(pure_cfg, model)
    b = initial_state(pure_cfg, model)
    assert np.array_equal(a.entries, b.entries)
    w, _ = a.eig()
    assert w[-1] == pytest.approx(1.0, abs=1e-12)
    c = initial_state(pure_cfg, model, seed=6)
    assert not np.allclose(a.entries, c.entries)

    mixed_cfg = parse_config(TWO_LEVEL + '\n[state]\ntag = "mixed-random"\n')
    two = build_model(mixed_cfg)
    nu2 = initial_state(mixed_cfg, two)
    assert nu2.faithful

    pert_cfg = parse_config(OPEN.replace('tag = "product"\nweights = [0.9, 0.1]', 'tag = "perturbed-gibbs"'))
    pert = initial_state(pert_cfg, model)
    # default perturbation re-thermalizes reservoir 0 at half its beta
    assert not np.allclose(pert.entries, initial_state(cfg, model).entries)


def test_reference_state_is_shared():
    cfg = parse_config(TWO_LEVEL)
    model = build_model(cfg)
    assert initial_state(cfg, model) is model.reference


def test_scan_alphas_order():
    cfg = parse_config(
        TWO_LEVEL
        + "\n[grids.alpha_re]\nmin = 0.0\nmax = 1.0\npoints = 2\n"
        + "\n[grids.alpha_im]\nmin = -1.0\nmax = 1.0\npoints = 3\n"
    )
    grid = scan_alphas(cfg)
    want = np.array([0 - 1j, 0 + 0j, 0 + 1j, 1 - 1j, 1 + 0j, 1 + 1j])
    assert np.array_equal(grid, want)


def test_config_is_frozen():
    cfg = parse_config(TWO_LEVEL)
    assert isinstance(cfg, ExperimentConfig)
    with pytest.raises(AttributeError):
        cfg.out_dir = "elsewhere"
