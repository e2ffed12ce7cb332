import json

import pytest

from socialtrees.config import ConfigError, bundled, load_config, parse_config


@pytest.mark.parametrize("name,total", [("invertedpendulum.cfg", 250_000), ("lunarlander.cfg", 600_000),
                                        ("swimmer.cfg", 330_000)])
def test_bundled_configs_reproduce_budgets(name, total):
    assert load_config(name).planned_budget().total() == total


def test_comments_types_and_overrides():
    cfg = parse_config("# c\nenv = chain  # trailing\nalpha=0.5\ncarry_q = no\nseed = none\n", {"seed": 4})
    assert cfg.env == "chain" and cfg.alpha == 0.5 and cfg.carry_q is False and cfg.seed == 4


@pytest.mark.parametrize("text,field", [
    ("bogus = 1", "bogus"), ("alpha = fast", "alpha"), ("alpha = 2", "alpha"), ("population_size = 0", "population_size"),
    ("env = mujoco", "env"), ("collab_processes = 3", "collab_processes"), ("just text", "line 1"),
    ("collab_processes = 2\ncollab_iterations = 5\ncollab_episodes = 7", "collab_episodes"),
])
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert field in str(err.value)


def test_manifest_round_trip(tmp_path):
    cfg = load_config("desk.cfg", {"seed": 9})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"config": cfg.to_dict()}))
    assert load_config(str(path)) == cfg


def test_bundled_files_exist():
    for name in ("desk.cfg", "trees/reacher.tree"):
        assert bundled(name).is_file()
