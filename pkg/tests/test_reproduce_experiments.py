"""Tests for the reproduction driver's environment checks and study configs."""

import json

import reproduce_experiments
from simulation_lab import expand_config_grid


class TestReproduceExperiments:

    def test_dependencies_available(self, capsys):
        assert reproduce_experiments.check_dependencies()
        out = capsys.readouterr().out
        assert '✅ Python 3.' in out
        assert '❌' not in out
        for package in reproduce_experiments.REQUIRED_PACKAGES:
            assert f'✅ {package} ' in out

    def test_old_interpreter_reported(self, capsys, monkeypatch):
        monkeypatch.setattr(reproduce_experiments, 'MIN_PYTHON', (99, 0))
        assert not reproduce_experiments.check_dependencies()
        assert 'needs 99.0+' in capsys.readouterr().out

    def test_quick_config_lowers_replications(self, tmp_path, monkeypatch):
        monkeypatch.setattr(reproduce_experiments, 'OUTPUT_DIR', tmp_path)
        study = reproduce_experiments.STUDIES[0]
        path = reproduce_experiments.write_study_config(study, quick=True)
        config = json.loads(path.read_text(encoding='utf-8'))
        assert config['B'] == reproduce_experiments.QUICK_REPLICATIONS[study['name']]
        assert path.parent == tmp_path / 'configs'

    def test_study_configs_are_valid(self):
        """Every shipped study config expands without errors."""
        ordering = reproduce_experiments.STUDIES[0]['config']
        configs = expand_config_grid(ordering)
        assert [cfg.A_size for cfg in configs] == list(range(9))
        assert all(cfg.h == 0.0 for cfg in configs)
