from __future__ import annotations

import json
import math

import pytest
from pydantic import ValidationError

from scmfem.config import build_study_config, load_app_config
from scmfem.schemas import StudyConfig, StepEvent
from scmfem.settings import load_settings


def test__defaults_match_the_reference_study():
    config = StudyConfig()
    assert (config.omega_deg, config.levels, config.h0, config.grading_radius) == (270.0, 6, 0.25, 0.1)
    assert config.method == "scm" and config.case == "paper" and config.solver == "cg"
    assert config.data_exponent == -0.4999
    assert config.effective_mu == pytest.approx(1.0 / 3.0, rel=1e-14)
    assert config.omega == pytest.approx(1.5 * math.pi)


def test__grading_parameter_for_the_slit_like_domain():
    config = StudyConfig(omega_deg=355.0)
    assert config.effective_mu == pytest.approx(5.0 / 355.0, rel=1e-12)
    assert StudyConfig(omega_deg=355.0, mu=0.5).effective_mu == 0.5


def test__full_switches_the_level_count():
    assert StudyConfig(levels=3).effective_levels == 3
    assert StudyConfig(levels=3, full=True, full_levels=7).effective_levels == 7


@pytest.mark.parametrize(
    "values",
    [
        {"omega_deg": 90.0},
        {"omega_deg": 90.0, "case": "smooth"},
        {"omega_deg": 400.0},
        {"levels": 0},
        {"mu": 1.5},
        {"data_exponent": -1.0},
        {"method": "adaptive"},
    ],
)
def test__invalid_study_configs(values):
    with pytest.raises(ValidationError):
        StudyConfig(**values)


def test__convex_angle_is_fine_for_the_standard_method():
    config = StudyConfig(omega_deg=90.0, method="standard", case="smooth")
    assert config.effective_mu == 1.0


def test__config_file_then_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SCMFEM_PROJECT_ROOT", str(tmp_path))
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"runs_dir": "out", "study": {"levels": 4, "omega_deg": 355.0}}), encoding="utf-8")
    app = load_app_config(path)
    assert app.runs_dir == (tmp_path / "out").resolve()
    study = build_study_config(app, {"levels": 2, "mu": None})
    assert study.levels == 2
    assert study.omega_deg == 355.0
    assert study.mu is None
    with pytest.raises(KeyError):
        build_study_config(app, {"bogus": 1})


def test__missing_explicit_config_is_an_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_app_config(tmp_path / "absent.json")


def test__environment_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("SCMFEM_PROJECT_ROOT", str(tmp_path))
    monkeypatch.setenv("SCMFEM_RUNS_DIR", str(tmp_path / "elsewhere"))
    monkeypatch.setenv("SCMFEM_MAX_WORKERS", "not-a-number")
    settings = load_settings()
    assert settings.project_root == tmp_path.resolve()
    assert settings.runs_dir == (tmp_path / "elsewhere").resolve()
    assert settings.config_path == (tmp_path / "config.json").resolve()
    assert settings.max_workers == 2

    app = load_app_config()
    assert app.study_defaults == {}
    assert app.runs_dir == settings.runs_dir


def test__step_event_has_a_utc_timestamp():
    event = StepEvent(step="mesh", status="running", message="level 0")
    assert event.timestamp.endswith("Z")
