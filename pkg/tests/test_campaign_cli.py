import hashlib
import json
from pathlib import Path

import pytest

from sidebandtwin.campaign import (PRESETS, execute, list_presets, preset_path,
                                   run_config_text, run_preset)
from sidebandtwin.cli import main, read_columns
from sidebandtwin.config import load_config, parse_config
from sidebandtwin.errors import ConfigError

BASE = """
[campaign]
name = unit
seed = 11
analyses = {analyses}
{extra}
[detector]
efficiency = 0.5
dark_rate_hz = 11

[filters]
fwhm_hz = 10e6, 10e6
fsr_hz = 5e9, 5.8e9
peak_transmission = 0.707, 0.707

[environment]
base_temperature_k = 4.0

[sequence]
period = red, gap, blue, gap
total_duration_s = 0.05

[pulse.red]
label = red
detuning = -mech
power_w = 1e-6
duration_s = 4e-6

[pulse.blue]
label = blue
detuning = +mech
power_w = 1e-6
duration_s = 4e-6

[gap.gap]
gap_s = 1e-6
"""


def config_text(analyses="simulate, occupancy", extra=""):
    return BASE.format(analyses=analyses, extra=extra)


def tree_digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


# --- presets ---------------------------------------------------------------------

def test_preset_catalogue():
    catalog = list_presets()
    assert list(catalog) == list(PRESETS)
    assert len(PRESETS) == 10
    assert all(desc for desc in catalog.values())


@pytest.mark.parametrize("name", PRESETS)
def test_presets_validate(name):
    cfg = load_config(preset_path(name))
    assert cfg.name == name
    assert cfg.analyses


def test_duty_cycle_preset_grid():
    cfg = load_config(preset_path("supp-fig8"))
    gaps = [float(g) for g in cfg.analysis_params["duty_cycle_sweep"]["gaps_s"].split(",")]
    assert min(gaps) == pytest.approx(1e-6) and max(gaps) == pytest.approx(96e-6)
    assert {p.power for p in cfg.plan.sequence.pulses} == {340e-9}


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_path("fig9")


@pytest.mark.parametrize("name", PRESETS)
def test_preset_reruns_are_byte_identical(name, tmp_path):
    first = run_preset(name, tmp_path / "a")
    second = run_preset(name, tmp_path / "b")
    assert first.status == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    files = first.manifest["files"]
    on_disk = tree_digest(tmp_path / "a")
    on_disk.pop("manifest.json")
    assert {k: v["sha256"] for k, v in files.items()} == on_disk
    assert second.manifest["plan_digest"] == first.manifest["plan_digest"]


def test_seed_override_changes_counts(tmp_path):
    a = run_config_text(config_text("simulate"), tmp_path / "a")
    b = run_config_text(config_text("simulate"), tmp_path / "b", seed=12)
    assert b.manifest["seed"] == 12
    assert (tmp_path / "a/counts.csv").read_text() != (tmp_path / "b/counts.csv").read_text()
    assert a.manifest["config_digest"] == b.manifest["config_digest"]


# --- campaign behaviour ----------------------------------------------------------

def test_manifest_contents(tmp_path):
    res = run_config_text(config_text(), tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["campaign"] == "unit" and man["seed"] == res.manifest["seed"] == 11
    assert [e["analysis"] for e in man["analyses"]] == ["simulate", "occupancy"]
    assert set(man["files"]) == {"counts.csv", "counts.json", "occupancy.json"}
    assert {"numpy", "scipy", "sidebandtwin", "python"} <= set(man["versions"])


def test_failed_analysis_does_not_stop_campaign(tmp_path):
    extra = "\n[analysis.mechanical_fit]\npoints = 3\n"
    res = run_config_text(config_text("mechanical_fit, simulate", extra), tmp_path)
    status = {e["analysis"]: e["status"] for e in res.manifest["analyses"]}
    assert res.status == 1
    assert status == {"mechanical_fit": "error", "simulate": "ok"}
    assert (tmp_path / "counts.csv").is_file()


def test_unknown_analysis_and_parameter(tmp_path):
    with pytest.raises(ConfigError):
        run_config_text(config_text("simulate, nonsense"), tmp_path)
    with pytest.raises(ConfigError):
        run_config_text(config_text("simulate", "\n[analysis.simulate]\nbogus = 1\n"),
                        tmp_path)


def test_parse_errors_carry_line_numbers():
    text = config_text().replace("power_w = 1e-6\nduration_s = 4e-6\n\n[pulse.blue]",
                                 "power_w = lots\nduration_s = 4e-6\n\n[pulse.blue]")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == text.splitlines().index("power_w = lots") + 1


# --- CLI -------------------------------------------------------------------------

@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "unit.ini"
    path.write_text(config_text())
    return path


def test_cli_simulate_and_estimate(cfg_file, tmp_path, capsys):
    assert main(["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "s")]) == 0
    counts = tmp_path / "s" / "counts.csv"
    assert counts.is_file()
    capsys.readouterr()
    assert main(["--format", "json", "estimate", "--counts", str(counts),
                 "--dark-rate", "11"]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == "profile-likelihood"
    assert main(["estimate", "--blue", "150", "2.5", "--red", "70", "2.5",
                 "--dark-rate", "11", "--format", "json"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out[out.index("{"):])
    assert doc["n_b"] == pytest.approx((70 - 27.5) / (150 - 70))


def test_cli_fit(tmp_path, capsys):
    import numpy as np
    p = np.geomspace(1e-8, 1e-5, 6)
    table = tmp_path / "power.txt"
    table.write_text("power rate\n" + "\n".join(f"{a} {3e9 * a ** 1.4}" for a in p))
    assert main(["fit", "power", str(table), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["exponent"] == pytest.approx(1.4)
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n3\n")
    assert main(["fit", "power", str(bad)]) == 2
    with pytest.raises(ConfigError):
        read_columns(bad)


def test_cli_exit_codes(tmp_path, cfg_file):
    broken = tmp_path / "broken.ini"
    broken.write_text(config_text().replace("efficiency = 0.5", "efficiency = 1.5"))
    assert main(["simulate", "--config", str(broken)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["simulate"]) == 2
    failing = tmp_path / "failing.ini"
    failing.write_text(config_text("mechanical_fit", "\n[analysis.mechanical_fit]\npoints = 3\n"))
    assert main(["report", "--config", str(failing), "--out", str(tmp_path / "f")]) == 1


def test_cli_sweep_and_preset_list(tmp_path, cfg_file, capsys):
    assert main(["preset", "list"]) == 0
    listed = capsys.readouterr().out
    assert all(name in listed for name in PRESETS)
    extra = "\n[analysis.duty_cycle_sweep]\ngaps_s = 1e-6, 4e-6\n"
    cfg_file.write_text(config_text("simulate", extra))
    assert main(["sweep", "duty-cycle", "--config", str(cfg_file),
                 "--out", str(tmp_path / "dc")]) == 0
    assert (tmp_path / "dc" / "duty_cycle_sweep.csv").is_file()


def test_report_renders_deterministic_pngs(tmp_path):
    for sub in ("a", "b"):
        assert main(["report", "--preset", "fig4d", "--out", str(tmp_path / sub)]) == 0
    pngs = sorted(p.name for p in (tmp_path / "a").glob("*.png"))
    assert pngs == ["duty_cycle_sweep.png"]
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert set(man["figures"]) == set(pngs)
    # re-rendering an existing run directory touches only the figures
    assert main(["report", str(tmp_path / "a")]) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
