# Command-line harness for the peaked-state ITCF experiments.
#
# Exit codes: 0 ok, 2 bad config / usage, 3 runtime failure, 4 output failure.

import functools
import os
import sys
from dataclasses import replace
from datetime import datetime

import click
import ujson
from dotenv import load_dotenv

from circuits import export_qasm
from experiments import (
    build_circuit,
    compare_methods,
    emit_outputs,
    load_config,
    noise_scan,
    profile_experiment,
    run_experiment,
    sample_experiment,
    sweep_grover_T,
    tradeoff_table,
)
from noiselab import NoiseParams, parse_noise
from utils import ConfigError, OutputError, get_save_path

load_dotenv()

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_OUTPUT = 4


def exit_codes(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except (OutputError, OSError) as e:
            click.echo(f"output error: {e}", err=True)
            sys.exit(EXIT_OUTPUT)
        except click.exceptions.ClickException:
            raise
        except Exception as e:
            click.echo(f"runtime error: {type(e).__name__}: {e}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _noise_dict(text):
    if text is None:
        return None
    try:
        return parse_noise(text).to_dict()
    except ValueError as e:
        raise ConfigError("noise", str(e)) from None


def _env_defaults():
    seed = os.getenv("PEAKED_SEED")
    if not seed:
        return {}
    try:
        return {"seed": int(seed)}
    except ValueError:
        raise ConfigError("PEAKED_SEED", f"expected an integer, got {seed!r}") from None


def _configs(paths, seed, shots, noise):
    overrides = {"seed": seed, "shots": shots, "noise": _noise_dict(noise)}
    defaults = _env_defaults()
    configs = []
    for path in paths:
        configs += load_config(path, overrides, defaults)
    if not configs:
        raise ConfigError("--config", "no configs given")
    return configs


def _single(path, seed, shots, noise):
    configs = _configs([path], seed, shots, noise)
    if len(configs) != 1:
        raise ConfigError("--config", f"expected one config, file holds {len(configs)}")
    return configs[0]


def _say(quiet, msg):
    if not quiet:
        print(msg)


config_option = click.option("--config", "config_path", required=True, help="path to a JSON experiment config")
seed_option = click.option(
    "--seed", type=int, default=None, help="override the config seed (PEAKED_SEED only fills configs without one)"
)
shots_option = click.option("--shots", type=int, default=None, help="override the shot count (0 = exact only)")
noise_option = click.option("--noise", default=None, help="'p1,p2,trajectories' or 'nisq'")
out_option = click.option(
    "--out", "out_dir", default="results/", envvar="PEAKED_OUT_DIR", show_default=True, help="output directory"
)
format_option = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True)
quiet_option = click.option("--quiet", is_flag=True, help="no status lines or progress bars")


@click.group()
def cli():
    """Peaked-state ITCF estimation harness."""


@cli.command()
@config_option
@seed_option
@shots_option
@noise_option
@out_option
@format_option
@quiet_option
@click.option("--dump-trajectories", is_flag=True, help="also write per-trajectory estimates (noisy runs)")
@exit_codes
def run(config_path, seed, shots, noise, out_dir, fmt, quiet, dump_trajectories):
    """One experiment; writes an estimate report."""
    config = _single(config_path, seed, shots, noise)
    start = datetime.now()
    _say(quiet, f"running {config.label()} on {config.n_qubits} qubits...")
    if config.method != "haar":
        _say(quiet, "building circuit...")
    if config.shots:
        _say(quiet, f"sampling {config.shots} shots...")
    keep = dump_trajectories and config.noise is not None
    result = run_experiment(config, progress=not quiet, keep_trajectories=keep)
    report, noisy_run = result if keep else (result, None)
    path = emit_outputs(report, fmt, get_save_path(out_dir, config.method, config.n_qubits, config.T, config.seed, fmt))
    _say(quiet, f"c_ab={report.c_ab_projected} s_a={report.s_a} e_a={report.e_a}")
    if noisy_run is not None and noisy_run.per_trajectory is not None:
        traj_path = get_save_path(
            out_dir, config.method, config.n_qubits, config.T, config.seed, "csv", suffix="_trajectories"
        )
        emit_outputs(noisy_run.per_trajectory, "csv", traj_path)
        _say(quiet, f"trajectories saved to {traj_path}")
    _say(quiet, f"runtime: {datetime.now() - start}")
    _say(quiet, f"report saved to {path}")


@cli.command()
@config_option
@seed_option
@shots_option
@noise_option
@out_option
@format_option
@quiet_option
@click.option("--t-min", type=int, default=1, show_default=True)
@click.option("--t-max", type=int, default=10, show_default=True)
@exit_codes
def sweep(config_path, seed, shots, noise, out_dir, fmt, quiet, t_min, t_max):
    """Sweep Grover iterations T over [t-min, t-max]."""
    if t_min > t_max:
        raise ConfigError("--t-min", f"must be <= --t-max, got {t_min} > {t_max}")
    config = _single(config_path, seed, shots, noise)
    _say(quiet, f"sweeping T={t_min}..{t_max}...")
    result = sweep_grover_T(config, range(t_min, t_max + 1), progress=not quiet)
    path = emit_outputs(
        result, fmt, get_save_path(out_dir, "sweep", config.n_qubits, None, config.seed, fmt, suffix=f"_T{t_min}-{t_max}")
    )
    _say(quiet, f"sweep saved to {path}")


@cli.command()
@click.option("--config", "config_paths", multiple=True, required=True, help="config file(s); a file may hold a list")
@seed_option
@shots_option
@out_option
@format_option
@quiet_option
@exit_codes
def compare(config_paths, seed, shots, out_dir, fmt, quiet):
    """Method comparison table (method, S_A, C_AB, E_A)."""
    configs = _configs(config_paths, seed, shots, None)
    table = compare_methods(configs, progress=not quiet)
    _say(quiet, table.to_string(index=False))
    path = emit_outputs(table, fmt, get_save_path(out_dir, "compare", configs[0].n_qubits, None, configs[0].seed, fmt))
    _say(quiet, f"table saved to {path}")


@cli.command("export-qasm")
@config_option
@out_option
@quiet_option
@exit_codes
def export_qasm_cmd(config_path, out_dir, quiet):
    """Lower the configured circuit and write OpenQASM 2.0."""
    config = _single(config_path, None, None, None)
    _say(quiet, "building circuit...")
    circuit, _ = build_circuit(config)
    text = export_qasm(circuit)
    path = get_save_path(out_dir, config.method, config.n_qubits, config.T, config.seed, "qasm")
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    _say(quiet, f"qasm saved to {path}")


@cli.command()
@config_option
@seed_option
@shots_option
@noise_option
@out_option
@format_option
@quiet_option
@exit_codes
def sample(config_path, seed, shots, noise, out_dir, fmt, quiet):
    """Shot histogram of the prepared state."""
    config = _single(config_path, seed, shots, noise)
    _say(quiet, f"sampling {config.shots} shots...")
    hist = sample_experiment(config)
    path = emit_outputs(
        hist, fmt, get_save_path(out_dir, config.method, config.n_qubits, config.T, config.seed, fmt, suffix="_counts")
    )
    _say(quiet, f"{len(hist.counts)} distinct outcomes over {hist.total_shots} shots")
    _say(quiet, f"histogram saved to {path}")


@cli.command()
@config_option
@seed_option
@out_option
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@quiet_option
@click.option("--top", type=int, default=10, show_default=True, help="rows to print")
@exit_codes
def profile(config_path, seed, out_dir, fmt, quiet, top):
    """Per-basis-state projected weights against a_z."""
    config = _single(config_path, seed, None, None)
    df = profile_experiment(config)
    _say(quiet, df.sort_values("p", ascending=False).head(top).to_string(index=False))
    path = emit_outputs(
        df, fmt, get_save_path(out_dir, config.method, config.n_qubits, config.T, config.seed, fmt, suffix="_profile")
    )
    _say(quiet, f"profile saved to {path}")


@cli.command()
@click.option("--config", "config_paths", multiple=True, required=True)
@click.option("--noise", default="nisq", show_default=True, help="'p1,p2,trajectories' or 'nisq'")
@click.option("--scales", default=None, help="comma-separated noise scale factors; runs a noise scan instead")
@seed_option
@out_option
@format_option
@quiet_option
@exit_codes
def tradeoff(config_paths, noise, scales, seed, out_dir, fmt, quiet):
    """Depth against noisy signal loss, or a noise scan of one config."""
    params = NoiseParams(**_noise_dict(noise))
    configs = _configs(config_paths, seed, 0, None)
    if scales:
        if len(configs) != 1:
            raise ConfigError("--config", "a noise scan takes exactly one config")
        try:
            factors = [float(s) for s in scales.split(",")]
        except ValueError:
            raise ConfigError("--scales", f"expected comma-separated numbers, got {scales!r}") from None
        config = configs[0]
        result = noise_scan(replace(config, noise=params), factors, progress=not quiet)
        path = emit_outputs(
            result, fmt, get_save_path(out_dir, "noisescan", config.n_qubits, config.T, config.seed, fmt)
        )
        _say(quiet, f"noise scan saved to {path}")
        return
    table = tradeoff_table(configs, params, progress=not quiet)
    _say(quiet, table.to_string(index=False))
    path = emit_outputs(table, fmt, get_save_path(out_dir, "tradeoff", configs[0].n_qubits, None, configs[0].seed, fmt))
    _say(quiet, f"table saved to {path}")


@cli.command("show-config")
@config_option
@exit_codes
def show_config(config_path):
    """Print the resolved config and its assumptions."""
    config = _single(config_path, None, None, None)
    print(ujson.dumps(config.to_dict(), indent=2))
    for note in config.assumptions():
        print(note)


if __name__ == "__main__":
    cli()
