"""Command-line entry points: simulate, train-meta, train-lstmfc, eval, serve, bench.

Configuration files are JSON; every default is overridable and unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
import time

import click
import numpy as np

from . import baselines, evalharness, kernels, meta, nets, players, rink
from .errors import ConfigurationError


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError("config file must contain a JSON object")
    return data


def _take(cfg: dict, allowed: dict) -> dict:
    """Merge cfg over defaults, rejecting keys not present in the defaults."""
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(cfg)
    return merged


def _rink_config(section: dict | None) -> rink.RinkConfig:
    return rink.RinkConfig.from_dict(section) if section else rink.RinkConfig()


def _archetype(section: dict | None, seed: int, prefix: str) -> players.Archetype:
    if section is None:
        return players.sample_archetype(seed, id_prefix=prefix)
    if "level" in section:
        extra = set(section) - {"level"}
        if extra:
            raise ConfigurationError(
                f"archetype level preset takes no other keys: {sorted(extra)}"
            )
        return baselines.level_to_archetype(section["level"])
    fields = _take(section, {
        "max_speed_frac": 0.6, "reaction_delay_steps": 4,
        "aim_noise_std": 0.1, "aggression": 0.5, "defense_depth": 0.25,
    })
    return players.Archetype(id=f"{prefix}-cfg", **fields)


def _build_task_splits(n_players: int, base_seed: int, demo_steps: int,
                       opponent_level: int, config: rink.RinkConfig):
    opponent = baselines.level_to_archetype(opponent_level)
    population = players.make_population(n_players, base_seed)
    splits = []
    for i, arch in enumerate(population):
        traj = players.generate_demo(arch, opponent, demo_steps,
                                     seed=base_seed + i, config=config)
        splits.append(players.split_demo(traj))
    return population, splits


@click.group()
def main() -> None:
    """Dynamic difficulty adjustment toolkit for the air-hockey testbed."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON match config.")
@click.option("--seed", type=int, default=0, show_default=True)
def simulate(config_path: str | None, seed: int) -> None:
    """Run one scripted-vs-scripted match and print its result as JSON."""
    cfg = _take(_load_config(config_path), {
        "steps": 3600, "player": None, "opponent": None, "rink": None,
    })
    rcfg = _rink_config(cfg["rink"])
    player = _archetype(cfg["player"], seed * 2 + 1, "player")
    opponent = _archetype(cfg["opponent"], seed * 2 + 2, "opponent")

    cv = rcfg.to_vector()
    sv = rink.reset(rcfg, seed).to_vector()
    ctrl_a = players.make_controller(player, seed * 4 + 1)
    ctrl_b = players.make_controller(opponent, seed * 4 + 2)
    goals = [0, 0]
    ys = []
    for _ in range(cfg["steps"]):
        obs_a = rink.observe_vector(sv, rink.SIDE_A, rcfg)
        obs_b = rink.observe_vector(sv, rink.SIDE_B, rcfg)
        act_a, ctrl_a = players.scripted_act(player, obs_a, ctrl_a)
        act_b, ctrl_b = players.scripted_act(opponent, obs_b, ctrl_b)
        sv, goal, _, _ = kernels.step_kernel(
            sv, act_a[0], act_a[1], act_b[0], act_b[1], cv)
        ys.append(sv[1])
        if goal == kernels.GOAL_FOR_A:
            goals[0] += 1
        elif goal == kernels.GOAL_FOR_B:
            goals[1] += 1
    click.echo(json.dumps({
        "seed": seed,
        "steps": cfg["steps"],
        "player": player.id,
        "opponent": opponent.id,
        "goals": goals,
        "possession": evalharness.compute_possession(ys),
    }, indent=2))


_TRAIN_DATA_DEFAULTS = {
    "n_players": 8, "base_seed": 0, "demo_steps": 1000, "opponent_level": 5,
    "rink": None,
}


@main.command("train-meta")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def train_meta(config_path: str | None, out_path: str) -> None:
    """Meta-train the adaptive policy on a synthetic player population."""
    cfg = _take(_load_config(config_path),
                {**_TRAIN_DATA_DEFAULTS, "meta": None, "init_seed": 0})
    mcfg = meta.MetaConfig.from_dict(cfg["meta"] or {})
    rcfg = _rink_config(cfg["rink"])
    _, splits = _build_task_splits(cfg["n_players"], cfg["base_seed"],
                                   cfg["demo_steps"], cfg["opponent_level"],
                                   rcfg)
    rng = np.random.default_rng(cfg["base_seed"] + 1)

    def sampler(iteration: int):
        idx = sorted(rng.choice(len(splits), size=min(mcfg.meta_batch_size,
                                                      len(splits)),
                                replace=False))
        return [splits[i] for i in idx]

    t0 = time.perf_counter()
    params, log = meta.meta_train(mcfg, sampler, init_seed=cfg["init_seed"])
    elapsed = time.perf_counter() - t0
    nets.save_checkpoint(out_path, params, meta={
        "kind": "meta_policy", "iterations": mcfg.iterations,
        "train_seconds": elapsed,
    })
    click.echo(json.dumps({
        "out": out_path,
        "iterations": len(log),
        "final_objective": log[-1]["meta_objective"] if log else None,
        "train_seconds": elapsed,
    }, indent=2))


@main.command("train-lstmfc")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def train_lstmfc(config_path: str | None, out_path: str) -> None:
    """Train the embedding baseline on a synthetic player population."""
    cfg = _take(_load_config(config_path),
                {**_TRAIN_DATA_DEFAULTS, "train": None, "init_seed": 0})
    tcfg_fields = _take(cfg["train"] or {}, {
        "iterations": 100, "lr": 1e-3, "tasks_per_batch": 4,
    })
    tcfg = baselines.LstmFcTrainConfig(**tcfg_fields)
    rcfg = _rink_config(cfg["rink"])
    _, splits = _build_task_splits(cfg["n_players"], cfg["base_seed"],
                                   cfg["demo_steps"], cfg["opponent_level"],
                                   rcfg)
    t0 = time.perf_counter()
    params, log = baselines.lstmfc_train(splits, tcfg, seed=cfg["init_seed"])
    elapsed = time.perf_counter() - t0
    baselines.save_lstmfc_checkpoint(out_path, params, meta={
        "kind": "lstmfc", "iterations": tcfg.iterations,
        "train_seconds": elapsed,
    })
    click.echo(json.dumps({
        "out": out_path,
        "iterations": len(log),
        "final_loss": log[-1]["loss"] if log else None,
        "train_seconds": elapsed,
    }, indent=2))


@main.command("eval")
@click.option("--methods", default="fast_adapt,lstm_fc,ladder",
              show_default=True, help="Comma-separated method list.")
@click.option("--players", "n_players", type=int, default=10,
              show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--meta-ckpt", type=click.Path(exists=True), default=None)
@click.option("--lstmfc-ckpt", type=click.Path(exists=True), default=None)
@click.option("--fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--throughput/--no-throughput", default=False,
              help="Also measure training wall-clock per epoch (json only; "
                   "makes output timing-dependent).")
def eval_cmd(methods: str, n_players: int, out_path: str,
             config_path: str | None, meta_ckpt: str | None,
             lstmfc_ckpt: str | None, fmt: str, throughput: bool) -> None:
    """Evaluate difficulty-adjustment methods over a synthetic population."""
    cfg = _take(_load_config(config_path), {
        "population_seed": 10_000,
        "session_seed": 0,
        "pre_session_steps": 3600,
        "session_steps": 14400,
        "readapt_at": 7200,
        "fixed_level": 9,
        "meta": None,
        "rink": None,
        "throughput_demo_steps": 512,
        "throughput_epochs": 3,
    })
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    for m in method_list:
        if m not in evalharness.METHODS:
            raise ConfigurationError(f"unknown method {m!r}")

    assets = evalharness.EvalAssets(
        meta_cfg=meta.MetaConfig.from_dict(cfg["meta"] or {}))
    if meta_ckpt:
        assets.meta_params, _ = nets.load_checkpoint(meta_ckpt)
    if lstmfc_ckpt:
        assets.lstmfc_params, _ = baselines.load_lstmfc_checkpoint(lstmfc_ckpt)

    population = players.make_population(n_players, cfg["population_seed"])
    template = evalharness.SessionPlan(
        method=method_list[0],
        pre_session_steps=cfg["pre_session_steps"],
        session_steps=cfg["session_steps"],
        readapt_at=cfg["readapt_at"],
        fixed_level=cfg["fixed_level"],
    )
    results = evalharness.run_population(
        method_list, population, assets, plan_template=template,
        seed0=cfg["session_seed"])
    report = evalharness.aggregate(results)

    if fmt == "csv":
        evalharness.export_report(report, out_path, "csv")
    else:
        payload = evalharness.report_to_dict(report)
        if throughput:
            rcfg = _rink_config(cfg["rink"])
            _, splits = _build_task_splits(
                min(4, n_players), cfg["population_seed"],
                cfg["throughput_demo_steps"], evalharness.NEUTRAL_LEVEL, rcfg)
            payload["throughput"] = evalharness.training_throughput(
                splits, epochs=cfg["throughput_epochs"],
                seed=cfg["session_seed"])
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--ckpt", "meta_ckpt", type=click.Path(exists=True),
              default=None, help="Meta-policy checkpoint for fast_adapt.")
@click.option("--lstmfc-ckpt", type=click.Path(exists=True), default=None)
def serve(port: int, meta_ckpt: str | None, lstmfc_ckpt: str | None) -> None:
    """Run the live WebSocket game server."""
    from . import service

    assets = evalharness.EvalAssets()
    if meta_ckpt:
        assets.meta_params, _ = nets.load_checkpoint(meta_ckpt)
    if lstmfc_ckpt:
        assets.lstmfc_params, _ = baselines.load_lstmfc_checkpoint(lstmfc_ckpt)
    service.main_serve(port, assets=assets)


@main.command()
@click.option("--steps", type=int, default=200_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def bench(steps: int, seed: int) -> None:
    """Compare the compiled physics kernel against the pure-NumPy fallback."""
    rcfg = rink.RinkConfig()
    cv = rcfg.to_vector()
    rng = np.random.default_rng(seed)
    actions = rng.uniform(-1.0, 1.0, size=(steps, 4))

    def run(kernel) -> tuple[float, np.ndarray]:
        sv = rink.reset(rcfg, seed).to_vector()
        t0 = time.perf_counter()
        for i in range(steps):
            a = actions[i]
            sv, _, _, _ = kernel(sv, a[0], a[1], a[2], a[3], cv)
        return time.perf_counter() - t0, sv

    compiled = kernels.get_numba_kernel()
    if compiled is not None:
        run(compiled)  # warm-up triggers JIT compilation
    t_numpy, sv_numpy = run(kernels.step_kernel_numpy)
    result = {
        "steps": steps,
        "numba_active": kernels.NUMBA_ACTIVE,
        "numpy_steps_per_s": steps / t_numpy,
    }
    if compiled is not None:
        t_numba, sv_numba = run(compiled)
        result["numba_steps_per_s"] = steps / t_numba
        result["speedup"] = t_numpy / t_numba
        result["identical_final_state"] = bool(
            np.array_equal(sv_numpy, sv_numba))
    click.echo(json.dumps(result, indent=2))


if __name__ == "__main__":
    main()
