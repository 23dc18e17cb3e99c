"""Command-line entry points.

Configs are line-oriented ``[section] key = value`` files; unknown sections
or keys are rejected so a typo cannot silently change an experiment.  Every
command writes a manifest (config hash, seed, package version) next to its
outputs, and reruns with the same config and seed produce byte-identical
files.

Commands: ``gen-world``, ``train``, ``sweep``, ``verify-theory``, ``export``.
Exit codes: 0 success, 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import bayes_risk as br
from . import entropy_coder as ec
from . import infotheory as it
from . import pipeline as pl
from . import rd_oracle as rd
from . import simworld as sw
from . import vq


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "world": {
        "h", "w", "classes", "agents", "noise", "density",
        "rect_min", "rect_max", "seed",
    },
    "codebook": {"n_base", "n_res", "iters", "seed"},
    "discriminator": {"steps", "lr", "hidden", "seed"},
    "train": {"worlds", "seed", "tau_c_choices"},
    "sweep": {"tau_c", "tau_mi", "seeds", "coder", "selector"},
    "verify": {"sources", "tables", "mc_draws", "z_max", "seed"},
}


def _parse_lines(text: str) -> dict:
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _KNOWN_KEYS:
                raise ConfigError(f"unknown section '{current}' (line {lineno})")
            sections.setdefault(current, {})
            continue
        if "=" not in line or current is None:
            raise ConfigError(f"malformed line {lineno}: {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("fov_"):
            if current != "world" or not key[4:].isdigit():
                raise ConfigError(f"unknown key '{key}' in section '{current}' (line {lineno})")
        elif key not in _KNOWN_KEYS[current]:
            raise ConfigError(f"unknown key '{key}' in section '{current}' (line {lineno})")
        sections[current][key] = value
    return sections


def _floats(value: str) -> tuple:
    return tuple(float(x) for x in value.split(",") if x.strip())


def _ints(value: str) -> tuple:
    return tuple(int(x) for x in value.split(",") if x.strip())


def _parse_fov(value: str) -> tuple:
    shapes = []
    for part in value.split(";"):
        toks = part.split()
        if not toks:
            continue
        kind = toks[0]
        if kind == "full":
            shapes.append("full")
        elif kind == "rect":
            shapes.append(("rect", *(int(t) for t in toks[1:5])))
        elif kind == "sector":
            shapes.append(("sector", *(float(t) for t in toks[1:6])))
        else:
            raise ConfigError(f"unknown fov shape '{kind}'")
    if not shapes:
        raise ConfigError("empty fov spec")
    return tuple(shapes)


@dataclass
class RunConfig:
    world: sw.WorldConfig
    train: pl.TrainConfig
    sweep: pl.SweepConfig
    verify_sources: int = 50
    verify_tables: int = 200
    verify_mc_draws: int = 1_000_000
    verify_z_max: int = 4
    verify_seed: int = 7


def parse_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    sections = _parse_lines(text)

    w = sections.get("world", {})
    n_agents = int(w.get("agents", 2))
    fovs = []
    for a in range(n_agents):
        key = f"fov_{a}"
        fovs.append(_parse_fov(w[key]) if key in w else ("full",))
    extra_fovs = [k for k in w if k.startswith("fov_") and int(k[4:]) >= n_agents]
    if extra_fovs:
        raise ConfigError(f"unknown key '{extra_fovs[0]}' in section 'world'")
    noise_vals = _floats(w.get("noise", "0.05"))
    noise = noise_vals[0] if len(noise_vals) == 1 else tuple(noise_vals)
    try:
        world = sw.WorldConfig(
            h=int(w.get("h", 32)),
            w=int(w.get("w", 32)),
            n_classes=int(w.get("classes", 4)),
            n_agents=n_agents,
            fovs=tuple(fovs),
            noise=noise,
            density=float(w.get("density", 0.5)),
            rect_min=int(w.get("rect_min", 3)),
            rect_max=int(w.get("rect_max", 7)),
            seed=int(w.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [world] config: {exc}")

    cb = sections.get("codebook", {})
    disc = sections.get("discriminator", {})
    tr = sections.get("train", {})
    try:
        train = pl.TrainConfig(
            n_base=int(cb.get("n_base", 4)),
            n_res=int(cb.get("n_res", 64)),
            kmeans_iters=int(cb.get("iters", 25)),
            codebook_seed=int(cb.get("seed", 101)),
            disc_steps=int(disc.get("steps", 600)),
            disc_lr=float(disc.get("lr", 0.3)),
            disc_hidden=int(disc.get("hidden", 64)),
            disc_seed=int(disc.get("seed", 202)),
            n_train_worlds=int(tr.get("worlds", 4)),
            train_seed=int(tr.get("seed", 9000)),
            tau_c_choices=_floats(tr.get("tau_c_choices", "0.2,0.5,0.8")),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid training config: {exc}")

    sweep_sec = sections.get("sweep", {})
    try:
        sweep = pl.SweepConfig(
            tau_c_grid=_floats(sweep_sec.get("tau_c", "0.3,0.9")),
            tau_mi_grid=_floats(sweep_sec.get("tau_mi", "0.0,1.0,inf")),
            n_base=int(cb.get("n_base", 4)),
            n_res=int(cb.get("n_res", 64)),
            seeds=_ints(sweep_sec.get("seeds", "1,2,3")),
            coder=sweep_sec.get("coder", "task_entropy"),
            selector=sweep_sec.get("selector", "mi"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [sweep] config: {exc}")

    v = sections.get("verify", {})
    try:
        return RunConfig(
            world=world,
            train=train,
            sweep=sweep,
            verify_sources=int(v.get("sources", 50)),
            verify_tables=int(v.get("tables", 200)),
            verify_mc_draws=int(v.get("mc_draws", 1_000_000)),
            verify_z_max=int(v.get("z_max", 4)),
            verify_seed=int(v.get("seed", 7)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [verify] config: {exc}")


def _write_manifest(out: Path, command: str, config_path: str, seed) -> None:
    digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "config_sha256": digest,
        "seed": seed,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True) + "\n")


# --- commands ----------------------------------------------------------------


def cmd_gen_world(cfg: RunConfig, out: Path, config_path: str) -> int:
    world = pl.make_world(cfg.world)
    sw.save_labels(world.gt, str(out / f"world_{cfg.world.seed}.txt"))
    for a in range(cfg.world.n_agents):
        sw.save_labels(world.obs[a], str(out / f"obs_{cfg.world.seed}_agent{a}.txt"))
    _write_manifest(out, "gen-world", config_path, cfg.world.seed)
    print(f"world seed {cfg.world.seed} written to {out}")
    return 0


def cmd_train(cfg: RunConfig, out: Path, config_path: str) -> int:
    stack = pl.train_all(cfg.world, cfg.train)
    vq.save_codebook(stack.codebook, str(out / "codebook.txt"))
    from .mi_estimator import save_discriminator

    save_discriminator(stack.discriminator, str(out / "discriminator.txt"))
    (out / "tau_draws.txt").write_text(
        "\n".join(format(t, ".17g") for t in stack.tau_draws) + "\n"
    )
    _write_manifest(out, "train", config_path, cfg.train.train_seed)
    print(f"trained stack written to {out}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, config_path: str, jobs: int) -> int:
    stack = pl.train_all(cfg.world, cfg.train)
    results = pl.run_sweep(cfg.world, stack, cfg.sweep, jobs=jobs)
    (out / "results.csv").write_text(pl.results_csv(results, cfg.world.n_classes))
    (out / "summary.csv").write_text(pl.summary_csv(pl.summarize(results)))
    first_world = pl.make_world(replace(cfg.world, seed=int(cfg.sweep.seeds[0])))
    codes = pl.build_codes(stack.codebook, cfg.sweep.coder)
    msg, _, _, _ = pl._directed_message(
        first_world,
        stack,
        codes,
        float(cfg.sweep.tau_c_grid[0]),
        float(cfg.sweep.tau_mi_grid[0]),
        cfg.sweep.selector,
        0,
        1,
    )
    (out / "sample_message.bin").write_bytes(ec.message_to_bytes(msg))
    _write_manifest(out, "sweep", config_path, list(cfg.sweep.seeds))
    print(f"{len(results)} sweep points written to {out}")
    return 0


def cmd_export(results_path: str, out: Path) -> int:
    text = Path(results_path).read_text().strip().splitlines()
    header = text[0].split(",")
    idx = {name: i for i, name in enumerate(header)}
    groups: dict[tuple, list] = {}
    for line in text[1:]:
        cells = line.split(",")
        key = (cells[idx["coder"]], cells[idx["selector"]])
        point = (
            float(cells[idx["tau_c"]]),
            float(cells[idx["tau_mi"]]),
            float(cells[idx["total_bits"]]),
            float(cells[idx["mean_iou"]]),
        )
        groups.setdefault(key, []).append(point)
    for (coder, selector), points in sorted(groups.items()):
        agg: dict[tuple, list] = {}
        for tau_c, tau_mi, bits, iou in points:
            agg.setdefault((tau_c, tau_mi), []).append((bits, iou))
        rows = []
        for (tau_c, tau_mi), vals in sorted(agg.items()):
            bits = float(np.mean([v[0] for v in vals]))
            iou = float(np.mean([v[1] for v in vals]))
            rows.append((bits, iou, tau_c, tau_mi))
        rows.sort()
        flags = []
        for i, a in enumerate(rows):
            flags.append(
                not any(
                    (b[0] <= a[0] and b[1] >= a[1]) and (b[0] < a[0] or b[1] > a[1])
                    for j, b in enumerate(rows)
                    if j != i
                )
            )
        lines = ["mean_total_bits,mean_iou,tau_c,tau_mi,pareto"]
        for (bits, iou, tau_c, tau_mi), flag in zip(rows, flags):
            lines.append(
                f"{bits:.17g},{iou:.17g},{tau_c:.17g},{tau_mi:.17g},{int(flag)}"
            )
        (out / f"curve_{coder}_{selector}.csv").write_text("\n".join(lines) + "\n")
    print(f"curves written to {out}")
    return 0


# --- theory verification -------------------------------------------------


def _verify_checks(cfg: RunConfig):
    """Yields (name, margin, tolerance, passed) tuples; margins are the
    worst-case observed values, tolerances the acceptance thresholds."""
    rng = np.random.default_rng(cfg.verify_seed)

    worst = 0.0
    for _ in range(cfg.verify_tables):
        t = it.random_joint([("Y", 3), ("X_s", 3), ("X_r", 2)], rng)
        lhs = it.conditional_mi(t, "Y", "X_s", ["X_r"]).value
        rhs = (
            it.entropy(t, "X_s").value
            - it.conditional_entropy(t, "X_s", ["Y"]).value
            - it.interaction_information(t, "Y", "X_s", "X_r").value
        )
        worst = max(worst, abs(lhs - rhs))
    yield "identity_rate_decomposition", worst, 1e-10, worst <= 1e-10

    worst = 0.0
    for _ in range(100):
        t = it.random_joint([("A", 3), ("B", 4)], rng)
        lhs = it.joint_entropy(t, ["A", "B"]).value
        rhs = it.entropy(t, "A").value + it.conditional_entropy(t, "B", ["A"]).value
        worst = max(worst, abs(lhs - rhs))
    yield "identity_chain_rule", worst, 1e-10, worst <= 1e-10

    t = it.random_joint([("A", 5)], rng)
    bits = it.entropy(t, "A", "bits").value
    nats = it.entropy(t, "A", "nats").value
    diff = abs(bits * it.LN2 - nats)
    yield "unit_conversion", diff, 1e-12, diff <= 1e-12

    worst = -np.inf
    for _ in range(50):
        t = it.random_joint([("Y", 3), ("X_s", 4)], rng)
        kernel = rng.dirichlet(np.ones(3), size=4)
        ext = it.extend_with_channel(t, "X_s", "Z", kernel)
        gap = (
            it.mutual_information(ext, "Y", "Z").value
            - it.mutual_information(ext, "Y", "X_s").value
        )
        worst = max(worst, gap)
    yield "data_processing_inequality", worst, 1e-10, worst <= 1e-10

    min_margin = np.inf
    for _ in range(cfg.verify_sources):
        sizes = rng.integers(2, 5, size=3)
        t = it.random_joint(
            [("Y", int(sizes[0])), ("X_s", int(sizes[1])), ("X_r", int(sizes[2]))],
            rng,
        )
        z = int(min(sizes[1], cfg.verify_z_max))
        for p in rd.enumerate_frontier(t, z):
            bound = rd.theoretical_bound(t, max(p.distortion_nats, 0.0))
            min_margin = min(min_margin, p.rate_bits - bound)
    yield "bound_soundness", min_margin, -1e-9, min_margin >= -1e-9

    source, enc = rd.make_separable_source(
        np.array([0.5, 0.5]), np.array([0.25, 0.75]), np.array([0.4, 0.6])
    )
    h_zy, i_zxr, gap = rd.check_conditions(source, enc)
    worst = max(h_zy, i_zxr, gap)
    yield "bound_tightness_conditions", worst, 1e-9, worst <= 1e-9

    t = it.random_joint([("Y", 3), ("X_s", 3), ("X_r", 3)], rng)
    enc2 = rd.EncoderSpec("deterministic", np.array([0, 1, 0]))
    ext = rd.attach_encoder(t, enc2)
    worst = max(
        it.conditional_mi(ext, "Z", "X_r", ["X_s"]).value,
        it.conditional_mi(ext, "Z", "Y", ["X_s"]).value,
    )
    yield "markov_premise", worst, 1e-10, worst <= 1e-10

    t = it.random_joint([("Y", 3), ("X_s", 3), ("X_r", 2)], rng)
    deltas = np.linspace(0.0, 1.5, 16)
    vals = [rd.theoretical_bound(t, float(d)) for d in deltas]
    worst = max((b - a) for a, b in zip(vals, vals[1:]))
    yield "bound_monotone_in_delta", worst, 1e-12, worst <= 1e-12

    worst = 0.0
    worst_neg = np.inf
    for _ in range(50):
        t = it.random_joint([("Y", 2), ("X_s", 3), ("X_r", 2)], rng)
        kernel = rng.dirichlet(np.ones(2), size=3)
        ext = it.extend_with_channel(t, "X_s", "Z", kernel)
        d = br.pragmatic_distortion(ext, "segmentation")
        want = (
            it.conditional_mi(ext, "Y", "X_s", ["X_r"], "nats").value
            - it.conditional_mi(ext, "Y", "Z", ["X_r"], "nats").value
        )
        worst = max(worst, abs(d - want))
        worst_neg = min(worst_neg, d)
    yield "distortion_identity", worst, 1e-10, worst <= 1e-10
    yield "distortion_nonnegative", worst_neg, -1e-10, worst_neg >= -1e-10

    n = cfg.verify_mc_draws
    est = br.mc_l1_gaussian(1.0, n, np.random.default_rng(cfg.verify_seed + 1))
    rel = abs(est - br.SQRT_2_OVER_PI) / br.SQRT_2_OVER_PI
    yield "mc_gaussian_l1", rel, 0.01, rel <= 0.01

    est = br.mc_l1_laplace(3.0, n, np.random.default_rng(cfg.verify_seed + 2))
    rel = abs(est - 3.0) / 3.0
    yield "mc_laplace_l1", rel, 0.01, rel <= 0.01

    t = it.random_joint([("Y", 3), ("X", 3)], rng)
    closed = br.bayes_risk_ce(t, "Y", ["X"])
    est = br.mc_ce(t, "Y", ["X"], n, np.random.default_rng(cfg.verify_seed + 3))
    rel = abs(est - closed) / max(closed, 1e-12)
    yield "mc_cross_entropy", rel, 0.01, rel <= 0.01

    h = rng.uniform(0, 3, size=(200, 2))
    h1, h2 = np.maximum(h[:, 0], h[:, 1]), np.minimum(h[:, 0], h[:, 1])
    worst = float(((h1 - h2) / math.e - (np.exp(h1 - 1) - np.exp(h2 - 1))).max())
    yield "first_order_exponential_bound", worst, 1e-12, worst <= 1e-12


def cmd_verify_theory(cfg: RunConfig, out: Path, config_path: str) -> int:
    lines = []
    all_ok = True
    for name, margin, tol, ok in _verify_checks(cfg):
        all_ok &= ok
        status = "PASS" if ok else "FAIL"
        lines.append(f"{status} {name} margin={margin:.3e} tol={tol:.1e}")
    lines.append("OK" if all_ok else "FAILED")
    (out / "report.txt").write_text("\n".join(lines) + "\n")

    rng = np.random.default_rng(cfg.verify_seed)
    rows = ["source,encoder_id,rate_bits,distortion_nats,h_z_given_y,mi_z_xr,bound_bits,pareto_flag"]
    for src_id in range(min(cfg.verify_sources, 10)):
        sizes = rng.integers(2, 5, size=3)
        t = it.random_joint(
            [("Y", int(sizes[0])), ("X_s", int(sizes[1])), ("X_r", int(sizes[2]))],
            rng,
        )
        z = int(min(sizes[1], cfg.verify_z_max))
        for p in rd.enumerate_frontier(t, z):
            bound = rd.theoretical_bound(t, max(p.distortion_nats, 0.0))
            rows.append(
                f"src{src_id},{p.encoder_id},{p.rate_bits:.17g},"
                f"{p.distortion_nats:.17g},{p.cond_h_z_given_y:.17g},"
                f"{p.mi_z_xr:.17g},{bound:.17g},{int(p.pareto)}"
            )
    (out / "frontier.csv").write_text("\n".join(rows) + "\n")
    _write_manifest(out, "verify-theory", config_path, cfg.verify_seed)
    print("\n".join(lines))
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pragcomm",
        description="task-oriented compression experiments on synthetic perception worlds",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen-world", "train", "sweep", "verify-theory"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("export")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "export":
        try:
            return cmd_export(args.results, out)
        except (OSError, KeyError, ValueError, IndexError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = replace(
                cfg,
                world=replace(cfg.world, seed=args.seed),
                train=replace(cfg.train, train_seed=args.seed + 9000),
                sweep=replace(cfg.sweep, seeds=(args.seed,)),
            )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "gen-world":
            return cmd_gen_world(cfg, out, args.config)
        if args.command == "train":
            return cmd_train(cfg, out, args.config)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.config, jobs=args.jobs)
        if args.command == "verify-theory":
            return cmd_verify_theory(cfg, out, args.config)
    except (ValueError, ec.CodingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
