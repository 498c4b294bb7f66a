"""Command-line entry point: ``hrolf <command> ...``.

Every command validates its inputs and configuration before writing
anything, writes outputs atomically and leaves a ``<output>.manifest.json``
next to its main output.  Exit codes: 0 success, 2 configuration or shape
errors, 3 file format or I/O errors, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FormatError, HrolfError

log = logging.getLogger("hrolf")


@dataclass
class RunManifest:
    command: str
    config: str | None
    seed: int | None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, main_output: Path) -> Path:
        from .lightfield import _atomic_write_bytes

        path = Path(str(main_output).rstrip("/") + ".manifest.json")
        text = json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"
        _atomic_write_bytes(path, text.encode())
        return path


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AxB, got {text!r}") from None


def _check_out_dir(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.exists():
        raise ConfigError(f"output directory {parent} does not exist")


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --- synth -----------------------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .config import read_config, synth_config
    from .lightfield import LightField, save_lightfield
    from .synth import synth_scene

    cp = read_config(args.config)
    over = {"seed": args.seed}
    if args.views:
        over["s"], over["t"] = args.views
    if args.size:
        over["x"], over["y"] = args.size
    if args.channels:
        over["c"] = args.channels
    cfg, seed = synth_config(cp, over)
    out = Path(args.out)
    _check_out_dir(out)
    lf, disp = synth_scene(cfg, seed)
    disp_path = out.with_name(out.stem + ".disparity.lf4")
    save_lightfield(lf, out, args.format, "f32")
    save_lightfield(LightField(disp[..., None].astype(np.float32)), disp_path)
    RunManifest("synth", args.config, seed, [], [str(out), str(disp_path)],
                {"S": cfg.S, "T": cfg.T, "X": cfg.X, "Y": cfg.Y, "C": cfg.C,
                 "layers": [asdict(layer) for layer in cfg.layers]}).write(out)
    _emit(f"wrote\t{out}\t{cfg.S}x{cfg.T}x{cfg.X}x{cfg.Y}x{cfg.C}\ndisparity\t{disp_path}")
    return 0


# --- degrade ---------------------------------------------------------------------------------

def cmd_degrade(args) -> int:
    from .config import degradation_config, read_config, section
    from .degrade import decimate_angular, degrade_spatial, parse_angular_target
    from .lightfield import load_lightfield, save_lightfield

    cp = read_config(args.config)
    over = {"scale": args.scale, "noise_std": args.noise_std, "noise_seed": args.seed}
    cfg = degradation_config(cp, over)
    angular = args.angular or section(cp, "degrade").get("angular")
    target = parse_angular_target(angular) if angular else None
    out = Path(args.out)
    _check_out_dir(out)
    lf = load_lightfield(args.input)
    if lf.X % cfg.scale or lf.Y % cfg.scale:
        raise ConfigError(f"{lf.X}x{lf.Y} views are not divisible by scale {cfg.scale}")
    if target is not None:
        lf = decimate_angular(lf, target)
    if cfg.scale > 1 or cfg.noise_std > 0:
        lf = degrade_spatial(lf, cfg)
    save_lightfield(lf, out, args.format)
    RunManifest("degrade", args.config, cfg.noise_seed, [str(args.input)], [str(out)],
                {**asdict(cfg), "angular": angular}).write(out)
    _emit(f"wrote\t{out}\t{lf.S}x{lf.T}x{lf.X}x{lf.Y}x{lf.C}")
    return 0


# --- train -----------------------------------------------------------------------------------

def _dataset(path: Path):
    from .lightfield import load_lightfield

    if path.is_file():
        return [load_lightfield(path)], [str(path)]
    if not path.is_dir():
        raise ConfigError(f"dataset {path} does not exist")
    files = sorted(p for p in path.glob("*.lf4") if not p.name.endswith(".disparity.lf4"))
    if not files:
        raise ConfigError(f"no .lf4 fields in {path}")
    return [load_lightfield(p) for p in files], [str(p) for p in files]


def _history_tsv(rows) -> str:
    from .train import HISTORY_HEADER

    return HISTORY_HEADER + "\n" + "".join(r.line() + "\n" for r in rows)


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint, save_checkpoint
    from .config import model_config, read_config, train_config
    from .lightfield import _atomic_write_bytes
    from .losses import FeatureNet
    from .model import ModelConfig
    from .plotting import plot_loss_curves
    from .train import TrainConfig, train_loop

    cp = read_config(args.config)
    tover = {"steps": args.steps, "lr0": args.lr0, "beta": args.beta, "alpha": args.alpha,
             "patch": args.patch, "seed": args.seed, "steps_per_epoch": args.steps_per_epoch}
    mover = {"d": args.d, "n": args.n, "c": args.c, "scale": args.scale,
             "angular_in": args.angular_in, "angular_out": args.angular_out}
    start_step, params, velocity = 0, None, None
    if args.resume:
        ck = load_checkpoint(args.resume)
        mcfg = ck.model_config
        if any(v is not None for v in mover.values()):
            raise ConfigError("model options cannot change when resuming")
        base = dict(ck.train_config)
        base.update({k: v for k, v in tover.items() if v is not None})
        tcfg = TrainConfig.from_dict(base).validate()
        start_step, params = ck.step, ck.params
        velocity = {k[len("velocity."):]: v for k, v in ck.extra.items() if k.startswith("velocity.")}
    else:
        mcfg = model_config(cp, mover)
        tcfg = train_config(cp, tover)
    assert isinstance(mcfg, ModelConfig)
    out = Path(args.out)
    _check_out_dir(out)
    data, names = _dataset(Path(args.dataset))
    phi = None
    if args.features:
        from .checkpoint import load_feature_weights

        phi = FeatureNet(mcfg.channels, weights=load_feature_weights(args.features))

    t0 = time.perf_counter()
    every = max(1, tcfg.steps // 20)

    def report(row):
        if args.verbose and (row.step - start_step) % every == 0:
            _emit(row.line())

    res = train_loop(data, tcfg, mcfg, params=params, start_step=start_step, velocity=velocity,
                     phi=phi, on_step=report)
    elapsed = time.perf_counter() - t0
    extra = OrderedDict((f"velocity.{k}", v) for k, v in res.velocity.items())
    save_checkpoint(out, res.params, mcfg, tcfg.to_dict(), epoch=res.step // tcfg.steps_per_epoch,
                    step=res.step, extra=extra)
    hist_path = out.with_name(out.stem + ".history.tsv")
    _atomic_write_bytes(hist_path, _history_tsv(res.history).encode())
    outputs = [str(out), str(hist_path)]
    if res.history and not args.no_plots:
        outputs.append(str(plot_loss_curves(res.history, out.with_name(out.stem + ".loss.png"))))
    RunManifest("train", args.config, tcfg.seed, names + ([args.resume] if args.resume else []), outputs,
                {"model": mcfg.to_dict(), "train": tcfg.to_dict(), "start_step": start_step,
                 "end_step": res.step, "seconds": round(elapsed, 3)}).write(out)
    last = res.history[-1] if res.history else None
    _emit(f"checkpoint\t{out}\nsteps\t{start_step}\t{res.step}\n"
          + (f"final_loss\t{last.loss:.9g}\n" if last else "") + f"seconds\t{elapsed:.1f}")
    return 0


# --- sr --------------------------------------------------------------------------------------

def cmd_sr(args) -> int:
    from .checkpoint import load_checkpoint
    from .lightfield import load_lightfield, save_lightfield
    from .model import check_input, model_forward

    ck = load_checkpoint(args.checkpoint)
    lf = load_lightfield(args.input)
    check_input(lf, ck.model_config)
    out = Path(args.out)
    _check_out_dir(out)
    primary, final = model_forward(lf, ck.model_config, ck.params, training=False)
    result = final if args.output == "final" else primary
    save_lightfield(result, out, args.format)
    outputs = [str(out)]
    if args.primary_out:
        save_lightfield(primary, args.primary_out, args.format)
        outputs.append(str(args.primary_out))
    RunManifest("sr", None, ck.model_config.seed, [str(args.input), str(args.checkpoint)], outputs,
                {"output": args.output, "model": ck.model_config.to_dict()}).write(out)
    _emit(f"wrote\t{out}\t{result.S}x{result.T}x{result.X}x{result.Y}x{result.C}")
    return 0


# --- eval ------------------------------------------------------------------------------------

def cmd_eval(args) -> int:
    from .degrade import task_indices
    from .lightfield import _atomic_write_bytes, load_lightfield
    from .metrics import eval_lf
    from .plotting import plot_view_heatmap

    pred = load_lightfield(args.pred)
    truth = load_lightfield(args.truth)
    input_views = None
    if args.mode == "synthesized-only":
        if not args.angular_in:
            raise ConfigError("--mode synthesized-only needs --angular-in")
        input_views = (task_indices(truth.S, args.angular_in[0]), task_indices(truth.T, args.angular_in[1]))
    rep = eval_lf(pred, truth, args.mode, input_views)
    _emit(rep.to_text())
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        _atomic_write_bytes(d / "eval.txt", rep.to_text().encode())
        _atomic_write_bytes(d / "eval.tsv", rep.to_tsv().encode())
        outputs = [str(d / "eval.txt"), str(d / "eval.tsv")]
        if not args.no_plots:
            grid = np.full((pred.S, pred.T), np.nan)
            for v in rep.views:
                grid[v.s, v.t] = v.psnr
            outputs.append(str(plot_view_heatmap(grid, d / "eval_psnr.png", title=f"mean {rep.mean_psnr:.2f} dB")))
        RunManifest("eval", None, None, [str(args.pred), str(args.truth)], outputs,
                    {"mode": args.mode, "mean_psnr": rep.mean_psnr, "mean_ssim": rep.mean_ssim}).write(d / "eval")
    return 0


# --- epi -------------------------------------------------------------------------------------

def cmd_epi(args) -> int:
    from .lightfield import center_index, extract_epi, load_lightfield
    from .plotting import plot_epis, save_epi_png

    lf = load_lightfield(args.input)
    horizontal = args.orientation == "horizontal"
    si = args.spatial_index if args.spatial_index is not None else (lf.Y if horizontal else lf.X) // 2
    ai = args.angular_index if args.angular_index is not None else center_index(lf.T if horizontal else lf.S)
    epi = extract_epi(lf, args.orientation, si, ai, args.channel)
    fields = OrderedDict([(Path(args.input).stem, lf)])
    for item in args.compare or []:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        other = load_lightfield(path)
        extract_epi(other, args.orientation, si, ai, args.channel)  # range check before writing
        fields[name] = other
    out = Path(args.out)
    _check_out_dir(out)
    save_epi_png(epi, out, args.upscale)
    outputs = [str(out)]
    if len(fields) > 1 or args.figure:
        fig = out.with_name(out.stem + ".panel.png")
        outputs.append(str(plot_epis(fields, fig, args.orientation, si, ai, args.channel)))
    RunManifest("epi", None, None, [str(args.input), *(args.compare or [])], outputs,
                {"orientation": args.orientation, "spatial_index": si, "angular_index": ai}).write(out)
    _emit("\n".join(f"wrote\t{o}" for o in outputs))
    return 0


# --- baseline --------------------------------------------------------------------------------

def cmd_baseline(args) -> int:
    from .baseline import baseline
    from .lightfield import load_lightfield, save_lightfield

    lf = load_lightfield(args.input)
    if args.scale < 1:
        raise ConfigError("scale must be >= 1")
    if args.method not in ("bicubic", "linear"):
        raise ConfigError(f"unknown method {args.method!r}")
    out = Path(args.out)
    _check_out_dir(out)
    up = baseline(lf, args.scale, args.angular, args.method)
    save_lightfield(up, out, args.format)
    RunManifest("baseline", None, None, [str(args.input)], [str(out)],
                {"scale": args.scale, "method": args.method, "angular": args.angular}).write(out)
    _emit(f"wrote\t{out}\t{up.S}x{up.T}x{up.X}x{up.Y}x{up.C}")
    return 0


# --- gradcheck -------------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    _emit("case\tinput\tmax_rel_error\tresult")
    failed = []

    def show(case):
        for line in case.report.lines():
            name, err, verdict = line.split("\t")
            _emit(f"{case.name}\t{name.split(':', 1)[1]}\t{err}\t{verdict}")
        if not case.report.passed:
            failed.append(case.name)

    t0 = time.perf_counter()
    cases = run_suite(tol=args.tol, seed=args.seed, on_case=show)
    _emit(f"summary\t{len(cases) - len(failed)}/{len(cases)} cases passed\t{time.perf_counter() - t0:.1f}s\t"
          + ("PASS" if not failed else "FAIL"))
    return 0 if not failed else 4


# --- parser ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hrolf", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"hrolf {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    fmt = dict(choices=["lf4", "view-directory"], default="lf4")

    s = sub.add_parser("synth", help="render a synthetic layered scene")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--views", type=_pair, help="SxT")
    s.add_argument("--size", type=_pair, help="XxY")
    s.add_argument("--channels", type=int, choices=[1, 3])
    s.add_argument("--format", **fmt)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("degrade", help="blur, decimate and add noise; optionally drop views")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--scale", type=int)
    s.add_argument("--noise-std", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--angular", help="keep an AxB grid of views, e.g. 3x3")
    s.add_argument("--format", **fmt)
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("train", help="train a model on HR fields")
    s.add_argument("dataset", help="an lf4 file or a directory of them")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--config", help="file with [model] and [train] sections")
    s.add_argument("--resume", help="continue from this checkpoint")
    s.add_argument("--features", help="feature-extractor weights file")
    for name, typ in (("steps", int), ("lr0", float), ("alpha", float), ("beta", float), ("patch", int),
                      ("seed", int), ("steps-per-epoch", int), ("d", int), ("n", int), ("c", int), ("scale", int)):
        s.add_argument(f"--{name}", type=typ)
    s.add_argument("--angular-in", type=lambda v: "x".join(map(str, _pair(v))))
    s.add_argument("--angular-out", type=lambda v: "x".join(map(str, _pair(v))))
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sr", help="super-resolve a field with a checkpoint")
    s.add_argument("input")
    s.add_argument("checkpoint")
    s.add_argument("--out", required=True)
    s.add_argument("--output", choices=["final", "primary"], default="final")
    s.add_argument("--primary-out")
    s.add_argument("--format", **fmt)
    s.set_defaults(func=cmd_sr)

    s = sub.add_parser("eval", help="per-view PSNR/SSIM")
    s.add_argument("pred")
    s.add_argument("truth")
    s.add_argument("--mode", choices=["all-views", "synthesized-only"], default="all-views")
    s.add_argument("--angular-in", type=_pair, help="input view grid for synthesized-only scoring")
    s.add_argument("--out-dir")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("epi", help="dump an epipolar plane image")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--orientation", choices=["horizontal", "vertical"], default="horizontal")
    s.add_argument("--spatial-index", type=int)
    s.add_argument("--angular-index", type=int)
    s.add_argument("--channel", type=int, default=0)
    s.add_argument("--upscale", type=int, default=1)
    s.add_argument("--compare", nargs="*", help="more fields for the panel figure, NAME=PATH")
    s.add_argument("--figure", action="store_true", help="write the panel figure for a single field too")
    s.set_defaults(func=cmd_epi)

    s = sub.add_parser("baseline", help="bicubic or linear upsampling")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--scale", type=int, default=2)
    s.add_argument("--method", default="bicubic")
    s.add_argument("--angular", type=_pair)
    s.add_argument("--format", **fmt)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HrolfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FormatError.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
