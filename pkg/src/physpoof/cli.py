"""Command-line entry point: ``physpoof <subcommand> [options]``.

Every subcommand writes its artifacts plus a ``run.json`` provenance record
into the output directory. Settings come from built-in defaults, then an
optional JSON ``--config`` file, then explicit flags (highest precedence).
Exit status is 1 for invalid input and 2 for failures while running.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
from pathlib import Path

OUT_ENV = "PHYSPOOF_OUT"

PROFILES = {
    "desk": {"train_size": 50_000, "test_size": 10_000, "vae_steps": 20_000,
             "sup_steps": 5_000, "n_frames": 2_000, "sense_size": 50_000},
    "paper": {"train_size": 2_000_000, "test_size": 250_000, "vae_steps": 500_000,
              "sup_steps": 200_000, "n_frames": 20_000, "sense_size": 50_000},
}


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# Subcommand defaults. ``None`` means "take it from the profile".
DEFAULTS = {
    "gen": {"N": 16, "n1": 32, "delta_f_khz": [15.0], "pattern": "random", "pattern_params": {},
            "modulation": "bpsk", "power": "random", "power_seed": 0, "snr_db": None,
            "channel": "awgn", "noise_fraction": 0.0, "label_schema": "occupancy",
            "train_size": None, "test_size": None},
    "caf": {"case": "table1-1", "snr_db": 5.0, "M": 100_000, "max_lag": 400,
            "threshold_frac": 0.3},
    "train-supervised": {"data": None, "example1": False, "steps": None, "lr": 1e-4,
                         "batch_size": 100, "optimizer": "adam", "example1_size": 50_000,
                         "example1_test_size": 10_000, "example1_task": "classify",
                         "example1_optimizer": "sgd", "example1_lr": 5e-4, "example1_batch_size": 500},
    "train-vae": {"data": None, "variant": "factor", "beta": 10.0, "gamma": 5.0,
                  "capacity": 0.0, "capacity_steps": 0, "lambda_d": 10.0, "lambda_od": 10.0,
                  "negatives": "permute", "n_z": 20,
                  "hidden": [200, 400, 200], "eta": 1.0, "steps": None, "lr": 5e-4,
                  "batch_size": 100, "decoder_var": None, "warmup": 0},
    "sense": {"N": 16, "n1": 32, "snr_db": 5.0, "size": None, "n_z": 20, "steps": 3000},
    "metrics": {"vae": None, "data": None, "L": 500, "eps": [0.5, 1.0], "mode": "corrected"},
    "traverse": {"vae": None, "data": None, "L": 200, "eps": 0.5, "min_frac": 0.5},
    "spoof-eval": {"N": 16, "n1": 32, "delta_f_khz": [15.0], "pattern": "random",
                   "pattern_params": {}, "modulation": "bpsk", "power": "random",
                   "spoof_snr_db": 10.0, "ta_channel": "awgn", "ar_fading": "awgn",
                   "eb_n0_db": [0.0, 2.0, 4.0, 6.0, 8.0], "adversary": "oracle", "models": None,
                   "rx_mode": "oracle", "rx_models": None, "rx_snr_db": 16.0, "n_frames": None},
    "rx-eval": {"N": 16, "n1": 32, "delta_f_khz": [15.0], "pattern": "random",
                "pattern_params": {}, "modulation": "bpsk", "power": "random",
                "eb_n0_db": [0.0, 2.0, 4.0, 6.0, 8.0], "rx_mode": "oracle", "rx_models": None,
                "rx_snr_db": 16.0, "ar_fading": "awgn", "n_frames": None},
}

_JSON_KEYS = {"pattern_params", "hidden", "eps", "eb_n0_db", "delta_f_khz"}
# Types of keys whose default is ``None``; the rest are paths.
_OPTIONAL_TYPES = {"snr_db": float, "decoder_var": float, "train_size": int, "test_size": int,
                   "steps": int, "size": int, "n_frames": int}


def _flag(key):
    return "--" + key.replace("_", "-")


def _add_sub_flags(sub, name):
    for key, default in DEFAULTS[name].items():
        flags = [_flag(key)] + ([_flag(key.lower())] if key != key.lower() else [])
        if isinstance(default, bool):
            sub.add_argument(*flags, dest=key, action="store_const", const=True, default=None)
        elif key in _JSON_KEYS or isinstance(default, (list, dict)):
            sub.add_argument(*flags, dest=key, type=json.loads, default=None,
                             help="JSON value")
        else:
            if default is None:
                kind = _OPTIONAL_TYPES.get(key)
            else:
                kind = None if isinstance(default, str) else type(default)
            sub.add_argument(*flags, dest=key, default=None, type=kind)


GLOBAL_DEFAULTS = {"profile": "desk", "seed": 0, "threads": 1, "out": None, "config": None}


def _add_global_flags(p, suppress: bool):
    # Sub-parsers repeat the global flags so they may follow the subcommand;
    # there they only take effect when given.
    d = (lambda k: argparse.SUPPRESS) if suppress else GLOBAL_DEFAULTS.get
    p.add_argument("--profile", choices=sorted(PROFILES), default=d("profile"))
    p.add_argument("--seed", type=int, default=d("seed"))
    p.add_argument("--threads", type=int, default=d("threads"))
    p.add_argument("--out", default=d("out"), help=f"output directory (default ${OUT_ENV}/<command>)")
    p.add_argument("--config", default=d("config"), help="JSON file of subcommand settings")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="physpoof", description="PHY-spoofing simulation laboratory")
    _add_global_flags(p, suppress=False)
    subs = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in DEFAULTS:
        sub = subs.add_parser(name)
        _add_global_flags(sub, suppress=True)
        _add_sub_flags(sub, name)
    return p


def resolve_config(name: str, file_cfg: dict, args: argparse.Namespace) -> dict:
    unknown = set(file_cfg) - set(DEFAULTS[name])
    if unknown:
        raise ValidationError(f"unknown config keys for {name}: {sorted(unknown)}")
    cfg = dict(DEFAULTS[name])
    cfg.update(file_cfg)
    for key in DEFAULTS[name]:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


# --- output helpers ----------------------------------------------------------------

def _atomic_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    _atomic_text(path, buf.getvalue())
    return path


def write_run(out: Path, command: str, cfg: dict, global_args, outputs, results=None) -> None:
    import numpy as np

    record = {"command": command, "profile": global_args.profile, "seed": global_args.seed,
              "threads": global_args.threads, "config": cfg,
              "outputs": sorted(str(Path(o).relative_to(out)) for o in outputs),
              "versions": {"python": platform.python_version(), "numpy": np.__version__,
                           "physpoof": _version()}}
    if results is not None:
        record["results"] = results
    _atomic_text(out / "run.json", json.dumps(record, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    import numpy as np

    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # noqa: BLE001 - metadata missing in a source checkout
        return "0+unknown"


def _need(cfg, key):
    if cfg.get(key) in (None, ""):
        raise ValidationError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _dataset_config(cfg, snr_key="snr_db", channel_key="channel"):
    from .dataset import DatasetConfig

    return DatasetConfig(N=int(cfg["N"]), n1=int(cfg["n1"]),
                         delta_f=[float(v) * 1e3 for v in cfg["delta_f_khz"]],
                         pattern=cfg["pattern"], pattern_params=dict(cfg["pattern_params"]),
                         modulation=cfg["modulation"], power=cfg.get("power", "random"),
                         power_seed=int(cfg.get("power_seed", 0)),
                         snr_db=cfg.get(snr_key), channel=cfg.get(channel_key, "awgn"),
                         noise_fraction=float(cfg.get("noise_fraction", 0.0)),
                         label_schema=cfg.get("label_schema", "occupancy"))


# --- subcommands ---------------------------------------------------------------------

def cmd_gen(cfg, g, out):
    from . import dataset

    dcfg = _dataset_config(cfg)
    prof = PROFILES[g.profile]
    n_train = int(cfg["train_size"] or prof["train_size"])
    n_test = int(cfg["test_size"] or prof["test_size"])
    dataset.build(dcfg, n_train, g.seed, workers=g.threads, out_dir=out / "train")
    dataset.build(dcfg, n_test, g.seed + 1, workers=g.threads, out_dir=out / "test")
    files = [out / s / f for s in ("train", "test") for f in os.listdir(out / s)]
    return files, {"train_rows": n_train, "test_rows": n_test}


def cmd_caf(cfg, g, out):
    from . import cyclo

    case = str(cfg["case"])
    if not case.startswith("table1-") or case[-1] not in "123":
        raise ValidationError("case must be table1-1, table1-2 or table1-3")
    grid = cyclo.table1_case_caf(int(case[-1]), float(cfg["snr_db"]), int(cfg["M"]),
                                 int(cfg["max_lag"]), g.seed)
    peaks = cyclo.caf_peaks(grid, float(cfg["threshold_frac"]))
    amb = cyclo.ambiguity_set(peaks, cyclo.table1_candidates(), grid.T_s)
    path = write_csv(out / "caf.csv", ["tau_seconds", "magnitude"],
                     zip(grid.tau.tolist(), grid.magnitude.tolist()))
    return [path], {"peak_lags": peaks.tolist(), "spacing_s": cyclo.peak_spacing(peaks) * grid.T_s,
                    "ambiguity_set": [list(c) for c in amb]}


def cmd_train_supervised(cfg, g, out):
    from . import attack, dataset
    from .nn import TrainConfig

    steps = int(cfg["steps"] or PROFILES[g.profile]["sup_steps"])
    if cfg["example1"]:
        tr = dataset.build_example1(int(cfg["example1_size"]), seed=g.seed)
        te = dataset.build_example1(int(cfg["example1_test_size"]), seed=g.seed + 1)
        files, results = [], {}
        for tag, hidden in (("small", attack.EXAMPLE1_SMALL), ("large", attack.EXAMPLE1_LARGE)):
            tc = TrainConfig(lr=float(cfg["example1_lr"]), batch_size=int(cfg["example1_batch_size"]),
                             steps=steps, optimizer=cfg["example1_optimizer"], seed=g.seed)
            model, curve = attack.train_example1(tr, te, cfg["example1_task"], hidden, tc)
            model.save(out / f"example1_{tag}", {"task": cfg["example1_task"]})
            files += [out / f"example1_{tag}.json", out / f"example1_{tag}.f32le",
                      write_csv(out / f"example1_{tag}_curve.csv", ["step", "test_metric"],
                                [(int(s), float(v)) for s, v in curve])]
            results[tag] = float(curve[-1, 1])
        return files, results
    data = dataset.load(_need(cfg, "data"))
    tc = TrainConfig(lr=float(cfg["lr"]), batch_size=int(cfg["batch_size"]), steps=steps,
                     optimizer=cfg["optimizer"], seed=g.seed)
    models, traces = attack.train_supervised(data, tc)
    models.save(out / "models")
    files = [out / "models" / f for f in os.listdir(out / "models")]
    files.append(write_csv(out / "trace.csv", ["step", "upper_loss", "lower_loss"],
                           [(i, float(a), float(b)) for i, (a, b) in
                            enumerate(zip(traces["upper"], traces["lower"]))]))
    return files, {"final_upper_loss": float(traces["upper"][-1]),
                   "final_lower_loss": float(traces["lower"][-1])}


def _variant(cfg):
    from .vae import Variant

    kind = cfg["variant"]
    if kind == "plain":
        return Variant()
    if kind == "beta":
        return Variant.beta_vae(float(cfg["beta"]), float(cfg["capacity"]), int(cfg["capacity_steps"]))
    if kind == "dip":
        return Variant.dip(float(cfg["lambda_d"]), float(cfg["lambda_od"]))
    if kind == "factor":
        return Variant.factor(float(cfg["gamma"]), cfg["negatives"])
    raise ValidationError(f"unknown variant {kind!r}")


def cmd_train_vae(cfg, g, out):
    import numpy as np

    from . import dataset
    from .nn import TrainConfig
    from .vae import Vae, train_variant

    data = dataset.load(_need(cfg, "data"))
    steps = int(cfg["steps"] or PROFILES[g.profile]["vae_steps"])
    model = Vae(data.X.shape[1], int(cfg["n_z"]), cfg["hidden"], _variant(cfg), float(cfg["eta"]),
                rng=g.seed, dtype=np.float32, decoder_var=cfg["decoder_var"])
    hist = train_variant(model, data.X, TrainConfig(lr=float(cfg["lr"]),
                                                    batch_size=int(cfg["batch_size"]),
                                                    steps=steps, optimizer="adam", seed=g.seed),
                         warmup=int(cfg["warmup"]))
    model.save(out / "vae")
    files = [p for p in (out / "vae").rglob("*") if p.is_file()]
    files.append(write_csv(out / "history.csv", ["step", "loss", "kl", "recon", "penalty"],
                           [(i, float(a), float(b), float(c), float(d)) for i, (a, b, c, d) in
                            enumerate(zip(hist.loss, hist.kl, hist.recon, hist.penalty))]))
    return files, {"final_loss": float(hist.loss[-1]),
                   "reconstruction_error": model.reconstruction_error(data.X[:1000])}


def cmd_sense(cfg, g, out):
    from . import attack, dataset
    from .nn import TrainConfig

    size = int(cfg["size"] or PROFILES[g.profile]["sense_size"])
    dcfg = dataset.DatasetConfig(N=int(cfg["N"]), n1=int(cfg["n1"]), snr_db=float(cfg["snr_db"]),
                                 noise_fraction=0.5, label_schema="class")
    ds = dataset.build(dcfg, size, g.seed, workers=g.threads)
    res = attack.sense_spectrum(ds.X, ds.labels, n_z=int(cfg["n_z"]),
                                config=TrainConfig(lr=5e-4, batch_size=100, steps=int(cfg["steps"]),
                                                   seed=g.seed), seed=g.seed)
    edges, noise, signal = res.histograms()
    files = [write_csv(out / "sense.csv", ["row", "label", "energy"],
                       [(i, int(l), float(e)) for i, (l, e) in enumerate(zip(res.labels, res.energies))]),
             write_csv(out / "energy_hist.csv", ["bin_low", "bin_high", "noise", "signal"],
                       [(float(a), float(b), int(c), int(d))
                        for a, b, c, d in zip(edges[:-1], edges[1:], noise, signal)])]
    return files, {"accuracy": res.accuracy, "cluster_energy": list(res.cluster_energy),
                   "modes": list(res.modes())}


def cmd_metrics(cfg, g, out):
    import numpy as np

    from . import dataset, metrics
    from .vae import Vae

    model = Vae.load(_need(cfg, "vae"), dtype=np.float32)
    data = dataset.load(_need(cfg, "data"))
    dc = data.config
    rows = []
    if dc.pattern == "random":
        spec = metrics.GenerativeFactorSpec(dc.N, dc.n1, dc.modulation,
                                            dc.pattern_params.get("prob", 0.5))
        for name, fn in (("higgins", metrics.higgins_metric), ("kim", metrics.kim_metric)):
            try:
                rows.append(("vae", name, "", fn(model, spec, seed=g.seed)))
            except metrics.NoInformativeLatents:
                rows.append(("vae", name, "", float("nan")))
    for eps in cfg["eps"]:
        try:
            rep = metrics.traversal_metric(model, data.X, L=int(cfg["L"]), eps=float(eps),
                                           mode=cfg["mode"])
            rows.append(("vae", f"traversal_{cfg['mode']}", float(eps), rep.S0))
        except metrics.NoInformativeLatents:
            rows.append(("vae", f"traversal_{cfg['mode']}", float(eps), float("nan")))
    path = write_csv(out / "metrics.csv", ["model", "metric", "eps", "value"], rows)
    return [path], {f"{r[1]}{'@' + str(r[2]) if r[2] != '' else ''}": r[3] for r in rows}


def cmd_traverse(cfg, g, out):
    import warnings

    import numpy as np

    from . import dataset, metrics
    from .vae import Vae

    model = Vae.load(_need(cfg, "vae"), dtype=np.float32)
    data = dataset.load(_need(cfg, "data"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lmap = metrics.latent_map(model, data.X, eps=float(cfg["eps"]), L=int(cfg["L"]),
                                  min_frac=float(cfg["min_frac"]))
    rows = [(j, " ".join(str(b) for b in lmap.bins[j]), float(lmap.hit_rate[j].max()))
            for j in sorted(lmap.bins)]
    path = write_csv(out / "latent_map.csv", ["latent", "bins", "max_hit_rate"], rows)
    return [path], {"informative": lmap.n_informative, "bijective": lmap.is_bijective(),
                    "reliable": lmap.reliable, "warning": lmap.warning}


def _load_models(kind, path):
    if kind == "oracle":
        return None
    if path is None:
        raise ValidationError(f"{kind} inference needs --models")
    if kind == "supervised":
        from .attack import SupervisedModels

        return SupervisedModels.load(path)
    raise ValidationError("unsupervised models are built in-process; use the library API")


def _ber_rows(rep):
    return [(r["eb_n0_db"], r["ber"], r["ci_low"], r["ci_high"]) for r in rep.rows()]


def cmd_spoof_eval(cfg, g, out):
    from . import attack

    dcfg = _dataset_config(cfg, snr_key="spoof_snr_db", channel_key="ta_channel")
    scen = attack.Scenario(dcfg, cfg["eb_n0_db"], cfg["adversary"], cfg["rx_mode"], cfg["ar_fading"],
                           float(cfg["rx_snr_db"]),
                           int(cfg["n_frames"] or PROFILES[g.profile]["n_frames"]), g.seed)
    adv = _load_models(cfg["adversary"], cfg["models"])
    rx = _load_models("supervised", cfg["rx_models"]) if cfg["rx_mode"] == "dnn" else None
    rep = attack.spoof_ber_eval(scen, adv, rx)
    files = [write_csv(out / "ber.csv", ["eb_n0_db", "ber", "ci_low", "ci_high"], _ber_rows(rep)),
             write_csv(out / "baseline.csv", ["eb_n0_db", "ber"],
                       zip(rep.eb_n0_db.tolist(), rep.baseline.tolist()))]
    return files, {"occupancy_error": rep.occupancy_error,
                   "param_failure_rate": rep.param_failure_rate}


def cmd_rx_eval(cfg, g, out):
    from . import attack

    dcfg = _dataset_config(cfg)
    scen = attack.Scenario(dcfg, cfg["eb_n0_db"], "oracle", cfg["rx_mode"], cfg["ar_fading"],
                           float(cfg["rx_snr_db"]),
                           int(cfg["n_frames"] or PROFILES[g.profile]["n_frames"]), g.seed)
    rx = _load_models("supervised", cfg["rx_models"]) if cfg["rx_mode"] == "dnn" else None
    rep = attack.rx_reliability_eval(scen, rx)
    files = [write_csv(out / "ber.csv", ["eb_n0_db", "ber", "ci_low", "ci_high"], _ber_rows(rep)),
             write_csv(out / "baseline.csv", ["eb_n0_db", "ber"],
                       zip(rep.eb_n0_db.tolist(), rep.baseline.tolist()))]
    return files, {"occupancy_error": rep.occupancy_error,
                   "param_failure_rate": rep.param_failure_rate}


COMMANDS = {"gen": cmd_gen, "caf": cmd_caf, "train-supervised": cmd_train_supervised,
            "train-vae": cmd_train_vae, "sense": cmd_sense, "metrics": cmd_metrics,
            "traverse": cmd_traverse, "spoof-eval": cmd_spoof_eval, "rx-eval": cmd_rx_eval}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ValidationError("a subcommand is required")
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
        file_cfg = {}
        if args.config:
            try:
                file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
            if not isinstance(file_cfg, dict):
                raise ValidationError("config file must hold a JSON object")
        cfg = resolve_config(args.command, file_cfg, args)
        out = Path(args.out or os.path.join(os.environ.get(OUT_ENV, "runs"), args.command))
    except ValidationError as exc:
        print(f"physpoof: error: {exc}", file=sys.stderr)
        return 1
    try:
        out.mkdir(parents=True, exist_ok=True)
        files, results = COMMANDS[args.command](cfg, args, out)
        write_run(out, args.command, cfg, args, files, results)
    except ValidationError as exc:
        print(f"physpoof: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError) as exc:
        # Bad values surface from constructors once work starts; still the caller's input.
        print(f"physpoof: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        print(f"physpoof: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
