"""Training loop with evaluation and checkpoints, plus the (r, D) sweep."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .circuit import ANGLES_PER_LAYER, EncoderConfig, QnlNetParams
from .classical_nn import CnnHead, PcaHead, PcaModel, pca_fit
from .data import DatasetSplit, NormStats, filter_and_relabel, fit_normalization, load_raw, normalize, shuffle, take
from .errors import CheckpointError, ConfigurationError, QnlNetError, TrainingError
from .loss_optim import AdamState, LrSchedule, adam_step, lr_decay
from .model import HybridModel, classical_param_count

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "qnlnet-checkpoint"
CHECKPOINT_VERSION = 1
METRICS_HEADER = ("epoch", "loss", "train_acc", "test_acc", "lr")
TIMING_HEADER = ("epoch", "seconds")
SUMMARY_HEADER = ("dataset", "ansatz", "model", "lr", "train_acc_mean", "train_acc_std",
                  "test_acc_mean", "test_acc_std", "n_runs", "n_failed")


@dataclass
class RunConfig:
    dataset: str = "mnist"
    classes: tuple = (0, 1)
    head: str = "pca"
    ansatz: int = 0
    reps_r: int = 1
    reps_D: int = 1
    epochs: int = 100
    lr: float = 1.5e-4
    gamma: float = 0.9
    seed: int = 0
    train_limit: int | None = None
    test_limit: int | None = None
    encoder_mode: str = "data_bound"
    readout: int = 0
    data_dir: str = "data"
    out_dir: str | None = None

    def __post_init__(self):
        self.classes = tuple(int(c) for c in self.classes)
        if self.dataset not in ("mnist", "cifar10"):
            raise ConfigurationError(f"dataset must be mnist or cifar10, got {self.dataset!r}")
        if len(self.classes) != 2 or self.classes[0] == self.classes[1]:
            raise ConfigurationError(f"classes must be two distinct ids, got {self.classes}")
        if not all(0 <= c <= 9 for c in self.classes):
            raise ConfigurationError(f"class ids must be in 0..9, got {self.classes}")
        if self.head not in ("cnn", "pca"):
            raise ConfigurationError(f"head must be cnn or pca, got {self.head!r}")
        if self.ansatz not in (0, 1, 2):
            raise ConfigurationError(f"ansatz must be 0, 1 or 2, got {self.ansatz}")
        for name in ("reps_r", "reps_D", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not self.lr > 0 or not 0 < self.gamma <= 1:
            raise ConfigurationError("lr must be positive and gamma in (0, 1]")
        for name in ("train_limit", "test_limit"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.encoder_mode not in ("data_bound", "trainable_scale"):
            raise ConfigurationError(f"unknown encoder mode {self.encoder_mode!r}")
        if not 0 <= self.readout < 4:
            raise ConfigurationError(f"readout qubit must be 0..3, got {self.readout}")

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(reps=self.reps_r, mode=self.encoder_mode)

    def to_dict(self):
        d = asdict(self)
        d["classes"] = list(self.classes)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class MetricsRow:
    epoch: int
    mean_train_loss: float
    train_accuracy: float
    test_accuracy: float
    lr: float
    wall_seconds: float


@dataclass
class TrainState:
    config: RunConfig
    model: HybridModel
    adam: AdamState
    schedule: LrSchedule
    norm: NormStats
    rng: np.random.Generator
    epoch: int = 0
    best_test_acc: float = -1.0
    metrics: list = field(default_factory=list)


@dataclass
class PreparedData:
    train: DatasetSplit
    test: DatasetSplit
    norm: NormStats


def prepare_data(config: RunConfig, raw_train=None, raw_test=None) -> PreparedData:
    """Load, filter, shuffle, subset, then normalize with train-only statistics."""
    a, b = config.classes
    raw_train = load_raw(config.dataset, config.data_dir, "train") if raw_train is None else raw_train
    raw_test = load_raw(config.dataset, config.data_dir, "test") if raw_test is None else raw_test
    train = filter_and_relabel(raw_train, a, b, config.dataset, "train")
    test = filter_and_relabel(raw_test, a, b, config.dataset, "test")
    train = take(shuffle(train, config.seed), config.train_limit)
    test = take(shuffle(test, config.seed + 1), config.test_limit)
    norm = fit_normalization(train)
    return PreparedData(normalize(train, norm), normalize(test, norm), norm)


def build_model(config: RunConfig, train: DatasetSplit, rng) -> HybridModel:
    if config.head == "pca":
        head = PcaHead(pca_fit(train.images.reshape(len(train), -1)), rng)
    else:
        head = CnnHead(train.images.shape[1:], rng)
    return HybridModel.build(head, config.encoder, config.ansatz, config.reps_D, rng, config.readout)


def parameter_report(model: HybridModel) -> dict:
    d = model.qparams.reps_ansatz
    r = model.encoder.reps
    classical = classical_param_count(model)
    return {
        "classical": classical,
        "ansatz": ANGLES_PER_LAYER * d,
        "encoder": model.encoder.n_qubits * r,
        "encoder_trainable": model.encoder.trainable,
        "trainable_total": model.n_params(),
        "closed_form_total": classical + ANGLES_PER_LAYER * d + model.encoder.n_qubits * r,
    }


def predict_proba(model: HybridModel, split: DatasetSplit) -> np.ndarray:
    """``(N, 2)`` class probabilities in sample order, dropout off."""
    return np.array([model.predict_proba(img) for img in split.images])


def evaluate(model: HybridModel, split: DatasetSplit) -> float:
    """Accuracy in percent; prediction is the more probable class (ties go to 0)."""
    if len(split) == 0:
        raise ConfigurationError("cannot evaluate an empty split")
    probs = predict_proba(model, split)
    pred = (probs[:, 1] > probs[:, 0]).astype(int)
    return 100.0 * float(np.mean(pred == split.labels))


def init_state(config: RunConfig, data: PreparedData) -> TrainState:
    rng = np.random.default_rng(config.seed)
    model = build_model(config, data.train, rng)
    return TrainState(config=config, model=model, adam=AdamState(lr=config.lr),
                      schedule=LrSchedule(config.lr, config.gamma), norm=data.norm, rng=rng)


def train_epoch(state: TrainState, train: DatasetSplit) -> float:
    """One pass over ``train`` with batch size 1. Returns the mean sample loss."""
    model, cfg = state.model, state.config
    order = np.random.default_rng(cfg.seed ^ state.epoch).permutation(len(train))
    training = model.head_kind == "cnn"
    total = 0.0
    state.adam.lr = state.schedule.lr
    for i in order:
        try:
            loss, grad = model.gradient(train.images[i], int(train.labels[i]), training=training, rng=state.rng)
        except QnlNetError as exc:
            raise TrainingError(str(exc), sample_index=int(i)) from exc
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError("non-finite loss or gradient", sample_index=int(i))
        model.set_param_vector(adam_step(state.adam, model.param_vector(), grad))
        total += loss
    return total / len(train)


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_metrics(out_dir, metrics) -> None:
    out_dir = Path(out_dir)
    _write_rows(out_dir / "metrics.csv", METRICS_HEADER,
                [(m.epoch, repr(float(m.mean_train_loss)), repr(float(m.train_accuracy)), repr(float(m.test_accuracy)),
                  repr(float(m.lr)))
                 for m in metrics])
    _write_rows(out_dir / "timing.csv", TIMING_HEADER, [(m.epoch, f"{m.wall_seconds:.3f}") for m in metrics])


def train(config: RunConfig, data: PreparedData | None = None, state: TrainState | None = None) -> TrainState:
    """Train for ``config.epochs`` epochs, evaluating both splits after each one.

    With ``config.out_dir`` set, writes ``metrics.csv``, ``timing.csv``,
    ``checkpoint.json`` (best test accuracy so far) and ``final.json``.
    """
    data = prepare_data(config) if data is None else data
    state = init_state(config, data) if state is None else state
    out = Path(config.out_dir) if config.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    report = parameter_report(state.model)
    log.info("parameters: %s", report)
    while state.epoch < config.epochs:
        start = time.perf_counter()
        lr = state.schedule.lr
        loss = train_epoch(state, data.train)
        lr_decay(state.schedule)
        state.epoch += 1
        train_acc = evaluate(state.model, data.train)
        test_acc = evaluate(state.model, data.test)
        row = MetricsRow(state.epoch, loss, train_acc, test_acc, lr, time.perf_counter() - start)
        state.metrics.append(row)
        log.info("epoch %d loss %.6f train %.2f test %.2f lr %.3g", row.epoch, loss, train_acc, test_acc, lr)
        if out is not None:
            write_metrics(out, state.metrics)
        if test_acc > state.best_test_acc:
            state.best_test_acc = test_acc
            if out is not None:
                save_checkpoint(state, out / "checkpoint.json")
    if out is not None:
        save_checkpoint(state, out / "final.json")
    return state


# --- checkpoints ----------------------------------------------------------

def _hex(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": [float(v).hex() for v in arr.reshape(-1)]}


def _unhex(obj) -> np.ndarray:
    try:
        return np.array([float.fromhex(s) for s in obj["data"]], dtype=float).reshape(obj["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed array entry: {exc}") from exc


def save_checkpoint(state: TrainState, path) -> None:
    model = state.model
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "model": {
            "head": model.head_kind,
            "input_shape": list(model.head.input_shape) if model.head_kind == "cnn" else None,
            "encoder": {"n_qubits": model.encoder.n_qubits, "reps": model.encoder.reps, "mode": model.encoder.mode},
            "ansatz": model.ansatz,
            "reps_ansatz": model.qparams.reps_ansatz,
            "readout": model.readout,
        },
        "params": {k: _hex(v) for k, v in model.named_parameters().items()},
        "pca": None,
        "norm": {"mean": _hex(state.norm.mean), "std": _hex(state.norm.std)},
        "adam": {
            "lr": float(state.adam.lr).hex(), "beta1": state.adam.beta1, "beta2": state.adam.beta2,
            "eps": state.adam.eps, "t": state.adam.t,
            "m": None if state.adam.m is None else _hex(state.adam.m),
            "v": None if state.adam.v is None else _hex(state.adam.v),
        },
        "schedule": {"base_lr": float(state.schedule.base_lr).hex(), "gamma": float(state.schedule.gamma).hex(),
                     "epoch": state.schedule.epoch},
        "epoch": state.epoch,
        "best_test_acc": float(state.best_test_acc).hex(),
        "rng_state": state.rng.bit_generator.state,
    }
    if model.head_kind == "pca":
        pca = model.head.pca
        doc["pca"] = {"mean": _hex(pca.mean), "components": _hex(pca.components),
                      "out_mean": _hex(pca.out_mean), "out_std": _hex(pca.out_std)}
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def _check_compatible(doc, config: RunConfig):
    m = doc["model"]
    expected = {
        "head": config.head, "ansatz": config.ansatz, "reps_ansatz": config.reps_D,
        "encoder.reps": config.reps_r, "encoder.mode": config.encoder_mode,
    }
    found = {
        "head": m["head"], "ansatz": m["ansatz"], "reps_ansatz": m["reps_ansatz"],
        "encoder.reps": m["encoder"]["reps"], "encoder.mode": m["encoder"]["mode"],
    }
    diff = {k: (found[k], expected[k]) for k in expected if found[k] != expected[k]}
    if diff:
        raise CheckpointError(f"checkpoint incompatible with config (found, expected): {diff}")


def load_checkpoint(path, config: RunConfig | None = None) -> TrainState:
    """Rebuild a ``TrainState``. With ``config``, refuse checkpoints of another shape."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} document")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')} unsupported (need {CHECKPOINT_VERSION})")
    try:
        saved_config = RunConfig.from_dict(doc["config"])
        if config is not None:
            _check_compatible(doc, config)
        m = doc["model"]
        encoder = EncoderConfig(n_qubits=m["encoder"]["n_qubits"], reps=m["encoder"]["reps"], mode=m["encoder"]["mode"])
        params = {k: _unhex(v) for k, v in doc["params"].items()}
        rng = np.random.default_rng()
        rng.bit_generator.state = doc["rng_state"]
        if m["head"] == "pca":
            p = doc["pca"]
            pca = PcaModel(_unhex(p["mean"]), _unhex(p["components"]), _unhex(p["out_mean"]), _unhex(p["out_std"]))
            head = PcaHead(pca, np.random.default_rng(0))
        else:
            head = CnnHead(tuple(m["input_shape"]), np.random.default_rng(0))
        qparams = QnlNetParams(params["quantum.angles"], params.get("quantum.scales"))
        model = HybridModel.build(head, encoder, m["ansatz"], qparams.reps_ansatz, np.random.default_rng(0),
                                  m["readout"])
        model.qparams = qparams
        named = model.named_parameters()
        if set(named) != set(params):
            raise CheckpointError(f"parameter names differ: {sorted(set(named) ^ set(params))}")
        for k, arr in named.items():
            if arr.shape != params[k].shape:
                raise CheckpointError(f"{k}: checkpoint shape {params[k].shape}, model shape {arr.shape}")
            arr[...] = params[k]
        a = doc["adam"]
        adam = AdamState(lr=float.fromhex(a["lr"]), beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], t=a["t"],
                         m=None if a["m"] is None else _unhex(a["m"]),
                         v=None if a["v"] is None else _unhex(a["v"]))
        s = doc["schedule"]
        schedule = LrSchedule(float.fromhex(s["base_lr"]), float.fromhex(s["gamma"]), s["epoch"])
        norm = NormStats(_unhex(doc["norm"]["mean"]), _unhex(doc["norm"]["std"]), "train")
        return TrainState(config=saved_config, model=model, adam=adam, schedule=schedule, norm=norm, rng=rng,
                          epoch=doc["epoch"], best_test_acc=float.fromhex(doc["best_test_acc"]))
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, QnlNetError) as exc:
        raise CheckpointError(f"checkpoint schema error: {exc!r}") from exc


def evaluate_checkpoint(path, data_dir=None, test_limit=None) -> float:
    state = load_checkpoint(path)
    cfg = state.config
    if data_dir is not None:
        cfg.data_dir = str(data_dir)
    raw = load_raw(cfg.dataset, cfg.data_dir, "test")
    test = filter_and_relabel(raw, *cfg.classes, cfg.dataset, "test")
    test = take(shuffle(test, cfg.seed + 1), cfg.test_limit if test_limit is None else test_limit)
    return evaluate(state.model, normalize(test, state.norm))


# --- sweep ----------------------------------------------------------------

SWEEP_GRID = (1, 2, 3)


def mean_std(values):
    """Mean and sample standard deviation (n - 1 denominator; 0 for a single value)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


def sweep(config: RunConfig, reps_r=SWEEP_GRID, reps_D=SWEEP_GRID, data: PreparedData | None = None,
          trainer=None) -> dict:
    """Train every (r, D) combination and summarize final-epoch accuracies.

    ``trainer`` defaults to :func:`train`; failed runs are recorded with
    their error and excluded from the summary statistics.
    """
    trainer = train if trainer is None else trainer
    data = prepare_data(config) if data is None else data
    base = Path(config.out_dir) if config.out_dir else None
    runs = []
    for r in reps_r:
        for d in reps_D:
            cfg = RunConfig.from_dict(dict(config.to_dict(), reps_r=r, reps_D=d,
                                           out_dir=str(base / f"r{r}_D{d}") if base else None))
            try:
                st = trainer(cfg, data=data)
                last = st.metrics[-1]
                runs.append({"reps_r": r, "reps_D": d, "status": "ok", "train_acc": last.train_accuracy,
                             "test_acc": last.test_accuracy, "error": ""})
            except Exception as exc:  # noqa: BLE001 - a failed run must not stop the sweep
                log.warning("sweep run r=%d D=%d failed: %s", r, d, exc)
                runs.append({"reps_r": r, "reps_D": d, "status": "failed", "train_acc": float("nan"),
                             "test_acc": float("nan"), "error": f"{type(exc).__name__}: {exc}"})
    ok = [run for run in runs if run["status"] == "ok"]
    train_m, train_s = mean_std([run["train_acc"] for run in ok])
    test_m, test_s = mean_std([run["test_acc"] for run in ok])
    summary = {
        "dataset": config.dataset, "ansatz": config.ansatz,
        "model": "CNN-QNL-Net" if config.head == "cnn" else "PCA-QNL-Net", "lr": config.lr,
        "train_acc_mean": train_m, "train_acc_std": train_s, "test_acc_mean": test_m, "test_acc_std": test_s,
        "n_runs": len(ok), "n_failed": len(runs) - len(ok),
    }
    if base is not None:
        base.mkdir(parents=True, exist_ok=True)
        _write_rows(base / "runs.csv", ("reps_r", "reps_D", "status", "train_acc", "test_acc", "error"),
                    [tuple(run[k] for k in ("reps_r", "reps_D", "status", "train_acc", "test_acc", "error"))
                     for run in runs])
        with open(base / "summary.csv", "w", newline="") as f:
            f.write("# accuracies are final-epoch values; mean and n-1 std over successful runs\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            w.writerow([summary[k] for k in SUMMARY_HEADER])
    return {"runs": runs, "summary": summary}
