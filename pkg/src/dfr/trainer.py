"""Joint training: registration, source classification, histogram matching and
phased pseudo-label refinement, plus evaluation and the component ablation."""
from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError
from .harness.datasets import DomainDataset
from .histmatch import HistogramConfig, coral_value, histogram_loss, median_bandwidth, mmd_value
from .network import NetworkParams, backward, cross_entropy, forward, init_params
from .numerics import Adam
from .pseudolabel import PseudoLabelSet, RefinementSchedule, compute_class_centers, select_pseudo_labels
from .registration import INIT_POLICIES, RegistrationConfig, register_features

log = logging.getLogger(__name__)

HIST_ACTIVATIONS = ("logits", "embedding")


@dataclass
class TrainConfig:
    alpha: float = 0.6
    beta: float = 0.01
    T: int = 3
    thresholds: tuple[float, ...] = (0.9, 0.6, 0.3)
    epochs: int = 210
    batch_size: int = 64
    learning_rate: float = 0.001
    bins: int = 10
    seed: int = 0
    reg_steps: int = 200
    reg_lr: float = 0.1
    reg_tolerance: float = 1e-6
    reg_init: str = "difference"
    reg_snap: bool = True
    enable_R: bool = True
    enable_H: bool = True
    enable_T: bool = True
    hist_activation: str = "logits"
    mmd_bandwidth: float = 0.0  # <= 0 selects the median heuristic
    readout_samples: int = 500
    record_time: bool = False

    def __post_init__(self):
        self.thresholds = tuple(float(p) for p in self.thresholds)

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigurationError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.T < 1 or len(self.thresholds) != self.T:
            raise ConfigurationError(f"T={self.T} but {len(self.thresholds)} thresholds given")
        if self.hist_activation not in HIST_ACTIVATIONS:
            raise ConfigurationError(f"hist_activation must be one of {HIST_ACTIVATIONS}")
        if self.reg_init not in INIT_POLICIES:
            raise ConfigurationError(f"reg_init must be one of {INIT_POLICIES}")
        if self.readout_samples < 2:
            raise ConfigurationError("readout_samples must be >= 2")
        for name in ("enable_R", "enable_H", "enable_T", "reg_snap", "record_time"):
            if not isinstance(getattr(self, name), (bool, np.bool_)):
                raise ConfigurationError(f"{name} must be a boolean")
        RefinementSchedule(self.thresholds)
        self.registration_config()
        self.histogram_config()

    def registration_config(self) -> RegistrationConfig:
        return RegistrationConfig(
            self.alpha, self.reg_steps, self.reg_lr, self.reg_tolerance, self.reg_init, self.reg_snap
        )

    def histogram_config(self) -> HistogramConfig:
        return HistogramConfig(bins=self.bins)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class EpochRecord:
    epoch: int
    L_R: float
    L_S: float
    L_H: float
    L_T: float
    n_pt: int
    target_accuracy: float
    mmd: float
    coral: float
    seconds: float
    pl_precision: float = float("nan")


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    selections: list[PseudoLabelSet] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


class _BatchStream:
    """Shuffled fixed-size batches over ``n`` rows; reshuffles when fewer than a batch remain."""

    def __init__(self, n: int, batch: int, rng: np.random.Generator):
        self.n, self.batch, self.rng = n, batch, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def reshuffle(self) -> None:
        self.order = self.rng.permutation(self.n)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos + self.batch > self.n:
            self.reshuffle()
        idx = self.order[self.pos : self.pos + self.batch]
        self.pos += self.batch
        return idx


def _check_inputs(cfg: TrainConfig, source: DomainDataset, target: DomainDataset) -> int:
    cfg.validate()
    if not source.labeled:
        raise ConfigurationError("source dataset must be labeled")
    if source.dim != target.dim:
        raise ConfigurationError(f"feature width mismatch: source {source.dim}, target {target.dim}")
    C = source.class_count()
    if C < 2:
        raise ConfigurationError("need at least 2 classes")
    missing = np.flatnonzero(np.bincount(source.labels, minlength=C) == 0)
    if missing.size:
        raise ConfigurationError(f"class {missing[0]} has no source samples")
    if target.labeled and target.labels.max() >= C:
        raise ConfigurationError(f"target label {target.labels.max()} outside the {C} source classes")
    if cfg.epochs > 0 and min(source.n, target.n) < cfg.batch_size:
        raise ConfigurationError(
            f"batch_size {cfg.batch_size} exceeds a domain size (source {source.n}, target {target.n})"
        )
    return C


def phase_of_epoch(epoch: int, epochs: int, T: int) -> int:
    """Index of the refinement round an epoch belongs to; T contiguous, near-equal phases."""
    return min(epoch * T // epochs, T - 1)


def evaluate(params: NetworkParams, dataset: DomainDataset) -> tuple[float, np.ndarray]:
    """Overall accuracy and per-class accuracy (NaN for classes absent from ``dataset``)."""
    if not dataset.labeled:
        raise DataError(f"{dataset.name or 'dataset'} has no labels to evaluate against")
    logits, _ = forward(params, dataset.features, "eval")
    pred = np.argmax(logits, axis=1)
    correct = pred == dataset.labels
    C = params.n_classes
    per_class = np.full(C, np.nan)
    for c in range(C):
        mask = dataset.labels == c
        if mask.any():
            per_class[c] = correct[mask].mean()
    return float(correct.mean()), per_class


def _readout_rows(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(n, size=min(n, k), replace=False))


def step_objective(
    params: NetworkParams,
    F: np.ndarray,
    y: np.ndarray,
    T_b: np.ndarray | None = None,
    P_b: np.ndarray | None = None,
    y_p: np.ndarray | None = None,
    beta: float = 0.01,
    hist_cfg: HistogramConfig | None = None,
    on_embedding: bool = False,
    update_running: bool = True,
) -> tuple[dict[str, float], dict[str, np.ndarray]]:
    """Losses and parameter gradients of L_S + beta * L_H + L_T for one batch step.

    ``F`` are the (registered) source rows with labels ``y``; ``T_b`` the target
    rows for the histogram term (None drops it) and ``P_b``/``y_p`` the
    pseudo-labelled rows (None drops L_T). All rows go through one train-mode
    pass so that BatchNorm normalizes every branch with the same statistics.
    """
    blocks = [F] + [b for b in (T_b, P_b) if b is not None]
    cuts = np.cumsum([len(b) for b in blocks])
    X = np.vstack(blocks) if len(blocks) > 1 else F
    logits, cache = forward(params, X, "train", update_running=update_running)
    dlogits = np.zeros_like(logits)
    demb = None
    losses = {}

    src = slice(0, cuts[0])
    losses["L_S"], dlogits[src] = cross_entropy(logits[src], y)
    if T_b is not None:
        tgt = slice(cuts[0], cuts[1])
        out = cache.embedding if on_embedding else logits
        losses["L_H"], g_s, g_t = histogram_loss(out[src], out[tgt], hist_cfg)
        if on_embedding:
            demb = np.zeros_like(out)
            demb[src], demb[tgt] = beta * g_s, beta * g_t
        else:
            dlogits[src] += beta * g_s
            dlogits[tgt] += beta * g_t
    if P_b is not None:
        pl = slice(cuts[-2], cuts[-1])
        losses["L_T"], dlogits[pl] = cross_entropy(logits[pl], y_p)
    grads, _ = backward(params, cache, dlogits, demb)
    return losses, grads


def train(
    cfg: TrainConfig, source: DomainDataset, target: DomainDataset
) -> tuple[NetworkParams, TrainHistory]:
    """Train the network; returns final parameters and one record per epoch."""
    C = _check_inputs(cfg, source, target)
    params = init_params(source.dim, C, seed=cfg.seed)
    history = TrainHistory()
    if cfg.epochs == 0:
        return params, history

    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    src_rng, tgt_rng, pl_rng, readout_rng = (np.random.default_rng(s) for s in seeds)
    Xs, ys, Xt = source.features, source.labels, target.features
    nb = cfg.batch_size
    batches_per_epoch = max(source.n, target.n) // nb
    src_stream = _BatchStream(source.n, nb, src_rng)
    tgt_stream = _BatchStream(target.n, nb, tgt_rng)
    src_rows = _readout_rows(source.n, cfg.readout_samples, readout_rng)
    tgt_rows = _readout_rows(target.n, cfg.readout_samples, readout_rng)

    reg_cfg = cfg.registration_config()
    hist_cfg = cfg.histogram_config()
    use_H = cfg.enable_H and cfg.beta != 0.0  # beta = 0 must match H disabled bit for bit
    on_embedding = cfg.hist_activation == "embedding"
    opt = Adam(lr=cfg.learning_rate)
    trainable = params.trainable()

    selection: PseudoLabelSet | None = None
    pl_stream: _BatchStream | None = None
    phase = -1
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        if cfg.enable_T and phase_of_epoch(epoch, cfg.epochs, cfg.T) != phase:
            phase = phase_of_epoch(epoch, cfg.epochs, cfg.T)
            src_logits, _ = forward(params, Xs, "eval")
            tgt_logits, _ = forward(params, Xt, "eval")
            centers = compute_class_centers(src_logits, ys, C)
            selection = select_pseudo_labels(tgt_logits, centers, cfg.thresholds[phase])
            history.selections.append(selection)
            pl_stream = None
            if len(selection) >= 2:
                pl_stream = _BatchStream(len(selection), min(nb, len(selection)), pl_rng)
            log.info("round %d: p=%.2f selected %d target samples", phase + 1, cfg.thresholds[phase], len(selection))

        src_stream.reshuffle()
        tgt_stream.reshuffle()
        sums = {"L_R": 0.0, "L_S": 0.0, "L_H": 0.0, "L_T": 0.0}
        n_T = 0
        for _ in range(batches_per_epoch):
            si = src_stream.next()
            ti = tgt_stream.next()
            S_b, y_b, T_b = Xs[si], ys[si], Xt[ti]
            if cfg.enable_R:
                reg = register_features(S_b, T_b, reg_cfg)
                F = reg.registered
                sums["L_R"] += reg.final_loss
            else:
                F = S_b

            P_b = y_p = None
            if pl_stream is not None:
                pi = pl_stream.next()
                P_b, y_p = Xt[selection.indices[pi]], selection.labels[pi]
            losses, grads = step_objective(
                params, F, y_b, T_b if use_H else None, P_b, y_p, cfg.beta, hist_cfg, on_embedding
            )
            sums["L_S"] += losses["L_S"]
            if use_H:
                sums["L_H"] += losses["L_H"]
            if P_b is not None:
                sums["L_T"] += losses["L_T"]
                n_T += 1

            opt.step(trainable, grads)

        history.records.append(
            _epoch_record(cfg, params, epoch, sums, n_T, batches_per_epoch, use_H, selection,
                          source, target, src_rows, tgt_rows, t0)
        )
    return params, history


def _epoch_record(cfg, params, epoch, sums, n_T, nbatch, use_H, selection, source, target,
                  src_rows, tgt_rows, t0) -> EpochRecord:
    nan = float("nan")
    acc = nan
    if target.labeled:
        acc, _ = evaluate(params, target)
    zs, _ = forward(params, source.features[src_rows], "eval")
    zt, _ = forward(params, target.features[tgt_rows], "eval")
    bw = cfg.mmd_bandwidth if cfg.mmd_bandwidth > 0 else median_bandwidth(zs, zt)
    n_pt = len(selection) if (cfg.enable_T and selection is not None) else 0
    precision = nan
    if n_pt and target.labeled:
        precision = selection.precision(target.labels)
    return EpochRecord(
        epoch=epoch,
        L_R=sums["L_R"] / nbatch if cfg.enable_R else nan,
        L_S=sums["L_S"] / nbatch,
        L_H=sums["L_H"] / nbatch if use_H else nan,
        L_T=sums["L_T"] / n_T if n_T else nan,
        n_pt=n_pt,
        target_accuracy=acc,
        mmd=mmd_value(zs, zt, bw),
        coral=coral_value(zs, zt),
        seconds=time.perf_counter() - t0 if cfg.record_time else nan,
        pl_precision=precision,
    )


# Variant names follow the ablation table: "-X" lists the components removed.
ABLATION_VARIANTS = (
    ("DFR-H/T/R", dict(enable_R=False, enable_H=False, enable_T=False)),
    ("DFR-R/T", dict(enable_R=False, enable_H=True, enable_T=False)),
    ("DFR-H/R", dict(enable_R=False, enable_H=False, enable_T=True)),
    ("DFR-H/T", dict(enable_R=True, enable_H=False, enable_T=False)),
    ("DFR-R", dict(enable_R=False, enable_H=True, enable_T=True)),
    ("DFR-T", dict(enable_R=True, enable_H=True, enable_T=False)),
    ("DFR-H", dict(enable_R=True, enable_H=False, enable_T=True)),
    ("DFR", dict(enable_R=True, enable_H=True, enable_T=True)),
)


@dataclass
class AblationRow:
    variant: str
    accuracy: float
    enable_R: bool
    enable_H: bool
    enable_T: bool


def ablation_suite(cfg: TrainConfig, source: DomainDataset, target: DomainDataset) -> list[AblationRow]:
    """Target accuracy of every component combination, all with the seed in ``cfg``."""
    if not target.labeled:
        raise DataError("ablation needs target labels for evaluation")
    _check_inputs(cfg, source, target)
    rows = []
    for name, toggles in ABLATION_VARIANTS:
        params, _ = train(cfg.replace(**toggles), source, target)
        acc, _ = evaluate(params, target)
        rows.append(AblationRow(name, acc, **toggles))
        log.info("%-10s %.4f", name, acc)
    return rows
