"""Two-stage Siamese training.

Both branches run the same ``Network`` over one ``ParamStore``. Every step
pairs a source mini-batch with a target mini-batch drawn uniformly with
replacement, evaluates L = L_s + lambda1 L_c + lambda2 L_d, back-propagates,
takes an AdamW step and then moves the class centers.

Stage 1 trains on a stratified 80% of the source and keeps the checkpoint
with the lowest validation softmax loss. Stage 2 restarts from that
checkpoint on the whole source and stops once the source loss falls to the
best validation loss.
"""
import logging
import time
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from sklearn.model_selection import train_test_split

from sdda.autodiff.params import ParamStore
from sdda.autodiff.tensor import Tape, Tensor, backward
from sdda.config import TrainConfig
from sdda.data.trialset import TrialSet
from sdda.exceptions import DivergenceError, MissingClassError, NonFiniteError, ShapeError
from sdda.losses.center import CenterBank, center_loss, update_centers
from sdda.losses.mmd import mmd_loss
from sdda.losses.softmax import softmax_loss
from sdda.losses.total import LossWeights, total_loss
from sdda.metrics.evaluate import report_from_predictions
from sdda.models.network import Network, init_params
from sdda.models.spec import ModelSpec
from sdda.rng import SeedBank
from sdda.train.optim import AdamState, AdamW
from sdda.train.record import EpochLog, RunRecord

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    params: dict[str, dict[str, np.ndarray]]
    optimizer: AdamState
    centers: Optional[dict[str, np.ndarray]]


def _softmax_np(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(labels)), labels].mean())


class SiameseTrainer:
    """State of one run: parameters, optimizer, centers and the named random streams."""

    def __init__(self, spec: ModelSpec, cfg: TrainConfig, dtype: np.dtype = np.float64):
        self.spec = spec
        self.cfg = cfg
        self.seeds = SeedBank(cfg.seed)
        self.store: ParamStore = init_params(spec, self.seeds.generator("init"), dtype)
        self.network = Network(spec, self.store)
        self.optimizer = AdamW(self.store, cfg.lr, cfg.betas, cfg.adam_eps, cfg.weight_decay)
        lambda1, lambda2 = cfg.effective_lambdas
        self.weights = LossWeights(lambda1, lambda2)
        self.bank: Optional[CenterBank] = None
        if cfg.use_center:
            self.bank = CenterBank.initialize(spec.n_classes, spec.embedding_width, self.seeds.generator("centers"),
                                              rate=cfg.center_rate, metric=cfg.center_metric)
        self.source_batches = self.seeds.generator("batches/source")
        self.target_batches = self.seeds.generator("batches/target")
        self.source_dropout = self.seeds.generator("dropout/source")
        self.target_dropout = self.seeds.generator("dropout/target")
        self.mmd_source_dropout = self.seeds.generator("dropout/mmd-source")
        self.record = RunRecord(config=cfg.model_dump(mode="json"), seed=cfg.seed)

    # checkpoints

    def snapshot(self) -> Checkpoint:
        return Checkpoint(
            params=self.store.snapshot(),
            optimizer=self.optimizer.state_dict(),
            centers=None if self.bank is None else self.bank.snapshot(),
        )

    def restore(self, checkpoint: Checkpoint) -> None:
        self.store.restore(checkpoint.params)
        self.optimizer.load_state_dict(checkpoint.optimizer)
        if self.bank is not None and checkpoint.centers is not None:
            self.bank.restore(checkpoint.centers)

    # steps

    def mmd_embeddings(self, xs: np.ndarray, xt: np.ndarray) -> tuple[Tensor, Tensor]:
        """Both domains through eval-mode batch norm with train-mode dropout."""
        _, hs = self.network.forward(xs, bn_train=False, dropout_rng=self.mmd_source_dropout)
        _, ht = self.network.forward(xt, bn_train=False, dropout_rng=self.target_dropout)
        return hs, ht

    def train_step(self, xs: np.ndarray, ys: np.ndarray, xt: Optional[np.ndarray]) -> dict[str, float]:
        """One paired step; returns the loss components."""
        with Tape() as tape:
            logits, hs = self.network.forward(xs, bn_train=True, dropout_rng=self.source_dropout)
            ls = softmax_loss(logits, ys)
            lc = center_loss(hs, ys, self.bank) if self.bank is not None else None
            ld = None
            if self.cfg.use_mmd and xt is not None:
                ld = mmd_loss(*self.mmd_embeddings(xs, xt), self.cfg.mmd_bandwidth, self.cfg.mmd_kernel_factors)
            loss = total_loss(ls, lc, ld, self.weights)
        self.store.zero_grad()
        backward(tape, loss)
        self.optimizer.step()
        if self.bank is not None:
            update_centers(self.bank, hs.data, ys)
        logger.debug(f"step loss={loss.item():.6f} softmax={ls.item():.6f}"
                     f"{'' if lc is None else f' center={lc.item():.6f}'}"
                     f"{'' if ld is None else f' mmd={ld.item():.6f}'}")
        return {
            "loss": loss.item(),
            "softmax": ls.item(),
            "center": np.nan if lc is None else lc.item(),
            "mmd": np.nan if ld is None else ld.item(),
            "correct": float((logits.data.argmax(axis=1) == ys).sum()),
        }

    def run_epoch(self, source: TrialSet, index: np.ndarray, target: Optional[TrialSet]) -> dict[str, float]:
        order = index[self.source_batches.permutation(len(index))]
        size = self.cfg.batch_size
        batches = [order[i:i + size] for i in range(0, len(order), size)]
        # batch norm needs two samples per batch
        batches = [b for b in batches if len(b) > 1]
        totals: dict[str, list[float]] = {"loss": [], "softmax": [], "center": [], "mmd": []}
        correct, seen = 0.0, 0
        for batch in batches:
            xt = None
            if target is not None and self.cfg.use_mmd:
                pick = self.target_batches.integers(0, target.n_trials, size=len(batch))
                xt = target.trials[pick]
            stats = self.train_step(source.trials[batch], source.labels[batch], xt)
            for key in totals:
                totals[key].append(stats[key] * len(batch))
            correct += stats["correct"]
            seen += len(batch)
        if not seen:
            raise ShapeError("no training batch with at least two trials; lower batch_size or add data")
        return {key: float(np.sum(values) / seen) for key, values in totals.items()} | {"acc": correct / seen}

    def eval_loss(self, trial_set: TrialSet, index: Optional[np.ndarray] = None) -> tuple[float, float]:
        """Eval-mode softmax loss and accuracy."""
        trials = trial_set.trials if index is None else trial_set.trials[index]
        labels = trial_set.labels if index is None else trial_set.labels[index]
        logits = self.network.predict_logits(trials)
        if not np.all(np.isfinite(logits)):
            raise NonFiniteError("evaluation logits are not finite")
        return _softmax_np(logits, labels), float((logits.argmax(axis=1) == labels).mean())

    def target_accuracy(self, target_eval: TrialSet) -> float:
        predictions = self.network.predict_logits(target_eval.trials).argmax(axis=1)
        return report_from_predictions(target_eval.labels, predictions, self.spec.n_classes).accuracy

    # protocol

    def fit(self, source: TrialSet, target: Optional[TrialSet], target_eval: Optional[TrialSet] = None) -> RunRecord:
        cfg = self.cfg
        self._check_inputs(source, target)
        dtype = self.store.dtype
        source = source.replace(trials=np.asarray(source.trials, dtype=dtype))
        if target is not None:
            target = target.replace(trials=np.asarray(target.trials, dtype=dtype), labels=None)
        if target_eval is not None:
            target_eval = target_eval.replace(trials=np.asarray(target_eval.trials, dtype=dtype))
        started = time.perf_counter()
        split_seed = int(self.seeds.generator("split").integers(2**31 - 1))
        train_idx, val_idx = train_test_split(np.arange(source.n_trials), test_size=cfg.validation_fraction,
                                              stratify=source.labels, random_state=split_seed)
        train_idx, val_idx = np.sort(train_idx), np.sort(val_idx)
        logger.info(f"stage 1: {len(train_idx)} train / {len(val_idx)} validation source trials, "
                    f"lambda=({self.weights.lambda1}, {self.weights.lambda2}), "
                    f"center={cfg.use_center}, mmd={cfg.use_mmd}")
        try:
            best: Optional[Checkpoint] = None
            best_loss, wait = np.inf, 0
            for epoch in range(1, cfg.max_epochs_stage1 + 1):
                stats = self.run_epoch(source, train_idx, target)
                val_loss, val_acc = self.eval_loss(source, val_idx)
                self._log_epoch(1, epoch, stats, target_eval, val_loss=val_loss, val_acc=val_acc)
                self.record.stage1_epochs = epoch
                if val_loss < best_loss:
                    best_loss, wait, best = val_loss, 0, self.snapshot()
                    self.record.best_val_loss, self.record.best_epoch = val_loss, epoch
                else:
                    wait += 1
                if cfg.early_stopping and wait >= cfg.patience:
                    logger.info(f"stage 1 early stop at epoch {epoch}; best validation loss "
                                f"{best_loss:.4f} at epoch {self.record.best_epoch}")
                    break

            self.restore(best)
            all_idx = np.arange(source.n_trials)
            logger.info(f"stage 2: {source.n_trials} source trials from the epoch-{self.record.best_epoch} "
                        f"checkpoint, target loss {best_loss:.4f}")
            for epoch in range(1, cfg.max_epochs_stage2 + 1):
                stats = self.run_epoch(source, all_idx, target)
                source_loss, _ = self.eval_loss(source)
                self._log_epoch(2, epoch, stats, target_eval, source_eval_loss=source_loss)
                self.record.stage2_epochs = epoch
                if cfg.early_stopping and source_loss <= best_loss:
                    logger.info(f"stage 2 reached the validation loss at epoch {epoch}")
                    break
        except NonFiniteError as e:
            self.record.status = "diverged"
            self.record.failure = str(e)
            self.record.wall_time_s = time.perf_counter() - started
            logger.error(f"❌ training diverged: {e}")
            raise DivergenceError(f"training diverged: {e}", record=self.record) from e

        _, source_acc = self.eval_loss(source)
        self.record.final = {"source_train_acc": source_acc}
        if target_eval is not None:
            self.record.final["target_acc"] = self.target_accuracy(target_eval)
        self.record.status = "completed"
        self.record.wall_time_s = time.perf_counter() - started
        logger.info(f"✅ training finished after {self.record.stage1_epochs}+{self.record.stage2_epochs} epochs")
        return self.record

    def _check_inputs(self, source: TrialSet, target: Optional[TrialSet]) -> None:
        if not source.labeled:
            raise MissingClassError("source domain must be labeled")
        counts = np.bincount(source.labels, minlength=self.spec.n_classes)
        missing = np.flatnonzero(counts[:self.spec.n_classes] == 0)
        if missing.size:
            raise MissingClassError(f"class(es) {missing.tolist()} missing from the source domain",
                                    classes=missing.tolist())
        for name, domain in (("source", source), ("target", target)):
            if domain is None:
                continue
            if (domain.n_channels, domain.n_samples) != self.spec.input_shape:
                raise ShapeError(f"{name} trials are ({domain.n_channels}, {domain.n_samples}), "
                                 f"{self.spec.name} expects {self.spec.input_shape}")
        if target is not None and target.n_trials == 0:
            raise ShapeError("target domain is empty")
        if target is None and self.cfg.use_mmd:
            raise ShapeError("the MMD term needs target trials")

    def _log_epoch(self, stage: int, epoch: int, stats: dict[str, float], target_eval: Optional[TrialSet],
                   **extra: Any) -> None:
        log = EpochLog(
            stage=stage,
            epoch=epoch,
            train_loss=stats["loss"],
            softmax_loss=stats["softmax"],
            center_loss=None if np.isnan(stats["center"]) else stats["center"],
            mmd_loss=None if np.isnan(stats["mmd"]) else stats["mmd"],
            train_acc=stats["acc"],
            target_acc=self.target_accuracy(target_eval) if self.cfg.track_target and target_eval else None,
            **extra,
        )
        if not np.isfinite(log.train_loss):
            raise NonFiniteError(f"stage {stage} epoch {epoch}: training loss is {log.train_loss}")
        self.record.epochs.append(log)
        if epoch == 1 or epoch % self.cfg.log_every == 0:
            logger.info(f"stage {stage} epoch {epoch}: loss={log.train_loss:.4f} acc={log.train_acc:.3f}"
                        + (f" val_loss={log.val_loss:.4f}" if log.val_loss is not None else "")
                        + (f" target_acc={log.target_acc:.3f}" if log.target_acc is not None else ""))


def train_siamese(source: TrialSet, target: TrialSet, spec: ModelSpec, cfg: TrainConfig,
                  dtype: np.dtype = np.float64, target_eval: Optional[TrialSet] = None) -> tuple[ParamStore, RunRecord]:
    """Train on labeled ``source`` while adapting to unlabeled ``target``."""
    trainer = SiameseTrainer(spec, cfg, dtype)
    record = trainer.fit(source, target, target_eval)
    return trainer.store, record


def train_vanilla(source: TrialSet, spec: ModelSpec, cfg: TrainConfig,
                  dtype: np.dtype = np.float64) -> tuple[ParamStore, RunRecord]:
    """Single-branch softmax-only training with the same loop and random streams."""
    vanilla = cfg.model_copy(update={"use_center": False, "use_mmd": False, "lambda1": 0.0, "lambda2": 0.0})
    trainer = SiameseTrainer(spec, vanilla, dtype)
    record = trainer.fit(source, None)
    return trainer.store, record
