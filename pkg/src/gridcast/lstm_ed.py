"""Encoder-decoder LSTM for 96-step day-ahead forecasts.

The encoder reads the lookback sequence (load plus covariates per step); its
final states seed the decoder, which rolls out 96 steps. Each decoder step
consumes the step's covariate vector together with the previous value: the
true value during training (teacher forcing), the model's own previous
prediction at inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .covariates import COVARIATE_DIM
from .scaling import Scaler
from .series import STEPS_PER_DAY, LoadSeries
from .windows import DayAheadData


@dataclass(frozen=True)
class LstmEdConfig:
    recurrent_layers: int
    hidden_dim: int
    lookback: int
    dropout: float = 0.0
    learning_rate: float = 1e-3
    covariate_width: int = COVARIATE_DIM
    horizon: int = STEPS_PER_DAY

    def __post_init__(self):
        if self.hidden_dim < 1 or self.recurrent_layers < 1:
            raise ValueError("hidden_dim and recurrent_layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


class LstmEdModel:
    family = "lstm"
    uses_covariates = True

    def __init__(self, cfg: LstmEdConfig, seed: int = 0):
        self.cfg = cfg
        self.load_scaler: Scaler | None = None
        self.cov_scaler: Scaler | None = None
        self.data: DayAheadData | None = None
        self._dropout_rng = np.random.default_rng(seed + 1)
        rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        in_dim = 1 + cfg.covariate_width
        for side in ("enc", "dec"):
            for layer in range(cfg.recurrent_layers):
                d = in_dim if layer == 0 else cfg.hidden_dim
                h = cfg.hidden_dim
                self._params[f"{side}{layer}.wx"] = ad.parameter(
                    ad.glorot_uniform(rng, (d, 4 * h), d, h), f"{side}{layer}.wx"
                )
                self._params[f"{side}{layer}.wh"] = ad.parameter(
                    ad.glorot_uniform(rng, (h, 4 * h), h, h), f"{side}{layer}.wh"
                )
                bias = np.zeros(4 * h)
                bias[h : 2 * h] = 1.0  # forget-gate bias
                self._params[f"{side}{layer}.b"] = ad.parameter(bias, f"{side}{layer}.b")
        self._params["head.w"] = ad.parameter(
            ad.glorot_uniform(rng, (cfg.hidden_dim, 1), cfg.hidden_dim, 1), "head.w"
        )
        self._params["head.b"] = ad.parameter(np.zeros(1), "head.b")

    def parameters(self) -> dict[str, Tensor]:
        return self._params

    def _stack_step(
        self, side: str, inp: Tensor, hs: list[Tensor], cs: list[Tensor], train: bool
    ) -> Tensor:
        p = self._params
        for layer in range(self.cfg.recurrent_layers):
            hs[layer], cs[layer] = ad.lstm_cell(
                inp, hs[layer], cs[layer],
                p[f"{side}{layer}.wx"], p[f"{side}{layer}.wh"], p[f"{side}{layer}.b"],
                name=f"{side}{layer}",
            )
            inp = hs[layer]
            if train and layer + 1 < self.cfg.recurrent_layers:
                inp = ad.dropout(inp, self.cfg.dropout, self._dropout_rng)
        return inp

    def _zero_state(self, batch: int) -> tuple[list[Tensor], list[Tensor]]:
        zeros = [
            ad.constant(np.zeros((batch, self.cfg.hidden_dim)))
            for _ in range(self.cfg.recurrent_layers)
        ]
        return list(zeros), [ad.constant(np.zeros((batch, self.cfg.hidden_dim))) for _ in zeros]

    def _encode(self, x_load: np.ndarray, x_cov: np.ndarray, train: bool) -> tuple[list[Tensor], list[Tensor]]:
        batch, steps = x_load.shape
        hs, cs = self._zero_state(batch)
        for t in range(steps):
            inp = ad.constant(np.concatenate([x_load[:, t : t + 1], x_cov[:, t, :]], axis=1))
            self._stack_step("enc", inp, hs, cs, train)
        return hs, cs

    def forward_teacher(self, x_load: np.ndarray, x_cov: np.ndarray, y: np.ndarray, f_cov: np.ndarray) -> Tensor:
        """Training-mode forward: the decoder sees the true previous values."""
        hs, cs = self._encode(x_load, x_cov, train=True)
        p = self._params
        outputs = []
        prev = x_load[:, -1:]
        for t in range(self.cfg.horizon):
            inp = ad.constant(np.concatenate([prev, f_cov[:, t, :]], axis=1))
            top = self._stack_step("dec", inp, hs, cs, train=True)
            outputs.append(ad.affine(top, p["head.w"], p["head.b"], name=f"head{t}"))
            prev = y[:, t : t + 1]
        return ad.concat(outputs, axis=1, name="decoded")

    def forward_autoregressive(self, x_load: np.ndarray, x_cov: np.ndarray, f_cov: np.ndarray) -> np.ndarray:
        """Inference-mode forward: the decoder feeds back its own predictions."""
        hs, cs = self._encode(x_load, x_cov, train=False)
        p = self._params
        batch = x_load.shape[0]
        preds = np.empty((batch, self.cfg.horizon))
        prev = x_load[:, -1:]
        for t in range(self.cfg.horizon):
            inp = ad.constant(np.concatenate([prev, f_cov[:, t, :]], axis=1))
            top = self._stack_step("dec", inp, hs, cs, train=False)
            out = ad.affine(top, p["head.w"], p["head.b"], name=f"head{t}")
            preds[:, t] = out.data[:, 0]
            prev = out.data
        return preds

    def loss(self, batch) -> Tensor:
        starts = batch[0]
        assert self.data is not None, "model has no training data bound"
        x_load, x_cov, y, f_cov = self.data.gather(starts)
        pred = self.forward_teacher(x_load, x_cov, y, f_cov)
        return ad.mse(pred, y)

    def predict_day(self, observed: LoadSeries, window_covs: np.ndarray, future_covs: np.ndarray) -> np.ndarray:
        assert self.load_scaler is not None and self.cov_scaler is not None, "model is not trained"
        window = self.load_scaler.transform(observed.values[-self.cfg.lookback :])[None, :]
        w_cov = self.cov_scaler.transform(window_covs)[None, :, :]
        f_cov = self.cov_scaler.transform(future_covs)[None, :, :]
        pred = self.forward_autoregressive(window, w_cov, f_cov)
        return self.load_scaler.inverse(pred[0])

    @property
    def min_history_steps(self) -> int:
        return self.cfg.lookback
