"""Temporal convolutional network: causal dilated conv layers with residuals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .covariates import COVARIATE_DIM
from .errors import ShapeError
from .scaling import Scaler
from .series import STEPS_PER_DAY, LoadSeries
from .windows import DayAheadData


def tcn_num_layers(lookback: int, dilation_base: int, kernel_size: int) -> int:
    """Smallest layer count whose receptive field covers the whole lookback.

    Solves b**n >= (l-1)(b-1)/(k-1) + 1 in exact arithmetic, i.e. the
    ceiling of log_b of the right-hand side without float round-off.
    """
    if kernel_size < 2:
        raise ValueError(f"kernel size must be >= 2, got {kernel_size}")
    if lookback <= kernel_size:
        raise ValueError(f"lookback {lookback} must exceed kernel size {kernel_size}")
    if dilation_base < 2:
        raise ValueError(f"dilation base must be >= 2, got {dilation_base}")
    target = Fraction((lookback - 1) * (dilation_base - 1), kernel_size - 1) + 1
    n = 0
    power = 1
    while power < target:
        power *= dilation_base
        n += 1
    return n


def tcn_receptive_field(num_layers: int, kernel_size: int, dilation_base: int) -> int:
    """Steps visible to the last output position of a stack with dilations b^0..b^(n-1)."""
    if num_layers < 1:
        raise ValueError(f"num_layers must be >= 1, got {num_layers}")
    return 1 + (kernel_size - 1) * (dilation_base**num_layers - 1) // (dilation_base - 1)


@dataclass(frozen=True)
class TcnConfig:
    kernel_size: int
    num_filters: int
    dilation_base: int
    lookback: int
    num_layers: int | None = None  # None = auto, sized for full coverage
    covariate_width: int = COVARIATE_DIM
    horizon: int = STEPS_PER_DAY

    def __post_init__(self):
        if self.kernel_size < 2:
            raise ValueError(f"kernel_size must be >= 2, got {self.kernel_size}")
        if self.dilation_base < 2:
            raise ValueError(f"dilation_base must be >= 2, got {self.dilation_base}")
        if self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if self.lookback < self.horizon:
            raise ValueError(f"lookback {self.lookback} shorter than horizon {self.horizon}")

    @property
    def layers(self) -> int:
        if self.num_layers is not None:
            return self.num_layers
        return tcn_num_layers(self.lookback, self.dilation_base, self.kernel_size)


class TcnModel:
    family = "tcn"
    uses_covariates = True

    def __init__(self, cfg: TcnConfig, seed: int = 0):
        self.cfg = cfg
        self.load_scaler: Scaler | None = None
        self.cov_scaler: Scaler | None = None
        self.data: DayAheadData | None = None
        rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        k, f = cfg.kernel_size, cfg.num_filters
        c_in = 1 + cfg.covariate_width
        for i in range(cfg.layers):
            d = c_in if i == 0 else f
            self._params[f"conv{i}.w"] = ad.parameter(
                ad.glorot_uniform(rng, (k, d, f), k * d, k * f), f"conv{i}.w"
            )
            self._params[f"conv{i}.b"] = ad.parameter(np.zeros(f), f"conv{i}.b")
            if d != f:
                self._params[f"proj{i}.w"] = ad.parameter(
                    ad.glorot_uniform(rng, (1, d, f), d, f), f"proj{i}.w"
                )
                self._params[f"proj{i}.b"] = ad.parameter(np.zeros(f), f"proj{i}.b")
        self._params["head.w"] = ad.parameter(
            ad.glorot_uniform(rng, (cfg.horizon * f, cfg.horizon), cfg.horizon * f, cfg.horizon),
            "head.w",
        )
        self._params["head.b"] = ad.parameter(np.zeros(cfg.horizon), "head.b")

    def parameters(self) -> dict[str, Tensor]:
        return self._params

    def forward(self, x: Tensor, collect_activations: bool = False):
        """Map (batch, lookback, channels) input to (batch, horizon) output."""
        cfg = self.cfg
        if x.shape[1] != cfg.lookback or x.shape[2] != 1 + cfg.covariate_width:
            raise ShapeError(
                f"tcn: input {x.shape} incompatible with lookback {cfg.lookback} "
                f"and {1 + cfg.covariate_width} channels"
            )
        p = self._params
        cur = x
        activations = []
        for i in range(cfg.layers):
            z = ad.conv1d_causal(cur, p[f"conv{i}.w"], p[f"conv{i}.b"], cfg.dilation_base**i, name=f"conv{i}")
            a = ad.relu(z, name=f"relu{i}")
            if f"proj{i}.w" in p:
                res = ad.conv1d_causal(cur, p[f"proj{i}.w"], p[f"proj{i}.b"], 1, name=f"proj{i}")
            else:
                res = cur
            cur = ad.add(a, res, name=f"layer{i}")
            if collect_activations:
                activations.append(cur.data.copy())
        tail = ad.slice_axis(cur, 1, cfg.lookback - cfg.horizon, cfg.lookback, name="tail")
        flat = ad.reshape(tail, (x.shape[0], cfg.horizon * cfg.num_filters), name="flatten")
        out = ad.affine(flat, p["head.w"], p["head.b"], name="head")
        if collect_activations:
            return out, activations
        return out

    def loss(self, batch) -> Tensor:
        starts = batch[0]
        assert self.data is not None, "model has no training data bound"
        x_load, x_cov, y, _ = self.data.gather(starts)
        x = np.concatenate([x_load[:, :, None], x_cov], axis=2)
        pred = self.forward(ad.constant(x))
        return ad.mse(pred, y)

    def predict_day(self, observed: LoadSeries, window_covs: np.ndarray, future_covs=None) -> np.ndarray:
        assert self.load_scaler is not None and self.cov_scaler is not None, "model is not trained"
        window = self.load_scaler.transform(observed.values[-self.cfg.lookback :])
        w_cov = self.cov_scaler.transform(window_covs)
        x = np.concatenate([window[:, None], w_cov], axis=1)[None, :, :]
        pred = self.forward(ad.constant(x))
        return self.load_scaler.inverse(pred.data[0])

    @property
    def min_history_steps(self) -> int:
        return self.cfg.lookback
