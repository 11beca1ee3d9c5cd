"""N-BEATS with generic blocks and doubly residual backcast/forecast links."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .scaling import Scaler
from .series import STEPS_PER_DAY, LoadSeries
from .windows import DayAheadData


@dataclass(frozen=True)
class NBeatsConfig:
    stacks: int
    layer_width: int
    lookback: int
    blocks_per_stack: int = 1
    layers_per_block: int = 4
    expansion_dim: int = 5
    horizon: int = STEPS_PER_DAY

    def __post_init__(self):
        for name in ("stacks", "layer_width", "lookback", "blocks_per_stack", "layers_per_block", "expansion_dim", "horizon"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class BlockParts:
    """Per-block contributions from an instrumented forward pass."""

    forecasts: np.ndarray  # (blocks, batch, horizon)
    backcasts: np.ndarray  # (blocks, batch, lookback)
    final_residual: np.ndarray  # (batch, lookback)


class NBeatsModel:
    """Sum-of-block-forecasts network over a standardized lookback window."""

    family = "nbeats"
    uses_covariates = False

    def __init__(self, cfg: NBeatsConfig, seed: int = 0):
        self.cfg = cfg
        self.load_scaler: Scaler | None = None
        self.data: DayAheadData | None = None
        rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}
        n_blocks = cfg.stacks * cfg.blocks_per_stack
        for i in range(n_blocks):
            widths = [cfg.lookback] + [cfg.layer_width] * cfg.layers_per_block
            for j in range(cfg.layers_per_block):
                self._add(f"block{i}.fc{j}.w", rng, (widths[j], widths[j + 1]))
                self._zeros(f"block{i}.fc{j}.b", (widths[j + 1],))
            self._add(f"block{i}.theta_b.w", rng, (cfg.layer_width, cfg.expansion_dim))
            self._zeros(f"block{i}.theta_b.b", (cfg.expansion_dim,))
            self._add(f"block{i}.theta_f.w", rng, (cfg.layer_width, cfg.expansion_dim))
            self._zeros(f"block{i}.theta_f.b", (cfg.expansion_dim,))
            self._add(f"block{i}.basis_b", rng, (cfg.expansion_dim, cfg.lookback))
            self._add(f"block{i}.basis_f", rng, (cfg.expansion_dim, cfg.horizon))
        self.n_blocks = n_blocks

    def _add(self, name: str, rng: np.random.Generator, shape: tuple[int, int]) -> None:
        self._params[name] = ad.parameter(ad.glorot_uniform(rng, shape, shape[0], shape[1]), name)

    def _zeros(self, name: str, shape: tuple[int, ...]) -> None:
        self._params[name] = ad.parameter(np.zeros(shape), name)

    def parameters(self) -> dict[str, Tensor]:
        return self._params

    def forward(self, x: Tensor, collect_parts: bool = False) -> Tensor | tuple[Tensor, BlockParts]:
        """Map a (batch, lookback) window to a (batch, horizon) forecast."""
        if x.shape[1] != self.cfg.lookback:
            raise ad.ShapeError(f"nbeats: window length {x.shape[1]} != lookback {self.cfg.lookback}")
        p = self._params
        residual = x
        total: Tensor | None = None
        forecasts, backcasts = [], []
        for i in range(self.n_blocks):
            h = residual
            for j in range(self.cfg.layers_per_block):
                h = ad.relu(ad.affine(h, p[f"block{i}.fc{j}.w"], p[f"block{i}.fc{j}.b"], name=f"block{i}.fc{j}"))
            theta_b = ad.affine(h, p[f"block{i}.theta_b.w"], p[f"block{i}.theta_b.b"], name=f"block{i}.theta_b")
            theta_f = ad.affine(h, p[f"block{i}.theta_f.w"], p[f"block{i}.theta_f.b"], name=f"block{i}.theta_f")
            backcast = ad.matmul(theta_b, p[f"block{i}.basis_b"], name=f"block{i}.backcast")
            forecast = ad.matmul(theta_f, p[f"block{i}.basis_f"], name=f"block{i}.forecast")
            residual = ad.add(residual, ad.scale(backcast, -1.0), name=f"block{i}.residual")
            total = forecast if total is None else ad.add(total, forecast, name=f"block{i}.sum")
            if collect_parts:
                forecasts.append(forecast.data.copy())
                backcasts.append(backcast.data.copy())
        assert total is not None
        if collect_parts:
            parts = BlockParts(
                forecasts=np.stack(forecasts),
                backcasts=np.stack(backcasts),
                final_residual=residual.data.copy(),
            )
            return total, parts
        return total

    def loss(self, batch) -> Tensor:
        starts = batch[0]
        assert self.data is not None, "model has no training data bound"
        x, y = self.data.gather(starts)
        pred = self.forward(ad.constant(x))
        return ad.mse(pred, y)

    def predict_day(self, observed: LoadSeries, window_covs=None, future_covs=None) -> np.ndarray:
        """Forecast the 96 steps following the observed history, in megawatts."""
        assert self.load_scaler is not None, "model is not trained"
        window = observed.values[-self.cfg.lookback :]
        x = self.load_scaler.transform(window)[None, :]
        pred = self.forward(ad.constant(x))
        return self.load_scaler.inverse(pred.data[0])

    @property
    def min_history_steps(self) -> int:
        return self.cfg.lookback
