"""Module base class, parameter initialization, and batch normalization."""

from __future__ import annotations

import numpy as np

from .autodiff import AutodiffError, Tensor, add, mul, pow_, sub


class Module:
    """Container of parameters and sub-modules with a train/eval switch."""

    def __init__(self):
        self.training = True

    def forward(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{key}.{i}"] = item
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def modules(self) -> list["Module"]:
        found = [self]
        for value in vars(self).values():
            if isinstance(value, Module):
                found.extend(value.modules())
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        found.extend(item.modules())
        return found

    def named_buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Non-learnable state (e.g. batch-norm running stats)."""
        out: dict[str, np.ndarray] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, np.ndarray):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_buffers(f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_buffers(f"{key}.{i}."))
        return out

    def train(self) -> "Module":
        for m in self.modules():
            m.training = True
        return self

    def eval(self) -> "Module":
        for m in self.modules():
            m.training = False
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {k: v.data.copy() for k, v in self.named_parameters().items()}
        for k, v in self.named_buffers().items():
            state[f"buf.{k}"] = v.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        buffers = self.named_buffers()
        expected = set(params) | {f"buf.{k}" for k in buffers}
        missing = expected - set(state)
        extra = set(state) - expected
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=p.data.dtype)
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.shape}")
            p.data = arr.copy()
        for k, buf in buffers.items():
            arr = np.asarray(state[f"buf.{k}"], dtype=buf.dtype)
            if arr.shape != buf.shape:
                raise ValueError(f"shape mismatch for buffer {k}: {arr.shape} vs {buf.shape}")
            buf[...] = arr


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float64) -> Tensor:
    """Symmetric uniform fan-in scaled initialization."""
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
    return Tensor(w, requires_grad=True)


def batch_norm(x, gamma, beta, running_mean, running_var, training: bool,
               momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel normalization of (N, C, T, V) over the (N, T, V) axes.

    In training mode batch statistics are used and `running_mean` /
    `running_var` are updated in place; eval mode reads the running stats.
    Returns the normalized tensor.
    """
    if eps <= 0:
        raise AutodiffError(f"batch_norm: eps must be positive, got {eps}")
    axes = (0, 2, 3)
    shape = (1, x.shape[1], 1, 1)
    if training:
        m = x.mean(axis=axes, keepdims=True)
        xc = sub(x, m)
        var = mul(xc, xc).mean(axis=axes, keepdims=True)
        running_mean *= 1.0 - momentum
        running_mean += momentum * m.data.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * var.data.reshape(-1)
        inv = pow_(add(var, eps), -0.5)
        xn = mul(xc, inv)
    else:
        xn = mul(sub(x, running_mean.reshape(shape)),
                 1.0 / np.sqrt(running_var.reshape(shape) + eps))
    return add(mul(xn, gamma.reshape(shape)), beta.reshape(shape))


class BatchNorm(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float64):
        super().__init__()
        if eps <= 0:
            raise AutodiffError(f"BatchNorm: eps must be positive, got {eps}")
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return batch_norm(x, self.gamma, self.beta, self.running_mean,
                          self.running_var, self.training, self.momentum, self.eps)
