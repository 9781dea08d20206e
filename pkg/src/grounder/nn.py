"""Parameter container and the standard layers built on the autodiff core."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


class Module:
    """Holds parameters and child modules; enumeration order is the
    (deterministic) attribute-assignment order."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for n, p in self._params.items():
            yield prefix + n, p
        for n, child in self._children.items():
            yield from child.named_parameters(prefix + n + ".")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, module: Module):
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __len__(self):
        return len(self._items)


def parameter_dict(module: Module) -> dict[str, Parameter]:
    """Collect uniquely named parameters, stamping each with its dotted path."""
    out: dict[str, Parameter] = {}
    seen_ids: dict[int, str] = {}
    for name, p in module.named_parameters():
        if name in out:
            raise ValueError(f"duplicate parameter name {name!r}")
        if id(p) in seen_ids:
            raise ValueError(
                f"parameter registered twice: {seen_ids[id(p)]!r} and {name!r}"
            )
        p.name = name
        seen_ids[id(p)] = name
        out[name] = p
    return out


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    limit = ad.glorot_limit(fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias=True):
        super().__init__()
        self.weight = Parameter(glorot_uniform(rng, d_in, d_out))
        self.bias = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = ad.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        super().__init__()
        self.gain = Parameter(np.ones(d))
        self.bias = Parameter(np.zeros(d))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias, eps=self.eps)


class Embedding(Module):
    """Learned token embedding table; row 0 is the reserved pad/unknown id.

    Initialized uniform in +-sqrt(3/d) (unit-variance rows scaled by 1/sqrt(d));
    an external table (e.g. pretrained vectors) can be loaded over it.
    """

    def __init__(self, vocab_size: int, d: int, rng: np.random.Generator):
        super().__init__()
        limit = np.sqrt(3.0 / d)
        self.table = Parameter(rng.uniform(-limit, limit, size=(vocab_size, d)))

    def __call__(self, ids) -> Tensor:
        ids = np.asarray(ids, dtype=np.intp)
        if ids.size and (ids.min() < 0 or ids.max() >= self.table.shape[0]):
            raise IndexError(
                f"token id out of range [0, {self.table.shape[0]}): {ids.tolist()}"
            )
        return ad.take(self.table, ids)

    def load_table(self, table: np.ndarray):
        if table.shape != self.table.shape:
            raise ad.ShapeError(
                f"embedding table {table.shape} != expected {self.table.shape}"
            )
        self.table.data = table.astype(self.table.data.dtype)


class GRU(Module):
    """Unidirectional GRU over a [L, d_in] sequence; zero initial state."""

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = hidden
        self.w_x = Parameter(glorot_uniform(rng, d_in, hidden, (d_in, 3 * hidden)))
        self.w_h = Parameter(glorot_uniform(rng, hidden, hidden, (hidden, 3 * hidden)))
        self.bias = Parameter(np.zeros(3 * hidden))

    def __call__(self, seq: Tensor) -> Tensor:
        xp = ad.matmul(seq, self.w_x) + self.bias
        return ad.gru_sequence(xp, self.w_h)

    def step(self, x: Tensor, h_prev: Tensor) -> Tensor:
        return ad.gru_cell(x, h_prev, self.w_x, self.w_h, self.bias)


class BiGRU(Module):
    """Forward and backward GRU, states concatenated per position.

    ``d_out`` is the concatenated width, i.e. each direction runs at
    d_out/2 (must be even).
    """

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        super().__init__()
        if d_out % 2 != 0:
            raise ValueError(f"BiGRU output width must be even, got {d_out}")
        self.fwd = GRU(d_in, d_out // 2, rng)
        self.bwd = GRU(d_in, d_out // 2, rng)

    def __call__(self, seq: Tensor) -> Tensor:
        if seq.shape[0] < 1:
            raise ad.ShapeError("BiGRU needs a nonempty sequence")
        hf = self.fwd(seq)
        hb = ad.flip_rows(self.bwd(ad.flip_rows(seq)))
        return ad.concat([hf, hb], axis=1)
