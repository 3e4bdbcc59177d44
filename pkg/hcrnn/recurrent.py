"""
Gated recurrent unit used by every finger branch.

The update follows the hand-pose network's own gating convention: the update gate z
weights the PREVIOUS state, h_t = z * h_prev + (1 - z) * h_candidate. This is the
reverse of the usual GRU formulation and is kept on purpose.

All functions accept a single sample (x: d_in, h: d_h) or a batch (x: N×d_in, h: N×d_h).
"""

import logging
from dataclasses import dataclass, fields

import numpy as np

from . import tensor_core as tc
from .errors import DimensionError, UsageError

logger = logging.getLogger(__name__)

GATE_FIELDS = ("W_r", "W_z", "W_h", "U_r", "U_z", "U_h", "b_r", "b_z", "b_h", "W_y", "b_y")


@dataclass
class GruParams:
    W_r: tc.Tensor
    W_z: tc.Tensor
    W_h: tc.Tensor
    U_r: tc.Tensor
    U_z: tc.Tensor
    U_h: tc.Tensor
    b_r: tc.Tensor
    b_z: tc.Tensor
    b_h: tc.Tensor
    W_y: tc.Tensor
    b_y: tc.Tensor

    def __post_init__(self):
        d_h, d_in = self.W_r.shape
        for name in ("W_z", "W_h"):
            if getattr(self, name).shape != (d_h, d_in):
                raise DimensionError(f"GRU {name} shape {getattr(self, name).shape}, expected {(d_h, d_in)}")
        for name in ("U_r", "U_z", "U_h"):
            if getattr(self, name).shape != (d_h, d_h):
                raise DimensionError(f"GRU {name} shape {getattr(self, name).shape}, expected {(d_h, d_h)}")
        for name in ("b_r", "b_z", "b_h"):
            if getattr(self, name).shape != (d_h,):
                raise DimensionError(f"GRU {name} shape {getattr(self, name).shape}, expected {(d_h,)}")
        if self.W_y.ndim != 2 or self.W_y.shape[1] != d_h:
            raise DimensionError(f"GRU readout W_y shape {self.W_y.shape} does not read a {d_h}-d state")
        if self.b_y.shape != (self.W_y.shape[0],):
            raise DimensionError(f"GRU readout bias shape {self.b_y.shape}, expected {(self.W_y.shape[0],)}")

    @property
    def d_in(self):
        return self.W_r.shape[1]

    @property
    def d_h(self):
        return self.W_r.shape[0]

    @property
    def d_out(self):
        return self.W_y.shape[0]

    @staticmethod
    def shapes(d_in, d_h, d_out):
        """Ordered field -> shape table"""
        return {
            "W_r": (d_h, d_in), "W_z": (d_h, d_in), "W_h": (d_h, d_in),
            "U_r": (d_h, d_h), "U_z": (d_h, d_h), "U_h": (d_h, d_h),
            "b_r": (d_h,), "b_z": (d_h,), "b_h": (d_h,),
            "W_y": (d_out, d_h), "b_y": (d_out,),
        }

    @classmethod
    def init(cls, d_in, d_h, d_out, rng, prefix="gru"):
        """Weights uniform in ±sqrt(1/d_h), biases zero"""
        bound = np.sqrt(1.0 / d_h)
        values = {}
        for name, shape in cls.shapes(d_in, d_h, d_out).items():
            if name.startswith("b_"):
                data = np.zeros(shape)
            else:
                data = rng.uniform(-bound, bound, size=shape)
            values[name] = tc.Tensor(data, requires_grad=True, name=f"{prefix}.{name}")
        return cls(**values)

    @classmethod
    def zeros(cls, d_in, d_h, d_out, prefix="gru"):
        return cls(**{
            name: tc.Tensor(np.zeros(shape), requires_grad=True, name=f"{prefix}.{name}")
            for name, shape in cls.shapes(d_in, d_h, d_out).items()
        })

    def named(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class GruState:
    h: tc.Tensor

    @classmethod
    def zeros(cls, d_h, batch=None):
        shape = (d_h,) if batch is None else (batch, d_h)
        return cls(tc.Tensor(np.zeros(shape), name="gru.h0"))


def _check_step_shapes(params, h_prev, x):
    if x.ndim not in (1, 2) or x.shape[-1] != params.d_in:
        raise DimensionError(f"GRU input shape {list(x.shape)} does not match d_in={params.d_in}")
    expected = x.shape[:-1] + (params.d_h,)
    if h_prev.h.shape != expected:
        raise DimensionError(f"GRU state shape {list(h_prev.h.shape)}, expected {list(expected)}")


def gru_gates(params, h_prev, x):
    """Reset gate r, update gate z and candidate state for one step"""
    _check_step_shapes(params, h_prev, x)
    h = h_prev.h
    r = tc.sigmoid(tc.fully_connected(x, params.W_r, params.b_r) + tc.fully_connected(h, params.U_r))
    z = tc.sigmoid(tc.fully_connected(x, params.W_z, params.b_z) + tc.fully_connected(h, params.U_z))
    candidate = tc.tanh(
        tc.fully_connected(x, params.W_h, params.b_h) + r * tc.fully_connected(h, params.U_h)
    )
    return r, z, candidate


def gru_step(params, h_prev, x):
    """One recurrence step; returns the new state and the readout y_t = W_y h_t + b_y"""
    _, z, candidate = gru_gates(params, h_prev, x)
    h = z * h_prev.h + (1.0 - z) * candidate
    y = tc.fully_connected(h, params.W_y, params.b_y)
    return GruState(h), y


def gru_unroll(params, inputs, initial_state=None):
    """
    Run the cell over ``inputs`` (a sequence of d_in or N×d_in tensors).

    Starts from the zero state unless ``initial_state`` is given and returns the
    per-step readouts together with the final state.
    """
    inputs = list(inputs)
    if not inputs:
        raise UsageError("gru_unroll needs a non-empty input sequence")
    state = initial_state
    if state is None:
        batch = inputs[0].shape[0] if inputs[0].ndim == 2 else None
        state = GruState.zeros(params.d_h, batch=batch)
    outputs = []
    for x in inputs:
        state, y = gru_step(params, state, x)
        outputs.append(y)
    return outputs, state
