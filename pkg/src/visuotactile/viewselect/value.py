"""Value network: predicted estimation loss from a selection distribution."""

import numpy as np

from .. import gradcore as G
from ..gradcore import MLP, Adam, Module, Tensor
from .selector import SelectorBank


class ValueNetwork(Module):
    def __init__(self, M, N, rng, hidden=32, zero_last=False):
        self.M, self.N = M, N
        self.net = MLP([M * N, hidden, 1], rng, zero_last=zero_last)

    def forward(self, probs):
        p = probs if isinstance(probs, Tensor) else Tensor(np.asarray(probs).reshape(-1, self.M * self.N))
        return G.reshape(self.net(p), (-1,))


def onehot_selection(q, N):
    q = np.asarray(q, dtype=np.int64).reshape(-1)
    out = np.zeros((q.size, N))
    out[np.arange(q.size), q] = 1.0
    return out


def value_predict(vnet, bank):
    """Predicted loss for a bank (or an M x N probability matrix)."""
    probs = bank.probabilities() if isinstance(bank, SelectorBank) else np.asarray(bank, dtype=np.float64)
    if not np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6):
        raise ValueError("value network input rows must be probability vectors")
    return float(vnet(probs[None]).data[0])


class ValueTrainer:
    """Squared-error regression of the value network on a replay buffer."""

    def __init__(self, vnet, lr=1e-3):
        self.vnet = vnet
        self.params = vnet.named_parameters()
        self.opt = Adam(self.params, lr=lr)
        self.inputs, self.targets = [], []

    def add(self, probs, loss):
        self.inputs.append(np.asarray(probs, dtype=np.float64).reshape(-1))
        self.targets.append(float(loss))

    def loss(self):
        x = Tensor(np.array(self.inputs))
        return G.mse(self.vnet(x), Tensor(np.array(self.targets)))

    def step(self, rng=None, batch_size=None):
        n = len(self.targets)
        idx = np.arange(n) if batch_size is None or batch_size >= n else rng.choice(n, batch_size, replace=False)
        x = Tensor(np.array(self.inputs)[idx])
        loss = G.mse(self.vnet(x), Tensor(np.array(self.targets)[idx]))
        G.zero_grad(self.params)
        self.opt.step(G.backward(loss, self.params))
        return loss.item()
