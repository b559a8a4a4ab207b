"""
Adaptive-moment gradient descent over named parameter arrays.
"""

from typing import Dict, Optional

import numpy as np


class AdamOptimizer:
    """
    Adam over a dict of named arrays.

    Updates replace arrays instead of writing into them, so tensors that
    still wrap the previous values stay valid.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        """
        Initialize the optimizer.

        Args:
            lr: Learning rate
            beta1: Decay rate of the first moment
            beta2: Decay rate of the second moment
            eps: Numerical floor added to the root second moment
        """
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        """
        Apply one update to every parameter that has a gradient.

        Args:
            params: Named parameter arrays, updated in the dict
            grads: Named gradients
        """
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, grad in grads.items():
            if name not in params:
                continue
            m = self.m.get(name)
            v = self.v.get(name)
            if m is None:
                m = np.zeros_like(params[name])
                v = np.zeros_like(params[name])
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * (grad * grad)
            self.m[name] = m
            self.v[name] = v
            m_hat = m / correction1
            v_hat = v / correction2
            params[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> Dict[str, object]:
        """Return moments and step count for checkpointing."""
        return {
            "t": self.t,
            "m": {name: array.copy() for name, array in self.m.items()},
            "v": {name: array.copy() for name, array in self.v.items()},
        }

    def load_state_dict(self, state: Optional[Dict[str, object]]) -> None:
        """Restore moments and step count."""
        if not state:
            return
        self.t = int(state["t"])
        self.m = {name: np.array(array, dtype=np.float64) for name, array in state["m"].items()}
        self.v = {name: np.array(array, dtype=np.float64) for name, array in state["v"].items()}
