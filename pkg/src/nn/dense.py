"""
Dense network stack
Fully-connected nets backing the VQVAE encoder/decoder, the policy and the critics
"""

from typing import Dict, Optional, Sequence

import torch
import torch.nn as nn

from ..core import register

__all__ = ['DenseNet', 'compute_gradients', 'HIDDEN_ACTIVATIONS', 'OUTPUT_ACTIVATIONS']

HIDDEN_ACTIVATIONS = {'relu': nn.ReLU, 'tanh': nn.Tanh}
OUTPUT_ACTIVATIONS = {'identity': nn.Identity, 'tanh': nn.Tanh}


@register()
class DenseNet(nn.Module):
    """Multi-layer perceptron with a shared hidden activation and an output activation"""

    def __init__(self,
                 layer_dims: Sequence[int],
                 activation: str = 'relu',
                 output_activation: str = 'identity',
                 seed: Optional[int] = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()

        layer_dims = tuple(int(d) for d in layer_dims)
        if len(layer_dims) < 2 or any(d <= 0 for d in layer_dims):
            raise ValueError(f'layer_dims must hold at least two positive sizes, got {layer_dims}')
        if activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f'Unknown hidden activation: {activation}')
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f'Unknown output activation: {output_activation}')

        self.layer_dims = layer_dims
        self.activation = activation
        self.output_activation = output_activation

        # Allocated uninitialized: reset_parameters is the only draw from a generator
        self.layers = nn.ModuleList([
            nn.utils.skip_init(nn.Linear, fan_in, fan_out, dtype=dtype)
            for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:])
        ])
        self.act = HIDDEN_ACTIVATIONS[activation]()
        self.out_act = OUTPUT_ACTIVATIONS[output_activation]()

        self.reset_parameters(seed)

    def reset_parameters(self, seed: Optional[int] = None):
        """
        Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.

        With a seed the draw comes from a forked generator and the global one is left as it was.
        """
        if seed is None:
            self._init_layers()
            return
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self._init_layers()

    def _init_layers(self):
        for layer in self.layers:
            nn.init.xavier_uniform_(layer.weight)
            nn.init.zeros_(layer.bias)

    @property
    def in_features(self) -> int:
        return self.layer_dims[0]

    @property
    def out_features(self) -> int:
        return self.layer_dims[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_features:
            raise ValueError(f'Expected input width {self.in_features}, got {tuple(x.shape)}')

        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            x = self.out_act(x) if i == last else self.act(x)
        return x

    def is_finite(self) -> bool:
        return all(torch.isfinite(p).all().item() for p in self.parameters())

    def extra_repr(self) -> str:
        return f'layer_dims={self.layer_dims}, activation={self.activation}, output={self.output_activation}'


def compute_gradients(net: nn.Module, loss: torch.Tensor, retain_graph: bool = False) -> Dict[str, torch.Tensor]:
    """
    Reverse-mode gradients of a scalar loss w.r.t. every trainable parameter of ``net``.

    Parameters the loss does not depend on get a zero gradient.

    Args:
        net: Module whose parameters were used to build ``loss``
        loss: Scalar loss with a recorded graph
        retain_graph: Keep the graph for further backward passes

    Returns:
        Mapping of parameter name to gradient, same shapes as the parameters
    """
    named = [(name, p) for name, p in net.named_parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss, [p for _, p in named],
                                retain_graph=retain_graph, allow_unused=True)
    return {
        name: torch.zeros_like(p) if g is None else g
        for (name, p), g in zip(named, grads)
    }
