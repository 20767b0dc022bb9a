"""
Flat binary checkpoints

Dense net block:
    b'DNET' | u16 version | u8 hidden act | u8 output act | u32 L | u32 dims[L]
    then per layer: weight [out, in] and bias [out] as row-major '<f8'
Codebook block:
    b'CBKS' | u16 version | u32 H | u32 N | u32 dim | f8 decay
    then vectors [H, N, dim] '<f8', lifetime counts [H, N] '<u8', decayed usage [H, N] '<f8'
VQVAE file:   b'VQVA' | u16 version | u32 state_dim | u32 action_dim | encoder | decoder | codebooks
Agent file:   b'SACA' | u16 version | u64 step | f8 log_alpha | f8 tau | policy | q1 | q2 | q1 target | q2 target
"""

import logging
import os
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import torch

from ..nn.dense import DenseNet, HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS
from ..nn.vqvae import CodebookSet, MultiCodebookVQVAE
from ..nn.agent import SACAgent

__all__ = [
    'CHECKPOINT_VERSION', 'write_dense', 'read_dense', 'write_codebooks', 'read_codebooks',
    'save_vqvae', 'load_vqvae', 'save_agent', 'load_agent',
]

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

DENSE_MAGIC = b'DNET'
CODEBOOK_MAGIC = b'CBKS'
VQVAE_MAGIC = b'VQVA'
AGENT_MAGIC = b'SACA'

_HIDDEN_CODES = {name: i for i, name in enumerate(HIDDEN_ACTIVATIONS)}
_OUTPUT_CODES = {name: i for i, name in enumerate(OUTPUT_ACTIVATIONS)}


def _read_exact(f: BinaryIO, size: int) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise ValueError(f'Truncated checkpoint: wanted {size} bytes, got {len(data)}')
    return data


def _read_struct(f: BinaryIO, fmt: str):
    return struct.unpack(fmt, _read_exact(f, struct.calcsize(fmt)))


def _read_array(f: BinaryIO, dtype: str, shape) -> np.ndarray:
    count = int(np.prod(shape))
    itemsize = np.dtype(dtype).itemsize
    return np.frombuffer(_read_exact(f, count * itemsize), dtype=dtype).reshape(shape)


def _check_magic(f: BinaryIO, magic: bytes):
    found = _read_exact(f, len(magic))
    if found != magic:
        raise ValueError(f'Bad magic: expected {magic!r}, found {found!r}')
    version, = _read_struct(f, '<H')
    if version != CHECKPOINT_VERSION:
        raise ValueError(f'Unsupported checkpoint version {version} for block {magic!r}')


def _tensor_bytes(tensor: torch.Tensor, dtype: str = '<f8') -> bytes:
    return np.ascontiguousarray(tensor.detach().cpu().numpy().astype(dtype)).tobytes()


def write_dense(f: BinaryIO, net: DenseNet):
    f.write(DENSE_MAGIC)
    f.write(struct.pack('<HBBI', CHECKPOINT_VERSION, _HIDDEN_CODES[net.activation],
                        _OUTPUT_CODES[net.output_activation], len(net.layer_dims)))
    f.write(np.asarray(net.layer_dims, dtype='<u4').tobytes())
    for layer in net.layers:
        f.write(_tensor_bytes(layer.weight))
        f.write(_tensor_bytes(layer.bias))


def read_dense(f: BinaryIO, dtype: torch.dtype = torch.float32) -> DenseNet:
    _check_magic(f, DENSE_MAGIC)
    hidden_code, output_code, num_dims = _read_struct(f, '<BBI')
    layer_dims = [int(d) for d in _read_array(f, '<u4', (num_dims,))]

    hidden = list(HIDDEN_ACTIVATIONS)[hidden_code]
    output = list(OUTPUT_ACTIVATIONS)[output_code]
    net = DenseNet(layer_dims, activation=hidden, output_activation=output, dtype=dtype)

    with torch.no_grad():
        for layer, (fan_in, fan_out) in zip(net.layers, zip(layer_dims[:-1], layer_dims[1:])):
            layer.weight.copy_(torch.from_numpy(_read_array(f, '<f8', (fan_out, fan_in)).copy()))
            layer.bias.copy_(torch.from_numpy(_read_array(f, '<f8', (fan_out,)).copy()))
    return net


def write_codebooks(f: BinaryIO, codebooks: CodebookSet):
    f.write(CODEBOOK_MAGIC)
    f.write(struct.pack('<HIIId', CHECKPOINT_VERSION, codebooks.num_codebooks,
                        codebooks.num_vectors, codebooks.dim, codebooks.decay))
    f.write(_tensor_bytes(codebooks.vectors))
    f.write(_tensor_bytes(codebooks.counts, '<u8'))
    f.write(_tensor_bytes(codebooks.usage))


def read_codebooks(f: BinaryIO, dtype: torch.dtype = torch.float32) -> CodebookSet:
    _check_magic(f, CODEBOOK_MAGIC)
    num_codebooks, num_vectors, dim, decay = _read_struct(f, '<IIId')
    codebooks = CodebookSet(num_codebooks, num_vectors, dim, decay=decay, dtype=dtype)
    with torch.no_grad():
        codebooks.vectors.copy_(torch.from_numpy(_read_array(f, '<f8', (num_codebooks, num_vectors, dim)).copy()))
        codebooks.counts.copy_(torch.from_numpy(
            _read_array(f, '<u8', (num_codebooks, num_vectors)).astype(np.int64)))
        codebooks.usage.copy_(torch.from_numpy(_read_array(f, '<f8', (num_codebooks, num_vectors)).copy()))
    return codebooks


def _atomic_write(path: Union[str, Path], writer) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'wb') as f:
        writer(f)
    os.replace(tmp, path)
    return path


def _open_checked(path: Union[str, Path]) -> BinaryIO:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Checkpoint not found: {path}')
    return open(path, 'rb')


def save_vqvae(path: Union[str, Path], model: MultiCodebookVQVAE) -> Path:
    def writer(f):
        f.write(VQVAE_MAGIC)
        f.write(struct.pack('<HII', CHECKPOINT_VERSION, model.state_dim, model.action_dim))
        write_dense(f, model.encoder)
        write_dense(f, model.decoder)
        write_codebooks(f, model.codebooks)

    path = _atomic_write(path, writer)
    logger.info(f'VQVAE checkpoint saved: {path}')
    return path


def load_vqvae(path: Union[str, Path], dtype: torch.dtype = torch.float32) -> MultiCodebookVQVAE:
    with _open_checked(path) as f:
        _check_magic(f, VQVAE_MAGIC)
        state_dim, action_dim = _read_struct(f, '<II')
        encoder = read_dense(f, dtype)
        decoder = read_dense(f, dtype)
        codebooks = read_codebooks(f, dtype)

    latent_dim = encoder.out_features
    model = MultiCodebookVQVAE(
        state_dim, action_dim,
        latent_dim=latent_dim,
        num_codebooks=codebooks.num_codebooks,
        num_vectors=codebooks.num_vectors,
        hidden_dims=encoder.layer_dims[1:-1],
        decay=codebooks.decay,
        activation=encoder.activation,
        dtype=dtype,
    )
    model.encoder = encoder
    model.decoder = decoder
    model.codebooks = codebooks
    logger.info(f'VQVAE checkpoint loaded: {path} (H={codebooks.num_codebooks}, N={codebooks.num_vectors})')
    return model


def save_agent(path: Union[str, Path], agent: SACAgent) -> Path:
    def writer(f):
        f.write(AGENT_MAGIC)
        f.write(struct.pack('<HQdd', CHECKPOINT_VERSION, agent.t,
                            float(agent.log_alpha.item()), agent.q1_target.tau))
        write_dense(f, agent.policy.net)
        write_dense(f, agent.q1.net)
        write_dense(f, agent.q2.net)
        write_dense(f, agent.q1_target.module.net)
        write_dense(f, agent.q2_target.module.net)

    return _atomic_write(path, writer)


def load_agent(path: Union[str, Path], dtype: torch.dtype = torch.float32) -> SACAgent:
    with _open_checked(path) as f:
        _check_magic(f, AGENT_MAGIC)
        step, log_alpha, tau = _read_struct(f, '<Qdd')
        nets = [read_dense(f, dtype) for _ in range(5)]

    policy_net = nets[0]
    action_dim = policy_net.out_features // 2
    agent = SACAgent(policy_net.in_features, action_dim, hidden_dims=policy_net.layer_dims[1:-1],
                     tau=tau, dtype=dtype)
    agent.policy.net = policy_net
    agent.q1.net, agent.q2.net = nets[1], nets[2]
    agent.q1_target.module.net, agent.q2_target.module.net = nets[3], nets[4]
    for param in agent.q1_target.parameters():
        param.requires_grad_(False)
    for param in agent.q2_target.parameters():
        param.requires_grad_(False)

    with torch.no_grad():
        agent.log_alpha.fill_(log_alpha)
        agent.step.fill_(step)
    logger.info(f'Agent checkpoint loaded: {path} (t={step})')
    return agent
