"""Reverse-mode automatic differentiation over dense float64 arrays.

Computation graphs are rebuilt per sentence (define-by-run) out of `Node`
objects; `backward` replays the recorded operations in reverse construction
order.  `ParamStore` owns named parameter tensors together with their
gradient buffers and AdaDelta accumulators, and reads/writes the binary
model container.
"""

from __future__ import annotations

import itertools
import json
import struct

import numpy as np


class ShapeError(ValueError):
    pass


class GradientError(RuntimeError):
    pass


class ModelFormatError(RuntimeError):
    pass


_node_ids = itertools.count()


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "op", "parents", "_backward", "_nid")

    def __init__(self, value, op="leaf", parents=(), backward=None):
        self.value = value
        self.grad = None
        self.op = op
        self.parents = parents
        self._backward = backward
        self._nid = next(_node_ids)

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape})"


def _arr(x):
    return np.asarray(x, dtype=np.float64)


def _accum(node, g):
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def constant(value):
    return Node(_arr(value), op="const")


def add(a, b):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value + b.value, op="add", parents=(a, b))

    def back():
        _accum(a, out.grad)
        _accum(b, out.grad)

    out._backward = back
    return out


def sub(a, b):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value - b.value, op="sub", parents=(a, b))

    def back():
        _accum(a, out.grad)
        _accum(b, -out.grad)

    out._backward = back
    return out


def mul(a, b):
    """Elementwise product."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value * b.value, op="mul", parents=(a, b))

    def back():
        _accum(a, out.grad * b.value)
        _accum(b, out.grad * a.value)

    out._backward = back
    return out


def scale(a, c):
    """Multiply by a python scalar."""
    c = float(c)
    out = Node(a.value * c, op="scale", parents=(a,))

    def back():
        _accum(a, out.grad * c)

    out._backward = back
    return out


def matmul(a, b):
    va, vb = a.value, b.value
    if va.ndim != 2 or vb.ndim not in (1, 2) or va.shape[1] != vb.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {va.shape} @ {vb.shape}")
    out = Node(va @ vb, op="matmul", parents=(a, b))

    def back():
        g = out.grad
        if vb.ndim == 1:
            _accum(a, np.outer(g, vb))
            _accum(b, va.T @ g)
        else:
            _accum(a, g @ vb.T)
            _accum(b, va.T @ g)

    out._backward = back
    return out


def dot(a, b):
    va, vb = a.value, b.value
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise ShapeError(f"dot shape mismatch: {va.shape} vs {vb.shape}")
    out = Node(va @ vb, op="dot", parents=(a, b))

    def back():
        g = out.grad
        _accum(a, g * vb)
        _accum(b, g * va)

    out._backward = back
    return out


def affine(W, x, b):
    """W @ x + b; x may be a vector or a matrix of column vectors."""
    vW, vx, vb = W.value, x.value, b.value
    if vW.ndim != 2 or vW.shape[1] != vx.shape[0] or vb.shape != (vW.shape[0],):
        raise ShapeError(f"affine shape mismatch: {vW.shape} @ {vx.shape} + {vb.shape}")
    if vx.ndim == 1:
        value = vW @ vx + vb
    else:
        value = vW @ vx + vb[:, None]
    out = Node(value, op="affine", parents=(W, x, b))

    def back():
        g = out.grad
        if vx.ndim == 1:
            _accum(W, np.outer(g, vx))
            _accum(x, vW.T @ g)
            _accum(b, g)
        else:
            _accum(W, g @ vx.T)
            _accum(x, vW.T @ g)
            _accum(b, g.sum(axis=1))

    out._backward = back
    return out


def vecmat(v, M):
    """Row vector times matrix: returns the vector v @ M."""
    vv, vM = v.value, M.value
    if vv.ndim != 1 or vM.ndim != 2 or vv.shape[0] != vM.shape[0]:
        raise ShapeError(f"vecmat shape mismatch: {vv.shape} @ {vM.shape}")
    out = Node(vv @ vM, op="vecmat", parents=(v, M))

    def back():
        g = out.grad
        _accum(v, vM @ g)
        _accum(M, np.outer(vv, g))

    out._backward = back
    return out


def concat_cols(parts):
    """Stack equal-length vectors as the columns of a matrix."""
    parts = list(parts)
    dim = parts[0].value.shape[0]
    for p in parts:
        if p.value.shape != (dim,):
            raise ShapeError(f"concat_cols needs ({dim},) vectors, got {p.value.shape}")
    out = Node(np.stack([p.value for p in parts], axis=1), op="concat_cols", parents=tuple(parts))

    def back():
        for col, p in enumerate(parts):
            _accum(p, out.grad[:, col])

    out._backward = back
    return out


def concat(parts):
    parts = list(parts)
    for p in parts:
        if p.value.ndim != 1:
            raise ShapeError(f"concat needs vectors, got shape {p.value.shape}")
    out = Node(np.concatenate([p.value for p in parts]), op="concat", parents=tuple(parts))

    def back():
        lo = 0
        for p in parts:
            hi = lo + p.value.shape[0]
            _accum(p, out.grad[lo:hi])
            lo = hi

    out._backward = back
    return out


def slice_(a, lo, hi):
    if a.value.ndim != 1 or not (0 <= lo < hi <= a.value.shape[0]):
        raise ShapeError(f"bad slice [{lo}:{hi}] of shape {a.value.shape}")
    out = Node(a.value[lo:hi], op="slice", parents=(a,))

    def back():
        _accum(a, np.zeros_like(a.value))
        a.grad[lo:hi] += out.grad

    out._backward = back
    return out


def pick(a, idx):
    """Scalar element of a vector."""
    if a.value.ndim != 1 or not (0 <= idx < a.value.shape[0]):
        raise ShapeError(f"bad pick [{idx}] of shape {a.value.shape}")
    out = Node(a.value[idx].copy(), op="pick", parents=(a,))

    def back():
        _accum(a, np.zeros_like(a.value))
        a.grad[idx] += out.grad

    out._backward = back
    return out


def row(m, idx):
    """Row of a matrix (embedding lookup)."""
    if m.value.ndim != 2 or not (0 <= idx < m.value.shape[0]):
        raise ShapeError(f"bad row [{idx}] of shape {m.value.shape}")
    out = Node(m.value[idx].copy(), op="row", parents=(m,))

    def back():
        _accum(m, np.zeros_like(m.value))
        m.grad[idx] += out.grad

    out._backward = back
    return out


def relu(a):
    out = Node(np.maximum(a.value, 0.0), op="relu", parents=(a,))

    def back():
        _accum(a, out.grad * (a.value > 0.0))

    out._backward = back
    return out


def tanh(a):
    out = Node(np.tanh(a.value), op="tanh", parents=(a,))

    def back():
        _accum(a, out.grad * (1.0 - out.value * out.value))

    out._backward = back
    return out


def sigmoid(a):
    x = a.value
    v = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Node(v, op="sigmoid", parents=(a,))

    def back():
        _accum(a, out.grad * out.value * (1.0 - out.value))

    out._backward = back
    return out


def vec_max(a):
    """Maximum element of a vector; gradient routed to the first argmax."""
    if a.value.ndim != 1 or a.value.shape[0] == 0:
        raise ShapeError(f"vec_max needs a non-empty vector, got shape {a.value.shape}")
    idx = int(np.argmax(a.value))
    out = Node(a.value[idx].copy(), op="vec_max", parents=(a,))

    def back():
        _accum(a, np.zeros_like(a.value))
        a.grad[idx] += out.grad

    out._backward = back
    return out


def add_all(nodes):
    nodes = list(nodes)
    if not nodes:
        return constant(0.0)
    total = nodes[0]
    for n in nodes[1:]:
        total = add(total, n)
    return total


def use(param):
    """Fresh graph node bound to a stored parameter."""
    node = Node(param.value, op="param")

    def pull():
        param.grad += node.grad

    node._backward = pull
    return node


def backward(loss):
    """Populate gradients of everything `loss` depends on.

    Parameters reachable from `loss` have d(loss)/d(param) added into their
    grad buffers; unreachable gradients are untouched.
    """
    if np.shape(loss.value) != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {np.shape(loss.value)}")
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward()


class Param:
    __slots__ = ("name", "value", "grad", "acc_gsq", "acc_usq")

    def __init__(self, name, value):
        self.name = name
        self.value = _arr(value).copy()
        self.grad = np.zeros_like(self.value)
        self.acc_gsq = np.zeros_like(self.value)
        self.acc_usq = np.zeros_like(self.value)


class ParamStore:
    """Named float64 parameter tensors with gradient slots and AdaDelta state.

    Parameters are created in a deterministic order from a seeded generator,
    so two stores built the same way hold identical values.
    """

    def __init__(self, seed=0):
        self._params = {}
        self._rng = np.random.default_rng(seed)

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params)

    def get(self, name):
        return self._params[name]

    def use(self, name):
        return use(self._params[name])

    def total_size(self):
        return sum(p.value.size for p in self)

    def add(self, name, value):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Param(name, value)
        self._params[name] = p
        return p

    def matrix(self, name, rows, cols):
        limit = np.sqrt(6.0 / (rows + cols))
        return self.add(name, self._rng.uniform(-limit, limit, size=(rows, cols)))

    def vector(self, name, dim):
        return self.add(name, np.zeros(dim))

    def output_vector(self, name, dim):
        limit = np.sqrt(6.0 / (dim + 1))
        return self.add(name, self._rng.uniform(-limit, limit, size=dim))

    def embedding(self, name, rows, cols):
        return self.add(name, 0.01 * self._rng.standard_normal(size=(rows, cols)))

    def zero_grads(self):
        for p in self:
            p.grad[...] = 0.0

    def snapshot(self):
        return {p.name: p.value.copy() for p in self}

    def restore(self, values):
        for p in self:
            p.value[...] = values[p.name]


def adadelta_step(store, rho=0.99, eps=1e-7):
    """Apply one AdaDelta update to every parameter and clear gradients.

    E[g2] <- rho E[g2] + (1-rho) g2
    dx    <- -sqrt(E[dx2] + eps) / sqrt(E[g2] + eps) * g
    E[dx2]<- rho E[dx2] + (1-rho) dx2
    """
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must be in (0, 1), got {rho}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    for p in store:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter {p.name!r}")
        p.acc_gsq *= rho
        p.acc_gsq += (1.0 - rho) * g * g
        dx = -np.sqrt(p.acc_usq + eps) / np.sqrt(p.acc_gsq + eps) * g
        p.acc_usq *= rho
        p.acc_usq += (1.0 - rho) * dx * dx
        p.value += dx
        g[...] = 0.0


MAGIC = b"CHARTPARSE1\n"
FORMAT_VERSION = 1


def save_container(path, tensors, extra=None):
    """Write named tensors plus JSON metadata to the binary model container.

    Layout: magic string, 8-byte little-endian header length, UTF-8 JSON
    header listing name/shape/offset per tensor, then the raw little-endian
    float64 data.
    """
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "tensors": entries, "extra": extra or {}},
        ensure_ascii=True,
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_container(path):
    """Read a model container; returns (tensors dict, extra dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ModelFormatError(f"{path}: bad magic, not a model container")
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise ModelFormatError(f"{path}: truncated header length")
        (header_len,) = struct.unpack("<Q", raw_len)
        raw_header = fh.read(header_len)
        if len(raw_header) != header_len:
            raise ModelFormatError(f"{path}: truncated header")
        try:
            header = json.loads(raw_header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: unreadable header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(f"{path}: unsupported format version {header.get('format_version')}")
        data = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        lo = entry["offset"]
        hi = lo + 8 * size
        if hi > len(data):
            raise ModelFormatError(f"{path}: truncated tensor data for {entry['name']!r}")
        arr = np.frombuffer(data[lo:hi], dtype="<f8").astype(np.float64).reshape(shape)
        tensors[entry["name"]] = arr
    return tensors, header.get("extra", {})


def relu_signature(loss):
    """Sign pattern of every relu input reachable from `loss`.

    Used by the finite-difference checker to detect evaluations that crossed
    a kink (including hinge losses, which are relu nodes).
    """
    signs = []
    seen = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.op == "relu":
            signs.append(np.sign(node.parents[0].value).tobytes())
        stack.extend(node.parents)
    return tuple(sorted(signs))


def gradient_check(build, params, rng, num_checks=100, step=1e-5, rtol=1e-4, floor=1e-8):
    """Central finite differences against `backward` at random coordinates.

    `build()` must rebuild the loss graph for the current parameter values
    and return (loss_node, trace) where trace is hashable discrete data
    describing any data-dependent control flow (decision sequences etc).
    Coordinates whose perturbed evaluations change the trace or flip a relu
    input sign are redrawn, since the loss is not differentiable across
    those boundaries.  Returns (checked, max_rel_err).
    """
    for p in params:
        p.grad[...] = 0.0
    loss, trace0 = build()
    sig0 = relu_signature(loss)
    backward(loss)
    grads = {p.name: p.grad.copy() for p in params}
    for p in params:
        p.grad[...] = 0.0
    sized = [p for p in params if p.value.size]
    if not sized:
        raise ValueError("no parameters to check")
    checked = 0
    max_rel = 0.0
    attempts = 0
    while checked < num_checks:
        attempts += 1
        if attempts > num_checks * 50:
            raise GradientError("too many unstable coordinates near kinks")
        p = sized[int(rng.integers(len(sized)))]
        flat = int(rng.integers(p.value.size))
        idx = np.unravel_index(flat, p.value.shape)
        orig = p.value[idx]

        def evaluate(v):
            p.value[idx] = v
            l, tr = build()
            return float(l.value), tr, relu_signature(l)

        f_plus, tr_p, sig_p = evaluate(orig + step)
        f_minus, tr_m, sig_m = evaluate(orig - step)
        p.value[idx] = orig
        if tr_p != trace0 or tr_m != trace0 or sig_p != sig0 or sig_m != sig0:
            continue
        numeric = (f_plus - f_minus) / (2.0 * step)
        analytic = grads[p.name][idx]
        diff = abs(numeric - analytic)
        denom = max(abs(numeric), abs(analytic))
        rel = diff / denom if denom > 0 else 0.0
        if diff > floor:
            # differences under the absolute floor are finite-difference noise
            max_rel = max(max_rel, rel)
            if rel > rtol:
                raise GradientError(
                    f"gradient mismatch at {p.name}{list(idx)}: numeric {numeric:.8g} vs analytic {analytic:.8g}"
                )
        checked += 1
    return checked, max_rel
