"""Kernel backend selection.

The hot path (the per-batch affine chain and its reverse pass) has two
interchangeable implementations: a compiled Cython extension and a numpy
fallback. The compiled one is preferred when built -- not for raw speed
(BLAS usually wins at these sizes; see benchmarks/bench_backends.py) but
because its fixed accumulation order keeps trained parameters
byte-reproducible across machines and BLAS builds. Set SHIFTSCOPE_BACKEND
to "py" or "c" to force a choice.
"""

import os

from . import _pykern

ACT_RELU = _pykern.ACT_RELU
ACT_TANH = _pykern.ACT_TANH

try:
    from . import _ckern
except ImportError:  # extension not built; numpy fallback only
    _ckern = None

_BACKENDS = {"py": _pykern}
if _ckern is not None:
    _BACKENDS["c"] = _ckern


def _initial_backend():
    forced = os.environ.get("SHIFTSCOPE_BACKEND", "auto").lower()
    if forced in ("auto", ""):
        return "c" if "c" in _BACKENDS else "py"
    if forced not in _BACKENDS:
        raise RuntimeError(
            f"SHIFTSCOPE_BACKEND={forced!r} unavailable; "
            f"built backends: {sorted(_BACKENDS)}"
        )
    return forced


_active = _initial_backend()


def backend_name():
    return _active


def available_backends():
    return tuple(sorted(_BACKENDS))


def set_backend(name):
    """Switch the active backend (tests and benchmarks only)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; built: {sorted(_BACKENDS)}")
    _active = name


def get_backend(name):
    return _BACKENDS[name]


def forward_chain(weights, biases, x, activation, skips):
    return _BACKENDS[_active].forward_chain(weights, biases, x, activation,
                                            skips)


def backward_chain(weights, pre, post, x, d_logits, d_penultimate, activation,
                   skips, want_input_grad):
    return _BACKENDS[_active].backward_chain(
        weights, pre, post, x, d_logits, d_penultimate, activation, skips,
        want_input_grad)
