"""Kernel backend selection.

The compiled Cython extension is preferred; the numpy fallback is used
when it is missing. Override with CODIST_BACKEND=python|compiled.
"""

import os

_pref = os.environ.get("CODIST_BACKEND", "auto").lower()

if _pref in ("auto", "compiled", "c"):
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:
        if _pref in ("compiled", "c"):
            raise
        from . import _pykernels as _impl
        BACKEND = "python"
elif _pref in ("python", "py"):
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    raise ValueError(f"unknown CODIST_BACKEND value: {_pref!r}")

linear_pass = _impl.linear_pass
exp_pass = _impl.exp_pass
tally_linear_pass = _impl.tally_linear_pass
tally_exp_pass = _impl.tally_exp_pass
mf_score_subset = _impl.mf_score_subset
mf_score_all = _impl.mf_score_all
mf_user_step_sgd = _impl.mf_user_step_sgd
mf_user_step_adagrad = _impl.mf_user_step_adagrad
