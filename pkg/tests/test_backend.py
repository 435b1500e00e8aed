"""Compiled kernels against their pure-Python fallbacks, in and out of process."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gibbsbvs import _kernels as k
from gibbsbvs._backend import NUMBA_ENABLED, py_kernel
from gibbsbvs.rng import Stream

pytestmark = pytest.mark.skipif(not NUMBA_ENABLED,
                                reason="already running on the fallback backend")


def test_uniform_stream_bitwise_identical():
    key = Stream.from_seed(77).key
    jit = [k.u01(key, np.uint64(i)) for i in range(100)]
    py = py_kernel(k.u01)
    with np.errstate(over="ignore"):
        ref = [py(key, np.uint64(i)) for i in range(100)]
    assert jit == ref


def test_smoothed_risk_matches_fallback():
    s = Stream.from_seed(3)
    m = s.normals(50)
    y = (s.uniforms(50) < 0.5).astype(np.int64)
    a = k.smoothed_risk(m, y, 0.3, 0.7, 0.7, 0.3, 1.3, 0.2)
    b = py_kernel(k.smoothed_risk)(m, y, 0.3, 0.7, 0.7, 0.3, 1.3, 0.2)
    assert a == pytest.approx(b, rel=1e-12)


def test_cholesky_matches_fallback():
    s = Stream.from_seed(4)
    a = s.normals(25).reshape(5, 5)
    spd = a @ a.T + 5.0 * np.eye(5)
    lo_jit, ok_jit = k.chol_lower(spd)
    lo_py, ok_py = py_kernel(k.chol_lower)(spd)
    assert ok_jit and ok_py
    np.testing.assert_allclose(lo_jit, lo_py, rtol=1e-13, atol=1e-15)


def test_step1_matches_fallback():
    s = Stream.from_seed(5)
    m = s.normals(40)
    y = (s.uniforms(40) < 0.5).astype(np.int64)
    key = Stream.from_seed(9).key
    a = np.asarray(k.step1_mixture(m, y, 0.25, 0.75, 0.75, 0.25, 0.4, key))
    with np.errstate(over="ignore"):
        b = np.asarray(py_kernel(k.step1_mixture)(m, y, 0.25, 0.75, 0.75, 0.25,
                                                  0.4, key))
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


_CHAIN_SNIPPET = """
import json
import numpy as np
from gibbsbvs import (CLASSIFICATION_RHO, PriorSpec, SamplerConfig,
                      derive_risk_spec, run_chain)
from gibbsbvs.generators import GeneratorSpec, generate

gen = GeneratorSpec("sparse-linear", n=25, k=4, support=1, coef_scale=1.0,
                    noise=0.1, truth_seed=6)
data = generate(gen, seed=6)
risk = derive_risk_spec(CLASSIFICATION_RHO, psi=1.0, sigma_n=0.3)
prior = PriorSpec(lam=0.25, rbar=3, v=1.0, k=4)
out = run_chain(data, risk, prior, SamplerConfig(iterations=300, burn_in=50,
                                                 thin=1, seed=13))
print(json.dumps({
    "risk": out.trace_risk_smoothed.tolist(),
    "sizes": out.trace_model_size.tolist(),
    "beta1": out.trace_beta1.tolist(),
}))
"""


def _run_chain_subprocess(numba_flag: str) -> dict:
    env = dict(os.environ, GIBBSBVS_NUMBA=numba_flag)
    res = subprocess.run([sys.executable, "-c", _CHAIN_SNIPPET], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def test_full_chain_agrees_across_backends():
    jit = _run_chain_subprocess("1")
    py = _run_chain_subprocess("0")
    # integer-valued state paths must agree exactly; float traces to rounding
    assert jit["sizes"] == py["sizes"]
    assert jit["beta1"] == py["beta1"]
    np.testing.assert_allclose(jit["risk"], py["risk"], rtol=1e-9, atol=1e-12)
