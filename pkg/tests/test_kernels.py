import os
import subprocess
import sys

import numpy as np
import pytest

from fouhit import _kernels as kernels

try:
    import numba  # noqa: F401

    numba_available = True
except ImportError:
    numba_available = False


def _workload(seed=0, count=32, n=257):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((count, n))
    values[:, 0] = 0.0
    points = np.linspace(0.0, 1.3, n)
    return values, points


def test_backend_reports_a_known_name():
    assert kernels.backend() in ("numba", "numpy")


def test_env_flag_forces_numpy_backend():
    env = dict(os.environ, FOUHIT_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import fouhit; print(fouhit.backend())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not numba_available, reason="numba not importable")
def test_reports_identical_across_backends(tmp_path):
    # the backend flag must not change a single byte of scientific output
    script = """
import fouhit as fh
from fouhit.experiments import ExperimentSpec, run_experiment, report_to_csv
spec = ExperimentSpec(
    cfg=fh.ModelConfig(H=0.6, T=1.0, eps=1.0),
    u_values=(12.0,), n_paths=400, grid_sizes=(17, 65),
    sampler=fh.SamplerConfig("circulant", seed=3),
    diagnostic_u_values=(0.9,),
)
print(report_to_csv(run_experiment(spec)), end="")
"""
    outputs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FOUHIT_NO_NUMBA=flag)
        res = subprocess.run(
            [sys.executable, "-c", script],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        outputs[flag] = res.stdout
    assert outputs["0"] == outputs["1"]
    assert "consistent" in outputs["0"]


@pytest.mark.skipif(not numba_available, reason="numba not importable")
class TestBackendsBitIdentical:
    def setup_method(self):
        self.nb = kernels._build_numba_impls()
        self.np_impls = kernels.NUMPY_IMPLS

    def test_fou_transform(self):
        values, points = _workload()
        half_dt = 0.5 * (points[1] - points[0])
        exp_t = np.exp(points)
        exp_neg_t = np.exp(-points)
        a = self.nb["fou"](values, exp_t, exp_neg_t, half_dt, 1.7, np.empty_like(values))
        b = self.np_impls["fou"](values, exp_t, exp_neg_t, half_dt, 1.7, np.empty_like(values))
        assert np.array_equal(a, b)

    def test_path_sups(self):
        values, _ = _workload(seed=3)
        a = self.nb["sups"](values, np.empty(values.shape[0]))
        b = self.np_impls["sups"](values, np.empty(values.shape[0]))
        assert np.array_equal(a, b)

    def test_covariance(self):
        _, points = _workload(seed=5, n=129)
        pow_t = points ** 1.4
        pow_lag = (np.arange(points.size) * (points[1] - points[0])) ** 1.4
        shape = (points.size, points.size)
        a = self.nb["cov"](pow_t, pow_lag, np.empty(shape))
        b = self.np_impls["cov"](pow_t, pow_lag, np.empty(shape))
        assert np.array_equal(a, b)


class TestNumpyReference:
    def test_fou_transform_against_scalar_loop(self):
        values, points = _workload(count=4, n=33)
        out = kernels.NUMPY_IMPLS["fou"](
            values,
            np.exp(points),
            np.exp(-points),
            0.5 * (points[1] - points[0]),
            1.1,
            np.empty_like(values),
        )
        dt = points[1] - points[0]
        for p in range(4):
            q = 0.0
            g = np.exp(points) * values[p]
            for j in range(1, 33):
                q += 0.5 * dt * (g[j - 1] + g[j])
                expected = 1.1 * (values[p, j] - np.exp(-points[j]) * q)
                assert out[p, j] == pytest.approx(expected, rel=1e-12, abs=1e-14)
            assert out[p, 0] == 0.0

    def test_sups_is_row_max(self):
        values, _ = _workload(count=7, n=19)
        out = kernels.NUMPY_IMPLS["sups"](values, np.empty(7))
        assert np.array_equal(out, values.max(axis=1))
