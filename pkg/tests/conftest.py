from pathlib import Path

import numpy as np

from gradagrad import GradaGrad, HyperParams

DATASETS = Path(__file__).resolve().parent.parent / "datasets"
BLOBS = DATASETS / "blobs.libsvm"
BITS = DATASETS / "bits.libsvm"


def make_fuzz_run(
    dim=10,
    steps=1000,
    seed=0,
    d_inf=50.0,
    rho=2.0,
    beta=0.0,
    mode="practical",
    g_inf=3.0,
    drift=1.0,
    scale=0.4,
):
    """Drive a diagonal stepper with a positively-correlated gradient stream.

    The drift makes consecutive gradients agree in sign, so the negative
    branch fires often; the low cap makes the capped branch fire too.
    Gradients are stream noise, not a function of x: the state-machine
    invariants hold for any gradient sequence.
    """
    rng = np.random.default_rng(seed)
    params = HyperParams(gamma0=1.0, rho=rho, beta=beta, d_inf=d_inf, g_inf=g_inf, mode=mode)
    opt = GradaGrad(rng.standard_normal(dim), params)
    traces = [opt.step(rng.normal(drift, scale, dim)) for _ in range(steps)]
    return opt, traces
