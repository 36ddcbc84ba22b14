"""End-to-end single-pixel experiment orchestration.

Builds the acquisition operators once, then runs any subset of the
recovery schemes on one image, returning per-method NMSE and reconstructed
images.  Both the CLI and the verification suite drive this path.
"""

from dataclasses import dataclass, field

import numpy as np

from .baselines import AmpOptions, GroupLassoOptions, amp_soft, group_lasso, \
    optimal_theta, sweep_lambda
from .model import MMV, BgPrior, MeasurementEnsemble, NoiseModel, ProblemInstance
from .single_pixel import DctModel, acquire, build_measurement_matrix, \
    convert_measurements, generate_masks, nmse_db, synth_image
from .solver import EmOptions, RunOptions, vbamp_em_run, vbamp_run

SYNTH_SIGMA_X = 4.0 - np.abs(np.subtract.outer(np.arange(3), np.arange(3)))
SYNTH_EPSILON_NUM = 400          # nonzero coefficients per channel, DC included


@dataclass
class SinglePixelSetup:
    """Masks, measurement matrix, and transform shared across runs."""

    masks: object
    dct: DctModel
    a: np.ndarray

    @classmethod
    def build(cls, n, rate, mask_seed):
        m = int(round(rate * n))
        dct = DctModel(n=n)
        masks = generate_masks(m, n, mask_seed)
        return cls(masks=masks, dct=dct, a=build_measurement_matrix(masks, dct))

    @property
    def m(self):
        return self.masks.m

    @property
    def n(self):
        return self.masks.n


@dataclass
class MethodResult:
    name: str
    coeffs: np.ndarray
    nmse_db: np.ndarray = None
    image: np.ndarray = None
    extra: dict = field(default_factory=dict)


def _converted_problem(conv, noise_std, b):
    ns = np.asarray(noise_std, dtype=float) * conv.noise_scale
    noise = NoiseModel(np.diag(ns**2))
    ens = MeasurementEnsemble(mode=MMV, matrices=(conv.a_tilde,), b=b)
    return ProblemInstance(ensemble=ens, y=conv.y_tilde, noise=noise)


def _reconstruct(setup, coeffs):
    return np.stack([setup.dct.image(coeffs[:, b]) for b in range(coeffs.shape[1])],
                    axis=2)


def run_single_pixel(setup, image, noise_std, noise_seed, methods,
                     prior=None, coeffs_true=None, t_max=200,
                     group_lasso_lam=None, amp_theta=None, em_init=None):
    """Acquire one image and recover it with each requested method.

    ``prior`` defaults to the synthetic-image ground truth parameters.
    ``coeffs_true`` enables NMSE scoring and the group-lasso weight sweep.
    ``amp_theta``/``group_lasso_lam`` pin tuning parameters; when absent they
    are searched (per channel / by ground-truth sweep).
    """
    y = acquire(image, setup.masks, noise_std, noise_seed)
    conv = convert_measurements(y, setup.masks, setup.dct, a=setup.a)
    b = y.shape[1]
    if prior is None:
        prior = BgPrior(epsilon=(SYNTH_EPSILON_NUM - 1) / (setup.n - 1),
                        sigma_x=SYNTH_SIGMA_X)
    opts = RunOptions(t_max=t_max)
    results = {}

    for name in methods:
        if name == "mmv-bamp":
            problem = _converted_problem(conv, noise_std, b)
            xhat, trace = vbamp_run(problem, prior, opts)
            full = conv.restore(xhat)
            extra = {"trace": trace}
        elif name == "mmv-bamp-em":
            problem = _converted_problem(conv, noise_std, b)
            init = em_init or BgPrior(epsilon=0.5, sigma_x=np.eye(b))
            em_opts = RunOptions(t_max=t_max, em=EmOptions())
            xhat, trace, fitted, fitted_noise = vbamp_em_run(problem, init, em_opts)
            full = conv.restore(xhat)
            extra = {"trace": trace, "fitted_prior": fitted,
                     "fitted_noise": fitted_noise}
        elif name == "bamp":
            full = np.empty((setup.n, b))
            full[0] = conv.dc_estimate
            extra = {}
            for ch in range(b):
                ens = MeasurementEnsemble(mode=MMV, matrices=(conv.a_tilde,), b=1)
                ns = noise_std[ch] * conv.noise_scale
                prob = ProblemInstance(
                    ensemble=ens, y=conv.y_tilde[:, [ch]],
                    noise=NoiseModel(np.array([[ns**2]])))
                ch_prior = BgPrior(epsilon=prior.epsilon,
                                   sigma_x=prior.sigma_x[[ch]][:, [ch]])
                xch, _ = vbamp_run(prob, ch_prior, opts)
                full[1:, ch] = xch[:, 0] / conv.column_scale
        elif name == "bamp-em":
            full = np.empty((setup.n, b))
            full[0] = conv.dc_estimate
            extra = {}
            for ch in range(b):
                ens = MeasurementEnsemble(mode=MMV, matrices=(conv.a_tilde,), b=1)
                ns = noise_std[ch] * conv.noise_scale
                prob = ProblemInstance(
                    ensemble=ens, y=conv.y_tilde[:, [ch]],
                    noise=NoiseModel(np.array([[ns**2]])))
                init = BgPrior(epsilon=0.5, sigma_x=np.eye(1))
                em_opts = RunOptions(t_max=t_max, em=EmOptions())
                xch, _, _, _ = vbamp_em_run(prob, init, em_opts)
                full[1:, ch] = xch[:, 0] / conv.column_scale
        elif name == "amp":
            full = np.empty((setup.n, b))
            full[0] = conv.dc_estimate
            thetas = []
            for ch in range(b):
                theta = amp_theta[ch] if amp_theta is not None else \
                    optimal_theta(conv.y_tilde[:, ch], conv.a_tilde)
                xch, _ = amp_soft(conv.y_tilde[:, ch], conv.a_tilde, theta,
                                  AmpOptions(t_max=t_max))
                full[1:, ch] = xch / conv.column_scale
                thetas.append(float(theta))
            extra = {"theta": thetas}
        elif name == "group-lasso":
            if group_lasso_lam is None:
                if coeffs_true is None:
                    raise ValueError(
                        "group-lasso weight sweep needs ground-truth coefficients")
                score = lambda z: nmse_db(conv.restore(z), coeffs_true)
                lam, _ = sweep_lambda(conv.y_tilde, conv.a_tilde,
                                      opts=GroupLassoOptions(max_iters=100),
                                      score_fn=score)
            else:
                lam = group_lasso_lam
            z, info = group_lasso(conv.y_tilde, conv.a_tilde,
                                  GroupLassoOptions(lam=lam))
            full = conv.restore(z)
            extra = {"lam": float(lam), "info": info}
        else:
            raise ValueError(f"unknown method {name!r}")
        res = MethodResult(name=name, coeffs=full, extra=extra)
        if coeffs_true is not None:
            res.nmse_db = nmse_db(full, coeffs_true)
        res.image = _reconstruct(setup, full)
        results[name] = res
    return results, conv


def synth_instance(setup, image_seed):
    """Ground-truth image and coefficients for the synthetic ensemble."""
    if setup.n != 10000:
        side = int(round(np.sqrt(setup.n)))
        return synth_image(image_seed, side=side, block=max(2, side // 5))
    return synth_image(image_seed)
