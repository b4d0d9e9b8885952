"""The synthetic OOD benchmark: data for every role, both training stages, all detectors.

One call to :func:`run_seed` trains a CE-only baseline, a lambda2-only
ablation and full OECC from a shared pretrained model, and evaluates each.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data_synth import DEFAULT_ROLES, Role, RoleMap, SynthSpec, gen_in_distribution, gen_ood_mixture
from .detectors.msp import msp_score
from .evaluation import calibration_report, evaluate_gram, evaluate_mahalanobis, evaluate_msp
from .training import TrainConfig, build_model, cell_seed, finetune_oecc, oecc_config, pretrain

# seed-stream ids per role
_STREAMS = {
    Role.D_IN_TRAIN: 100,
    Role.D_IN_VAL: 101,
    Role.D_IN_TEST: 102,
    Role.D_OUT_OE: 103,
    Role.D_OUT_VAL: 104,
    Role.D_OUT_TEST: 105,
}
OE_HELDOUT_STREAM = 106


@dataclass
class BenchmarkConfig:
    dim: int = 8
    classes: int = 2
    count: int = 2000
    separation: float = 4.0
    scale: float = 1.0
    offset: float = 6.0
    oe_range: float = 2.0
    noise_scale: float = 1.0
    roles: RoleMap = field(default_factory=lambda: DEFAULT_ROLES)

    def family_params(self) -> dict:
        s = self.noise_scale
        return {
            "uniform_noise": {"low": -self.oe_range, "high": self.oe_range},
            "gaussian_noise": {"scale": s},
            "rademacher": {"scale": s},
            "bernoulli": {"scale": s},
            "blobs_edges": {"height": s},
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roles"] = {"oe": list(self.roles.oe), "val": list(self.roles.val), "test": list(self.roles.test)}
        return d


def make_datasets(seed: int, bcfg: BenchmarkConfig | None = None) -> dict:
    """Every role of the benchmark plus ``"oe_heldout"``, fresh draws from the OE families."""
    bcfg = bcfg or BenchmarkConfig()
    blob = {"separation": bcfg.separation, "scale": bcfg.scale, "offset": bcfg.offset, "layout_seed": seed}
    out = {}
    for role in (Role.D_IN_TRAIN, Role.D_IN_VAL, Role.D_IN_TEST):
        spec = SynthSpec(bcfg.dim, bcfg.classes, "gaussian_blobs", blob, cell_seed(seed, _STREAMS[role]), bcfg.count)
        out[role] = gen_in_distribution(spec, role)
    params = bcfg.family_params()
    bases = {Role.D_OUT_OE: out[Role.D_IN_TRAIN], Role.D_OUT_VAL: out[Role.D_IN_VAL], Role.D_OUT_TEST: out[Role.D_IN_TEST]}
    for role, base in bases.items():
        out[role] = gen_ood_mixture(bcfg.roles.families(role), bcfg.dim, bcfg.count, cell_seed(seed, _STREAMS[role]),
                                    base=base, params=params, role=role)
    out["oe_heldout"] = gen_ood_mixture(bcfg.roles.oe, bcfg.dim, bcfg.count, cell_seed(seed, OE_HELDOUT_STREAM),
                                        base=out[Role.D_IN_TRAIN], params=params, role=Role.D_OUT_OE)
    return out


VARIANTS = {
    "baseline": (0.0, 0.0),
    "lambda2_only": (0.0, None),
    "oecc": (None, None),
}


def run_seed(seed: int, bcfg: BenchmarkConfig | None = None, tcfg: TrainConfig | None = None,
             detectors: bool = True) -> dict:
    """Train and evaluate every variant for one seed; returns a JSON-ready dict."""
    bcfg = bcfg or BenchmarkConfig()
    tcfg = tcfg or TrainConfig(seed=seed)
    ds = make_datasets(seed, bcfg)
    model0 = build_model(tcfg, bcfg.dim, bcfg.classes)
    pretrained, a_tr = pretrain(model0, ds[Role.D_IN_TRAIN], tcfg)
    result = {
        "seed": seed,
        "a_tr": a_tr,
        "pretrained_oe_msp": float(msp_score(pretrained, ds["oe_heldout"].features).mean()),
        "variants": {},
    }
    for name, (l1, l2) in VARIANTS.items():
        ocfg = oecc_config(tcfg, a_tr, bcfg.classes, l1, l2)
        model = finetune_oecc(pretrained, ds[Role.D_IN_TRAIN], ds[Role.D_OUT_OE], tcfg, ocfg)
        res = evaluate_msp(model, ds[Role.D_IN_TEST], ds[Role.D_OUT_TEST])
        res.update(calibration_report(model, ds[Role.D_IN_TEST])[0])
        res["oe_heldout_msp"] = float(msp_score(model, ds["oe_heldout"].features).mean())
        res["lambda1"], res["lambda2"] = ocfg.lambda1, ocfg.lambda2
        if detectors and name != "lambda2_only":
            res["md"] = evaluate_mahalanobis(model, ds[Role.D_IN_TRAIN], ds[Role.D_IN_VAL], ds[Role.D_OUT_VAL],
                                             ds[Role.D_IN_TEST], ds[Role.D_OUT_TEST])[0]
            res["gm"] = evaluate_gram(model, ds[Role.D_IN_TRAIN], ds[Role.D_IN_TEST], ds[Role.D_OUT_TEST], seed=seed)[0]
        result["variants"][name] = res
    return result
