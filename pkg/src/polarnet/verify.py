"""Seeded randomized property suites with documented tolerances."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .layers.complex import (
    ComplexTensor,
    GTransportSpec,
    WfmConvSpec,
    distance_transform,
    g_transport,
    residual_combine,
    trelu,
    wfm_conv,
)
from .manifold import (
    GroupElement,
    PolarComplex,
    act,
    compose,
    distance,
    log_map,
    random_group,
    random_points,
    transporter,
    wrap_phase,
)
from .wfm import chart_mean, wfm_fixed_point, wfm_incremental


@dataclass
class PropertyResult:
    name: str
    max_error: float
    tolerance: float
    trials: int
    seconds: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _field_distance(a: ComplexTensor, b: ComplexTensor) -> float:
    dl = a.logmag.value - b.logmag.value
    dth = wrap_phase(a.phase.value - b.phase.value)
    return float(np.max(np.sqrt(dl * dl + 2 * dth * dth), initial=0.0))


def _random_tensor(rng, shape) -> ComplexTensor:
    p = random_points(rng, shape)
    return ComplexTensor.from_polar(p.magnitude, p.phase)


def prop_isometry(rng, trials):
    g = random_group(rng, trials)
    a, b = random_points(rng, trials), random_points(rng, trials)
    return np.max(np.abs(distance(act(g, a), act(g, b)) - distance(a, b)))


def prop_triangle(rng, trials):
    a, b, c = (random_points(rng, trials) for _ in range(3))
    ab, bc, ac = distance(a, b), distance(b, c), distance(a, c)
    sym = np.abs(distance(b, a) - ab)
    return max(np.max(np.maximum(ac - ab - bc, 0.0)), np.max(sym), float(np.max(distance(a, a))))


def prop_transitivity(rng, trials):
    a, b = random_points(rng, trials), random_points(rng, trials)
    return np.max(distance(act(transporter(a, b), a), b))


def prop_wrap_idempotence(rng, trials):
    x = rng.uniform(-50, 50, trials)
    x[: trials // 10] = np.pi * rng.integers(-8, 9, trials // 10)
    w = wrap_phase(x)
    return float(np.max(np.abs(wrap_phase(w) - w)))


def prop_chart_consistency(rng, trials):
    a, b = random_points(rng, trials), random_points(rng, trials)
    la, lb = log_map(a), log_map(b)
    chart = np.hypot(lb.d_logr - la.d_logr, np.sqrt(2) * wrap_phase(lb.d_theta - la.d_theta))
    return np.max(np.abs(chart - distance(a, b)))


def prop_group_compatibility(rng, trials):
    g, h, p = random_group(rng, trials), random_group(rng, trials), random_points(rng, trials)
    return np.max(distance(act(g, act(h, p)), act(compose(g, h), p)))


def prop_equivariance(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 26))
        pts = random_points(rng, n)
        w = rng.uniform(0, 1, n)
        g = random_group(rng)
        lhs = act(g, wfm_incremental(pts, w))
        rhs = wfm_incremental(act(g, pts), w)
        worst = max(worst, float(distance(lhs, rhs)))
    return worst


def _clustered(rng, n):
    """Points whose phases span an arc shorter than pi/2."""
    centre = rng.uniform(-np.pi, np.pi)
    spread = rng.uniform(0, np.pi / 2 - 1e-3)
    phase = wrap_phase(centre + rng.uniform(-spread / 2, spread / 2, n))
    return PolarComplex(np.exp(rng.normal(0, 1, n)), phase)


def prop_oracle_agreement(rng, trials):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 26))
        pts, w = _clustered(rng, n), rng.uniform(0.01, 1, n)
        inc = wfm_incremental(pts, w)
        worst = max(worst, float(distance(inc, chart_mean(pts, w))),
                    float(distance(inc, wfm_fixed_point(pts, w).point)))
    return worst


def prop_invariance(rng, trials):
    worst = 0.0
    for _ in range(trials):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        x = _random_tensor(rng, shape)
        w = rng.uniform(0.01, 1, (int(rng.integers(1, 3)), int(np.prod(shape))))
        g = random_group(rng)
        diff = distance_transform(x.act(g), w).value - distance_transform(x, w).value
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def prop_layer_equivariance(rng, trials):
    worst = 0.0
    for _ in range(trials):
        c = int(rng.integers(1, 4))
        x = _random_tensor(rng, (c, 6, 6))
        g = random_group(rng)
        conv = WfmConvSpec(c, 2, (3, 3), (1, 1), rng.normal(size=(2, 9 * c)))
        gt = GTransportSpec(c, np.column_stack([rng.normal(size=c), rng.uniform(-np.pi, np.pi, c)]))
        f2 = _random_tensor(rng, (c, 9, 9))
        align = WfmConvSpec(c, 2, (3, 3), (2, 2), rng.normal(size=(2, 9 * c)))
        f1 = _random_tensor(rng, (c, 4, 4))
        worst = max(
            worst,
            _field_distance(wfm_conv(x.act(g), conv), wfm_conv(x, conv).act(g)),
            _field_distance(g_transport(x.act(g), gt), g_transport(x, gt).act(g)),
            _field_distance(residual_combine(f1.act(g), f2.act(g), align), residual_combine(f1, f2, align).act(g)),
        )
    return worst


def prop_trelu_idempotence(rng, trials):
    x = _random_tensor(rng, (1, 1, trials))
    once = trelu(x)
    return _field_distance(trelu(once), once)


def prop_logit_invariance(rng, trials):
    from .models import build_model, reference_image_config

    model = build_model(reference_image_config(seed=int(rng.integers(1 << 31))))
    for name, var in model.params.items():
        if name.endswith(".logits") or name.endswith(".g"):
            var.value = rng.normal(size=var.value.shape)
    worst = 0.0
    for start in range(0, trials, 10):
        n = min(10, trials - start)
        x = _random_tensor(rng, (n, 1, 100, 100))
        g = random_group(rng, n, log_scale=2.0)
        base = model.forward(x).value
        moved = model.forward(x.act(g)).value
        worst = max(worst, float(np.max(np.abs(moved - base)) / max(np.max(np.abs(base)), 1e-12)))
    return worst


def prop_gradient(rng, trials):
    from .autodiff.gradcheck import grad_check
    from .layers.complex import DistanceTransform, GTransport, TReLU, WfmConv
    from .layers.real import Flatten, Linear
    from .models import Sequential

    worst = 0.0
    for _ in range(max(1, trials // 100)):
        model = Sequential((1, 3, 3), 2)
        st = model.params
        model.append(WfmConv(st, "wfm", 1, 2, (2, 2), (1, 1)))
        model.append(GTransport(st, "g", 2))
        model.append(TReLU("trelu"))
        model.append(DistanceTransform(st, "dist", (2, 2, 2)))
        model.append(Flatten("flat"))
        model.append(Linear(st, "fc", 8, 2, rng=rng))
        for name, var in st.items():
            var.value = rng.normal(size=var.value.shape)
        x = _random_tensor(rng, (2, 1, 3, 3))
        worst = max(worst, grad_check(model, x, h=1e-5, seed=int(rng.integers(1 << 31))).max_rel_error)
    return worst


@dataclass(frozen=True)
class Property:
    name: str
    group: str
    check: Callable
    tolerance: float
    default_trials: int


PROPERTIES = [
    Property("isometry", "manifold", prop_isometry, 1e-9, 10_000),
    Property("metric_axioms", "manifold", prop_triangle, 1e-12, 10_000),
    Property("transitivity", "manifold", prop_transitivity, 1e-12, 10_000),
    Property("wrap_idempotence", "manifold", prop_wrap_idempotence, 0.0, 10_000),
    Property("chart_consistency", "manifold", prop_chart_consistency, 1e-12, 10_000),
    Property("group_compatibility", "manifold", prop_group_compatibility, 1e-12, 10_000),
    Property("equivariance", "wfm", prop_equivariance, 1e-9, 1_000),
    Property("oracle_agreement", "wfm", prop_oracle_agreement, 1e-8, 200),
    Property("invariance", "layers", prop_invariance, 1e-9, 1_000),
    Property("layer_equivariance", "layers", prop_layer_equivariance, 1e-9, 200),
    Property("trelu_idempotence", "layers", prop_trelu_idempotence, 0.0, 10_000),
    Property("logit_invariance", "layers", prop_logit_invariance, 1e-6, 100),
    Property("gradient", "autodiff", prop_gradient, 1e-4, 500),
]


def property_names() -> list[str]:
    return [p.name for p in PROPERTIES]


def run_property(prop: Property, seed: int = 0, trials: Optional[int] = None) -> PropertyResult:
    trials = prop.default_trials if trials is None else trials
    rng = np.random.default_rng([seed, PROPERTIES.index(prop)])
    t0 = time.perf_counter()
    err = float(prop.check(rng, trials))
    seconds = time.perf_counter() - t0
    # exact properties use a zero tolerance, so compare with <=
    ok = err <= prop.tolerance if prop.tolerance == 0 else err < prop.tolerance
    return PropertyResult(prop.name, err, prop.tolerance, trials, seconds, bool(ok and np.isfinite(err)))


def run_suite(names=None, seed: int = 0, trials: Optional[int] = None) -> list[PropertyResult]:
    selected = PROPERTIES if not names else [p for p in PROPERTIES if p.name in names or p.group in names]
    unknown = set(names or ()) - {p.name for p in PROPERTIES} - {p.group for p in PROPERTIES}
    if unknown:
        raise ValueError(f"unknown properties: {sorted(unknown)}")
    return [run_property(p, seed, trials) for p in selected]
