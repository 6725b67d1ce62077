"""Acceptance criteria P1-P10, each reporting one pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the terminal summary.
"""
import time

import numpy as np

from layer_zoo import LAYER_TYPES, layer_input, single_layer_model
from polarnet.autodiff import OptimizerConfig, TrainConfig, evaluate, grad_check, train_loop
from polarnet.data import Dataset, ModulationSpec, augment_scale, gen_modulation
from polarnet.data.cvds import CvdsError, decode, encode, expected_length
from polarnet.layers import TRELU_QUADRANT_EXAMPLES, ComplexTensor, distance_transform, trelu
from polarnet.layers.complex import WfmConv
from polarnet.layers.real import Conv2d
from polarnet.manifold import PolarComplex, act, distance, random_group, random_points, wrap_phase
from polarnet.models import build_model, desk_signal_config, reference_image_config
from polarnet.wfm import chart_mean, wfm_bruteforce, wfm_incremental


def rand_tensor(rng, shape):
    p = random_points(rng, shape)
    return ComplexTensor.from_polar(p.magnitude, p.phase)


def test_p1_isometry(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    n = 10_000
    g = random_group(rng, n, log_scale=3.0)
    a, b = random_points(rng, n, log_scale=3.0), random_points(rng, n, log_scale=3.0)
    err = float(np.max(np.abs(distance(act(g, a), act(g, b)) - distance(a, b))))
    secs = time.perf_counter() - t0
    assert report("P1", err < 1e-9 and secs < 1.0, f"isometry max err {err:.2e} over {n} trials, {secs:.2f}s")


def test_p2_wfm_equivariance(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 26))
        pts, w, g = random_points(rng, n), rng.uniform(0, 1, n), random_group(rng)
        worst = max(worst, float(distance(act(g, wfm_incremental(pts, w)), wfm_incremental(act(g, pts), w))))
    secs = time.perf_counter() - t0
    assert report("P2", worst < 1e-9 and secs < 5.0, f"wFM equivariance max dist {worst:.2e}, {secs:.2f}s")


def test_p3_distance_invariance(report):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        shape = (int(rng.integers(1, 3)), int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        x = rand_tensor(rng, shape)
        w = rng.uniform(0.01, 1, (int(rng.integers(1, 4)), int(np.prod(shape[1:]))))
        g = random_group(rng, log_scale=2.0)
        diff = distance_transform(x.act(g), w).value - distance_transform(x, w).value
        worst = max(worst, float(np.max(np.abs(diff))))
    secs = time.perf_counter() - t0
    assert report("P3", worst < 1e-9 and secs < 10.0, f"distance-transform max diff {worst:.2e}, {secs:.2f}s")


def _max_relative_logit_change(model, rng, inputs=100, batch=10):
    worst = 0.0
    for _ in range(inputs // batch):
        x = rand_tensor(rng, (batch,) + model.input_shape)
        g = random_group(rng, batch, log_scale=2.0)
        base = model.forward(x).value
        moved = model.forward(x.act(g)).value
        worst = max(worst, float(np.max(np.abs(moved - base) / np.maximum(np.abs(base), 1e-12))))
    return worst


def test_p4_end_to_end_invariance(report):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    model = build_model(reference_image_config(seed=4))
    for name, var in model.params.items():
        if name.endswith((".logits", ".g")):
            var.value = rng.normal(size=var.value.shape)
    random_err = _max_relative_logit_change(model, rng)

    trained = build_model(reference_image_config(seed=5))
    samples = rng.normal(size=(8, 1, 100, 100)) + 1j * rng.normal(size=(8, 1, 100, 100))
    data = Dataset(samples, rng.integers(0, 11, 8), 11)
    for _ in train_loop(trained, data, TrainConfig(epochs=1, batch_size=4, seed=5,
                                                   optimizer=OptimizerConfig(lr=1e-2))):
        pass
    trained_err = _max_relative_logit_change(trained, rng)
    secs = time.perf_counter() - t0
    ok = random_err < 1e-6 and trained_err < 1e-6 and secs < 30.0
    assert report("P4", ok, f"relative logit change random {random_err:.2e}, trained {trained_err:.2e}, {secs:.1f}s")


def _dispersed_set(rng):
    n = int(rng.integers(1, 17))
    centre = rng.uniform(-np.pi, np.pi)
    spread = rng.uniform(0, np.pi / 2 - 1e-3)
    phase = wrap_phase(centre + rng.uniform(-spread / 2, spread / 2, n))
    return PolarComplex(np.exp(rng.normal(0, 1, n)), phase), rng.uniform(0.01, 1, n)


def test_p5_oracle_equivalence(report):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    vs_chart = vs_grid = 0.0
    for _ in range(200):
        pts, w = _dispersed_set(rng)
        inc = wfm_incremental(pts, w)
        vs_chart = max(vs_chart, float(distance(inc, chart_mean(pts, w))))
        vs_grid = max(vs_grid, float(distance(inc, wfm_bruteforce(pts, w, grid=1024))))
    secs = time.perf_counter() - t0
    ok = vs_chart < 1e-8 and vs_grid < 2e-3 and secs < 60.0
    assert report("P5", ok, f"vs chart mean {vs_chart:.2e}, vs grid {vs_grid:.2e}, {secs:.1f}s")


def test_p6_trelu_regions(report):
    exact = True
    for (r, theta), (r_out, theta_out) in TRELU_QUADRANT_EXAMPLES:
        y = trelu(ComplexTensor.from_polar(np.array([[[r]]]), np.array([[[theta]]])))
        exact &= bool(np.exp(y.logmag.value).item() == r_out and y.phase.value.item() == theta_out)
    rng = np.random.default_rng(6)
    x = rand_tensor(rng, (1, 100, 100))
    once = trelu(x)
    twice = trelu(once)
    idem = bool(np.array_equal(twice.logmag.value, once.logmag.value)
                and np.array_equal(twice.phase.value, once.phase.value))
    assert report("P6", exact and idem, f"quadrant examples exact={exact}, idempotent on 10^4 points={idem}")


def test_p7_gradients(report):
    t0 = time.perf_counter()
    worst, checked, excluded = 0.0, 0, 0
    for seed in range(20):
        for layer in LAYER_TYPES:
            rng = np.random.default_rng(seed)
            model = single_layer_model(layer, rng)
            res = grad_check(model, layer_input(layer, model, rng), h=1e-5, seed=seed)
            worst = max(worst, res.max_rel_error)
            checked += res.checked
            excluded += res.excluded
    secs = time.perf_counter() - t0
    ok = worst < 1e-4 and checked > 0 and secs < 120.0
    assert report("P7", ok, f"max rel err {worst:.2e} over {checked} entries "
                            f"({excluded} excluded), {len(LAYER_TYPES)} layer types x 20 seeds, {secs:.1f}s")


# Both nets get the same budget; each uses the step size it trains stably with.
P8_EPOCHS = 24
P8_LR = {"surreal": 1e-2, "real-baseline": 1e-3}


def test_p8_desk_invariance(report):
    t0 = time.perf_counter()
    train = gen_modulation(ModulationSpec(per_class=500, snr_db=10, seed=7))
    test = gen_modulation(ModulationSpec(per_class=500, snr_db=10, seed=8))
    moved, _ = augment_scale(test, seed=11)
    acc = {}
    for arch, lr in P8_LR.items():
        model = build_model(desk_signal_config(arch))
        cfg = TrainConfig(epochs=P8_EPOCHS, batch_size=32, seed=7, optimizer=OptimizerConfig(lr=lr))
        for _ in train_loop(model, train, cfg):
            pass
        acc[arch] = (evaluate(model, test).accuracy, evaluate(model, moved).accuracy)
    secs = time.perf_counter() - t0
    s_clean, s_aug = acc["surreal"]
    r_clean, r_aug = acc["real-baseline"]
    ok = s_clean >= 0.90 and s_clean - s_aug <= 0.005 and r_clean - r_aug >= 0.10 and secs <= 600
    assert report("P8", ok, f"SurReal clean {s_clean:.4f} aug {s_aug:.4f}; real clean {r_clean:.4f} "
                            f"aug {r_aug:.4f}; {P8_EPOCHS} epochs, {secs:.0f}s")


def test_p9_parameter_accounting(report):
    count = build_model(reference_image_config()).param_count()
    within = abs(count - 67_000) <= 6_700

    rank = 3
    model = build_model(reference_image_config(tr_rank=rank))
    sizes = {name: var.value.size for name, var in model.params.items()}
    ring_ok = True
    for layer in model.layers():
        if isinstance(layer, WfmConv):
            modes = (layer.spec.out_channels, layer.spec.in_channels) + layer.spec.kernel
        elif isinstance(layer, Conv2d):
            modes = (layer.out_channels, layer.in_channels) + tuple(layer.kernel)
        else:
            continue
        stored = sum(n for name, n in sizes.items() if name.startswith(f"{layer.name}.tr."))
        ring_ok &= stored == rank * rank * sum(modes)
    assert report("P9", within and ring_ok, f"reference net {count} params (67K +-10%), ring counts match={ring_ok}")


def test_p10_cvds(report):
    rng = np.random.default_rng(10)
    exact = lengths = True
    for _ in range(50):
        n = int(rng.integers(0, 6))
        c, h, w = (int(v) for v in rng.integers(1, 5, 3))
        classes = int(rng.integers(1, 7))
        samples = (rng.normal(size=(n, c, h, w)) + 1j * rng.normal(size=(n, c, h, w))).astype(np.complex64)
        buf = encode(Dataset(samples, rng.integers(0, classes, n), classes))
        lengths &= len(buf) == expected_length(n, c, h, w) == 24 + n * (4 + 8 * c * h * w)
        exact &= encode(decode(buf)) == buf

    good = encode(Dataset(np.ones((2, 1, 2, 2)), [0, 1], 2))
    corrupt = [b"XXXX" + good[4:], good[:-1], good[:30], good + b"\0", good[:-4] + (1).to_bytes(4, "little")]
    rejected = 0
    for buf in corrupt:
        try:
            decode(buf)
        except CvdsError:
            rejected += 1
    ok = exact and lengths and rejected == len(corrupt)
    assert report("P10", ok, f"50 round trips byte-exact={exact}, length formula={lengths}, "
                             f"rejected {rejected}/{len(corrupt)} corrupt files")
