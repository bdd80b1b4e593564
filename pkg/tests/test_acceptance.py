"""The acceptance gate: one test per criterion, one PASS/FAIL line each.

Criteria 5-7 share a session fixture that trains the score models over five
seeds on synthetic normal-operation audio and evaluates the close (0 dB)
and distant (+24 dB) sets at desk scale (h = 5 min, t = 2 s, m = 3 per the
horizon-scaling rule). Run with `pytest -m acceptance -v -s`.
"""

import time
import warnings

import numpy as np
import pytest

from leakdet import evaluation as ev
from leakdet import models, nn
from leakdet.audio import MixSpec, Recording, mix_at_snr, rms, synth_ambient, segment
from leakdet.detector import DetectorConfig, detect
from leakdet.dsp import mel_spectrogram
from leakdet.models import DcaeConfig, GmmConfig, RealNvpConfig, bgmm, dcae, gmm, realnvp, save_model

pytestmark = pytest.mark.acceptance

SEEDS = (0, 1, 2, 3, 4)
T_SECONDS = 2.0
H_MINUTES = 5.0
N_PER_CLASS = 8
TRAIN_MINUTES = 20.0
DESK_CONFIGS = {
    "realnvp": RealNvpConfig(batch_size=256, epochs=50),
    "dcae": DcaeConfig(epochs=12),
}


def report(criterion, description, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {description}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="session")
def desk():
    """Train gmm/iforest/realnvp/dcae per seed and evaluate both synthetic
    sets; criteria 5-7 read from the result."""
    warnings.filterwarnings("ignore", message="mix clipped")
    m = ev.scaled_m(H_MINUTES)
    results = {"m": m, "aucs": {}, "sweep": {}}
    train_seconds = 0.0
    close_seconds = 0.0
    trained_models = {}
    for seed in SEEDS:
        t0 = time.time()
        trained = ev.train_models(["gmm", "iforest", "realnvp", "dcae"], T_SECONDS,
                                  [seed], TRAIN_MINUTES, DESK_CONFIGS)
        trained_models[seed] = {key[0]: model for key, model in trained.items()}
        train_seconds += time.time() - t0

        distant = ev.build_distant_set(seed, N_PER_CLASS, H_MINUTES)
        for kind in ("gmm", "iforest", "realnvp", "dcae"):
            value = ev.evaluate_model(trained_models[seed][kind], distant, T_SECONDS, m, "median")
            results["aucs"].setdefault(("distant", kind), []).append(value)
        for kind in ("realnvp", "dcae"):
            for m_sweep in (5, 65):
                value = ev.evaluate_model(trained_models[seed][kind], distant,
                                          T_SECONDS, m_sweep, "median")
                results["sweep"].setdefault((kind, m_sweep), []).append(value)
        del distant

        t0 = time.time()
        close = ev.build_close_set(seed, N_PER_CLASS, H_MINUTES)
        for kind in ("realnvp", "dcae"):
            value = ev.evaluate_model(trained_models[seed][kind], close, T_SECONDS, m, "median")
            results["aucs"].setdefault(("close", kind), []).append(value)
        close_seconds += time.time() - t0
        del close

    # criterion 5's own cost: the training it needs plus its close-set work
    results["close_path_seconds"] = train_seconds + close_seconds
    results["models"] = trained_models
    return results


def test_criterion_1_auc_matches_brute_force():
    rng = np.random.default_rng(2024)
    started = time.time()
    checked = 0
    for _ in range(200):
        n = int(rng.integers(2, 1001))
        scores = rng.integers(0, 50, n).astype(float)  # quantized: many ties
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.sum() == 0 or labels.sum() == n:
            labels[0] = 1 - labels[0]
        positive = scores[labels == 1]
        negative = scores[labels == 0]
        wins = (positive[:, None] > negative[None, :]).sum()
        ties = (positive[:, None] == negative[None, :]).sum()
        brute = (wins + 0.5 * ties) / (len(positive) * len(negative))
        assert ev.auc(scores, labels) == brute
        checked += 1
    elapsed = time.time() - started
    report(1, "auc equals O(n^2) brute-force pair counting on 200 random sets",
           checked == 200 and elapsed < 10.0, f"{elapsed:.1f}s")


def test_criterion_2_em_and_elbo_monotone():
    rng = np.random.default_rng(7)
    worst_em = np.inf
    worst_elbo = np.inf
    for trial in range(5):
        dim = int(rng.integers(3, 8))
        k = int(rng.integers(2, 6))
        centers = rng.uniform(-5, 5, (k, dim))
        X = centers[rng.integers(k, size=400)] + rng.normal(scale=0.8, size=(400, dim))

        params, _ = gmm.fit(X, GmmConfig(n_components=k, max_iter=1),
                            np.random.default_rng(trial))
        previous = -np.inf
        for _ in range(50):
            params, mean_ll = gmm.em_iterate(params, X)
            worst_em = min(worst_em, mean_ll - previous)
            previous = mean_ll

        bparams, _ = bgmm.fit(X, models.BgmmConfig(n_components=k, max_iter=1),
                              np.random.default_rng(trial))
        previous = -np.inf
        for _ in range(50):
            bparams, elbo = bgmm.vb_iterate(bparams, X)
            worst_elbo = min(worst_elbo, elbo - previous)
            previous = elbo
    ok = worst_em > -1e-9 and worst_elbo > -1e-9
    report(2, "EM mean log-likelihood and B-GMM ELBO never decrease over 50 iterations x 5 datasets",
           ok, f"worst EM delta {worst_em:.2e}, worst ELBO delta {worst_elbo:.2e}")


def test_criterion_3_realnvp_contracts():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((300, 25)) * np.linspace(0.5, 1.5, 25)
    params, _ = realnvp.fit(X, RealNvpConfig(batch_size=100, epochs=10),
                            np.random.default_rng(12))
    points = rng.standard_normal((100, 25))
    z, _ = realnvp.forward(params, points)
    back, _ = realnvp.inverse(params, z)
    roundtrip = float(np.abs(back - points).max())

    init = realnvp.build(RealNvpConfig(), np.random.default_rng(13))
    analytic = 12.5 * np.log(2 * np.pi)
    init_err = abs(realnvp.neg_log_prob(init, np.zeros(25)) - analytic)

    batch = rng.standard_normal((32, 25))
    realnvp.loss_and_grads(params, batch)
    grad_err = nn.grad_check(lambda: realnvp.loss_and_grads(params, batch),
                             params.params(), params.grads(),
                             np.random.default_rng(14), num_checks=150)
    ok = roundtrip < 1e-6 and init_err < 1e-10 and grad_err < 1e-4
    report(3, "RealNVP invertibility, identity-at-init density, gradient exactness", ok,
           f"roundtrip {roundtrip:.1e}, init err {init_err:.1e}, grad err {grad_err:.1e}")


def test_criterion_4_layers_and_dcae_training():
    rng = np.random.default_rng(21)
    net = nn.Sequential([
        nn.Conv2d(1, 3, 3, rng), nn.ReLU(), nn.MaxPool2x2(),
        nn.Conv2d(3, 2, 3, rng), nn.ReLU(), nn.MaxPool2x2(),
        nn.Flatten(), nn.Dense(2 * 2 * 1, 8, rng), nn.ReLU(), nn.Dense(8, 4, rng),
    ])
    x = rng.normal(size=(3, 1, 8, 7)) + 0.05
    target = rng.normal(size=(3, 4))

    def loss_fn():
        out = net.forward(x)
        return 0.5 * float(((out - target) ** 2).sum())

    out = net.forward(x)
    for layer in net.layers:
        layer.zero_grads()
    net.backward(out - target)
    layer_err = nn.grad_check(loss_fn, net.params(), net.grads(),
                              np.random.default_rng(22), num_checks=150)

    decoder_net = nn.Sequential([
        nn.Dense(4, 2 * 2 * 3, rng), nn.Reshape((2, 2, 3)),
        nn.NearestUpsample2x(), nn.PadToSize((5, 7)), nn.Conv2d(2, 1, 3, rng),
    ])
    xd = rng.normal(size=(4, 4))
    td = rng.normal(size=(4, 1, 5, 7))

    def dec_loss():
        return 0.5 * float(((decoder_net.forward(xd) - td) ** 2).sum())

    out = decoder_net.forward(xd)
    for layer in decoder_net.layers:
        layer.zero_grads()
    decoder_net.backward(out - td)
    decoder_err = nn.grad_check(dec_loss, decoder_net.params(), decoder_net.grads(),
                                np.random.default_rng(23), num_checks=150)

    # 100-epoch training on 500 synthetic mel spectrograms (0.5 s ambient clips)
    pool = synth_ambient(260.0, seed=77)
    specs = np.stack([mel_spectrogram(c).values for c in segment(pool, 0.5)[:500]])
    assert specs.shape[0] == 500
    _, history = dcae.fit(specs, DcaeConfig(epochs=100), np.random.default_rng(24))
    ok = layer_err < 1e-4 and decoder_err < 1e-4 and history[-1] < history[0]
    report(4, "every layer passes grad_check at 1e-4; 100-epoch DCAE training reduces MSE", ok,
           f"encoder-stack err {layer_err:.1e}, decoder-stack err {decoder_err:.1e}, "
           f"mse {history[0]:.4f} -> {history[-1]:.4f}")


def test_criterion_5_close_proximity_analog(desk):
    nvp = float(np.mean(desk["aucs"][("close", "realnvp")]))
    dc = float(np.mean(desk["aucs"][("close", "dcae")]))
    elapsed = desk["close_path_seconds"]
    ok = nvp >= 0.95 and dc >= 0.95 and elapsed < 900.0
    report(5, "close set (0 dB): RealNVP and DCAE mean AUC >= 0.95 within 15 min", ok,
           f"realnvp {nvp:.3f}, dcae {dc:.3f}, {elapsed:.0f}s")


def test_criterion_6_distant_orderings(desk):
    means = {kind: float(np.mean(desk["aucs"][("distant", kind)]))
             for kind in ("gmm", "iforest", "realnvp", "dcae")}
    ok = (means["realnvp"] >= means["gmm"] and means["dcae"] >= means["gmm"]
          and means["iforest"] <= means["gmm"])
    report(6, "distant set (+24 dB): RealNVP and DCAE >= GMM; isolation forest <= GMM", ok,
           ", ".join(f"{k} {v:.3f}" for k, v in means.items()))


def test_criterion_7_sample_count_sweep(desk):
    nvp5 = float(np.mean(desk["sweep"][("realnvp", 5)]))
    nvp65 = float(np.mean(desk["sweep"][("realnvp", 65)]))
    dc5 = float(np.mean(desk["sweep"][("dcae", 5)]))
    dc65 = float(np.mean(desk["sweep"][("dcae", 65)]))
    ok = nvp5 < nvp65 and dc5 < dc65
    report(7, "distant set: mean AUC at m=5 below mean AUC at m=65 for RealNVP and DCAE", ok,
           f"realnvp {nvp5:.3f} -> {nvp65:.3f}, dcae {dc5:.3f} -> {dc65:.3f}")


def test_criterion_8_determinism(desk, tmp_path):
    rng = np.random.default_rng(31)
    data = rng.standard_normal((300, 25))
    paths = []
    for name in ("one", "two"):
        model = models.train("gmm", data, GmmConfig(n_components=4), seed=9)
        path = tmp_path / f"{name}.json"
        save_model(model, path)
        paths.append(path)
    models_identical = paths[0].read_bytes() == paths[1].read_bytes()

    trained = ev.train_models(["gmm"], T_SECONDS, (0, 1), train_minutes=2.0,
                              configs={"gmm": GmmConfig(n_components=4)})

    def build(seed, h_minutes):
        return ev.build_distant_set(seed, 2, h_minutes)

    csv_a = ev.grid_csv(ev.run_grid(trained, build, [0.5], [T_SECONDS], [2], "median", (0, 1)))
    csv_b = ev.grid_csv(ev.run_grid(trained, build, [0.5], [T_SECONDS], [2], "median", (0, 1)))

    model = desk["models"][0]["gmm"]
    probe = ev.training_recording(99, 0.5)
    config = DetectorConfig(model, "median", h_minutes=1.0, t_seconds=T_SECONDS, m=7)
    sequential = detect(probe, config, parallel=False)
    parallel = detect(probe, config, parallel=True)
    ok = (models_identical and csv_a == csv_b
          and sequential.scores == parallel.scores
          and sequential.aggregate == parallel.aggregate)
    report(8, "identical seeds give byte-identical models and reports; parallel == sequential", ok)


def test_criterion_9_snr_mixer_accuracy():
    rng = np.random.default_rng(41)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2000, 8000))
        snr_db = float(rng.uniform(-10.0, 30.0))
        signal = Recording(rng.uniform(-0.05, 0.05, n), 16000)
        noise = Recording(rng.uniform(-0.05, 0.05, n + int(rng.integers(0, 1000))), 16000)
        mixed = mix_at_snr(signal, noise, MixSpec(snr_db))
        noise_part = mixed.samples - signal.samples
        achieved = 10 * np.log10(rms(signal.samples) ** 2 / rms(noise_part) ** 2)
        worst = max(worst, abs(achieved - snr_db))
    report(9, "achieved SNR within 0.05 dB of requested over 100 random pairs",
           worst <= 0.05, f"worst |error| {worst:.2e} dB")
