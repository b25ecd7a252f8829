import json
import math

import numpy as np
import pytest

from graphcoref import (
    AdamState,
    DataError,
    KIND_GAE,
    KIND_VGAE,
    Mention,
    ModelConfig,
    TrainedModel,
    TrainingDiverged,
    build_graph,
    decode_pair,
    external_features,
    identity_features,
    init_weights,
    kl_loss_and_grad,
    loss_weights,
    model_loss,
    normalized_adjacency,
    pair_logits,
    recon_loss_and_grad,
    sigmoid,
    split_edges,
    train,
    training_target,
)


class TestModelConfig:
    def test_defaults(self):
        c = ModelConfig()
        assert (c.kind, c.hidden_dim, c.latent_dim) == ("gae", 64, 32)
        assert (c.epochs, c.lr, c.dropout) == (200, 0.001, 0.0)

    @pytest.mark.parametrize(
        "kwargs, msg",
        [
            ({"kind": "mlp"}, "unknown model kind"),
            ({"hidden_dim": 0}, "positive"),
            ({"epochs": 0}, "epochs"),
            ({"lr": 0.0}, "learning rate"),
            ({"dropout": 1.0}, "dropout"),
            ({"threshold": 0.0}, "threshold"),
            ({"adjacency": "coo"}, "adjacency"),
            ({"seed": -1}, "seed"),
        ],
    )
    def test_validation(self, kwargs, msg):
        with pytest.raises(DataError, match=msg):
            ModelConfig(**kwargs)


class TestSigmoidAndLogits:
    def test_sigmoid_reference_values(self):
        assert sigmoid(np.array(0.0)) == pytest.approx(0.5)
        # logit(0.9) = ln 9 = 2.19722...
        assert sigmoid(np.array(2.1972246)) == pytest.approx(0.9, abs=1e-7)

    def test_sigmoid_stable_at_extremes(self):
        out = sigmoid(np.array([-1e4, 1e4]))
        assert out[0] == 0.0
        assert out[1] == 1.0
        assert np.all(np.isfinite(out))

    def test_pair_logits_matches_loop(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=(6, 4))
        pairs = [(0, 1), (2, 5), (3, 3)]
        out = pair_logits(z, pairs)
        for k, (i, j) in enumerate(pairs):
            assert out[k] == pytest.approx(float(z[i] @ z[j]))

    def test_pair_logits_empty_and_range(self):
        z = np.zeros((3, 2))
        assert pair_logits(z, []).shape == (0,)
        with pytest.raises(DataError, match="out of range"):
            pair_logits(z, [(0, 3)])

    def test_decode_pair_probability(self):
        z = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert decode_pair(z, 0, 1) == pytest.approx(float(sigmoid(np.array(2.0))))
        # diagonal of the decoded matrix is always at least 1/2
        rng = np.random.default_rng(1)
        zr = rng.normal(size=(10, 4))
        for i in range(10):
            assert decode_pair(zr, i, i) >= 0.5


class TestLossWeights:
    def test_formulas(self):
        t = training_target(4, [(0, 1)])
        # nnz = 4 diagonal + 2 symmetric cells = 6 of 16
        pw, norm = loss_weights(t)
        assert pw == pytest.approx((16 - 6) / 6)
        assert norm == pytest.approx(16 / (2 * (16 - 6)))

    def test_fully_positive_degenerates_to_unweighted(self):
        t = training_target(2, [(0, 1)])
        assert np.all(t == 1.0)
        assert loss_weights(t) == (1.0, 1.0)

    def test_all_zero_rejected(self):
        with pytest.raises(DataError, match="no positive cells"):
            loss_weights(np.zeros((3, 3)))


class TestReconLoss:
    def test_matches_naive_per_cell_formula(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(5, 3))
        t = training_target(5, [(0, 1), (2, 3), (1, 4)])
        pw, norm = loss_weights(t)
        loss, _ = recon_loss_and_grad(z, t, pw, norm)

        logits = z @ z.T
        total = 0.0
        for i in range(5):
            for j in range(5):
                l, y = logits[i, j], t[i, j]
                w = 1.0 + (pw - 1.0) * y
                total += (1.0 - y) * l + w * math.log1p(math.exp(-abs(l))) + w * max(-l, 0.0)
        assert loss == pytest.approx(norm * total / 25.0, rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(4, 2))
        t = training_target(4, [(0, 2), (1, 3)])
        pw, norm = loss_weights(t)
        _, dz = recon_loss_and_grad(z, t, pw, norm)
        eps = 1e-6
        for i in range(4):
            for j in range(2):
                zp = z.copy()
                zp[i, j] += eps
                zm = z.copy()
                zm[i, j] -= eps
                lp, _ = recon_loss_and_grad(zp, t, pw, norm)
                lm, _ = recon_loss_and_grad(zm, t, pw, norm)
                assert dz[i, j] == pytest.approx((lp - lm) / (2 * eps), rel=1e-5, abs=1e-10)

    def test_perfect_reconstruction_drives_loss_down(self):
        # strongly separated embeddings of a two-clique target
        z = np.array([[4.0, 0.0], [4.0, 0.0], [0.0, 4.0], [0.0, 4.0]])
        t = training_target(4, [(0, 1), (2, 3)])
        pw, norm = loss_weights(t)
        good, _ = recon_loss_and_grad(z, t, pw, norm)
        bad, _ = recon_loss_and_grad(np.zeros_like(z), t, pw, norm)
        assert good < bad


class TestKLLoss:
    def test_standard_normal_has_zero_kl(self):
        mu = np.zeros((4, 2))
        logsig = np.zeros((4, 2))
        kl, dmu, dlogsig = kl_loss_and_grad(mu, logsig)
        assert kl == 0.0
        assert np.all(dmu == 0.0)
        assert np.all(dlogsig == 0.0)

    def test_reference_value(self):
        # mu = 1, logsig = 0 on a 4x2 latent: KL = (1/2N) * sum(mu^2) = 8 / 8
        kl, _, _ = kl_loss_and_grad(np.ones((4, 2)), np.zeros((4, 2)))
        assert kl == pytest.approx(1.0)

    def test_kl_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            mu = rng.normal(size=(6, 3))
            logsig = rng.normal(size=(6, 3))
            kl, _, _ = kl_loss_and_grad(mu, logsig)
            assert kl >= 0.0

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(5)
        mu = rng.normal(size=(3, 2))
        logsig = rng.normal(size=(3, 2)) * 0.3
        _, dmu, dlogsig = kl_loss_and_grad(mu, logsig)
        eps = 1e-6
        for arr, grad in ((mu, dmu), (logsig, dlogsig)):
            for i in range(3):
                for j in range(2):
                    old = arr[i, j]
                    arr[i, j] = old + eps
                    kp, _, _ = kl_loss_and_grad(mu, logsig)
                    arr[i, j] = old - eps
                    km, _, _ = kl_loss_and_grad(mu, logsig)
                    arr[i, j] = old
                    assert grad[i, j] == pytest.approx((kp - km) / (2 * eps), rel=1e-6, abs=1e-9)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        # with bias correction, the very first update is lr * g / (|g| + eps)
        w = init_weights(KIND_GAE, 2, 2, 2, np.random.default_rng(0))
        before = {k: v.copy() for k, v in w.params.items()}
        grads = {k: np.full_like(v, 0.5) for k, v in w.params.items()}
        AdamState(w).step(w, grads, lr=0.1)
        for k in w.params:
            assert np.allclose(before[k] - w.params[k], 0.1 * 0.5 / (0.5 + 1e-8))

    def test_two_steps_match_hand_rollout(self):
        w = init_weights(KIND_GAE, 1, 1, 1, np.random.default_rng(0))
        w.params = {"w": np.array([[1.0]])}
        adam = AdamState(w)
        g1, g2, lr = 0.3, -0.2, 0.01
        adam.step(w, {"w": np.array([[g1]])}, lr)
        adam.step(w, {"w": np.array([[g2]])}, lr)

        m = 0.1 * g1
        v = 0.001 * g1 * g1
        x = 1.0 - lr * (m / (1 - 0.9)) / (math.sqrt(v / (1 - 0.999)) + 1e-8)
        m = 0.9 * m + 0.1 * g2
        v = 0.999 * v + 0.001 * g2 * g2
        x -= lr * (m / (1 - 0.9**2)) / (math.sqrt(v / (1 - 0.999**2)) + 1e-8)
        assert w.params["w"][0, 0] == pytest.approx(x, rel=1e-12)


def tiny_training_setup(n_chains=4, chain_size=5, seed=1):
    ms = []
    mid = 0
    for c in range(n_chains):
        for _ in range(chain_size):
            ms.append(Mention(mid, f"d{c}", f"event {mid}", f"c{c}"))
            mid += 1
    g = build_graph(ms)
    split = split_edges(g, 0.1, 0.2, seed=seed)
    return g, split


class TestModelLoss:
    def test_gae_ignores_kl(self):
        g, split = tiny_training_setup()
        adj = normalized_adjacency(g, split.train_pos)
        x = identity_features(g)
        w = init_weights(KIND_GAE, g.n, 8, 4, np.random.default_rng(0))
        t = training_target(g.n, split.train_pos)
        pw, norm = loss_weights(t)
        loss, recon, kl, grads = model_loss(adj, x, w, t, pw, norm)
        assert kl == 0.0
        assert loss == recon
        assert set(grads) == {"w0", "w1"}

    def test_vgae_requires_eps(self):
        g, split = tiny_training_setup()
        adj = normalized_adjacency(g, split.train_pos)
        x = identity_features(g)
        w = init_weights(KIND_VGAE, g.n, 8, 4, np.random.default_rng(0))
        t = training_target(g.n, split.train_pos)
        pw, norm = loss_weights(t)
        with pytest.raises(DataError, match="requires eps"):
            model_loss(adj, x, w, t, pw, norm)

    def test_noise_scale_requires_eps(self):
        g, split = tiny_training_setup()
        adj = normalized_adjacency(g, split.train_pos)
        x = identity_features(g)
        w = init_weights(KIND_GAE, g.n, 8, 4, np.random.default_rng(0))
        t = training_target(g.n, split.train_pos)
        pw, norm = loss_weights(t)
        with pytest.raises(DataError, match="requires eps"):
            model_loss(adj, x, w, t, pw, norm, noise_scale=0.1)

    def test_vgae_loss_decomposes(self):
        g, split = tiny_training_setup()
        adj = normalized_adjacency(g, split.train_pos)
        x = identity_features(g)
        w = init_weights(KIND_VGAE, g.n, 8, 4, np.random.default_rng(0))
        t = training_target(g.n, split.train_pos)
        pw, norm = loss_weights(t)
        eps = np.random.default_rng(1).standard_normal((g.n, 4))
        loss, recon, kl, _ = model_loss(adj, x, w, t, pw, norm, eps=eps)
        assert loss == pytest.approx(recon + kl)
        assert kl >= 0.0


class TestTrain:
    def test_loss_decreases_early(self):
        g, split = tiny_training_setup()
        m = train(g, split, identity_features(g), ModelConfig(epochs=10, seed=0))
        losses = [s.loss for s in m.history]
        drops = sum(1 for a, b in zip(losses, losses[1:]) if b <= a)
        assert drops >= 8

    def test_vgae_kl_nonnegative_every_epoch(self):
        g, split = tiny_training_setup()
        m = train(g, split, identity_features(g), ModelConfig(kind="vgae", epochs=15, seed=0))
        assert all(s.kl >= 0.0 for s in m.history)

    def test_bit_identical_reruns(self):
        g, split = tiny_training_setup()
        cfg = ModelConfig(epochs=12, seed=3, dropout=0.2)
        a = train(g, split, identity_features(g), cfg)
        b = train(g, split, identity_features(g), cfg)
        assert a.history == b.history
        assert np.array_equal(a.embedding, b.embedding)

    def test_seed_changes_trajectory(self):
        g, split = tiny_training_setup()
        a = train(g, split, identity_features(g), ModelConfig(epochs=5, seed=0))
        b = train(g, split, identity_features(g), ModelConfig(epochs=5, seed=1))
        assert a.history != b.history

    def test_sparse_adjacency_matches_dense(self):
        g, split = tiny_training_setup()
        dense = train(g, split, identity_features(g), ModelConfig(epochs=8, seed=2))
        sparse = train(
            g, split, identity_features(g), ModelConfig(epochs=8, seed=2, adjacency="sparse")
        )
        assert np.allclose(dense.embedding, sparse.embedding)

    def test_feature_row_mismatch_rejected(self):
        g, split = tiny_training_setup()
        bad = external_features(np.zeros((g.n + 1, 4)))
        with pytest.raises(DataError, match="do not match graph size"):
            train(g, split, bad, ModelConfig(epochs=1))

    def test_divergence_raises_with_epoch(self):
        g, split = tiny_training_setup()
        huge = external_features(np.full((g.n, 4), 1e180))
        with pytest.raises(TrainingDiverged) as exc:
            train(g, split, huge, ModelConfig(epochs=5, seed=0))
        assert exc.value.epoch == 1
        assert "epoch 1" in str(exc.value)

    def test_epoch_numbering_and_val_scores(self):
        g, split = tiny_training_setup()
        m = train(g, split, identity_features(g), ModelConfig(epochs=4, seed=0))
        assert [s.epoch for s in m.history] == [1, 2, 3, 4]
        for s in m.history:
            assert 0.0 <= s.val_ap <= 1.0
            assert 0.0 <= s.val_auc <= 1.0


class TestSaveLoad:
    def test_round_trip_reproduces_probabilities_exactly(self, tmp_path):
        g, split = tiny_training_setup()
        m = train(g, split, identity_features(g), ModelConfig(epochs=6, seed=0))
        p = tmp_path / "model.json"
        m.save(p)
        back = TrainedModel.load(p)
        pairs = list(split.test_pos) + list(split.test_neg)
        assert np.array_equal(m.predict_pairs(pairs), back.predict_pairs(pairs))
        assert back.config == m.config
        assert back.history == m.history
        assert np.array_equal(back.embedding, m.embedding)

    def test_wrong_version_rejected(self, tmp_path):
        p = tmp_path / "model.json"
        p.write_text(json.dumps({"format_version": 99}), encoding="utf-8")
        with pytest.raises(DataError, match="format_version"):
            TrainedModel.load(p)

    def test_malformed_file_rejected(self, tmp_path):
        p = tmp_path / "model.json"
        p.write_text(json.dumps({"format_version": 1, "config": {}}), encoding="utf-8")
        with pytest.raises(DataError, match="malformed model file"):
            TrainedModel.load(p)

    def test_invalid_json_rejected(self, tmp_path):
        p = tmp_path / "model.json"
        p.write_text("{oops", encoding="utf-8")
        with pytest.raises(DataError, match="invalid JSON"):
            TrainedModel.load(p)
