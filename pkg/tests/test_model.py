"""Encoders, triplet loss, mining, and the training loop."""

import numpy as np
import pytest

from multires.corpus import QaPair
from multires.errors import (
    ConfigError,
    ContractError,
    DatasetError,
    DegenerateVectorError,
    MiningError,
)
from multires.model import (
    LossConfig,
    TrainConfig,
    init_convrr_params,
    init_fcrr_params,
    mine_hard,
    pair_distance,
    serialize_params,
    train,
    triplet_loss,
    zero_convrr_params,
)
from multires.model.encoder import (
    convrr_backward,
    convrr_forward,
    fcrr_backward,
    fcrr_forward,
    mean_embedding_encode,
)
from multires.numerics import finite_diff_check
from multires.numerics.adam import AdamConfig


def straight_line_convrr(X, params):
    """Independent reimplementation: explicit loops, no shared kernel code."""
    X = np.asarray(X, dtype=np.float64)
    k, d = X.shape
    h = X
    for blk in params.blocks:
        W, b = np.asarray(blk.kernels, np.float64), np.asarray(blk.bias, np.float64)
        n_k, ws, _ = W.shape
        pad = (ws - 1) // 2
        z = np.zeros((k, n_k))
        for t in range(k):
            for c in range(n_k):
                acc = b[c]
                for s in range(ws):
                    r = t + s - pad
                    if 0 <= r < k:
                        acc += float(np.dot(h[r], W[c, s]))
                z[t, c] = acc
        h = np.maximum(z, 0.0)
    pooled = h.sum(axis=0) / k
    residual = X.sum(axis=0) / k
    raw = params.scale * pooled + residual
    return raw / np.linalg.norm(raw)


class TestConvRRForward:
    def test_zero_network_reduces_to_residual(self, rng):
        X = rng.normal(size=(5, 4))
        params = zero_convrr_params(4, depth=2, window=3, dtype=np.float64)
        out = convrr_forward(X, params)
        mean = X.mean(axis=0)
        assert np.allclose(out, mean / np.linalg.norm(mean), atol=1e-15)

    def test_scale_zero_ignores_weights(self, rng):
        X = rng.normal(size=(4, 3))
        params = init_convrr_params(3, depth=2, window=3, scale=0.0, rng=rng, dtype=np.float64)
        zero = zero_convrr_params(3, depth=2, window=3, scale=0.0, dtype=np.float64)
        assert np.allclose(convrr_forward(X, params), convrr_forward(X, zero), atol=1e-15)

    def test_matches_independent_oracle(self, rng):
        X = rng.normal(size=(4, 6))
        params = init_convrr_params(6, depth=2, window=3, scale=0.3, rng=rng, dtype=np.float64)
        assert np.allclose(convrr_forward(X, params), straight_line_convrr(X, params), atol=1e-10)

    def test_output_is_unit(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 6))
            X = rng.normal(size=(k, 5))
            params = init_convrr_params(5, depth=2, window=5, scale=0.5, rng=rng, dtype=np.float64)
            assert abs(np.linalg.norm(convrr_forward(X, params)) - 1.0) < 1e-6

    def test_all_zero_text_rejected(self):
        params = zero_convrr_params(3, dtype=np.float64)
        with pytest.raises(DegenerateVectorError):
            convrr_forward(np.zeros((2, 3)), params)

    def test_scale_pool_commutes(self, rng):
        """sf * mean(Y) == mean(sf * Y): linearity guard for refactors."""
        Y = rng.normal(size=(6, 4))
        sf = 0.37
        assert np.allclose(sf * Y.mean(axis=0), (sf * Y).mean(axis=0), atol=1e-12)


class TestConvRRBackward:
    def test_zero_upstream_zero_grads(self, rng):
        X = rng.normal(size=(3, 4))
        params = init_convrr_params(4, depth=2, window=3, rng=rng, dtype=np.float64)
        grads, gx = convrr_backward(X, params, np.zeros(4))
        assert all(not g.any() for g in grads)
        assert not gx.any()

    def test_scale_zero_kills_parameter_gradients(self, rng):
        X = rng.normal(size=(3, 4))
        params = init_convrr_params(4, depth=2, window=3, scale=0.0, rng=rng, dtype=np.float64)
        grads, _ = convrr_backward(X, params, rng.normal(size=4))
        assert all(not g.any() for g in grads)

    def test_finite_difference_all_parameters(self, rng):
        X = rng.normal(size=(4, 5))
        params = init_convrr_params(5, depth=2, window=3, scale=0.8, rng=rng, dtype=np.float64)
        up = rng.normal(size=5)
        grads, gx = convrr_backward(X, params, up)
        tensors = params.tensors()
        for i in range(len(tensors)):
            def f(z, i=i):
                replaced = list(tensors)
                replaced[i] = z
                return float(np.dot(convrr_forward(X, params.replace_tensors(replaced)), up))

            assert finite_diff_check(f, tensors[i], grads[i]) < 1e-5

        def f_x(z):
            return float(np.dot(convrr_forward(z, params), up))

        assert finite_diff_check(f_x, X, gx) < 1e-5


class TestFCRR:
    def test_zero_weights_reduce_to_residual(self, rng):
        X = rng.normal(size=(3, 4))
        params = init_fcrr_params(4, rng=rng, dtype=np.float64)
        params.weight[:] = 0
        params.bias[:] = 0
        mean = X.mean(axis=0)
        assert np.allclose(fcrr_forward(X, params), mean / np.linalg.norm(mean), atol=1e-15)

    def test_single_row_residual_is_the_row(self, rng):
        x = rng.normal(size=(1, 4))
        params = init_fcrr_params(4, rng=rng, dtype=np.float64)
        params.weight[:] = 0
        params.bias[:] = 0
        assert np.allclose(fcrr_forward(x, params), x[0] / np.linalg.norm(x[0]), atol=1e-15)

    def test_finite_difference(self, rng):
        X = rng.normal(size=(3, 5))
        params = init_fcrr_params(5, scale=0.6, rng=rng, dtype=np.float64)
        up = rng.normal(size=5)
        grads, gx = fcrr_backward(X, params, up)

        def f_w(z):
            return float(np.dot(fcrr_forward(X, params.replace_tensors([z, params.bias])), up))

        def f_b(z):
            return float(np.dot(fcrr_forward(X, params.replace_tensors([params.weight, z])), up))

        def f_x(z):
            return float(np.dot(fcrr_forward(z, params), up))

        assert finite_diff_check(f_w, params.weight, grads[0]) < 1e-5
        assert finite_diff_check(f_b, params.bias, grads[1]) < 1e-5
        assert finite_diff_check(f_x, X, gx) < 1e-5


class TestPairDistance:
    def test_equal_vectors(self):
        v = np.array([1.0, 0.0])
        assert pair_distance(v, v) == 0.0

    def test_orthogonal(self):
        assert pair_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0

    def test_antipodal(self):
        assert pair_distance(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 4.0

    def test_non_unit_rejected_in_checked_mode(self):
        with pytest.raises(ContractError):
            pair_distance(np.array([2.0, 0.0]), np.array([1.0, 0.0]))

    def test_monotone_in_cosine(self, rng):
        a = rng.normal(size=6)
        a /= np.linalg.norm(a)
        b = rng.normal(size=6)
        b /= np.linalg.norm(b)
        assert abs(pair_distance(a, b) - (2 - 2 * float(np.dot(a, b)))) < 1e-12


class TestTripletLoss:
    def test_violating(self):
        assert triplet_loss(0.5, 1.0, LossConfig(margin=1.0)) == 0.5

    def test_satisfied_clamps(self):
        assert triplet_loss(0.2, 1.5, LossConfig(margin=1.0)) == 0.0

    def test_boundary_is_margin(self):
        assert triplet_loss(0.7, 0.7, LossConfig(margin=1.0)) == 1.0

    def test_nonnegative_and_lipschitz(self, rng):
        cfg = LossConfig(margin=1.0)
        for _ in range(200):
            d_pos, d_neg = rng.uniform(0, 4, size=2)
            eps = float(rng.uniform(-0.01, 0.01))
            base = triplet_loss(d_pos, d_neg, cfg)
            assert base >= 0
            assert abs(triplet_loss(d_pos + eps, d_neg, cfg) - base) <= abs(eps) + 1e-12
            assert abs(triplet_loss(d_pos, d_neg + eps, cfg) - base) <= abs(eps) + 1e-12

    def test_margin_must_be_positive(self):
        with pytest.raises(ConfigError):
            LossConfig(margin=0.0)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def brute_force_mine(anchors, batch_docs, gold):
    """Exhaustive scan with naive per-pair distances."""
    chosen = []
    for a_idx, anchor in enumerate(anchors):
        best = None
        for d_idx, (doc_id, vec) in enumerate(batch_docs):
            if doc_id == gold[a_idx]:
                continue
            dist = float(np.sum((anchor - vec) ** 2))
            if best is None or dist < best[0] - 1e-18 or (dist == best[0] and d_idx < best[1]):
                best = (dist, d_idx)
        chosen.append(best[1])
    return chosen


class TestMineHard:
    def test_single_candidate(self):
        anchors = [unit([1, 0, 0])]
        docs = [("gold", unit([1, 0.1, 0])), ("other", unit([0, 1, 0]))]
        triplets = mine_hard(anchors, [docs[0][1]], docs, {0: "gold"})
        assert triplets[0].negative == 1
        assert triplets[0].positive == 0

    def test_matches_brute_force(self, rng):
        for _ in range(25):
            n_docs = int(rng.integers(2, 9))
            n_anchors = int(rng.integers(1, 5))
            docs = [(f"d{i}", unit(rng.normal(size=4))) for i in range(n_docs)]
            gold = {a: f"d{int(rng.integers(0, n_docs))}" for a in range(n_anchors)}
            anchors = [unit(rng.normal(size=4)) for _ in range(n_anchors)]
            positives = [dict(docs)[gold[a]] for a in range(n_anchors)]
            triplets = mine_hard(anchors, positives, docs, gold)
            expected = brute_force_mine(anchors, docs, gold)
            assert [t.negative for t in triplets] == expected

    def test_tie_breaks_to_lower_index(self):
        anchor = unit([1, 0, 0])
        same = unit([0, 1, 0])
        docs = [("gold", unit([1, 0.2, 0])), ("n1", same), ("n2", same.copy())]
        triplets = mine_hard([anchor], [docs[0][1]], docs, {0: "gold"})
        assert triplets[0].negative == 1

    def test_satisfied_anchors_kept(self):
        anchor = unit([1, 0, 0])
        docs = [("gold", anchor.copy()), ("far", unit([-1, 0, 0]))]
        triplets = mine_hard([anchor], [anchor], docs, {0: "gold"})
        assert len(triplets) == 1  # d_pos + m <= d_neg, still reported

    def test_anchor_without_gold_in_batch(self):
        anchor = unit([1, 0, 0])
        docs = [("other", unit([0, 1, 0]))]
        with pytest.raises(MiningError):
            mine_hard([anchor], [anchor], docs, {0: "gold"})

    def test_semi_hard_prefers_farther_than_positive(self):
        anchor = unit([1.0, 0.0, 0.0])
        pos = unit([1.0, 0.5, 0.0])
        closer = unit([1.0, 0.1, 0.0])
        farther = unit([0.0, 1.0, 0.0])
        docs = [("gold", pos), ("close", closer), ("far", farther)]
        hard = mine_hard([anchor], [pos], docs, {0: "gold"})
        semi = mine_hard([anchor], [pos], docs, {0: "gold"}, semi_hard=True)
        assert hard[0].negative == 1
        assert semi[0].negative == 2

    def test_semi_hard_falls_back_to_hardest(self):
        anchor = unit([1.0, 0.0])
        pos = unit([0.0, 1.0])  # everything is closer than the positive
        near = unit([1.0, 0.05])
        docs = [("gold", pos), ("near", near)]
        semi = mine_hard([anchor], [pos], docs, {0: "gold"}, semi_hard=True)
        assert semi[0].negative == 1


def two_cluster_pairs(n_pairs=8, dim=6, seed=0, spread=0.05):
    gen = np.random.default_rng(seed)
    centers = np.eye(dim)[:2] * 3
    queries, docs, pairs = {}, {}, []
    for i in range(n_pairs):
        c = centers[i % 2]
        doc = c + gen.normal(0, spread, dim)
        query = c + gen.normal(0, spread, dim)
        docs[f"d{i}"] = doc.astype(np.float32)[None, :]
        queries[f"q{i}"] = query.astype(np.float32)[None, :]
        pairs.append(QaPair(f"q{i}", "", f"d{i}"))
    return pairs, queries, docs


class TestTrain:
    def test_margin_satisfied_dataset_is_bitwise_fixpoint(self):
        dim = 4
        q1 = np.array([[3.0, 0, 0, 0]], dtype=np.float32)
        q2 = np.array([[-3.0, 0, 0, 0]], dtype=np.float32)
        pairs = [QaPair("q1", "", "d1"), QaPair("q2", "", "d2")]
        queries = {"q1": q1, "q2": q2}
        docs = {"d1": q1.copy(), "d2": q2.copy()}
        cfg = TrainConfig(
            iterations=3,
            batch_size=2,
            seed=11,
            adam=AdamConfig(weight_decay=0.0),
        )
        result = train(pairs, queries, docs, "convrr", cfg)
        fresh = init_convrr_params(
            dim,
            depth=cfg.depth,
            window=cfg.window,
            scale=cfg.scale,
            rng=np.random.default_rng(cfg.seed),
        )
        assert all(loss == 0.0 for loss in result.loss_trace)
        assert serialize_params(result.params, "convrr") == serialize_params(fresh, "convrr")

    def test_weight_decay_moves_params_even_when_clamped(self):
        q1 = np.array([[3.0, 0, 0, 0]], dtype=np.float32)
        q2 = np.array([[-3.0, 0, 0, 0]], dtype=np.float32)
        pairs = [QaPair("q1", "", "d1"), QaPair("q2", "", "d2")]
        cfg = TrainConfig(iterations=2, batch_size=2, seed=11, adam=AdamConfig(weight_decay=1e-3))
        result = train(pairs, {"q1": q1, "q2": q2}, {"d1": q1, "d2": q2}, "convrr", cfg)
        fresh = init_convrr_params(
            4, depth=cfg.depth, window=cfg.window, scale=cfg.scale,
            rng=np.random.default_rng(cfg.seed),
        )
        assert serialize_params(result.params, "convrr") != serialize_params(fresh, "convrr")

    def test_seed_determines_trace_bitwise(self):
        pairs, queries, docs = two_cluster_pairs()
        cfg = dict(iterations=4, batch_size=4, adam=AdamConfig(learning_rate=1e-2))
        run_a = train(pairs, queries, docs, "convrr", TrainConfig(seed=3, **cfg))
        run_b = train(pairs, queries, docs, "convrr", TrainConfig(seed=3, **cfg))
        run_c = train(pairs, queries, docs, "convrr", TrainConfig(seed=4, **cfg))
        assert run_a.loss_trace == run_b.loss_trace
        assert serialize_params(run_a.params, "convrr") == serialize_params(run_b.params, "convrr")
        assert run_a.loss_trace != run_c.loss_trace

    def test_loss_decreases_on_separable_data(self):
        pairs, queries, docs = two_cluster_pairs(n_pairs=16, spread=0.4)
        cfg = TrainConfig(
            iterations=30,
            batch_size=8,
            seed=5,
            adam=AdamConfig(learning_rate=1e-2, weight_decay=0.0),
            loss=LossConfig(margin=0.5),
        )
        result = train(pairs, queries, docs, "convrr", cfg)
        assert result.loss_trace[-1] < result.loss_trace[0]

    def test_fcrr_trains(self):
        pairs, queries, docs = two_cluster_pairs()
        cfg = TrainConfig(iterations=3, batch_size=4, seed=2)
        result = train(pairs, queries, docs, "fcrr", cfg)
        assert result.kind == "fcrr"
        assert len(result.loss_trace) == 3

    def test_full_scan_mining_runs(self):
        pairs, queries, docs = two_cluster_pairs()
        cfg = TrainConfig(iterations=2, batch_size=4, seed=2, mining="full_scan")
        result = train(pairs, queries, docs, "convrr", cfg)
        assert len(result.loss_trace) == 2

    def test_single_document_rejected(self):
        q = np.ones((1, 3), dtype=np.float32)
        with pytest.raises(DatasetError):
            train(
                [QaPair("q", "", "d")],
                {"q": q},
                {"d": q},
                "convrr",
                TrainConfig(iterations=1, batch_size=2),
            )

    def test_shared_weights_across_branches(self):
        """Query and doc branches serialize to the same parameter bytes."""
        pairs, queries, docs = two_cluster_pairs()
        cfg = TrainConfig(iterations=2, batch_size=4, seed=9)
        result = train(pairs, queries, docs, "convrr", cfg)
        one = serialize_params(result.params, "convrr")
        again = serialize_params(result.params, "convrr")
        assert one == again


class TestMeanEmbeddingBaseline:
    def test_matches_zero_weight_encoder(self, rng):
        X = rng.normal(size=(4, 6)).astype(np.float32)
        params = zero_convrr_params(6)
        assert np.allclose(convrr_forward(X, params), mean_embedding_encode(X), atol=1e-7)
