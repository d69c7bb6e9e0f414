"""Tests for the skip-DAE model, objectives, trainer, and checkpoints."""

import numpy as np
import pytest
from helpers import central_difference_gradient, max_relative_error

import synthdata
from skdae import dcor, model as M
from skdae.errors import CheckpointError, ConfigError, DimensionMismatchError
from skdae.features import (
    ContextWindowBatch,
    FeatureMatrix,
    merge_batches,
    normalize_per_utterance,
    stack_context,
)


def small_model(seed=1, feature_dim=5, context=3, units=(8, 6, 4)):
    return M.SkDaeModel.create(
        feature_dim=feature_dim, context_frames=context, encoder_units=units, seed=seed
    )


def random_batch(rng, n=6, feature_dim=5, context=3):
    inputs = rng.uniform(0.0, 1.0, (n, context * feature_dim))
    half = context // 2
    centers = inputs[:, half * feature_dim : (half + 1) * feature_dim].copy()
    targets = rng.uniform(0.0, 1.0, (n, feature_dim))
    return ContextWindowBatch(inputs, centers, targets)


class TestArchitecture:
    def test_default_dimension_chain(self):
        m = M.SkDaeModel.create(seed=0)
        shapes = {name: (lay.fan_out, lay.fan_in) for name, lay in m.layers.items()}
        assert shapes == {
            "enc1": (512, 440),
            "enc2": (256, 552),
            "enc3": (128, 256),
            "dec1": (128, 128),
            "dec2": (256, 168),
            "dec3": (512, 256),
            "out": (40, 512),
        }
        assert m.latent_dim == 128

    def test_forward_shapes(self):
        rng = np.random.default_rng(0)
        m = small_model()
        batch = random_batch(rng, n=9)
        z, x_hat = m.forward(batch)
        assert z.shape == (9, 4)
        assert x_hat.shape == (9, 5)
        assert np.all((x_hat > 0.0) & (x_hat < 1.0))

    def test_zero_weights_make_constant_rows(self):
        m = small_model()
        for layer in m.layers.values():
            layer.w.data = np.zeros_like(layer.w.data)
            layer.b.data = np.zeros_like(layer.b.data)
        batch = random_batch(np.random.default_rng(1), n=5)
        _, x_hat = m.forward(batch)
        np.testing.assert_array_equal(x_hat, np.tile(x_hat[0], (5, 1)))

    def test_skip_path_is_live(self):
        """Perturbing only the center frame (holding the stacked context
        fixed) must change the output: the skip inputs feed enc2/dec2."""
        rng = np.random.default_rng(2)
        m = small_model()
        batch = random_batch(rng, n=4)
        _, base = m.forward(batch)
        nudged = ContextWindowBatch(
            batch.inputs, batch.center_frames + 1e-3, batch.targets
        )
        _, moved = m.forward(nudged)
        assert np.abs(moved - base).max() > 1e-7

    def test_inconsistent_chain_rejected(self):
        m = small_model()
        layers = dict(m.layers)
        layers["enc3"] = M.nn.xavier_init((4, 99), rng=0)
        with pytest.raises(DimensionMismatchError):
            M.SkDaeModel(layers, 5, 3)


class TestLosses:
    def _tensors(self, seed=0, n=8):
        rng = np.random.default_rng(seed)
        x_hat = rng.uniform(0.01, 0.99, (n, 5))
        z = rng.uniform(0.01, 0.99, (n, 4))
        x = rng.uniform(0.0, 1.0, (n, 5))
        return x_hat, z, x

    def test_mse_zero_when_equal(self):
        x_hat, _, _ = self._tensors()
        assert M.loss_mse(x_hat, x_hat) == 0.0

    def test_mse_forty_dims_off_by_one(self):
        x = np.random.default_rng(1).uniform(size=(6, 40))
        assert M.loss_mse(x + 1.0, x) == pytest.approx(40.0)

    def test_mse_matches_summation_oracle(self):
        x_hat, _, x = self._tensors(2)
        direct = float(np.mean([np.sum((a - b) ** 2) for a, b in zip(x_hat, x)]))
        assert M.loss_mse(x_hat, x) == pytest.approx(direct, abs=1e-12)

    def test_cdsk_compositional_oracle(self):
        x_hat, z, x = self._tensors(3)
        beta = 0.01
        expected = M.loss_mse(x_hat, x) + beta * (
            2.0 - dcor.dcor(z, x) - dcor.dcor(x_hat, x)
        )
        assert M.loss_cdsk(x_hat, z, x, beta) == pytest.approx(expected, abs=1e-12)

    def test_cdesk_compositional_oracle(self):
        x_hat, z, x = self._tensors(4)
        beta = sigma = 0.01
        r1, r2 = dcor.dcor(z, x), dcor.dcor(x_hat, x)
        expected = (
            M.loss_mse(x_hat, x)
            + beta * ((1 - r1) + (1 - r2))
            + sigma * ((1 - r1) ** 2 + (1 - r2) ** 2)
        )
        assert M.loss_cdesk(x_hat, z, x, beta, sigma) == pytest.approx(expected, abs=1e-12)

    def test_reduction_chain_is_exact(self):
        """beta = 0 collapses to the MSE and sigma = 0 to the linear
        penalty, bitwise, across fuzzed inputs."""
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 10))
            x_hat = rng.uniform(size=(n, 3))
            z = rng.uniform(size=(n, 2))
            x = rng.uniform(size=(n, 3))
            beta = float(rng.uniform(0.001, 0.1))
            assert M.loss_cdsk(x_hat, z, x, 0.0) == M.loss_mse(x_hat, x)
            assert M.loss_cdesk(x_hat, z, x, beta, 0.0) == M.loss_cdsk(x_hat, z, x, beta)

    def test_perfect_reconstruction_zeroes_cdsk(self):
        """x_hat == x and z an affine copy of x give dcor 1 for both
        penalty terms, so the whole objective vanishes."""
        rng = np.random.default_rng(6)
        x = rng.uniform(0.1, 0.9, (10, 4))
        z = np.hstack([2.0 * x, np.full((10, 1), 0.25)])  # affine map of x
        loss = M.loss_cdsk(x.copy(), z, x, beta=0.01)
        assert loss == pytest.approx(0.0, abs=1e-9)
        assert M.loss_cdesk(x.copy(), z, x, 0.01, 0.01) == pytest.approx(0.0, abs=1e-9)

    def test_degenerate_penalty_skipped(self, caplog):
        x_hat, _, x = self._tensors(7)
        z_const = np.full((8, 4), 0.5)
        with caplog.at_level("WARNING"):
            loss = M.loss_cdsk(x_hat, z_const, x, beta=0.01)
        r2 = dcor.dcor(x_hat, x)
        assert loss == pytest.approx(M.loss_mse(x_hat, x) + 0.01 * (1.0 - r2), abs=1e-12)
        assert "skipping" in caplog.text


class TestFullModelGradients:
    @pytest.mark.parametrize("variant,beta,sigma", [
        ("SK-DAE", 0.0, 0.0),
        ("CDSK-DAE", 0.01, 0.0),
        ("CDESK-DAE", 0.01, 0.01),
    ])
    def test_backprop_matches_finite_differences(self, variant, beta, sigma):
        rng = np.random.default_rng(8)
        m = small_model(seed=4)
        batch = random_batch(rng, n=6)
        loss, _, _, _ = M._batch_loss_graph(
            m, batch.inputs, batch.center_frames, batch.targets, beta, sigma
        )
        loss.backward()

        def full_loss():
            z, x_hat = m.forward_tape(batch.inputs, batch.center_frames)
            return M.loss_cdesk(x_hat.data, z.data, batch.targets, beta, sigma)

        for param in m.parameters():
            got = param.grad.copy()
            original = param.data.copy()

            def f(values, param=param, original=original):
                param.data = values
                try:
                    return full_loss()
                finally:
                    param.data = original

            fd = central_difference_gradient(f, original)
            assert max_relative_error(got, fd) < 1e-4, variant


class TestTrainConfig:
    def test_variant_defaults(self):
        assert M.TrainConfig.for_variant("SK-DAE").beta == 0.0
        cdsk = M.TrainConfig.for_variant("CDSK-DAE")
        assert (cdsk.beta, cdsk.sigma) == (0.01, 0.0)
        cdesk = M.TrainConfig.for_variant("CDESK-DAE")
        assert (cdesk.beta, cdesk.sigma) == (0.01, 0.01)

    def test_sk_dae_forces_zero_weights(self):
        cfg = M.TrainConfig.for_variant("SK-DAE", beta=0.5, sigma=0.5)
        assert cfg.beta == 0.0 and cfg.sigma == 0.0

    def test_inconsistent_config_rejected(self):
        with pytest.raises(ConfigError):
            M.TrainConfig(variant="SK-DAE", beta=0.01).validate()
        with pytest.raises(ConfigError):
            M.TrainConfig(variant="CDSK-DAE", beta=0.0).validate()
        with pytest.raises(ConfigError):
            M.TrainConfig(variant="CDESK-DAE", beta=0.01, sigma=0.0).validate()

    def test_problems_collected_together(self):
        cfg = M.TrainConfig(variant="bogus", beta=-1, epochs=0, batch_size=1)
        problems = cfg.problems()
        assert len(problems) >= 4


class TestTraining:
    def _pool(self, seed=0, rows=64):
        rng = np.random.default_rng(seed)
        return random_batch(rng, n=rows)

    def test_zero_lr_keeps_parameters(self):
        """Frozen parameters leave the epoch-mean loss constant.  (The
        dcor diagnostics still depend on how the shuffle partitions the
        pool, so only the SK-DAE loss is partition-invariant.)"""
        m = small_model(seed=2)
        before = [p.data.copy() for p in m.parameters()]
        cfg = M.TrainConfig.for_variant("SK-DAE", lr=0.0, batch_size=16, epochs=3, seed=0)
        _, reports = M.train(m, self._pool(), cfg)
        for p, b in zip(m.parameters(), before):
            np.testing.assert_array_equal(p.data, b)
        assert reports[0].loss == pytest.approx(reports[-1].loss, rel=1e-9)
        assert reports[0].mse == pytest.approx(reports[-1].mse, rel=1e-9)

    def test_loss_decreases_on_identity_task(self):
        """Overfit smoke run: train on clean == noisy until enhancement
        reproduces the input."""
        def make_fm(seed):
            r = np.random.default_rng(seed)
            return normalize_per_utterance(
                FeatureMatrix(np.cumsum(r.normal(size=(40, 4)), axis=0))
            )

        fms = [make_fm(s) for s in range(3)]
        pool = merge_batches([stack_context(fm, fm) for fm in fms])
        m = M.SkDaeModel.create(
            feature_dim=4, context_frames=11, encoder_units=(48, 32, 16), seed=3
        )
        cfg = M.TrainConfig.for_variant("SK-DAE", lr=0.05, batch_size=32, epochs=400, seed=1)
        _, reports = M.train(m, pool, cfg)
        assert reports[-1].mse < reports[0].mse
        assert reports[-1].mse < 1e-3
        for fm in fms:
            enhanced = M.enhance(m, fm)
            err = float(np.mean(np.sum((enhanced.frames - fm.frames) ** 2, axis=1)))
            assert err < 1e-3

    def test_deterministic_given_seed(self):
        pool = self._pool(seed=3, rows=40)

        def run():
            m = small_model(seed=5)
            cfg = M.TrainConfig.for_variant("CDESK-DAE", batch_size=8, epochs=2, seed=9)
            M.train(m, pool, cfg)
            return [p.data.copy() for p in m.parameters()]

        for a, b in zip(run(), run()):
            np.testing.assert_array_equal(a, b)

    def test_partial_batches_below_two_rows_dropped(self):
        pool = self._pool(seed=4, rows=17)  # 17 = 2*8 + 1 -> last slice dropped
        m = small_model(seed=6)
        cfg = M.TrainConfig.for_variant("SK-DAE", batch_size=8, epochs=1, seed=0)
        _, reports = M.train(m, pool, cfg)
        assert len(reports) == 1

    def test_non_finite_loss_aborts_with_diagnostics(self):
        pool = self._pool(seed=11, rows=8)
        pool.targets[3, 2] = np.nan
        m = small_model(seed=8)
        cfg = M.TrainConfig.for_variant("SK-DAE", batch_size=8, epochs=1, seed=0)
        with pytest.raises(M.TrainingDivergedError, match="epoch 1"):
            M.train(m, pool, cfg)

    def test_accepts_sequence_of_batches(self):
        rng = np.random.default_rng(10)
        parts = [random_batch(rng, n=8) for _ in range(3)]
        m = small_model(seed=7)
        cfg = M.TrainConfig.for_variant("SK-DAE", batch_size=8, epochs=1, seed=0)
        _, reports = M.train(m, parts, cfg)
        assert len(reports) == 1


class TestEnhance:
    def test_shape_preserved(self):
        rng = np.random.default_rng(11)
        fm = normalize_per_utterance(FeatureMatrix(rng.normal(size=(23, 5))))
        m = small_model(context=11)
        out = M.enhance(m, fm)
        assert out.frames.shape == (23, 5)
        assert out.normalized

    def test_unnormalized_rejected(self):
        fm = FeatureMatrix(np.random.default_rng(0).normal(size=(4, 5)))
        with pytest.raises(M.ContractError):
            M.enhance(small_model(context=11), fm)

    def test_enhancement_beats_noisy_baseline(self):
        """Mini denoising run on the synthetic corpus."""
        items = synthdata.build_corpus(24, seed=77)
        train_items, held = items[:20], items[20:]
        pool = synthdata.corpus_pool(train_items)
        m = M.SkDaeModel.create(
            feature_dim=40, context_frames=11, encoder_units=(32, 16, 8), seed=1
        )
        cfg = M.TrainConfig.for_variant("SK-DAE", batch_size=64, epochs=6, seed=2)
        M.train(m, pool, cfg)
        enh_mse, noisy_mse = [], []
        for it in held:
            enhanced = M.enhance(m, it.noisy)
            enh_mse.append(np.mean(np.sum((enhanced.frames - it.clean.frames) ** 2, axis=1)))
            noisy_mse.append(np.mean(np.sum((it.noisy.frames - it.clean.frames) ** 2, axis=1)))
        assert np.mean(enh_mse) < np.mean(noisy_mse)


class TestCheckpoints:
    def test_round_trip_is_bitwise(self, tmp_path):
        m = small_model(seed=12)
        cfg = M.TrainConfig.for_variant("CDSK-DAE", epochs=2, batch_size=8, seed=3)
        batch = random_batch(np.random.default_rng(13), n=12)
        M.train(m, batch, cfg)
        z0, x0 = m.forward(batch)
        path = tmp_path / "model.skda"
        M.save_checkpoint(m, cfg, path)
        loaded, cfg2 = M.load_checkpoint(path)
        z1, x1 = loaded.forward(batch)
        np.testing.assert_array_equal(z0, z1)
        np.testing.assert_array_equal(x0, x1)
        assert cfg2 == cfg
        for name in m.layers:
            np.testing.assert_array_equal(m.layers[name].w.data, loaded.layers[name].w.data)

    def test_truncated_file(self, tmp_path):
        m = small_model(seed=14)
        path = tmp_path / "model.skda"
        M.save_checkpoint(m, M.TrainConfig(), path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(CheckpointError, match="truncated"):
            M.load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        m = small_model(seed=15)
        path = tmp_path / "model.skda"
        M.save_checkpoint(m, M.TrainConfig(), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 42
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            M.load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.skda"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            M.load_checkpoint(path)
