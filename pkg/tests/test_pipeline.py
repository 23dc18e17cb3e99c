import numpy as np
import pytest

from pragcomm import entropy_coder as ec
from pragcomm import pipeline as pl
from pragcomm import simworld as sw
from pragcomm import vq


TEMPLATE = sw.WorldConfig(
    h=24,
    w=24,
    n_classes=4,
    n_agents=2,
    fovs=((("rect", 0, 0, 24, 19),), (("rect", 0, 5, 24, 24),)),
    noise=0.05,
    density=0.6,
    rect_min=3,
    rect_max=6,
    seed=0,
)

TRAIN = pl.TrainConfig(n_train_worlds=2, disc_steps=250, kmeans_iters=15)


@pytest.fixture(scope="module")
def stack():
    return pl.train_all(TEMPLATE, TRAIN)


@pytest.fixture(scope="module")
def world():
    return pl.make_world(pl.replace(TEMPLATE, seed=42))


class TestTrainAll:
    def test_frequencies_accumulated(self, stack):
        assert stack.codebook.base.conf_freq.sum() > 0
        assert stack.codebook.base.occ_freq.sum() > 0
        assert stack.codebook.res.occ_freq.sum() > 0

    def test_tau_draws_recorded_from_choices(self, stack):
        assert len(stack.tau_draws) == TRAIN.n_train_worlds * 2
        assert set(stack.tau_draws) <= set(TRAIN.tau_c_choices)

    def test_confidence_mass_concentrates_on_object_embeddings(self, stack):
        cb = stack.codebook
        top = int(np.argmax(cb.base.conf_freq))
        class_channel = int(np.argmax(cb.base.embeddings[top][: TEMPLATE.n_classes]))
        assert class_channel != 0  # background channel carries little confidence

    def test_training_deterministic(self):
        a = pl.train_all(TEMPLATE, TRAIN)
        b = pl.train_all(TEMPLATE, TRAIN)
        np.testing.assert_array_equal(a.codebook.base.embeddings, b.codebook.base.embeddings)
        np.testing.assert_array_equal(a.codebook.res.conf_freq, b.codebook.res.conf_freq)
        for (w1, b1), (w2, b2) in zip(a.discriminator.weights, b.discriminator.weights):
            np.testing.assert_array_equal(w1, w2)


class TestBuildCodes:
    def test_requires_accumulated_frequencies(self):
        rng = np.random.default_rng(0)
        cb = vq.train_codebooks(rng.normal(size=(64, 8)), 4, 16, iters=5, seed=1)
        with pytest.raises(ec.CodingError, match="accumulate"):
            pl.build_codes(cb, "task_entropy")

    def test_fixed_codes_need_no_frequencies(self):
        rng = np.random.default_rng(0)
        cb = vq.train_codebooks(rng.normal(size=(64, 8)), 4, 16, iters=5, seed=1)
        base, res = pl.build_codes(cb, "fixed")
        assert set(base.lengths) == {2}
        assert set(res.lengths) == {4}

    def test_unknown_coder(self, stack):
        with pytest.raises(ValueError):
            pl.build_codes(stack.codebook, "arithmetic")


class TestRunRound:
    def test_threshold_above_max_confidence_matches_solo(self, stack, world):
        res = pl.run_round(world, stack, tau_c=1.5, tau_mi=float("inf"))
        assert res.payload_bits == 0
        assert res.abstract_bits == 0
        assert res.total_bits == res.mask_bits
        assert res.mean_iou == pytest.approx(pl.solo_iou(world), abs=1e-12)

    def test_everything_through_matches_full_sharing(self, stack, world):
        res = pl.run_round(world, stack, tau_c=0.0, tau_mi=float("inf"))
        assert res.mean_iou == pytest.approx(pl.uncompressed_iou(world), abs=0.02)

    def test_round_deterministic(self, stack, world):
        a = pl.run_round(world, stack, 0.5, 1.0)
        b = pl.run_round(world, stack, 0.5, 1.0)
        assert a == b

    def test_accounting_identity(self, stack, world):
        for selector in ("mi", "confidence_only", "none"):
            res = pl.run_round(world, stack, 0.5, 0.8, selector=selector)
            assert res.total_bits == res.payload_bits + res.abstract_bits + res.mask_bits
            assert res.bpp == pytest.approx(res.total_bits / (24 * 24))

    def test_abstract_only_for_mi_selector(self, stack, world):
        mi = pl.run_round(world, stack, 0.5, 1.0, selector="mi")
        conf = pl.run_round(world, stack, 0.5, 1.0, selector="confidence_only")
        none = pl.run_round(world, stack, 0.5, 1.0, selector="none")
        assert mi.abstract_bits > 0
        assert conf.abstract_bits == 0
        assert none.abstract_bits == 0

    def test_rate_monotone_in_tau_c(self, stack, world):
        taus = [0.0, 0.3, 0.6, 0.9, 0.99, 1.5]
        bits = [
            pl.run_round(world, stack, t, 0.5, selector="mi").total_bits for t in taus
        ]
        assert all(a >= b for a, b in zip(bits, bits[1:]))

    def test_rate_monotone_in_tau_mi(self, stack, world):
        taus = [-2.0, -0.5, 0.0, 0.5, 1.5, float("inf")]
        bits = [
            pl.run_round(world, stack, 0.3, t, selector="mi").total_bits for t in taus
        ]
        assert all(a <= b for a, b in zip(bits, bits[1:]))

    def test_single_direction_pairs(self, stack, world):
        res = pl.run_round(world, stack, 0.5, 1.0, pairs=[(0, 1)])
        both = pl.run_round(world, stack, 0.5, 1.0)
        assert res.mask_bits == both.mask_bits // 2

    def test_selector_none_ignores_tau_mi(self, stack, world):
        a = pl.run_round(world, stack, 0.5, -5.0, selector="none")
        b = pl.run_round(world, stack, 0.5, 5.0, selector="none")
        assert a.total_bits == b.total_bits
        assert a.mean_iou == b.mean_iou

    def test_collaboration_beats_solo(self, stack, world):
        res = pl.run_round(world, stack, 0.5, float("inf"), selector="mi")
        assert res.mean_iou > pl.solo_iou(world)

    def test_three_agent_round(self, stack):
        cfg3 = pl.replace(
            TEMPLATE,
            n_agents=3,
            noise=0.05,
            fovs=(
                (("rect", 0, 0, 24, 12),),
                (("rect", 0, 6, 24, 18),),
                (("rect", 0, 12, 24, 24),),
            ),
            seed=77,
        )
        world3 = pl.make_world(cfg3)
        res = pl.run_round(world3, stack, 0.5, 1.0, selector="mi")
        # six directed messages, each carrying its two mask bitmaps
        assert res.mask_bits == 6 * 2 * 24 * 24
        assert res.total_bits == res.payload_bits + res.abstract_bits + res.mask_bits
        assert res.mean_iou > pl.solo_iou(world3)


class TestSweep:
    def sweep_cfg(self, **kw):
        defaults = dict(
            tau_c_grid=(0.3, 0.9),
            tau_mi_grid=(0.0, float("inf")),
            n_base=4,
            n_res=64,
            seeds=(42, 43, 44),
            coder="task_entropy",
            selector="mi",
        )
        defaults.update(kw)
        return pl.SweepConfig(**defaults)

    def test_point_count(self, stack):
        results = pl.run_sweep(TEMPLATE, stack, self.sweep_cfg())
        assert len(results) == 2 * 2 * 3

    def test_singleton_grid(self, stack):
        cfg = self.sweep_cfg(tau_c_grid=(0.5,), tau_mi_grid=(1.0,), seeds=(42,))
        results = pl.run_sweep(TEMPLATE, stack, cfg)
        assert len(results) == 1

    def test_parallel_matches_serial(self, stack):
        cfg = self.sweep_cfg(seeds=(42, 43))
        serial = pl.run_sweep(TEMPLATE, stack, cfg, jobs=1)
        parallel = pl.run_sweep(TEMPLATE, stack, cfg, jobs=2)
        assert serial == parallel

    def test_summary_grouping_and_pareto(self, stack):
        results = pl.run_sweep(TEMPLATE, stack, self.sweep_cfg())
        rows = pl.summarize(results)
        assert len(rows) == 4
        assert all(r["n_seeds"] == 3 for r in rows)
        front = [r for r in rows if r["pareto"]]
        assert front
        for a in front:
            for b in rows:
                strictly_better = (
                    b["mean_total_bits"] < a["mean_total_bits"] - 1e-9
                    and b["mean_iou"] >= a["mean_iou"]
                ) or (
                    b["mean_iou"] > a["mean_iou"] + 1e-12
                    and b["mean_total_bits"] <= a["mean_total_bits"]
                )
                assert not strictly_better

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            self.sweep_cfg(coder="magic")
        with pytest.raises(ValueError):
            self.sweep_cfg(selector="sometimes")
        with pytest.raises(ValueError):
            self.sweep_cfg(seeds=())


class TestCSV:
    def test_results_csv_shape(self, stack, world):
        results = [
            pl.run_round(world, stack, 0.5, 1.0),
            pl.run_round(world, stack, 0.9, 1.0),
        ]
        text = pl.results_csv(results, TEMPLATE.n_classes)
        lines = text.strip().split("\n")
        assert len(lines) == 3
        header = lines[0].split(",")
        assert header[:5] == ["seed", "tau_c", "tau_mi", "coder", "selector"]
        assert "iou_class_0" in header and "iou_class_3" in header
        assert header[-1] == "distortion_nats"
        assert len(lines[1].split(",")) == len(header)

    def test_summary_csv_round_trip_values(self, stack):
        results = pl.run_sweep(
            TEMPLATE,
            stack,
            pl.SweepConfig(
                tau_c_grid=(0.5,),
                tau_mi_grid=(1.0,),
                n_base=4,
                n_res=64,
                seeds=(42, 43),
            ),
        )
        rows = pl.summarize(results)
        text = pl.summary_csv(rows)
        lines = text.strip().split("\n")
        assert len(lines) == 2
        got_bits = float(lines[1].split(",")[5])
        assert got_bits == pytest.approx(np.mean([r.total_bits for r in results]))
