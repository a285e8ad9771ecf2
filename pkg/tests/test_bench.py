import dataclasses

import numpy as np
import pytest

from pixelctrl.bench import (
    BenchConfig,
    BenchRecord,
    ConvStub,
    conv_stub_forward,
    read_csv,
    run_benchmark,
    write_csv,
)


def reference_conv_forward(stub: ConvStub, obs: np.ndarray) -> np.ndarray:
    """Brute-force float64 conv -> ReLU -> linear -> tanh."""
    k, s, nf = 8, 4, 16
    batch, h, w, c = obs.shape
    out_h = (h - k) // s + 1
    out_w = (w - k) // s + 1
    kernel = stub.conv.astype(np.float64).reshape(k, k, c, nf)
    acts = np.empty((batch, out_h * out_w * nf))
    x = obs.astype(np.float64) / 255.0
    for b in range(batch):
        for oy in range(out_h):
            for ox in range(out_w):
                patch = x[b, oy * s : oy * s + k, ox * s : ox * s + k]
                v = np.einsum("yxc,yxcf->f", patch, kernel)
                acts[b, (oy * out_w + ox) * nf : (oy * out_w + ox + 1) * nf] = v
    acts = np.maximum(acts, 0.0)
    return np.tanh(acts @ stub.proj.astype(np.float64))


class TestConvStub:
    def test_weights_pure_in_seed(self):
        a = ConvStub.create(32, 32, 3, 6, seed=4)
        b = ConvStub.create(32, 32, 3, 6, seed=4)
        c = ConvStub.create(32, 32, 3, 6, seed=5)
        assert np.array_equal(a.conv, b.conv)
        assert np.array_equal(a.proj, b.proj)
        assert not np.array_equal(a.conv, c.conv)

    def test_zero_weights_give_zero_actions(self):
        stub = ConvStub.create(32, 32, 3, 4, seed=0)
        stub = dataclasses.replace(
            stub,
            conv=np.zeros_like(stub.conv),
            conv_blocks=np.zeros_like(stub.conv_blocks),
            proj=np.zeros_like(stub.proj),
        )
        obs = np.random.default_rng(0).integers(0, 256, (3, 32, 32, 3), dtype=np.uint8)
        assert np.all(conv_stub_forward(stub, obs) == 0.0)

    def test_matches_float64_oracle(self):
        stub = ConvStub.create(24, 28, 3, 5, seed=1)
        obs = np.random.default_rng(1).integers(0, 256, (2, 24, 28, 3), dtype=np.uint8)
        got = conv_stub_forward(stub, obs)
        want = reference_conv_forward(stub, obs)
        assert np.max(np.abs(got - want)) < 1e-5

    def test_grayscale_channel(self):
        stub = ConvStub.create(16, 16, 1, 3, seed=2)
        obs = np.random.default_rng(2).integers(0, 256, (2, 16, 16, 1), dtype=np.uint8)
        got = conv_stub_forward(stub, obs)
        want = reference_conv_forward(stub, obs)
        assert np.max(np.abs(got - want)) < 1e-5

    def test_rows_independent_of_batch(self):
        stub = ConvStub.create(16, 16, 3, 4, seed=3)
        obs = np.random.default_rng(3).integers(0, 256, (5, 16, 16, 3), dtype=np.uint8)
        full = conv_stub_forward(stub, obs)
        for i in range(5):
            row = conv_stub_forward(stub, obs[i : i + 1])
            assert np.array_equal(row[0], full[i])

    def test_thread_invariance(self):
        stub = ConvStub.create(16, 16, 3, 4, seed=3)
        obs = np.random.default_rng(4).integers(0, 256, (6, 16, 16, 3), dtype=np.uint8)
        a = conv_stub_forward(stub, obs, threads=1)
        b = conv_stub_forward(stub, obs, threads=3)
        assert np.array_equal(a, b)

    def test_output_range(self):
        stub = ConvStub.create(16, 16, 3, 4, seed=6)
        obs = np.full((2, 16, 16, 3), 255, dtype=np.uint8)
        acts = conv_stub_forward(stub, obs)
        assert np.all(np.abs(acts) <= 1.0)

    def test_too_small_observation(self):
        with pytest.raises(ValueError):
            ConvStub.create(4, 4, 3, 2)

    def test_shape_mismatch(self):
        stub = ConvStub.create(16, 16, 3, 4)
        with pytest.raises(ValueError):
            conv_stub_forward(stub, np.zeros((1, 8, 8, 3), dtype=np.uint8))


class TestRunBenchmark:
    CFG = BenchConfig(
        env_names=("hopper_lite",),
        batches=(1, 2),
        warmup_steps=2,
        measure_steps=100,
        width=32,
        height=32,
    )

    def test_produces_one_record_per_cell(self):
        records = run_benchmark(self.CFG)
        assert len(records) == 2
        assert [r.batch for r in records] == [1, 2]
        for r in records:
            assert r.env_name == "hopper_lite"
            # steps_measured counts env-steps: iterations times batch size.
            assert r.steps_measured == 100 * r.batch
            assert r.wall_seconds > 0
            assert r.steps_per_second == pytest.approx(
                r.steps_measured / r.wall_seconds
            )
            assert r.resolution == "32x32"

    def test_digest_deterministic_across_runs(self):
        a = run_benchmark(self.CFG)
        b = run_benchmark(self.CFG)
        for ra, rb in zip(a, b):
            assert ra.digest == rb.digest
            assert ra.digest != ""

    def test_progress_callback(self):
        seen = []
        run_benchmark(self.CFG, progress=lambda r: seen.append(r))
        assert len(seen) == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            BenchConfig(measure_steps=10).validate()
        with pytest.raises(ValueError):
            BenchConfig(distractor_modes=("video",)).validate()


class TestCsv:
    def _records(self):
        return [
            BenchRecord("cheetah_lite", 10, "none", 500, 1.25, 4000.0, "84x84"),
            BenchRecord("walker_lite", 100, "color", 500, 2.5, 20000.0, "84x84"),
        ]

    def test_empty_list_gives_header_only(self, tmp_path):
        path = tmp_path / "r.csv"
        write_csv([], path)
        assert path.read_text() == "env,batch,distractor,steps,seconds,sps,resolution\n"
        assert read_csv(path) == []

    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        records = self._records()
        write_csv(records, path)
        loaded = read_csv(path)
        assert len(loaded) == 2
        for got, want in zip(loaded, records):
            assert got.env_name == want.env_name
            assert got.batch == want.batch
            assert got.distractor_mode == want.distractor_mode
            assert got.steps_measured == want.steps_measured
            assert got.wall_seconds == pytest.approx(want.wall_seconds, rel=1e-5)
            assert got.steps_per_second == pytest.approx(want.steps_per_second, rel=1e-5)
            assert got.resolution == want.resolution

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError, match="header"):
            read_csv(path)

    def test_unwritable_path_reports_target(self):
        with pytest.raises(OSError, match="no/such"):
            write_csv([], "/no/such/dir/out.csv")
