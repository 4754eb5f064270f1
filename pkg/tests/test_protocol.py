import json
import random
from pathlib import Path

import pytest

import railbot.protocol as proto
from conftest import random_message

VECTORS = json.loads(
    (Path(__file__).parent / "fixtures" / "protocol_vectors.json").read_text())["vectors"]


def build(vec):
    cls = getattr(proto, vec["type"])
    fields = {k: tuple(v) if isinstance(v, list) else v
              for k, v in vec["fields"].items()}
    return cls(**fields)


class TestWireVectors:
    @pytest.mark.parametrize("vec", VECTORS, ids=lambda v: v["type"])
    def test_encode_matches_fixture(self, vec):
        assert proto.encode_frame(build(vec)).hex() == vec["hex"]

    @pytest.mark.parametrize("vec", VECTORS, ids=lambda v: v["type"])
    def test_decode_matches_fixture(self, vec):
        assert proto.decode_frame(bytes.fromhex(vec["hex"])) == build(vec)

    @pytest.mark.parametrize("vec", VECTORS, ids=lambda v: v["type"])
    def test_every_frame_fits_the_mtu(self, vec):
        assert len(bytes.fromhex(vec["hex"])) <= proto.MTU

    def test_imu_chunk_is_17_bytes(self):
        chunk = proto.ImuChunk(0, 0, (0, 0, 0), (0, 0, 0))
        assert len(proto.encode_frame(chunk)) == 17


class TestRoundTrip:
    def test_randomized_round_trip(self):
        rng = random.Random(90125)
        for _ in range(2000):
            msg = random_message(rng)
            data = proto.encode_frame(msg)
            assert len(data) <= proto.MTU
            assert proto.decode_frame(data) == msg


class TestDecoderTotality:
    @pytest.mark.parametrize("vec", VECTORS, ids=lambda v: v["type"])
    def test_every_strict_prefix_is_truncated(self, vec):
        frame = bytes.fromhex(vec["hex"])
        for n in range(len(frame)):
            with pytest.raises(proto.TruncatedError):
                proto.decode_frame(frame[:n])

    @pytest.mark.parametrize("vec", VECTORS, ids=lambda v: v["type"])
    def test_trailing_byte_rejected(self, vec):
        with pytest.raises(proto.TrailingBytesError):
            proto.decode_frame(bytes.fromhex(vec["hex"]) + b"\x00")

    @pytest.mark.parametrize("opcode", [0x00, 0x07, 0x13, 0x80, 0xFF])
    def test_unknown_opcodes_rejected(self, opcode):
        with pytest.raises(proto.UnknownOpcodeError):
            proto.decode_frame(bytes([opcode, 0, 0, 0]))

    def test_fuzzed_decoder_never_crashes(self):
        rng = random.Random(4004)
        outcomes = {"ok": 0, "err": 0}
        for _ in range(10_000):
            blob = rng.randbytes(rng.randrange(0, 65))
            try:
                proto.decode_frame(blob)
                outcomes["ok"] += 1
            except proto.DecodeError:
                outcomes["err"] += 1
        # sanity: the fuzz hit both sides
        assert outcomes["ok"] > 0 and outcomes["err"] > 0

    def test_vibrate_with_wild_amplitude_is_decode_error(self):
        # structurally valid Vibrate frame whose amplitude breaks the 10 mm cap
        blob = bytes([0x04, 0, 200, 0, 0, 0, 0])
        with pytest.raises(proto.DecodeError):
            proto.decode_frame(blob)


class TestImuChunking:
    @staticmethod
    def stream(n, rate_hz=10):
        dt = 1.0 / rate_hz
        return [(i * dt, (0.1 * i, -0.2, 1.0), (5.0, -3.3, 0.0)) for i in range(n)]

    def test_one_sample_per_frame(self):
        chunks = proto.chunk_imu_stream(self.stream(150), rate_hz=10)
        assert len(chunks) == 150
        assert [c.seq for c in chunks] == list(range(150))

    def test_empty_stream(self):
        assert proto.chunk_imu_stream([], rate_hz=10) == []

    def test_rate_ceiling(self):
        with pytest.raises(proto.RateExceededError):
            proto.chunk_imu_stream(self.stream(1), rate_hz=101)

    def test_seq_wraps_at_u16(self):
        chunks = proto.chunk_imu_stream(self.stream(10), rate_hz=10, start_seq=65530)
        assert [c.seq for c in chunks] == [65530, 65531, 65532, 65533, 65534, 65535, 0, 1, 2, 3]

    def test_reassembly_equals_independent_quantization(self):
        samples = self.stream(40, rate_hz=15)
        got = proto.reassemble_imu_stream(proto.chunk_imu_stream(samples, rate_hz=15))
        t0 = samples[0][0]
        for (t, accel, gyro), (rt, raccel, rgyro) in zip(samples, got):
            assert rt == pytest.approx(round((t - t0) * 1000) / 1000, abs=1e-9)
            for a, ra in zip(accel, raccel):
                assert ra == pytest.approx(round(a * 1000) / 1000, abs=1e-9)
            for g, rg in zip(gyro, rgyro):
                assert rg == pytest.approx(round(g * 10) / 10, abs=1e-9)

    def test_quantization_clamps_extremes(self):
        assert proto.quantize_accel_mg(100.0) == 0x7FFF
        assert proto.quantize_accel_mg(-100.0) == -0x8000
        assert proto.quantize_gyro_ddps(1e6) == 0x7FFF

    def test_round_trip_through_wire(self):
        chunks = proto.chunk_imu_stream(self.stream(25), rate_hz=15)
        wired = [proto.decode_frame(proto.encode_frame(c)) for c in chunks]
        assert wired == chunks
