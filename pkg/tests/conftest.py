"""Shared helpers for the test suite."""

import railbot.protocol as proto


def random_message(rng):
    """One random valid protocol message, drawn uniformly over the variants."""
    pick = rng.randrange(9)
    if pick == 0:
        return proto.MoveTo(vertex=rng.randrange(0x10000), speed_code=rng.randrange(0x100))
    if pick == 1:
        return proto.Stop()
    if pick == 2:
        return proto.SetSpeed(mm_s=rng.randrange(0x10000))
    if pick == 3:
        return proto.Vibrate(kind=rng.randrange(3), amp_mm_x10=rng.randrange(101),
                             period_ms=rng.randrange(0x10000), duration_ms=rng.randrange(0x10000))
    if pick == 4:
        return proto.RotateTurntable(port=rng.randrange(0x100))
    if pick == 5:
        return proto.StreamImu(rate_hz=rng.randrange(0x100), on=bool(rng.randrange(2)))
    if pick == 6:
        return proto.HallEvent(seq=rng.randrange(0x10000), vertex=rng.randrange(0x10000),
                               t_ms=rng.randrange(0x100000000))
    if pick == 7:
        return proto.ImuChunk(
            seq=rng.randrange(0x10000), t_off_ms=rng.randrange(0x10000),
            accel_mg=tuple(rng.randrange(-0x8000, 0x8000) for _ in range(3)),
            gyro_ddps=tuple(rng.randrange(-0x8000, 0x8000) for _ in range(3)))
    return proto.Ack(seq=rng.randrange(0x10000), status=rng.randrange(0x100))
