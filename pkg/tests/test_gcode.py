import numpy as np
import pytest

from dedsid.errors import MalformedNumber, UnsupportedWord, ZeroFeedMove
from dedsid.gcode import (
    Dwell,
    LinearMove,
    SetPower,
    parse_gcode_subset,
    program_to_timeseries,
)

# 10 mm at 600 mm/min is 1.0 s; the dwell sits between the move and the
# powered move, so sampling at 10 Hz gives 25 rows with known values.
SQUARE_CORNER = """
; corner with a pause
G1 X10 F600
G4 P0.5
M3 S200
G1 Y10 (second leg)
M5
"""


class TestParser:
    def test_square_corner_commands(self):
        program = parse_gcode_subset(SQUARE_CORNER)
        assert program.commands == (
            LinearMove(x=10.0, feed_mm_min=600.0),
            Dwell(seconds=0.5),
            SetPower(watts=200.0),
            LinearMove(y=10.0),
            SetPower(watts=0.0),
        )

    def test_empty_and_comment_only(self):
        assert parse_gcode_subset("").commands == ()
        assert parse_gcode_subset("; nothing\n(also nothing)\n").commands == ()

    def test_case_insensitive(self):
        program = parse_gcode_subset("g1 x5 f100\nm3 s10")
        assert program.commands[0] == LinearMove(x=5.0, feed_mm_min=100.0)

    def test_unsupported_word_rejected(self):
        with pytest.raises(UnsupportedWord):
            parse_gcode_subset("G2 X1 Y1 I0 J1 F100")

    def test_unsupported_param_rejected(self):
        with pytest.raises(UnsupportedWord):
            parse_gcode_subset("G1 X1 E5 F100")

    def test_malformed_number(self):
        with pytest.raises(MalformedNumber):
            parse_gcode_subset("G1 X1.2.3 F100")

    def test_negative_and_decimal_numbers(self):
        program = parse_gcode_subset("G0 X-1.5 Y+2. Z.25 F100")
        assert program.commands[0] == LinearMove(x=-1.5, y=2.0, z=0.25, feed_mm_min=100.0)

    def test_dwell_requires_p(self):
        with pytest.raises(UnsupportedWord):
            parse_gcode_subset("G4 X1")


class TestSampling:
    def test_square_corner_trace(self):
        ds = program_to_timeseries(parse_gcode_subset(SQUARE_CORNER), 10.0)
        assert ds.row_count == 25
        t = (np.arange(25) + 1) / 10.0
        x = ds.column("x_mm")
        y = ds.column("y_mm")
        power = ds.column("power_w")
        feed = ds.column("scan_rate_mm_min")
        heading = ds.column("heading_deg")
        dist = ds.column("distance_mm")

        move1 = t <= 1.0
        assert np.allclose(x[move1], 10.0 * t[move1])
        assert np.allclose(y[move1], 0.0)
        assert np.allclose(feed[move1], 600.0)
        assert np.allclose(heading[move1], 0.0)
        assert np.allclose(dist[move1], 10.0 * t[move1])
        assert np.allclose(power[move1], 0.0)

        dwell = (t > 1.0) & (t <= 1.5)
        assert np.allclose(x[dwell], 10.0)
        assert np.allclose(feed[dwell], 0.0)
        assert np.allclose(heading[dwell], 0.0)
        assert np.allclose(dist[dwell], 10.0)
        assert np.allclose(power[dwell], 0.0)

        move2 = t > 1.5
        assert np.allclose(y[move2], 10.0 * (t[move2] - 1.5))
        assert np.allclose(x[move2], 10.0)
        assert np.allclose(power[move2], 200.0)
        assert np.allclose(heading[move2], 90.0)
        assert np.allclose(dist[move2], 10.0 + 10.0 * (t[move2] - 1.5))

    def test_boundary_sample_belongs_to_ending_segment(self):
        # Two moves with different feeds; the sample landing exactly on the
        # boundary must report the first move's feed.
        ds = program_to_timeseries(parse_gcode_subset("G1 X1 F60\nG1 X2 F120"), 2.0)
        # Move 1 lasts 1.0 s, move 2 lasts 0.5 s; samples at 0.5, 1.0, 1.5.
        assert ds.row_count == 3
        assert ds.column("scan_rate_mm_min")[1] == 60.0
        assert ds.column("x_mm")[1] == pytest.approx(1.0)

    def test_sample_count_rounds_total_duration(self):
        # 1 mm at 60 mm/min is exactly 1 s; 100 Hz gives exactly 100 rows.
        ds = program_to_timeseries(parse_gcode_subset("G1 X1 F60"), 100.0)
        assert ds.row_count == 100

    def test_modal_feed_persists(self):
        ds = program_to_timeseries(parse_gcode_subset("G1 X1 F60\nG1 X2"), 4.0)
        assert np.allclose(ds.column("scan_rate_mm_min"), 60.0)

    def test_move_without_feed_rejected(self):
        with pytest.raises(ZeroFeedMove):
            program_to_timeseries(parse_gcode_subset("G1 X5"), 10.0)

    def test_zero_length_move_only_updates_feed(self):
        ds = program_to_timeseries(parse_gcode_subset("G1 F60\nG1 X1"), 4.0)
        assert ds.row_count == 4
        assert np.allclose(ds.column("scan_rate_mm_min"), 60.0)

    def test_heading_diagonal_and_hold_through_dwell(self):
        program = parse_gcode_subset("G1 X3 Y4 F300\nG4 P1")
        ds = program_to_timeseries(program, 10.0)
        expected = np.degrees(np.arctan2(4.0, 3.0))
        assert np.allclose(ds.column("heading_deg"), expected)

    def test_pure_z_move_keeps_heading(self):
        program = parse_gcode_subset("G1 X1 F60\nG1 Z2")
        ds = program_to_timeseries(program, 2.0)
        assert np.allclose(ds.column("heading_deg"), 0.0)

    def test_distance_accumulates_across_moves(self):
        program = parse_gcode_subset("G1 X3 F180\nG1 Y4")
        ds = program_to_timeseries(program, 30.0)
        assert ds.column("distance_mm")[-1] == pytest.approx(7.0)
        assert np.all(np.diff(ds.column("distance_mm")) >= -1e-12)

    def test_empty_program_yields_empty_dataset(self):
        ds = program_to_timeseries(parse_gcode_subset(""), 10.0)
        assert ds.row_count == 0
