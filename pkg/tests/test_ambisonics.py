import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reefsonics.ambisonics import (
    ACN_DEGREE,
    AmbisonicBlock,
    N_CHANNELS,
    SN3D_TO_N3D,
    SpeakerLayout,
    decode_project,
    encode,
    load_speaker_layout,
    mix,
    sh_coeffs,
    stereo_downmix,
)
from reefsonics.errors import ConfigInvalid, LengthMismatch
from reefsonics.synthesis import MonoBlock

angles_st = st.tuples(
    st.floats(-math.pi, math.pi),
    st.floats(-math.pi / 2, math.pi / 2),
)


def _block(samples, sr=48000):
    return MonoBlock(samples=np.asarray(samples, dtype=float), sample_rate=sr)


#: Cube layout: az +/-45, +/-135 deg at el +/-atan(1/sqrt(2)).
CUBE_EL = math.atan(1 / math.sqrt(2))
CUBE = SpeakerLayout(
    directions=tuple(
        (math.radians(az), el)
        for el in (CUBE_EL, -CUBE_EL)
        for az in (45, 135, -135, -45)
    ),
    names=tuple(f"c{i}" for i in range(8)),
)


class TestShCoeffs:
    def test_front_direction_first_order(self):
        # oracle: closed-form degree-1 harmonics Y=cos(el)sin(az),
        # Z=sin(el), X=cos(el)cos(az)
        c = sh_coeffs(0.0, 0.0)
        assert c.shape == (16,)
        assert c[0] == 1.0
        assert c[1] == 0.0  # Y
        assert c[2] == 0.0  # Z
        assert c[3] == 1.0  # X

    def test_north_pole(self):
        c = sh_coeffs(1.2345, math.pi / 2)
        assert c[2] == pytest.approx(1.0)
        assert c[1] == pytest.approx(0.0, abs=1e-15)
        assert c[3] == pytest.approx(0.0, abs=1e-15)

    def test_first_order_matches_closed_forms_everywhere(self):
        rng = np.random.default_rng(0)
        az = rng.uniform(-math.pi, math.pi, 200)
        el = rng.uniform(-math.pi / 2, math.pi / 2, 200)
        c = sh_coeffs(az, el)
        assert np.allclose(c[:, 1], np.cos(el) * np.sin(az))
        assert np.allclose(c[:, 2], np.sin(el))
        assert np.allclose(c[:, 3], np.cos(el) * np.cos(az))

    def test_channel_zero_constant(self):
        rng = np.random.default_rng(1)
        c = sh_coeffs(rng.uniform(-math.pi, math.pi, 1000),
                      rng.uniform(-math.pi / 2, math.pi / 2, 1000))
        assert np.all(c[:, 0] == 1.0)

    @given(angles_st)
    def test_degree_bound(self, angles):
        c = sh_coeffs(*angles)
        assert np.all(np.abs(c) <= np.sqrt(2 * ACN_DEGREE + 1) + 1e-12)

    @given(angles_st)
    def test_n3d_energy_is_channel_count(self, angles):
        c = sh_coeffs(*angles)
        assert float(((SN3D_TO_N3D * c) ** 2).sum()) == pytest.approx(16.0, abs=1e-9)

    def test_orthonormal_under_n3d_quadrature(self):
        # Gauss-Legendre x uniform azimuth grid: 30 x 80 = 2400 points,
        # exact for products of degree <= 3 harmonics
        nodes, weights = np.polynomial.legendre.leggauss(30)
        elevations = np.arcsin(nodes)
        azimuths = -math.pi + 2 * math.pi * (np.arange(80) + 0.5) / 80
        el_grid, az_grid = np.meshgrid(elevations, azimuths, indexing="ij")
        w_grid = np.repeat(weights, 80) * (2 * math.pi / 80)
        harmonics = sh_coeffs(az_grid.ravel(), el_grid.ravel()) * SN3D_TO_N3D
        gram = (harmonics * w_grid[:, None]).T @ harmonics / (4 * math.pi)
        assert np.allclose(gram, np.eye(16), atol=1e-6)


class TestEncode:
    def test_zero_block_encodes_to_silence(self):
        out = encode(_block(np.zeros(64)), sh_coeffs(0.3, 0.1))
        assert out.channels.shape == (16, 64)
        assert not out.channels.any()

    def test_impulse_at_front(self):
        impulse = np.zeros(8)
        impulse[0] = 1.0
        out = encode(_block(impulse), sh_coeffs(0.0, 0.0))
        assert np.array_equal(out.channels[0], impulse)
        assert np.array_equal(out.channels[3], impulse)
        assert not out.channels[1].any()
        assert not out.channels[2].any()

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(128)
        coeffs = sh_coeffs(1.0, -0.4)
        doubled = encode(_block(2.0 * x), coeffs)
        assert np.allclose(doubled.channels, 2.0 * encode(_block(x), coeffs).channels)

    def test_channel_count_is_sixteen(self):
        out = encode(_block(np.ones(4)), sh_coeffs(0.0, 0.0))
        assert out.channels.shape[0] == N_CHANNELS == 16


class TestMix:
    def _ambi(self, scale=1.0, n=32):
        rng = np.random.default_rng(3)
        return AmbisonicBlock(channels=scale * rng.standard_normal((16, n)), sample_rate=48000)

    def test_single_block_identity(self):
        x = self._ambi()
        assert np.array_equal(mix([x]).channels, x.channels)

    def test_zero_is_additive_identity(self):
        x = self._ambi()
        zero = AmbisonicBlock(channels=np.zeros((16, 32)), sample_rate=48000)
        assert np.allclose(mix([x, zero]).channels, x.channels)

    def test_doubling(self):
        x = self._ambi()
        assert np.allclose(mix([x, x]).channels, 2 * x.channels)

    def test_length_mismatch(self):
        a = AmbisonicBlock(channels=np.zeros((16, 8)), sample_rate=48000)
        b = AmbisonicBlock(channels=np.zeros((16, 9)), sample_rate=48000)
        with pytest.raises(LengthMismatch):
            mix([a, b])

    def test_fixed_order_sum_is_exactly_reproducible(self):
        rng = np.random.default_rng(6)
        blocks = [
            AmbisonicBlock(channels=rng.standard_normal((16, 16)), sample_rate=48000)
            for _ in range(5)
        ]
        once = mix(blocks)
        again = mix(blocks)
        nested = mix([mix(blocks[:3]), *blocks[3:]])  # same left-to-right order
        assert np.array_equal(once.channels, again.channels)
        assert np.array_equal(once.channels, nested.channels)


class TestDecode:
    def test_source_at_speaker_is_loudest_there(self):
        # oracle: evaluate the decoder gains numerically for the layout
        for s, direction in enumerate(CUBE.directions):
            field = encode(_block(np.ones(4)), sh_coeffs(*direction))
            out = decode_project(field, CUBE)
            gains = out[:, 0]
            assert np.argmax(gains) == s

    def test_zero_field_decodes_to_silence(self):
        field = AmbisonicBlock(channels=np.zeros((16, 16)), sample_rate=48000)
        assert not decode_project(field, CUBE).any()

    def test_single_speaker_at_source_direction_is_proportional(self):
        direction = (0.7, 0.2)
        layout = SpeakerLayout(directions=(direction,), names=("solo",))
        rng = np.random.default_rng(4)
        x = rng.standard_normal(256)
        out = decode_project(encode(_block(x), sh_coeffs(*direction)), layout)
        # projection gain at the exact direction = sum of (2l+1) Y^2 = 16
        expected_gain = float(((SN3D_TO_N3D * sh_coeffs(*direction)) ** 2).sum())
        assert expected_gain == pytest.approx(16.0, abs=1e-9)
        assert np.allclose(out[0], expected_gain * x)

    def test_shape(self):
        field = AmbisonicBlock(channels=np.zeros((16, 10)), sample_rate=48000)
        assert decode_project(field, CUBE).shape == (8, 10)

    def test_decode_of_encode_is_linear_in_the_source(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(64)
        y = rng.standard_normal(64)
        coeffs = sh_coeffs(0.4, -0.3)

        def through(sig):
            return decode_project(encode(_block(sig), coeffs), CUBE)

        assert np.allclose(through(2.0 * x + 3.0 * y), 2.0 * through(x) + 3.0 * through(y))


class TestStereoDownmix:
    def test_hard_left_source(self):
        # cardioid gain oracle: 0.5 * (1 + cos(angle between source and mic))
        x = np.ones(16)
        field = encode(_block(x), sh_coeffs(math.pi / 4, 0.0))
        left, right = stereo_downmix(field)
        assert np.allclose(left, 1.0 * x)
        assert np.allclose(right, 0.5 * (1 + math.cos(math.pi / 2)) * x)
        assert np.allclose(right, 0.5 * x)

    def test_center_source_is_balanced(self):
        field = encode(_block(np.ones(8)), sh_coeffs(0.0, 0.0))
        left, right = stereo_downmix(field)
        assert np.allclose(left, right)

    def test_zero_field(self):
        field = AmbisonicBlock(channels=np.zeros((16, 8)), sample_rate=48000)
        assert not stereo_downmix(field).any()


class TestSpeakerLayout:
    def test_load_json(self, tmp_path):
        path = tmp_path / "layout.json"
        path.write_text(json.dumps([
            {"name": "L", "azimuth_deg": 30, "elevation_deg": 0},
            {"name": "R", "azimuth_deg": -30, "elevation_deg": 0},
        ]))
        layout = load_speaker_layout(path)
        assert layout.names == ("L", "R")
        assert layout.directions[0][0] == pytest.approx(math.radians(30))

    def test_empty_layout_rejected(self, tmp_path):
        path = tmp_path / "layout.json"
        path.write_text("[]")
        with pytest.raises(ConfigInvalid):
            load_speaker_layout(path)

    def test_out_of_range_angle_rejected(self, tmp_path):
        path = tmp_path / "layout.json"
        path.write_text(json.dumps([{"name": "x", "azimuth_deg": 999, "elevation_deg": 0}]))
        with pytest.raises(ConfigInvalid):
            load_speaker_layout(path)
