"""
Tests for decay maps, light condensation and light injection
"""

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from src.apps.adapter.attention import AttentionParams, softmax_rows
from src.apps.adapter.services import (
    LightQueryBank,
    condensation_mask,
    condense_light,
    inject_light,
    injection_mask,
    make_decay_map,
    position_coordinates,
)
from src.apps.core.choices import DIRECTION_ORDER, MaskMode
from src.apps.core.exceptions import DimensionError, ParameterError


def brute_force_attention(x, context, params, mask=None, logit_mode=False, scale_bias=4.0):
    """Per-query loops over keys; single head"""
    width = params.wq.shape[1]
    out = np.zeros((x.shape[0], params.wo.shape[1]))
    for i in range(x.shape[0]):
        q = x[i] @ params.wq
        logits = np.array([q @ (context[j] @ params.wk) for j in range(len(context))])
        logits /= np.sqrt(width)
        if mask is not None and logit_mode:
            logits = logits + scale_bias * (mask[i] - 1.0)
        weights = np.exp(logits - logits.max())
        weights /= weights.sum()
        if mask is not None and not logit_mode:
            weights = weights * mask[i]
            weights /= weights.sum()
        value = sum(weights[j] * (context[j] @ params.wv) for j in range(len(context)))
        out[i] = value @ params.wo + params.bo
    return out


class DecayMapTest(SimpleTestCase):

    def test_left_map_endpoints_and_midpoint(self):
        values = make_decay_map("left", 2, 3).values
        assert_allclose(values[:, 0], 1.0)
        assert_allclose(values[:, -1], 0.0)
        assert_allclose(values[:, 1], 0.5)

    def test_opposite_maps_sum_to_one(self):
        for a, b in (("left", "right"), ("top", "down")):
            total = make_decay_map(a, 5, 7).values + make_decay_map(b, 5, 7).values
            assert_allclose(total, 1.0)

    def test_monotone_along_decay_axis(self):
        self.assertTrue(np.all(np.diff(make_decay_map("left", 4, 6).values, axis=1) <= 0))
        self.assertTrue(np.all(np.diff(make_decay_map("down", 6, 4).values, axis=0) >= 0))

    def test_single_cell_axis_is_all_ones(self):
        assert_allclose(make_decay_map("left", 3, 1).values, 1.0)
        assert_allclose(make_decay_map("top", 1, 3).values, 1.0)

    def test_maps_are_read_only(self):
        with self.assertRaises(ValueError):
            make_decay_map("right", 2, 2).values[0, 0] = 3.0

    def test_errors(self):
        with self.assertRaises(DimensionError):
            make_decay_map("left", 0, 3)
        with self.assertRaises(ParameterError):
            make_decay_map("sideways", 2, 2)


class LightQueryBankTest(SimpleTestCase):

    def test_shape_and_finiteness(self):
        bank = LightQueryBank.random(3, 5, np.random.default_rng(0))
        self.assertEqual((bank.n_q, bank.dim), (3, 5))
        assert_allclose(LightQueryBank.from_flat(bank.flat(), 3).queries, bank.queries)
        with self.assertRaises(DimensionError):
            LightQueryBank(np.zeros((3, 1, 2)))
        with self.assertRaises(ParameterError):
            LightQueryBank(np.full((4, 1, 2), np.nan))


class CondenseLightTest(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def params(self, dim, **kwargs):
        return AttentionParams.initialize(dim, dim, self.rng, zero_output=False, **kwargs)

    def test_all_ones_maps_with_uniform_logits_average_the_values(self):
        dim = 3
        proj = self.params(dim)
        proj.wq[...] = 0.0
        bg = self.rng.normal(size=(2, 2, dim))
        bank = LightQueryBank.random(1, dim, self.rng)
        ones = {direction: np.ones((2, 2)) for direction in DIRECTION_ORDER}
        out = condense_light(bg, bank, proj, decay_maps=ones)
        context = np.concatenate([bank.flat(), bg.reshape(-1, dim)])
        expected = bank.flat() + (context @ proj.wv).mean(axis=0) @ proj.wo + proj.bo
        assert_allclose(out.flat(), expected, atol=1e-12)

    def test_single_background_position_is_returned_to_every_query(self):
        dim = 2
        proj = self.params(dim)
        bg = self.rng.normal(size=(1, 1, dim))
        bank = LightQueryBank.random(1, dim, self.rng)
        bias = np.zeros((4, 5))
        bias[:, :4] = -np.inf
        out = condense_light(bg, bank, proj, logit_bias=bias)
        value = bg.reshape(dim) @ proj.wv @ proj.wo + proj.bo
        assert_allclose(out.flat(), bank.flat() + value, atol=1e-12)

    def test_left_query_keeps_the_left_column(self):
        dim = 4
        proj = self.params(dim)
        proj.wq[...] = 0.0
        bg = np.eye(4).reshape(2, 2, 4)
        bank = LightQueryBank.random(1, dim, self.rng)
        _, weights = condense_light(bg, bank, proj, return_weights=True)
        left = weights.values[0, 4:]
        assert_allclose(left / left.sum(), [0.5, 0.0, 0.5, 0.0], atol=1e-12)
        right = weights.values[1, 4:]
        assert_allclose(right / right.sum(), [0.0, 0.5, 0.0, 0.5], atol=1e-12)
        assert_allclose(weights.values[:, :4], 1.0 / 6.0, atol=1e-12)

    def test_matches_brute_force_oracle(self):
        dim = 3
        for mode in MaskMode.values:
            with self.subTest(mode=mode):
                proj = self.params(dim)
                bg = self.rng.normal(size=(3, 2, dim))
                bank = LightQueryBank.random(2, dim, self.rng)
                out = condense_light(bg, bank, proj, mask_mode=mode, logit_bias_scale=3.0)
                context = np.concatenate([bank.flat(), bg.reshape(-1, dim)])
                expected = bank.flat() + brute_force_attention(
                    bank.flat(),
                    context,
                    proj,
                    condensation_mask(2, 3, 2),
                    logit_mode=mode == MaskMode.LOGIT_BIAS,
                    scale_bias=3.0,
                )
                assert_allclose(out.flat(), expected, atol=1e-10)

    def test_all_ones_maps_equal_unmasked_attention(self):
        dim = 3
        proj = self.params(dim)
        bg = self.rng.normal(size=(3, 3, dim))
        bank = LightQueryBank.random(1, dim, self.rng)
        ones = {direction: np.ones((3, 3)) for direction in DIRECTION_ORDER}
        context = np.concatenate([bank.flat(), bg.reshape(-1, dim)])
        unmasked = bank.flat() + brute_force_attention(bank.flat(), context, proj)
        assert_allclose(condense_light(bg, bank, proj, decay_maps=ones).flat(), unmasked, atol=1e-10)
        assert_allclose(condensation_mask(1, 3, 3, masked=False), 1.0)

    def test_width_mismatch(self):
        with self.assertRaises(DimensionError):
            condense_light(
                np.zeros((2, 2, 3)), LightQueryBank(np.zeros((4, 1, 2))), self.params(2)
            )


class InjectLightTest(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(12)

    def setup_case(self, latent_dim=3, bank_dim=2, n_q=1, size=4):
        proj = AttentionParams.initialize(
            latent_dim, bank_dim, self.rng, width=bank_dim, zero_output=False
        )
        latent = self.rng.normal(size=(size, size, latent_dim))
        bank = LightQueryBank.random(n_q, bank_dim, self.rng)
        return proj, latent, bank

    def test_empty_mask_is_exact_identity(self):
        proj, latent, bank = self.setup_case()
        out = inject_light(latent, bank, np.zeros((4, 4), dtype=bool), proj)
        assert_array_equal(out, latent)

    def test_background_cells_are_bit_identical(self):
        proj, latent, bank = self.setup_case()
        mask = self.rng.random((4, 4)) > 0.5
        out = inject_light(latent, bank, mask, proj)
        assert_array_equal(out[~mask], latent[~mask])
        self.assertFalse(np.allclose(out[mask], latent[mask]))

    def test_left_edge_drops_the_right_group(self):
        proj, latent, bank = self.setup_case()
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 0] = True
        _, weights = inject_light(latent, bank, mask, proj, return_weights=True)
        order = list(DIRECTION_ORDER)
        self.assertEqual(weights.values[0, order.index("right")], 0.0)
        self.assertAlmostEqual(weights.values[0].sum(), 1.0, places=12)

    def test_matches_brute_force_oracle(self):
        proj, latent, bank = self.setup_case()
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = mask[3, 0] = True
        out = inject_light(latent, bank, mask, proj)
        xs, ys = position_coordinates(4, 4)
        expected = latent.copy()
        for r, c in zip(*np.nonzero(mask)):
            cell = r * 4 + c
            row_mask = injection_mask(xs[[cell]], ys[[cell]], 1)
            update = brute_force_attention(latent[r, c][None, :], bank.flat(), proj, row_mask)
            expected[r, c] = latent[r, c] + update[0]
        assert_allclose(out, expected, atol=1e-10)

    def test_position_coordinates(self):
        xs, ys = position_coordinates(3, 5)
        assert_allclose(xs[:5], [0.0, 0.25, 0.5, 0.75, 1.0])
        assert_allclose(ys[::5], [0.0, 0.5, 1.0])
        assert_allclose(position_coordinates(1, 1), ([0.5], [0.5]))

    def test_mask_mismatch(self):
        proj, latent, bank = self.setup_case()
        with self.assertRaises(DimensionError):
            inject_light(latent, bank, np.ones((3, 4), dtype=bool), proj)


class RowNormalizationTest(SimpleTestCase):

    def test_rows_sum_to_one_after_masking(self):
        from src.apps.adapter.attention import MaskedAttention

        rng = np.random.default_rng(13)
        for trial in range(500):
            mode = MaskMode.values[trial % 2]
            layer = MaskedAttention(3, 2, rng, heads=1, mask_mode=mode)
            n, m = rng.integers(1, 6, size=2)
            mask = rng.uniform(0.05, 1.0, size=(n, m))
            layer.forward(rng.normal(size=(n, 3)) * 3, rng.normal(size=(m, 2)) * 3, mask=mask)
            rows = layer.last_weights.values.sum(axis=1)
            self.assertLessEqual(np.max(np.abs(rows - 1.0)), 1e-6)

    def test_softmax_rows(self):
        assert_allclose(softmax_rows(np.array([[0.0, 0.0], [1000.0, 0.0]])), [[0.5, 0.5], [1.0, 0.0]])
