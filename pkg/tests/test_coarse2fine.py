"""Tests for coarse2fine module."""

import numpy as np
import pytest

from posekit.body import ARM_PARTS
from posekit.coarse2fine import (
    Parameterization,
    PartMapping,
    TransformMode,
    TransformSet,
    default_mapping,
    effective_affines,
    embed_baseline,
    parameter_count,
)
from posekit.errors import ModeMismatchError
from posekit.geometry import ConstrainedTransformParams, FrameScale, identity

MODES = [
    (TransformMode.BASELINE18, Parameterization.FULL_AFFINE),
    (TransformMode.BASELINE18, Parameterization.CONSTRAINED),
    (TransformMode.COARSE2FINE20, Parameterization.FULL_AFFINE),
    (TransformMode.COARSE2FINE20, Parameterization.CONSTRAINED),
]


class TestParameterCount:
    """Tests for parameter_count function."""

    @pytest.mark.parametrize(
        ("mode", "parameterization", "expected"),
        [
            (TransformMode.BASELINE18, Parameterization.CONSTRAINED, 56),
            (TransformMode.COARSE2FINE20, Parameterization.CONSTRAINED, 62),
            (TransformMode.BASELINE18, Parameterization.FULL_AFFINE, 108),
            (TransformMode.COARSE2FINE20, Parameterization.FULL_AFFINE, 120),
        ],
    )
    def test_counts(self, mode, parameterization, expected):
        """Should count free parameters per mode and parameterization."""
        assert parameter_count(mode, parameterization) == expected
        assert TransformSet.identity(mode, parameterization).to_vector().shape == (expected,)


class TestPartMapping:
    """Tests for PartMapping validation and the default mapping."""

    def test_default_mapping(self):
        """Should share arm coarse matrices and refine every arm part."""
        mapping = default_mapping()
        assert mapping.coarse[10] == ("left_upper_arm", "left_forearm", "left_hand")
        assert mapping.coarse[11] == ("right_upper_arm", "right_forearm", "right_hand")
        assert tuple(mapping.fine[i] for i in range(15, 21)) == ARM_PARTS
        assert mapping.fine_index("core") is None

    def test_rejects_missing_coarse_index(self):
        """Should require coarse matrices 1..14."""
        mapping = default_mapping()
        coarse = {k: v for k, v in mapping.coarse.items() if k != 14}
        with pytest.raises(ValueError):
            PartMapping(coarse=coarse, fine=mapping.fine)

    def test_rejects_fine_without_coarse(self):
        """Should reject a fine-mapped part that has no coarse matrix."""
        mapping = default_mapping()
        coarse = dict(mapping.coarse)
        coarse[10] = ("left_upper_arm", "left_forearm")
        with pytest.raises(ValueError, match="without a coarse"):
            PartMapping(coarse=coarse, fine=mapping.fine)


class TestTransformSet:
    """Tests for TransformSet construction and vector conversion."""

    @pytest.mark.parametrize(("mode", "parameterization"), MODES)
    def test_vector_round_trip(self, make_transform_set, rng, mode, parameterization):
        """Should rebuild the same set from its parameter vector."""
        ts = make_transform_set(rng, mode, parameterization, spread=0.2)
        again = TransformSet.from_vector(mode, parameterization, ts.to_vector())
        assert np.array_equal(again.to_vector(), ts.to_vector())

    def test_wrong_length(self):
        """Should raise ModeMismatchError for a vector of the wrong length."""
        with pytest.raises(ModeMismatchError):
            TransformSet.from_vector(
                TransformMode.BASELINE18, Parameterization.CONSTRAINED, np.zeros(62)
            )

    def test_wrong_matrix_count(self):
        """Should raise ModeMismatchError when the affine count disagrees with the mode."""
        with pytest.raises(ModeMismatchError):
            TransformSet(
                TransformMode.COARSE2FINE20,
                Parameterization.FULL_AFFINE,
                affines=tuple(identity() for _ in range(18)),
            )

    def test_constrained_needs_scale(self):
        """Should raise ModeMismatchError without a frame scale."""
        with pytest.raises(ModeMismatchError):
            TransformSet(
                TransformMode.BASELINE18,
                Parameterization.CONSTRAINED,
                limb_params=tuple(ConstrainedTransformParams() for _ in range(18)),
            )

    def test_fine_matrices_are_unscaled(self):
        """Should apply the frame scale to coarse matrices only."""
        ts = TransformSet(
            TransformMode.COARSE2FINE20,
            Parameterization.CONSTRAINED,
            limb_params=tuple(ConstrainedTransformParams(0.3, 0.1, 0.0) for _ in range(20)),
            scale=FrameScale(2.0, 1.5),
        )
        dets = [np.linalg.det(m.linear) for m in ts.matrices()]
        assert dets[:14] == pytest.approx([3.0] * 14)
        assert dets[14:] == pytest.approx([1.0] * 6)

    def test_fine_parameter_mask(self):
        """Should zero exactly the fine-matrix parameters."""
        c2f = TransformMode.COARSE2FINE20
        full = TransformSet.identity(c2f, Parameterization.FULL_AFFINE)
        constrained = TransformSet.identity(c2f, Parameterization.CONSTRAINED)
        baseline = TransformSet.identity(TransformMode.BASELINE18, Parameterization.CONSTRAINED)
        assert int((full.fine_parameter_mask() == 0).sum()) == 36
        assert int((constrained.fine_parameter_mask() == 0).sum()) == 18
        assert constrained.fine_parameter_mask()[-2:].tolist() == [1.0, 1.0]
        assert baseline.fine_parameter_mask().min() == 1.0

    def test_json_round_trip(self, make_transform_set, rng):
        """Should restore a set from its JSON form."""
        c2f, constrained = TransformMode.COARSE2FINE20, Parameterization.CONSTRAINED
        ts = make_transform_set(rng, c2f, constrained, spread=0.2)
        again = TransformSet.from_json(ts.to_json())
        assert np.array_equal(again.to_vector(), ts.to_vector())


class TestEffectiveAffines:
    """Tests for effective_affines function."""

    def test_baseline_uses_own_matrix(self, make_transform_set, t_new, rng):
        """Should give each part its own matrix in baseline mode."""
        baseline, full = TransformMode.BASELINE18, Parameterization.FULL_AFFINE
        ts = make_transform_set(rng, baseline, full, spread=0.2)
        eff = effective_affines(ts, default_mapping(), t_new)
        for i, part in enumerate(t_new.parts):
            assert eff[part.id] == ts.affines[i]

    def test_fine_after_coarse(self, make_transform_set, t_new, rng):
        """Should compose each arm part's fine matrix after its coarse matrix."""
        mapping = default_mapping()
        for k in range(1000):
            parameterization = (Parameterization.FULL_AFFINE, Parameterization.CONSTRAINED)[k % 2]
            ts = make_transform_set(rng, TransformMode.COARSE2FINE20, parameterization, spread=0.2)
            matrices = ts.matrices()
            eff = effective_affines(ts, mapping, t_new)
            for part in t_new.parts:
                coarse = matrices[mapping.coarse_index(part.name) - 1].m
                fine_index = mapping.fine_index(part.name)
                expected = coarse if fine_index is None else matrices[fine_index - 1].m @ coarse
                assert np.allclose(eff[part.id].m, expected, atol=1e-12)

    def test_mode_mismatch_with_template(self, t_new, rng):
        """Should reject a template without all 18 parts."""
        short = t_new.model_copy(update={"parts": t_new.parts[:-1]})
        ts = TransformSet.identity(TransformMode.BASELINE18, Parameterization.FULL_AFFINE)
        with pytest.raises(ModeMismatchError):
            effective_affines(ts, default_mapping(), short)


class TestEmbedBaseline:
    """Tests for embed_baseline function."""

    @pytest.mark.parametrize("parameterization", list(Parameterization))
    def test_preserves_effective_transforms(self, make_transform_set, t_new, rng, parameterization):
        """Should reproduce every baseline part transform through coarse and fine matrices."""
        mapping = default_mapping()
        for _ in range(10):
            base = make_transform_set(rng, TransformMode.BASELINE18, parameterization, spread=0.2)
            lifted = embed_baseline(base, mapping, t_new)
            assert lifted.mode is TransformMode.COARSE2FINE20
            before = effective_affines(base, mapping, t_new)
            after = effective_affines(lifted, mapping, t_new)
            for part_id, transform in before.items():
                assert after[part_id].allclose(transform, atol=1e-10)

    def test_rejects_coarse_input(self, t_new):
        """Should only lift baseline sets."""
        ts = TransformSet.identity(TransformMode.COARSE2FINE20, Parameterization.FULL_AFFINE)
        with pytest.raises(ModeMismatchError):
            embed_baseline(ts, default_mapping(), t_new)
