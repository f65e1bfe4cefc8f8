"""Architecture representation: shapes, params, validity, sampling, codec."""

import json

import pytest
from hypothesis import given, settings, strategies as st

from opennas import arch as A
from opennas.search import substream


def arch(layers, input_shape=(28, 28, 1), num_classes=10):
    return A.Architecture(tuple(layers), input_shape, num_classes)


# ---------------------------------------------------------------- shapes

def test_shape_conv_preserves_spatial_dims():
    shapes, head = A.shape_infer(arch([A.conv(16, 5)], input_shape=(32, 32, 3)))
    assert shapes == [(32, 32, 16)]
    assert head == 32 * 32 * 16


def test_shape_pool_floor_halves():
    shapes, head = A.shape_infer(arch([A.conv(8, 3), A.maxpool()]))
    assert shapes == [(28, 28, 8), (14, 14, 8)]
    assert head == 14 * 14 * 8


def test_shape_empty_layer_list_flattens_input():
    shapes, head = A.shape_infer(arch([]))
    assert shapes == []
    assert head == 784


def test_shape_repeated_pooling_underflows():
    with pytest.raises(A.PoolUnderflow):
        A.shape_infer(arch([A.maxpool()] * 6))


def test_shape_underflow_reports_layer_index():
    # 28 -> 14 -> 7 -> 3 -> 1, then the next pool has nothing to halve.
    try:
        A.shape_infer(arch([A.maxpool()] * 6))
    except A.PoolUnderflow as e:
        assert e.layer_index == 4


def test_shape_conv_after_fc_is_ordering_violation():
    with pytest.raises(A.OrderingViolation):
        A.shape_infer(arch([A.conv(8, 3), A.fc(10), A.conv(8, 3)]))


def test_shape_dropout_batchnorm_preserve_shape():
    shapes, _ = A.shape_infer(arch([A.conv(8, 3), A.batchnorm(), A.dropout(0.5)]))
    assert shapes == [(28, 28, 8)] * 3


def test_shape_fc_collapses_to_units():
    shapes, head = A.shape_infer(arch([A.conv(8, 3), A.fc(100)]))
    assert shapes == [(28, 28, 8), (1, 1, 100)]
    assert head == 100


# ---------------------------------------------------------------- params

def test_param_count_conv_oracle():
    # (3*3*1 + 1) * 8 = 80 for the conv, plus the head over 28*28*8.
    total = A.param_count(arch([A.conv(8, 3)]))
    assert total == 80 + (28 * 28 * 8 + 1) * 10


def test_param_count_fc_oracle():
    # FC over flattened 14*14*8 = 1568 inputs: (1568 + 1) * 128 = 200832.
    total = A.param_count(arch([A.conv(8, 3), A.maxpool(), A.fc(128)]))
    assert total == 80 + 200_832 + (128 + 1) * 10


def test_param_count_pool_and_dropout_are_free():
    pool_only = A.param_count(arch([A.maxpool()]))
    assert pool_only == (14 * 14 * 1 + 1) * 10  # head only
    drop_only = A.param_count(arch([A.dropout(0.5)]))
    assert drop_only == (784 + 1) * 10


def test_param_count_batchnorm_two_per_channel():
    with_bn = A.param_count(arch([A.conv(8, 3), A.batchnorm()]))
    without = A.param_count(arch([A.conv(8, 3)]))
    assert with_bn - without == 16


def test_param_count_head_only():
    assert A.param_count(arch([])) == (784 + 1) * 10


# ---------------------------------------------------------------- validate

def test_validate_accepts_simple_stack():
    space = A.SpaceConfig.pso_default()
    report = A.validate(arch([A.conv(64, 3), A.maxpool(), A.fc(128)]), space)
    assert report.valid
    assert not report.violations


def test_validate_flags_conv_after_fc():
    space = A.SpaceConfig.pso_default()
    report = A.validate(arch([A.fc(100), A.conv(8, 3), A.fc(10)]), space)
    assert not report.valid
    ordering = [v for v in report.violations if v.rule_id == "ordering"]
    assert len(ordering) == 1
    assert ordering[0].layer_index == 1


def test_validate_bound_fixture_has_exactly_three_violations():
    space = A.SpaceConfig.pso_default()
    report = A.validate(
        arch([A.conv(300, 3), A.conv(8, 9), A.fc(400)]), space
    )
    assert not report.valid
    assert len(report.violations) == 3
    rules = sorted(v.rule_id for v in report.violations)
    assert rules == ["conv_channels", "conv_kernel", "fc_units"]


def test_validate_layer_bounds():
    space = A.SpaceConfig.pso_default()  # bounds (3, 20)
    report = A.validate(arch([A.conv(8, 3), A.fc(10)]), space)
    assert any(v.rule_id == "layer_bounds" for v in report.violations)


def test_validate_first_layer_must_be_conv():
    space = A.SpaceConfig.pso_default()
    report = A.validate(arch([A.maxpool(), A.conv(8, 3), A.fc(10)]), space)
    assert any(v.rule_id == "first_layer_conv" for v in report.violations)


def test_validate_pool_underflow_reported_as_violation():
    space = A.SpaceConfig.aco_default()
    layers = [A.conv(32, 3)] + [A.maxpool()] * 5
    report = A.validate(arch(layers), space)
    assert any(v.rule_id == "pool_underflow" for v in report.violations)


def test_validate_dropout_rate_must_come_from_set():
    space = A.SpaceConfig.pso_default()  # dropout set {0.5}
    report = A.validate(arch([A.conv(8, 3), A.fc(10), A.dropout(0.25)]), space)
    assert any(v.rule_id == "dropout_rate" for v in report.violations)


def test_validation_report_summary_mentions_rule():
    space = A.SpaceConfig.pso_default()
    report = A.validate(arch([A.conv(300, 3), A.conv(8, 3), A.fc(10)]), space)
    assert "conv_channels" in report.summary()


# ---------------------------------------------------------------- sampling

def test_sample_degenerate_bounds_fix_depth():
    space = A.SpaceConfig.pso_default().replace(layer_bounds=(5, 5))
    for seed in range(50):
        a = A.sample_random(space, substream(seed, 0, 0))
        assert len(a.layers) == 5


def test_sample_conv_fraction_matches_probability():
    space = A.SpaceConfig.pso_default()
    rng = substream(123, 0, 0)
    draws = [A.draw_layer_kind(space, rng) for _ in range(10_000)]
    frac = sum(1 for d in draws if d == "conv") / len(draws)
    assert abs(frac - 0.60) <= 0.02


def test_sample_thousand_all_valid():
    space = A.SpaceConfig.pso_default()
    for seed in range(1_000):
        a = A.sample_random(space, substream(seed, 0, 0))
        assert A.validate(a, space).valid, f"seed {seed}"


def test_sample_first_layer_always_conv():
    space = A.SpaceConfig.pso_default()
    for seed in range(200):
        a = A.sample_random(space, substream(seed, 0, 0))
        assert a.layers[0].kind == "conv"


def test_sample_respects_aco_attribute_sets():
    space = A.SpaceConfig.aco_default()
    for seed in range(200):
        a = A.sample_random(space, substream(seed, 0, 0))
        for layer in a.layers:
            if layer.kind == "conv":
                assert layer.out_channels in space.conv_channels_set
                assert layer.kernel in space.kernel_set
            elif layer.kind == "fc":
                assert layer.units in space.fc_units_set


# ---------------------------------------------------------------- codec

FIXTURE = arch(
    [A.conv(8, 3), A.maxpool(), A.avgpool(), A.fc(128), A.dropout(0.5), A.batchnorm()]
)

FIXTURE_TEXT = (
    '{"input_shape":[28,28,1],"num_classes":10,"layers":['
    '{"kind":"conv","out_channels":8,"kernel":3},'
    '{"kind":"maxpool"},'
    '{"kind":"avgpool"},'
    '{"kind":"fc","units":128},'
    '{"kind":"dropout","rate":0.5},'
    '{"kind":"batchnorm"}]}'
)


def test_serialize_canonical_bytes():
    assert A.serialize(FIXTURE) == FIXTURE_TEXT


def test_serialize_round_trip_is_stable():
    once = A.serialize(FIXTURE)
    assert A.serialize(A.deserialize(once)) == once


def test_deserialize_round_trip_identity():
    assert A.deserialize(A.serialize(FIXTURE)) == FIXTURE


def test_equal_architectures_serialize_identically():
    twin = arch(
        [A.conv(8, 3), A.maxpool(), A.avgpool(), A.fc(128), A.dropout(0.5), A.batchnorm()]
    )
    assert A.serialize(twin) == A.serialize(FIXTURE)


def test_deserialize_empty_object_is_schema_error():
    with pytest.raises(A.SchemaError):
        A.deserialize("{}")


def test_deserialize_unknown_kind_is_schema_error():
    doc = json.loads(FIXTURE_TEXT)
    doc["layers"][0]["kind"] = "recurrent"
    with pytest.raises(A.SchemaError):
        A.deserialize(json.dumps(doc))


def test_deserialize_unknown_field_is_schema_error():
    doc = json.loads(FIXTURE_TEXT)
    doc["layers"][0]["stride"] = 2
    with pytest.raises(A.SchemaError):
        A.deserialize(json.dumps(doc))


def test_deserialize_malformed_text_reports_position():
    with pytest.raises(A.ParseError) as exc:
        A.deserialize('{"input_shape":[28,28,1],')
    assert exc.value.position is not None


def test_deserialize_rejects_bool_for_int_field():
    doc = json.loads(FIXTURE_TEXT)
    doc["layers"][0]["out_channels"] = True
    with pytest.raises(A.SchemaError):
        A.deserialize(json.dumps(doc))


# ---------------------------------------------------------------- materialize

def test_materialize_expands_batchnorm_after_conv():
    space = A.SpaceConfig.pso_default()
    m = A.materialize(arch([A.conv(8, 3), A.maxpool(), A.fc(10)]), space)
    kinds = [l.kind for l in m.layers]
    assert kinds == ["conv", "batchnorm", "maxpool", "fc", "dropout"]


def test_materialize_skips_existing_modifiers():
    space = A.SpaceConfig.pso_default()
    src = arch([A.conv(8, 3), A.batchnorm(), A.fc(10), A.dropout(0.5)])
    m = A.materialize(src, space)
    kinds = [l.kind for l in m.layers]
    assert kinds == ["conv", "batchnorm", "fc", "dropout"]


def test_materialize_is_idempotent():
    space = A.SpaceConfig.pso_default()
    once = A.materialize(arch([A.conv(8, 3), A.maxpool(), A.fc(10)]), space)
    twice = A.materialize(once, space)
    assert once == twice


def test_materialize_respects_disabled_batchnorm():
    space = A.SpaceConfig.pso_default().replace(batch_norm_enabled=False)
    m = A.materialize(arch([A.conv(8, 3), A.fc(10)]), space)
    kinds = [l.kind for l in m.layers]
    assert "batchnorm" not in kinds


def test_materialized_layer_count_counts_head():
    space = A.SpaceConfig.pso_default()
    src = arch([A.conv(8, 3), A.maxpool(), A.fc(10)])
    # conv + bn + pool + fc + dropout, plus flatten + classifier head.
    assert A.materialized_layer_count(src, space) == 7


# ---------------------------------------------------------------- space config

def test_space_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        A.SpaceConfig.pso_default().replace(
            layer_type_probabilities={"conv": 0.5, "pool": 0.3, "fc": 0.1}
        ).check()


def test_space_round_trips_through_dict():
    for space in (A.SpaceConfig.pso_default(), A.SpaceConfig.aco_default()):
        assert A.SpaceConfig.from_dict(space.to_dict()) == space


def test_space_rejects_unknown_fields():
    d = A.SpaceConfig.pso_default().to_dict()
    d["stride"] = 2
    with pytest.raises(ValueError):
        A.SpaceConfig.from_dict(d)


def test_layer_constructors_reject_bad_values():
    with pytest.raises(ValueError):
        A.conv(0, 3)
    with pytest.raises(ValueError):
        A.conv(8, 4)  # even kernel
    with pytest.raises(ValueError):
        A.fc(0)
    with pytest.raises(ValueError):
        A.dropout(1.0)


# ---------------------------------------------------------------- properties

spaces = st.sampled_from([A.SpaceConfig.pso_default(), A.SpaceConfig.aco_default()])


@given(space=spaces, seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_property_sampled_architectures_validate(space, seed):
    a = A.sample_random(space, substream(seed, 0, 0))
    assert A.validate(a, space).valid


@given(space=spaces, seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_property_round_trip(space, seed):
    a = A.sample_random(space, substream(seed, 0, 0))
    assert A.deserialize(A.serialize(a)) == a


@given(space=spaces, seed=st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_property_shape_count_and_param_floor(space, seed):
    a = A.sample_random(space, substream(seed, 0, 0))
    shapes, _ = A.shape_infer(a)
    assert len(shapes) == len(a.layers)
    assert A.param_count(a) >= a.num_classes
