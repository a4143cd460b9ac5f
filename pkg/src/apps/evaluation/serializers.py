"""
Serializers for evaluation reports
"""

from rest_framework import serializers


class SampleScoreSerializer(serializers.Serializer):
    id = serializers.CharField()
    direction = serializers.CharField(allow_blank=True)
    psnr = serializers.FloatField()
    ssim = serializers.FloatField()
    dcs = serializers.FloatField(allow_null=True)
    psnr_fg = serializers.FloatField()
    ssim_fg = serializers.FloatField()


class AggregateSerializer(serializers.Serializer):
    count = serializers.IntegerField()
    psnr = serializers.FloatField()
    ssim = serializers.FloatField()
    dcs = serializers.FloatField(allow_null=True)
    dcs_cardinal = serializers.FloatField(allow_null=True)
    psnr_fg = serializers.FloatField()
    ssim_fg = serializers.FloatField()


class EvalReportSerializer(serializers.Serializer):
    variant = serializers.CharField()
    split = serializers.CharField()
    seed = serializers.IntegerField()
    mode = serializers.CharField()
    steps = serializers.IntegerField()
    guidance = serializers.FloatField()
    config = serializers.DictField()
    metrics = serializers.DictField()
    aggregate = AggregateSerializer()
    samples = SampleScoreSerializer(many=True)
    wall_clock = serializers.FloatField(required=False, allow_null=True)

    def to_representation(self, instance):
        data = super().to_representation(instance)
        if data.get("wall_clock") is None:
            data.pop("wall_clock", None)
        return data
