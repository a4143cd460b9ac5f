"""
Serializers for dataset metadata lines
"""

from rest_framework import serializers


class SampleFilesSerializer(serializers.Serializer):
    fg = serializers.CharField()
    bg = serializers.CharField()
    target = serializers.CharField()
    mask = serializers.CharField()


class SampleMetadataSerializer(serializers.Serializer):
    id = serializers.CharField()
    light_dir = serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3)
    light_color = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=3, max_length=3
    )
    ambient = serializers.FloatField(min_value=0.0, max_value=0.4)
    prompt_tokens = serializers.ListField(child=serializers.CharField(), min_length=1)
    files = SampleFilesSerializer()
