"""
Serializers for run configuration
"""

from rest_framework import serializers

from .choices import MaskMode


class RunConfigSerializer(serializers.Serializer):
    resolution = serializers.IntegerField(min_value=8)
    d = serializers.IntegerField(min_value=1)
    n_q = serializers.IntegerField(min_value=1)
    heads = serializers.IntegerField(min_value=1)
    sigma = serializers.FloatField()
    T = serializers.IntegerField(min_value=2)
    steps = serializers.IntegerField(min_value=1)
    guidance = serializers.FloatField()
    eta = serializers.FloatField(min_value=0.0)
    lr = serializers.FloatField(min_value=0.0)
    seed = serializers.IntegerField(min_value=0)
    mask_mode = serializers.ChoiceField(choices=MaskMode.choices)
    logit_bias_scale = serializers.FloatField(min_value=0.0)
    batch_size = serializers.IntegerField(min_value=1)
    train_steps = serializers.IntegerField(min_value=0)
    cond_dropout = serializers.FloatField(min_value=0.0, max_value=1.0)
    text_mode_ratio = serializers.FloatField(min_value=0.0, max_value=1.0)
    hard_composite = serializers.BooleanField()
    use_adapter = serializers.BooleanField()
    use_spectral_filter = serializers.BooleanField()
    masked_adapter = serializers.BooleanField()
    use_fixer = serializers.BooleanField()
    fixer_width = serializers.IntegerField(min_value=1)
    fixer_lr = serializers.FloatField(min_value=0.0)
    fixer_steps = serializers.IntegerField(min_value=0)
    perceptual_weight = serializers.FloatField(min_value=0.0)
    log_every = serializers.IntegerField(min_value=1)

    def validate_resolution(self, value):
        # latent side (resolution / 4) must halve once more inside the denoiser
        if value % 8:
            raise serializers.ValidationError("resolution must be divisible by 8")
        return value

    def validate_sigma(self, value):
        if value <= 0:
            raise serializers.ValidationError("sigma must be positive")
        return value

    def validate(self, attrs):
        if attrs["d"] % attrs["heads"]:
            raise serializers.ValidationError("d must be divisible by heads")
        if attrs["steps"] > attrs["T"]:
            raise serializers.ValidationError("steps cannot exceed T")
        return attrs
