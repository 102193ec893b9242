from __future__ import annotations

from typing import Any

from rest_framework import serializers

from .exceptions import SimulationError
from .models import SimulationRun
from .services import BENCHMARKS, check_size
from .transfers import Mechanism


class SimulationRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = SimulationRun
        fields: str = '__all__'
        read_only_fields: tuple[str, ...] = ('id', 'created_at')


class RunSpecSerializer(serializers.Serializer):
    """Validates a benchmark request before it reaches the simulator."""

    benchmark = serializers.ChoiceField(choices=sorted(BENCHMARKS))
    size = serializers.IntegerField(min_value=0, required=False)
    mechanisms = serializers.ListField(
        child=serializers.CharField(), min_length=1, required=False)

    def validate_mechanisms(self, value: list[str]) -> list[Mechanism]:
        try:
            return [Mechanism.parse(raw) for raw in value]

        except SimulationError as exc:
            raise serializers.ValidationError(str(exc)) from exc

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        size = attrs.get('size')
        if size is not None:
            try:
                check_size(attrs['benchmark'], size)

            except SimulationError as exc:
                raise serializers.ValidationError(
                    {'size': str(exc)}) from exc

        return attrs
