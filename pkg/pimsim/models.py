from __future__ import annotations

from django.core.exceptions import ValidationError
from django.db import models


class SimulationRun(models.Model):
    """One platform's result in an archived comparison."""

    benchmark: str = models.CharField(max_length=64, db_index=True)
    size: int = models.PositiveIntegerField()
    mechanism: str = models.CharField(max_length=32, db_index=True)
    makespan_ns: float = models.FloatField()
    transfer_energy_uj: float = models.FloatField()
    stall_ns: float = models.FloatField(default=0.0)
    nop_ns: float = models.FloatField(default=0.0)
    utilization: float = models.FloatField(default=0.0)
    move_count: int = models.PositiveIntegerField(default=0)
    compute_count: int = models.PositiveIntegerField(default=0)
    speedup_pct: float = models.FloatField(default=0.0)
    energy_saving_pct: float = models.FloatField(default=0.0)
    config_digest: str = models.CharField(max_length=64, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering: list[str] = ['-created_at', '-id']

    def __str__(self) -> str:
        return f'{self.benchmark}({self.size}) under {self.mechanism}'

    def clean(self) -> None:
        if self.makespan_ns < 0 or self.transfer_energy_uj < 0:
            raise ValidationError('Makespan and energy cannot be negative.')
        if not 0.0 <= self.utilization <= 1.0:
            raise ValidationError('Utilization must lie in [0, 1].')

    def save(self, *args, **kwargs) -> None:
        self.full_clean()
        super().save(*args, **kwargs)
