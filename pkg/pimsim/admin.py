from django.contrib import admin

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ('benchmark', 'size', 'mechanism', 'makespan_ns',
                    'speedup_pct', 'energy_saving_pct', 'created_at')
    list_filter = ('benchmark', 'mechanism')
    readonly_fields = ('created_at',)
