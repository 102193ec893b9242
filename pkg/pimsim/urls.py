from __future__ import annotations

from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import SimulationRunViewSet, benchmark_report

app_name = 'pimsim'

router = DefaultRouter()
router.register('runs', SimulationRunViewSet, basename='runs')

urlpatterns = [
    path('api/', include(router.urls)),
    path(
        'api/reports/benchmarks/',
        benchmark_report,
        name='benchmark-report',
    ),
]
