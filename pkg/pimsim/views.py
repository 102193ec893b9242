from __future__ import annotations

import logging

from django.db.models import QuerySet
from django.http import HttpRequest
from django.utils import timezone
from rest_framework import mixins, viewsets
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from .models import SimulationRun
from .permissions import IsStaffOrReadOnly
from .reports import get_benchmark_speedups
from .serializers import SimulationRunSerializer

logger = logging.getLogger(__name__)


class SimulationRunViewSet(mixins.ListModelMixin,
                           mixins.RetrieveModelMixin,
                           mixins.DestroyModelMixin,
                           viewsets.GenericViewSet):
    """
    Archived simulation results. Anyone may read; only staff may delete.
    Runs are created by the command line, never through the API.
    """

    queryset = SimulationRun.objects.all()
    serializer_class = SimulationRunSerializer
    permission_classes = [IsStaffOrReadOnly]

    def get_queryset(self) -> QuerySet[SimulationRun]:
        """
        Narrow the archive by the optional `benchmark` and `mechanism`
        query parameters.
        """

        queryset = super().get_queryset()
        for name in ('benchmark', 'mechanism'):
            value = self.request.query_params.get(name)
            if value:
                queryset = queryset.filter(**{name: value})

        return queryset

    def perform_destroy(self, instance: SimulationRun) -> None:
        logger.info('run %s deleted by %s', instance.pk,
                    self.request.user.pk)
        instance.delete()


@api_view(['GET'])
@permission_classes([AllowAny])
def benchmark_report(request: HttpRequest) -> Response:
    """
    Return the latest archived result per benchmark, size and mechanism.

    Query parameters:
        - benchmark: optional benchmark name.
    """

    return Response(
        {
            'generated_at': timezone.now().isoformat(),
            'results': get_benchmark_speedups(
                request.query_params.get('benchmark')),
        }
    )
