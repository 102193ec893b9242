from __future__ import annotations

from django.contrib.auth import get_user_model
from django.core.exceptions import ValidationError
from django.test import TestCase
from django.urls import reverse
from pimsim.models import SimulationRun
from rest_framework import status
from rest_framework.test import APITestCase


def make_run(**overrides) -> SimulationRun:
    values = dict(benchmark='mm', size=4, mechanism='lisa',
                  makespan_ns=1000.0, transfer_energy_uj=2.0,
                  utilization=0.5)
    values.update(overrides)
    return SimulationRun.objects.create(**values)


class SimulationRunModelTests(TestCase):
    def test_negative_makespan_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            make_run(makespan_ns=-1.0)

    def test_utilization_must_be_a_fraction(self) -> None:
        with self.assertRaises(ValidationError):
            make_run(utilization=1.5)

    def test_str(self) -> None:
        self.assertEqual(str(make_run()), 'mm(4) under lisa')


class SimulationRunAPITests(APITestCase):
    def setUp(self) -> None:
        self.user = get_user_model().objects.create_user(
            username='reader', password='read-pass1'
        )
        self.staff = get_user_model().objects.create_user(
            username='curator', password='curate-pass2', is_staff=True
        )
        self.lisa = make_run()
        self.shared = make_run(mechanism='sharedpim', makespan_ns=600.0,
                               speedup_pct=40.0)
        make_run(benchmark='ntt', size=8)

    def test_runs_list_public(self) -> None:
        response = self.client.get(reverse('pimsim:runs-list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 3)

    def test_runs_filtered_by_benchmark_and_mechanism(self) -> None:
        url = reverse('pimsim:runs-list')
        response = self.client.get(url, {'benchmark': 'mm',
                                         'mechanism': 'sharedpim'})
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual([item['id'] for item in response.data['results']],
                         [self.shared.pk])

    def test_runs_cannot_be_created_through_api(self) -> None:
        self.client.force_authenticate(user=self.staff)
        response = self.client.post(reverse('pimsim:runs-list'),
                                    {'benchmark': 'mm'}, format='json')
        self.assertEqual(response.status_code,
                         status.HTTP_405_METHOD_NOT_ALLOWED)
        self.client.force_authenticate(user=None)

    def test_non_staff_cannot_delete(self) -> None:
        url = reverse('pimsim:runs-detail', args=[self.lisa.pk])
        self.client.force_authenticate(user=self.user)
        response = self.client.delete(url)
        self.assertEqual(response.status_code, status.HTTP_403_FORBIDDEN)
        self.assertTrue(SimulationRun.objects.filter(
            pk=self.lisa.pk).exists())
        self.client.force_authenticate(user=None)

    def test_staff_can_delete(self) -> None:
        url = reverse('pimsim:runs-detail', args=[self.lisa.pk])
        self.client.force_authenticate(user=self.staff)
        response = self.client.delete(url)
        self.assertEqual(response.status_code, status.HTTP_204_NO_CONTENT)
        self.assertFalse(SimulationRun.objects.filter(
            pk=self.lisa.pk).exists())
        self.client.force_authenticate(user=None)

    def test_benchmark_report_keeps_latest_run(self) -> None:
        newer = make_run(mechanism='sharedpim', makespan_ns=550.0,
                         speedup_pct=45.0)
        response = self.client.get(reverse('pimsim:benchmark-report'),
                                   {'benchmark': 'mm'})
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        results = response.data['results']
        self.assertEqual([item['mechanism'] for item in results],
                         ['lisa', 'sharedpim'])
        self.assertEqual(results[1]['makespan_ns'], newer.makespan_ns)
        self.assertEqual(results[1]['speedup_pct'], 45.0)
        self.assertIn('generated_at', response.data)
