"""Wire Django's test environment into pytest (mirrors `manage.py test`)."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings.dev')
django.setup()


def pytest_sessionstart(session):
    from django.test.runner import DiscoverRunner
    from django.test.utils import setup_test_environment

    setup_test_environment()
    runner = DiscoverRunner(verbosity=0, interactive=False)
    session.config._django_runner = runner
    session.config._django_old_config = runner.setup_databases()


def pytest_sessionfinish(session, exitstatus):
    from django.test.utils import teardown_test_environment

    runner = getattr(session.config, '_django_runner', None)
    if runner is not None:
        runner.teardown_databases(session.config._django_old_config)
        teardown_test_environment()
