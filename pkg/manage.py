#!/usr/bin/env python
"""Django's command-line utility; `manage.py pimsim` runs the simulator."""
import os
import sys


def main() -> None:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE',
                          'config.settings.dev')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as ie:
        raise ImportError(
            'Django is not importable; install requirements.txt into the '
            'active environment before running the simulator.'
        ) from ie
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
