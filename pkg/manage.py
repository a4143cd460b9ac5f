#!/usr/bin/env python
"""DreamLight Desk command line: gen-data, train, train-fixer, relight, eval, ablate, inspect."""
import os
import sys


def main():
    """Dispatch to the dreamlight management commands."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'src.config.settings.local')
    # Single-threaded BLAS keeps reductions in a fixed order
    os.environ.setdefault('OMP_NUM_THREADS', '1')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the requirements "
            "(pip install -r requirements/base.txt) and activate the virtual environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
