"""
Pytest configuration for DreamLight Desk
"""
import os

import numpy as np
import pytest
import django

# Set Django settings for tests
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'src.config.settings.test')

# Configure Celery for tests
os.environ['CELERY_TASK_ALWAYS_EAGER'] = 'True'
os.environ['CELERY_TASK_EAGER_PROPAGATES'] = 'True'
os.environ['CELERY_BROKER_URL'] = 'memory://'
os.environ['CELERY_RESULT_BACKEND'] = 'cache+memory://'

# Single-threaded BLAS keeps reductions in a fixed order
os.environ.setdefault('OMP_NUM_THREADS', '1')

# Setup Django
django.setup()


@pytest.fixture
def rng():
    """Seeded generator for numerical tests"""
    return np.random.default_rng(1234)


@pytest.fixture
def run_config():
    """Run configuration built from the test settings defaults"""
    from src.apps.core.conf import load_run_config
    return load_run_config()


@pytest.fixture
def dataset_dir(tmp_path, run_config):
    """A rendered 8-sample dataset at the test resolution"""
    from src.apps.synthdata.services import sample_dataset
    sample_dataset(tmp_path / 'data', 8, 3, resolution=run_config.resolution)
    return tmp_path / 'data'
