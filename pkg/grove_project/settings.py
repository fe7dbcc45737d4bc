"""
Django settings for the grove project.

The project hosts the ``grove`` app: a random forest engine with the
``ranger``, ``bench`` and ``validate`` management commands. There are no
views; Django supplies configuration, logging, the command line and the test
runner.
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SECRET_KEY', "django-insecure-grove-local-only")

DEBUG = os.environ.get('DEBUG', 'True') != 'False'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "grove",
]

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ==============================================================================
# ENGINE DEFAULTS
# ==============================================================================

GROVE = {
    'OUTPREFIX': os.environ.get('GROVE_OUTPREFIX', 'ranger_out'),
    'NUM_TREES': int(os.environ.get('GROVE_NUM_TREES', '500')),
    # node size above which runtime mode uses the presorted split search
    'SPLIT_CUTOFF': int(os.environ.get('GROVE_SPLIT_CUTOFF', '100')),
    'NUM_THREADS': int(os.environ.get('GROVE_NUM_THREADS', '1')),
    # 0 draws a fresh seed and reports it
    'SEED': int(os.environ.get('GROVE_SEED', '0')),
    'EFFECT_SIZE': float(os.environ.get('GROVE_EFFECT_SIZE', '0.5')),
    'MAF_RANGE': (0.05, 0.5),
}

# ==============================================================================
# LOGGING CONFIGURATION
# ==============================================================================

LOG_FILE = os.environ.get('GROVE_LOG_FILE')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': True,
        },
        'grove': {
            'handlers': ['console'],
            'level': os.environ.get('GROVE_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': 'DEBUG',
        'class': 'logging.FileHandler',
        'filename': LOG_FILE,
        'formatter': 'verbose',
    }
    LOGGING['loggers']['grove']['handlers'].append('file')
