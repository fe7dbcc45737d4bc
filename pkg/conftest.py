import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "grove_project.settings")
django.setup()
