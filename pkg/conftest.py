import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'walk_project.settings')
django.setup()
