"""
Settings package; DJANGO_ENV=production selects prod, anything else dev.
"""

import os

PRODUCTION_ENV = 'production'

DJANGO_ENV = os.getenv('DJANGO_ENV', 'dev')

if DJANGO_ENV == PRODUCTION_ENV:
    from .prod import *
else:
    from .dev import *
