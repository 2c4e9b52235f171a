"""
Development settings.
"""

from .base import *

DEBUG = True

# Console shows the per-computation INFO lines during development
LOGGING['handlers']['console']['level'] = 'INFO'
