"""
Production settings (batch runs of the ratio harness).
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file before the config singletons are built
env_path = Path(__file__).resolve().parent.parent.parent / '.env'
load_dotenv(dotenv_path=env_path)

from .base import *  # noqa: E402

DEBUG = False

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', SECRET_KEY)

# Logging
# Fall back to console only when the system log directory is missing.
_LOG_DIR = Path(os.getenv('BUILDING_WALK_SYSTEM_LOG_DIR', '/var/log/building-walk'))
if _LOG_DIR.exists():
    LOGGING['handlers']['file']['filename'] = str(_LOG_DIR / 'building_walk.log')
