import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_LEVEL = os.getenv('GHM_LOG_LEVEL', 'info').lower()
OUT_DIR = os.getenv('GHM_OUT_DIR', 'data')
PLOTS_ENABLED = os.getenv('GHM_PLOTS', '0') == '1'

_LEVELS = {'quiet': 0, 'info': 1, 'debug': 2}


def log(message: str, level: str = 'info'):
    """
    Print a progress message if the configured verbosity allows it.

    Args:
        message (str): Text to print.
        level (str): 'info' or 'debug'.
    """
    if _LEVELS.get(level, 1) <= _LEVELS.get(LOG_LEVEL, 1):
        print(message)
