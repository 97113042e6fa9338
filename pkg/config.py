"""
Configuration management for the application.
Loads environment variables for runtime settings; experiment parameters live in TOML files.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Application configuration class"""

    # Logging configuration
    # Set LOG_LEVEL environment variable to: DEBUG, INFO, WARNING, ERROR, or CRITICAL
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

    # Worker threads for snapshot reductions, cohort fits and reference simulations
    # (--threads takes precedence)
    THREADS = os.environ.get('RETINA_PMOR_THREADS', '1')

    # Default output directory when neither --out-dir nor output_dir in the config is given
    OUT_DIR = os.environ.get('RETINA_PMOR_OUT_DIR')

    @classmethod
    def threads(cls) -> int:
        return int(cls.THREADS)

    @classmethod
    def validate_runtime_config(cls) -> bool:
        """Validate the environment-provided settings"""
        problems = []
        if cls.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            problems.append(f"LOG_LEVEL={cls.LOG_LEVEL} is not a logging level")
        try:
            if int(cls.THREADS) < 1:
                problems.append(f"RETINA_PMOR_THREADS={cls.THREADS} must be at least 1")
        except ValueError:
            problems.append(f"RETINA_PMOR_THREADS={cls.THREADS} is not an integer")

        if problems:
            print("❌ Invalid runtime configuration:")
            for problem in problems:
                print(f"   - {problem}")
            return False

        return True
