import logging
from dataclasses import replace

from solutions.errors import ConfigError
from solutions.HRN.config import load_config

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


class Utils:

    @staticmethod
    def configure_logging(level="INFO"):
        logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, force=True)

    @staticmethod
    def get_config(user_input):
        if not user_input.config:
            raise ConfigError(f"'{user_input.action}' needs --config")
        config = load_config(user_input.config)
        if user_input.seed is not None:
            config = replace(config, seed=user_input.seed)
        return config

    @staticmethod
    def get_output_directory(user_input, config=None):
        if user_input.out:
            return user_input.out
        return config.output_directory if config is not None else "out"
